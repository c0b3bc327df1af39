import json

import numpy as np
import pytest

from multisym.charts import (
    EPSILON,
    MINKOWSKI,
    DWChart,
    LepageChart22,
    MetricSignature,
    build_omega_dDW,
    build_omega_lepage,
    build_theta_dDW,
    build_theta_lepage,
    nondegeneracy_check,
    omega_mu,
    omega_volume,
)
from multisym.exterior import DiffForm, Multivector, evaluate, exterior_derivative, interior_product, wedge

from conftest import assert_same_form


def const(form, *labels):
    c = form.coefficient(labels)
    assert c.is_constant
    return c.affine[0]


def test_dw_layout():
    c = DWChart.build(2, 2)
    assert c.dim == 2 + 2 + 1 + 4
    assert c.names == ("x0", "x1", "y1", "y2", "e", "p0_1", "p0_2", "p1_1", "p1_2")
    assert [c.index(n) for n in c.names] == list(range(c.dim))
    assert json.loads(c.to_json())["names"] == list(c.names)


def test_lepage_layout_and_epsilon():
    c = LepageChart22.build()
    assert c.dim == 10
    assert c.names[-1] == "r" and c.p(0, 1) == "p12"
    assert EPSILON[0, 1] == 1.0 and np.array_equal(EPSILON, -EPSILON.T)
    assert c.epsilon is EPSILON


def test_metric_inverse():
    np.testing.assert_array_equal(MINKOWSKI.upper @ MINKOWSKI.lower, np.eye(2))
    with pytest.raises(ValueError):
        MetricSignature((2.0, 1.0))


def test_omega_mu_n2():
    c = DWChart.build(2, 1)
    assert const(omega_mu(c, 0), "x1") == 1.0
    assert const(omega_mu(c, 1), "x0") == -1.0
    with pytest.raises(IndexError):
        omega_mu(c, 2)


def test_omega_mu_n1_is_unit_function():
    c = DWChart.build(1, 1)
    w = omega_mu(c, 0)
    assert w.degree == 0 and const(w) == 1.0
    assert set(omega_volume(c).terms) == {(c.index("x0"),)}


def test_repeated_contraction_vanishes():
    c = DWChart.build(2, 1)
    z = np.zeros(c.dim)
    for mu in range(2):
        d = np.eye(c.dim)[mu]
        assert interior_product(Multivector(z, d[None]), omega_mu(c, mu)).max_abs() == 0.0


def test_omega_dDW_n1k1():
    c = DWChart.build(1, 1)
    om = build_omega_dDW(c)
    assert const(om, "e", "x0") == 1.0
    assert const(om, "p0_1", "y1") == 1.0
    assert len(om.terms) == 2


def test_omega_dDW_n2k1_terms():
    c = DWChart.build(2, 1)
    om = build_omega_dDW(c)
    assert const(om, "e", "x0", "x1") == 1.0
    assert const(om, "p0_1", "y1", "x1") == 1.0
    assert const(om, "p1_1", "y1", "x0") == -1.0
    assert len(om.terms) == 3


def test_theta_terms():
    c1 = DWChart.build(1, 1)
    th = build_theta_dDW(c1)
    z = np.array([0.3, 0.2, 1.7, -0.4])
    assert th.coefficient(["x0"])(z) == pytest.approx(1.7)
    assert th.coefficient(["y1"])(z) == pytest.approx(-0.4)
    c = DWChart.build(2, 1)
    th = build_theta_dDW(c)
    assert len(th.terms) == 1 + 2
    z = np.arange(c.dim, dtype=float)
    assert th.coefficient(["y1", "x1"])(z) == z[c.index("p0_1")]


@pytest.mark.parametrize("n,k", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_d_theta_is_omega(n, k):
    c = DWChart.build(n, k)
    d = exterior_derivative(build_theta_dDW(c))
    om = build_omega_dDW(c)
    assert set(d.terms) == set(om.terms)
    for key in om.terms:
        assert d.terms[key].affine[0] == om.terms[key].affine[0]
    assert exterior_derivative(om).terms == {}


def test_lepage_closed_and_exact():
    c = LepageChart22.build()
    om = build_omega_lepage(c)
    assert exterior_derivative(om).terms == {}
    assert_same_form(exterior_derivative(build_theta_lepage(c)), om, np.random.default_rng(0).normal(size=(3, 10)))
    assert const(om, "r", "y1", "y2") == 1.0


def test_lepage_restricts_to_dw():
    lep = LepageChart22.build()
    dw = DWChart.build(2, 2)
    rng = np.random.default_rng(1)
    om_l, om_d = build_omega_lepage(lep), build_omega_dDW(dw)
    for _ in range(10):
        V = rng.normal(size=(3, 10))
        V[:, -1] = 0.0  # tangent to r = const
        z = rng.normal(size=10)
        assert evaluate(om_l, V, z) == pytest.approx(evaluate(om_d, V[:, :9], z[:9]), abs=1e-12)


def test_nondegeneracy():
    rng = np.random.default_rng(2)
    for n in (1, 2):
        for k in (1, 2):
            c = DWChart.build(n, k)
            om = build_omega_dDW(c)
            assert all(nondegeneracy_check(om, z) for z in rng.normal(size=(10, c.dim)))
    lep = LepageChart22.build()
    assert all(nondegeneracy_check(build_omega_lepage(lep), z) for z in rng.normal(size=(10, 10)))


def test_degenerate_energy_term():
    c = DWChart.build(2, 1)
    de_w = wedge(DiffForm.d(c, "e"), omega_volume(c))
    assert not nondegeneracy_check(de_w, np.zeros(c.dim))


def test_graph_tangent_contraction():
    """X tangent to a DW graph: X ^| Omega* has coefficients (-1)^n (du/dx^mu, -div pi)."""
    n, k = 2, 1
    c = DWChart.build(n, k)
    omega_star = build_omega_dDW(c) - wedge(DiffForm.d(c, "e"), omega_volume(c))
    rng = np.random.default_rng(3)
    du = rng.normal(size=n)
    dpi = rng.normal(size=(n, n))  # dpi[nu, mu] = d pi^nu / dx^mu
    X = np.zeros((n, c.dim))
    for mu in range(n):
        X[mu, c.index(c.x(mu))] = 1.0
        X[mu, c.index("y1")] = du[mu]
        X[mu, c.index("e")] = rng.normal()
        for nu in range(n):
            X[mu, c.index(c.p(nu, 0))] = dpi[nu, mu]
    form = interior_product(Multivector(rng.normal(size=c.dim), X), omega_star)
    sign = (-1) ** n
    for mu in range(n):
        assert form.get((c.index(c.p(mu, 0)),)) == pytest.approx(sign * du[mu])
    assert form.get((c.index("y1"),)) == pytest.approx(-sign * np.trace(dpi))
