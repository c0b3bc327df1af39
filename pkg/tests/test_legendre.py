import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from multisym import legendre
from multisym.charts import EPSILON, MINKOWSKI, DWChart

X0 = Y0 = np.zeros(2)
finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
mats = arrays(float, (2, 2), elements=finite)


def fd(f, v, h=1e-6):
    g = np.zeros_like(v)
    for idx in np.ndindex(v.shape):
        e = np.zeros_like(v)
        e[idx] = h
        g[idx] = (f(v + e) - f(v - e)) / (2 * h)
    return g


@pytest.mark.parametrize("L", [legendre.harmonic_map_lagrangian(), legendre.maxwell2d_lagrangian(),
                               legendre.phi3_lagrangian(1.3, 0.4)])
def test_dL_dv_matches_fd(L):
    v = np.random.default_rng(0).normal(size=(L.k, L.n))
    y = np.array([0.7] * L.k)
    np.testing.assert_allclose(L.dL_dv(X0, y, v), fd(lambda w: L.eval(X0, y, w), v), atol=1e-8)


def test_phi3_dw_legendre_matches_hamiltonian():
    m, lam = 1.3, 0.4
    L = legendre.phi3_lagrangian(m, lam)
    H = legendre.phi3_hamiltonian(m, lam)
    c = H.chart
    rng = np.random.default_rng(1)
    for _ in range(10):
        v, phi, e = rng.normal(size=(1, 2)), rng.normal(), rng.normal()
        p, Hval = legendre.dw_legendre(L, X0, [phi], v)
        np.testing.assert_allclose(p[:, 0], MINKOWSKI.upper @ v[0])
        z = np.zeros(c.dim)
        z[c.index("y1")], z[c.index("e")] = phi, e
        z[[c.index(c.p(mu, 0)) for mu in range(2)]] = p[:, 0]
        assert H.eval(z) == pytest.approx(e + Hval, abs=1e-12)
        # inverse: v_mu = eta_{mu nu} p^nu
        np.testing.assert_allclose(legendre.dw_inverse_legendre(H, X0, [phi], p), v, atol=1e-14)


def test_phi3_hamiltonian_gradient_and_energy():
    H = legendre.phi3_hamiltonian(1.0, 0.3)
    z = np.random.default_rng(2).normal(size=H.chart.dim)
    g = H.grad(z)
    assert g[H.chart.index("e")] == 1.0
    np.testing.assert_allclose(g, fd(H.eval, z), atol=1e-8)
    np.testing.assert_allclose(H.scalar.hess(z)[H.chart.index("y1")], fd(lambda w: H.grad(w)[H.chart.index("y1")], z),
                               atol=1e-7)


def test_harmonic_dw_examples():
    L = legendre.harmonic_map_lagrangian()
    p, H = legendre.dw_legendre(L, X0, Y0, np.zeros((2, 2)))
    assert not p.any() and H == 0.0
    v = np.zeros((2, 2))
    v[0, 0] = 1.0
    p, H = legendre.dw_legendre(L, X0, Y0, v)
    assert p[0, 0] == 1.0 and np.count_nonzero(p) == 1 and H == 0.5


def _harmonic_H():
    """e + |p|^2 / 2 on the n = k = 2 DW chart."""
    c = DWChart.build(2, 2)
    ip = [c.index(c.p(mu, i)) for mu in range(2) for i in range(2)]
    ie = c.index("e")

    def value(z):
        return z[..., ie] + 0.5 * np.sum(z[..., ip] ** 2, axis=-1)

    def grad(z):
        g = np.zeros(np.shape(z))
        g[..., ie] = 1.0
        g[..., ip] = z[..., ip]
        return g

    from multisym.exterior import SmoothScalar

    return legendre.HamiltonianDensity(c, SmoothScalar(c.dim, value, grad))


@given(mats)
def test_dw_round_trip_harmonic(v):
    L = legendre.harmonic_map_lagrangian()
    p, _ = legendre.dw_legendre(L, X0, Y0, v)
    v2 = legendre.dw_inverse_legendre(_harmonic_H(), X0, Y0, p)
    np.testing.assert_allclose(v2, v, atol=1e-12)
    p2, _ = legendre.dw_legendre(L, X0, Y0, v2)
    np.testing.assert_allclose(p2, p, atol=1e-12)


def test_pairing_examples():
    z = np.zeros((2, 2))
    assert legendre.lepage_pairing(z, (1.5, np.ones((2, 2)), 3.0)) == 1.5
    assert legendre.lepage_pairing(np.eye(2), (0.0, z, 1.0)) == 1.0
    assert legendre.lepage_pairing(np.eye(2), (1.0, np.eye(2), 0.0)) == 3.0


def test_correspondence_examples():
    rng = np.random.default_rng(3)
    v, r = rng.normal(size=(2, 2)), 0.7
    cof = np.einsum("mn,ij,jn->mi", EPSILON, EPSILON, v)  # [mu, i]
    triv = legendre.trivial_lagrangian()
    np.testing.assert_allclose(legendre.lepage_correspondence(triv, X0, Y0, v, r), -r * cof)
    harm = legendre.harmonic_map_lagrangian()
    np.testing.assert_allclose(legendre.lepage_correspondence(harm, X0, Y0, v, 0.0), v.T)
    p = legendre.lepage_correspondence(harm, X0, Y0, np.eye(2), 1.0)
    np.testing.assert_allclose(p, np.eye(2) - np.einsum("mn,ij,jn->mi", EPSILON, EPSILON, np.eye(2)))
    # trivial problem at r = 0: the Legendre map degenerates completely
    assert not legendre.lepage_correspondence(triv, X0, Y0, v, 0.0).any()


def test_correspondence_residual_vanishes():
    L = legendre.maxwell2d_lagrangian()
    v = np.random.default_rng(4).normal(size=(2, 2))
    p = legendre.lepage_correspondence(L, X0, Y0, v, 0.9)
    assert np.max(np.abs(legendre.correspondence_residual(L, X0, Y0, v, (0.0, p, 0.9)))) < 1e-15


CASES = {
    "trivial": (legendre.trivial_lagrangian(), legendre.closed_form_trivial, (0.0,)),
    "harmonic": (legendre.harmonic_map_lagrangian(), legendre.closed_form_harmonic, (-1.0, 1.0)),
    "maxwell": (legendre.maxwell2d_lagrangian(), legendre.closed_form_maxwell, (0.0, -2.0)),
}


@pytest.mark.parametrize("name", list(CASES))
def test_closed_forms(name):
    L, closed, bad = CASES[name]
    rng = np.random.default_rng(5)
    n = 0
    while n < 100:
        e, p, r = rng.normal(), rng.normal(size=(2, 2)), rng.uniform(-2.5, 2.5)
        if min(abs(r - b) for b in bad) < 0.1:
            continue
        n += 1
        assert legendre.lepage_hamiltonian(L, X0, Y0, (e, p, r)) == pytest.approx(closed(e, p, r), abs=1e-8)


r_values = st.floats(-2.4, 2.4).filter(lambda r: min(abs(r), abs(abs(r) - 1), abs(r + 2)) > 0.15)


@given(st.sampled_from(list(CASES)), mats, r_values, finite)
def test_lepage_consistency(name, v, r, e):
    L = CASES[name][0]
    p = legendre.lepage_correspondence(L, X0, Y0, v, r)
    H = legendre.lepage_hamiltonian(L, X0, Y0, (e, p, r))
    want = e + np.sum(p.T * v) + r * (v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]) - L.eval(X0, Y0, v)
    assert H == pytest.approx(want, abs=1e-10)


def test_newton_tolerance_met():
    L = legendre.harmonic_map_lagrangian()
    p = np.random.default_rng(6).normal(size=(2, 2))
    _, v = legendre.lepage_hamiltonian(L, X0, Y0, (0.0, p, 1.7), return_v=True)
    assert np.max(np.abs(legendre.correspondence_residual(L, X0, Y0, v, (0.0, p, 1.7)))) <= 1e-12


def test_singular_jacobian():
    with pytest.raises(legendre.SingularJacobian):
        legendre.lepage_hamiltonian(legendre.trivial_lagrangian(), X0, Y0, (0.0, np.ones((2, 2)), 0.0))
    with pytest.raises(legendre.SingularJacobian):
        legendre.lepage_hamiltonian(legendre.harmonic_map_lagrangian(), X0, Y0, (0.0, np.eye(2), 1.0))


def test_newton_divergence_with_tiny_budget():
    L = legendre.harmonic_map_lagrangian()
    with pytest.raises(legendre.NewtonDivergence):
        legendre.lepage_hamiltonian(L, X0, Y0, (0.0, np.ones((2, 2)), 0.5), v0=np.full((2, 2), 50.0), max_iter=0)


def test_pseudofiber_at_zero():
    pf = legendre.pseudofiber_at(legendre.harmonic_map_lagrangian(), X0, Y0, np.zeros((2, 2)))
    (e1, p1, r1), (e2, p2, r2) = pf.directions
    assert (e1, r1) == (1.0, 0.0) and not p1.any()
    assert (e2, r2) == (0.0, 1.0) and not p2.any()
    assert pf.dimension == 2


def test_pseudofiber_translation_keeps_correspondence():
    L = legendre.maxwell2d_lagrangian()
    v = np.random.default_rng(7).normal(size=(2, 2))
    pf = legendre.pseudofiber_at(L, X0, Y0, v)
    for s, t in [(0.0, 2.5), (-1.3, 0.4), (3.0, -2.5)]:
        P = pf.point(s, t)
        assert np.max(np.abs(legendre.correspondence_residual(L, X0, Y0, v, P))) < 1e-12
