import itertools

import numpy as np
import pytest
from hypothesis import given

from multisym.exterior import (
    Chart,
    ChartMismatch,
    DegreeError,
    DiffForm,
    Multivector,
    SmoothScalar,
    alternating_tensor,
    contract,
    evaluate,
    exterior_derivative,
    interior_product,
    wedge,
)

from conftest import CHART4, assert_same_form, forms, polynomials, random_points

XY = Chart(("x1", "x2", "y1"))


def test_chart_labels():
    c = Chart(("x", "y"))
    assert c.dim == 2 and c.index("y") == 1
    with pytest.raises(ValueError):
        Chart(("x", "x"))
    assert '"x"' in c.to_json()


def test_basis_wedge():
    c = Chart(("x1", "x2"))
    w = wedge(DiffForm.d(c, "x1"), DiffForm.d(c, "x2"))
    assert set(w.terms) == {(0, 1)}
    assert w.terms[(0, 1)].affine[0] == 1.0


def test_wedge_sign_on_sorted_tuple():
    c = Chart(("x1", "x2", "y1"))
    a = DiffForm.d(c, "y1").scale(2.0)
    b = DiffForm.d(c, "x2").scale(3.0)
    w = wedge(a, b)
    assert w.terms[(1, 2)].affine[0] == -6.0


def test_wedge_errors():
    c = Chart(("x1", "x2"))
    with pytest.raises(DegreeError):
        wedge(DiffForm.d(c, "x1", "x2"), DiffForm.d(c, "x1"))
    with pytest.raises(ChartMismatch):
        wedge(DiffForm.d(c, "x1"), DiffForm.d(Chart(("u", "v")), "u"))


@given(forms(1))
def test_odd_form_squares_to_zero(a):
    sq = wedge(a, a)
    assert sq.at(random_points(4)).max_abs() < 1e-10


@given(polynomials())
def test_d_squared_vanishes_on_functions(f):
    dd = exterior_derivative(exterior_derivative(DiffForm.function(CHART4, f)))
    assert dd.at(random_points(4)).max_abs() < 1e-10


@given(forms(1))
def test_d_squared_vanishes_on_one_forms(a):
    assert exterior_derivative(exterior_derivative(a)).at(random_points(4)).max_abs() < 1e-10


def test_d_of_triple_product():
    x = [SmoothScalar.coordinate(i, 3) for i in range(3)]
    f = DiffForm.function(XY, x[0] * x[1] * x[2])
    assert exterior_derivative(exterior_derivative(f)).at(random_points(3)).max_abs() == 0.0


@given(forms(1), forms(1))
def test_leibniz(a, b):
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) - wedge(a, exterior_derivative(b))
    assert_same_form(lhs, rhs, random_points(4, seed=1), atol=1e-9)


@given(forms(0), forms(2))
def test_leibniz_zero_form(f, b):
    lhs = exterior_derivative(wedge(f, b))
    rhs = wedge(exterior_derivative(f), b) + wedge(f, exterior_derivative(b))
    assert_same_form(lhs, rhs, random_points(4, seed=2), atol=1e-9)


def test_d_of_e_volume():
    c = Chart(("x1", "x2", "e"))
    form = DiffForm.d(c, "x1", "x2").scale(SmoothScalar.coordinate(2, 3))
    d = exterior_derivative(form)
    # de ^ dx1 ^ dx2 sorts to dx1 ^ dx2 ^ de with an even permutation
    assert d.terms[(0, 1, 2)].affine[0] == 1.0


def test_evaluate_examples():
    c = Chart(("x1", "x2"))
    om = DiffForm.d(c, "x1", "x2")
    z = np.zeros(2)
    assert evaluate(om, np.eye(2), z) == 1.0
    assert evaluate(om, np.eye(2)[::-1], z) == -1.0
    assert evaluate(om, np.array([[1.0, 2.0], [0.0, 3.0]]), z) == 3.0
    with pytest.raises(DegreeError):
        evaluate(om, np.eye(2)[:1], z)


def _brute(tensor, vectors):
    q = len(vectors)
    total = 0.0
    for idx in itertools.product(range(tensor.shape[0]), repeat=q):
        total += tensor[idx] * np.prod([vectors[s][i] for s, i in enumerate(idx)])
    return total


def test_interior_product_matches_permutation_sum():
    rng = np.random.default_rng(3)
    form = DiffForm.d(XY, "y1", "x1", "x2").scale(SmoothScalar.coordinate(0, 3) + 2.0)
    z = rng.normal(size=3)
    X = rng.normal(size=(2, 3))
    got = interior_product(Multivector(z, X), form).dense()
    T = alternating_tensor(form, z)
    # V -> form(X1, X2, V) for each basis covector slot
    want = np.array([_brute(T, [X[0], X[1], np.eye(3)[a]]) for a in range(3)])
    np.testing.assert_allclose(got, want, atol=1e-12)


@given(forms(3))
def test_interior_product_alternating(form):
    z = random_points(4, 1)[0]
    v = np.random.default_rng(4).normal(size=4)
    rep = interior_product(Multivector(z, np.stack([v, v])), form)
    assert rep.max_abs() < 1e-12
    zero = interior_product(Multivector(z, np.stack([v, np.zeros(4)])), form)
    assert zero.max_abs() == 0.0


def test_interior_product_degree_underflow():
    with pytest.raises(DegreeError):
        interior_product(Multivector(np.zeros(3), np.eye(3)[:2]), DiffForm.d(XY, "x1"))


def test_evaluate_agrees_with_interior_product():
    rng = np.random.default_rng(5)
    form = DiffForm.d(CHART4, "a", "c").scale(SmoothScalar.coordinate(3, 4))
    z, X = rng.normal(size=4), rng.normal(size=(2, 4))
    assert evaluate(form, X, z) == pytest.approx(float(interior_product(Multivector(z, X), form).get(())))


@given(forms(2))
def test_contract_matches_interior_product(form):
    xi = tuple(SmoothScalar.coordinate(i, 4) + 1.0 for i in range(4))
    pts = random_points(4, 3, seed=6)
    field = np.stack([c(pts) for c in xi], axis=-1)
    want = interior_product(Multivector(pts, field[:, None, :]), form).dense()
    np.testing.assert_allclose(contract(xi, form).at(pts).dense(), want, atol=1e-10)


def _fd_gradient(f, z, h):
    g = np.zeros_like(z)
    for a in range(z.size):
        e = np.zeros_like(z)
        e[a] = h
        g[a] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def test_gradient_fd_richardson_order():
    """Central differences converge to the exact gradient at order 2."""
    dim = 3
    x = [SmoothScalar.coordinate(i, dim) for i in range(dim)]
    f = x[0] * x[0] * x[0] * x[1] + x[1] * x[2] * x[2] * x[2] + x[0] * x[0] * x[2] * x[2]
    rng = np.random.default_rng(7)
    orders = []
    for z in rng.normal(size=(20, dim)):
        exact = f.grad(z)
        e1 = np.max(np.abs(_fd_gradient(f, z, 1e-2) - exact))
        e2 = np.max(np.abs(_fd_gradient(f, z, 5e-3) - exact))
        orders.append(np.log2(e1 / e2))
    assert abs(np.median(orders) - 2.0) <= 0.2
    assert min(orders) > 1.8


def test_partial_of_product_is_lazy_and_exact():
    x = [SmoothScalar.coordinate(i, 2) for i in range(2)]
    f = x[0] * x[0] * x[1]
    z = np.array([1.5, -2.0])
    assert f.partial(0)(z) == pytest.approx(2 * 1.5 * -2.0)
    assert f.partial(0).partial(1)(z) == pytest.approx(3.0)


def test_form_validation():
    with pytest.raises(DegreeError):
        DiffForm(XY, 4)
    with pytest.raises(ValueError):
        DiffForm(XY, 2, {(1, 0): 1.0})
