import numpy as np
from hypothesis import settings
from hypothesis import strategies as st

from multisym.exterior import Chart, DiffForm, SmoothScalar, basis_tuples

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

CHART4 = Chart(("a", "b", "c", "d"))

coef = st.floats(-3, 3, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 3))


@st.composite
def polynomials(draw, dim=4, max_terms=3, max_deg=3):
    """Random polynomial SmoothScalar built from coordinate products."""
    total = SmoothScalar.constant(draw(coef), dim)
    for _ in range(draw(st.integers(1, max_terms))):
        mono = SmoothScalar.constant(draw(coef), dim)
        for i in draw(st.lists(st.integers(0, dim - 1), max_size=max_deg)):
            mono = mono * SmoothScalar.coordinate(i, dim)
        total = total + mono
    return total


@st.composite
def forms(draw, degree, chart=CHART4):
    keys = basis_tuples(chart.dim, degree)
    chosen = draw(st.lists(st.sampled_from(keys), min_size=1, max_size=3, unique=True))
    return DiffForm(chart, degree, {k: draw(polynomials(chart.dim)) for k in chosen})


def random_points(dim, n=5, seed=0):
    return np.random.default_rng(seed).normal(size=(n, dim))


def assert_same_form(a, b, points, atol=1e-10):
    assert a.degree == b.degree
    np.testing.assert_allclose(a.at(points).dense(), b.at(points).dense(), atol=atol)
