"""Concrete multisymplectic charts and their canonical forms.

Two charts are provided: the de Donder-Weyl chart with energy coordinate ``e``
for maps R^n -> R^k, and the full n = k = 2 Lepage-Dedecker chart, which adds
the coordinate ``r`` conjugate to dy^1 ^ dy^2.  Coordinates are always
addressed by label through the chart.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exterior import Chart, DiffForm, Multivector, SmoothScalar, interior_product, sum_forms

__all__ = [
    "EPSILON",
    "DWChart",
    "LepageChart22",
    "MetricSignature",
    "MINKOWSKI",
    "omega_volume",
    "omega_mu",
    "build_theta_dDW",
    "build_omega_dDW",
    "build_theta_lepage",
    "build_omega_lepage",
    "contraction_matrix",
    "nondegeneracy_check",
]

# eps_{12} = -eps_{21} = 1; the same numbers serve as eps^{mu nu} and eps_{ij}.
EPSILON = np.array([[0.0, 1.0], [-1.0, 0.0]])
EPSILON.setflags(write=False)


@dataclass(frozen=True)
class DWChart(Chart):
    """(x^0..x^{n-1}, y^1..y^k, e, p^mu_i) with p row-major in (mu, i)."""

    n: int = 1
    k: int = 1

    @classmethod
    def build(cls, n: int, k: int) -> "DWChart":
        if n < 1 or k < 1:
            raise ValueError("need n >= 1 and k >= 1")
        names = [f"x{mu}" for mu in range(n)]
        names += [f"y{i + 1}" for i in range(k)]
        names.append("e")
        names += [f"p{mu}_{i + 1}" for mu in range(n) for i in range(k)]
        return cls(tuple(names), n, k)

    def x(self, mu: int) -> str:
        return f"x{mu}"

    def y(self, i: int) -> str:
        return f"y{i + 1}"

    def p(self, mu: int, i: int) -> str:
        return f"p{mu}_{i + 1}"

    def e(self) -> str:
        return "e"

    def to_json(self) -> str:
        return json.dumps({"kind": "de Donder-Weyl", "n": self.n, "k": self.k, "names": list(self.names)})


@dataclass(frozen=True)
class LepageChart22(Chart):
    """(x1, x2, y1, y2, e, p11, p12, p21, p22, r); p^mu_i is labelled ``p{mu}{i}``."""

    n: int = 2
    k: int = 2

    @classmethod
    def build(cls) -> "LepageChart22":
        names = ("x1", "x2", "y1", "y2", "e", "p11", "p12", "p21", "p22", "r")
        return cls(names, 2, 2)

    @property
    def epsilon(self) -> np.ndarray:
        return EPSILON

    def x(self, mu: int) -> str:
        return f"x{mu + 1}"

    def y(self, i: int) -> str:
        return f"y{i + 1}"

    def p(self, mu: int, i: int) -> str:
        return f"p{mu + 1}{i + 1}"

    def e(self) -> str:
        return "e"

    def to_json(self) -> str:
        return json.dumps({"kind": "Lepage-Dedecker", "n": 2, "k": 2, "names": list(self.names)})


@dataclass(frozen=True)
class MetricSignature:
    """Constant diagonal metric: ``eta`` holds eta^{mu mu}, ``eta_lower`` eta_{mu mu}."""

    eta: tuple[float, ...]

    def __post_init__(self):
        if any(abs(abs(v) - 1.0) > 0 for v in self.eta):
            raise ValueError("diagonal entries must be +-1")

    @property
    def upper(self) -> np.ndarray:
        return np.diag(np.asarray(self.eta, dtype=float))

    @property
    def lower(self) -> np.ndarray:
        return np.linalg.inv(self.upper)

    @property
    def eta_lower(self) -> tuple[float, ...]:
        return tuple(float(v) for v in np.diag(self.lower))

    @property
    def n(self) -> int:
        return len(self.eta)


# Delta = -eta^{mu nu} d_mu d_nu = d_t^2 - d_x^2 with this choice
MINKOWSKI = MetricSignature((-1.0, 1.0))


def omega_volume(chart) -> DiffForm:
    return DiffForm.d(chart, *[chart.x(mu) for mu in range(chart.n)])


def omega_mu(chart, mu: int) -> DiffForm:
    """d/dx^mu ^| omega, an (n-1)-form: (-1)^mu times the complementary dx's."""
    if not 0 <= mu < chart.n:
        raise IndexError(f"mu={mu} out of range for n={chart.n}")
    rest = [chart.x(nu) for nu in range(chart.n) if nu != mu]
    sign = -1.0 if mu % 2 else 1.0
    if not rest:
        return DiffForm.function(chart, sign)
    return DiffForm.d(chart, *rest).scale(sign)


def _coord(chart, label) -> SmoothScalar:
    return SmoothScalar.coordinate(chart.index(label), chart.dim)


def build_theta_dDW(chart: DWChart) -> DiffForm:
    """e omega + p^mu_i dy^i ^ omega_mu."""
    parts = [omega_volume(chart).scale(_coord(chart, "e"))]
    for mu in range(chart.n):
        om = omega_mu(chart, mu)
        for i in range(chart.k):
            parts.append((DiffForm.d(chart, chart.y(i)) ^ om).scale(_coord(chart, chart.p(mu, i))))
    return sum_forms(parts)


def build_omega_dDW(chart: DWChart) -> DiffForm:
    """de ^ omega + sum dp^mu_i ^ dy^i ^ omega_mu."""
    parts = [DiffForm.d(chart, "e") ^ omega_volume(chart)]
    for mu in range(chart.n):
        om = omega_mu(chart, mu)
        for i in range(chart.k):
            parts.append(DiffForm.d(chart, chart.p(mu, i), chart.y(i)) ^ om)
    return sum_forms(parts)


def build_theta_lepage(chart: LepageChart22) -> DiffForm:
    """Tautological 2-form e dx1^dx2 + eps_{mu nu} p^mu_i dy^i ^ dx^nu + r dy1^dy2."""
    parts = [DiffForm.d(chart, "x1", "x2").scale(_coord(chart, "e"))]
    for mu in range(2):
        for nu in range(2):
            if EPSILON[mu, nu] == 0.0:
                continue
            for i in range(2):
                f = _coord(chart, chart.p(mu, i)) * float(EPSILON[mu, nu])
                parts.append(DiffForm.d(chart, chart.y(i), chart.x(nu)).scale(f))
    parts.append(DiffForm.d(chart, "y1", "y2").scale(_coord(chart, "r")))
    return sum_forms(parts)


def build_omega_lepage(chart: LepageChart22) -> DiffForm:
    """d of the tautological form: includes dr ^ dy1 ^ dy2."""
    parts = [DiffForm.d(chart, "e", "x1", "x2")]
    for mu in range(2):
        for nu in range(2):
            if EPSILON[mu, nu] == 0.0:
                continue
            for i in range(2):
                parts.append(DiffForm.d(chart, chart.p(mu, i), chart.y(i), chart.x(nu)).scale(float(EPSILON[mu, nu])))
    parts.append(DiffForm.d(chart, "r", "y1", "y2"))
    return sum_forms(parts)


def contraction_matrix(omega: DiffForm, point) -> np.ndarray:
    """Matrix of xi -> xi ^| omega at ``point``: shape (C(dim, deg-1), dim)."""
    dim = omega.chart.dim
    point = np.asarray(point, dtype=float)
    eye = np.eye(dim)[:, None, :]
    X = Multivector(np.broadcast_to(point, (dim, dim)), eye)
    return interior_product(X, omega).dense().T


def nondegeneracy_check(omega: DiffForm, point, rtol: float = 1e-10) -> bool:
    s = np.linalg.svd(contraction_matrix(omega, point), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return False
    return int(np.sum(s > rtol * s[0])) == omega.chart.dim
