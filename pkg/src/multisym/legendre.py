"""Legendre transform (de Donder-Weyl) and Legendre correspondence (n = k = 2).

Index conventions used throughout: a multivelocity ``v`` has shape ``(k, n)``
with ``v[i, mu] = v^i_mu = du^i/dx^mu``; momenta ``p`` have shape ``(n, k)``
with ``p[mu, i] = p^mu_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .charts import EPSILON, MINKOWSKI, DWChart, LepageChart22, MetricSignature
from .exterior import SmoothScalar

__all__ = [
    "LagrangianDensity",
    "HamiltonianDensity",
    "Pseudofiber",
    "NewtonDivergence",
    "SingularJacobian",
    "phi3_lagrangian",
    "harmonic_map_lagrangian",
    "maxwell2d_lagrangian",
    "trivial_lagrangian",
    "phi3_hamiltonian",
    "classical_hamiltonian",
    "lepage_trivial_hamiltonian",
    "dw_legendre",
    "dw_inverse_legendre",
    "lepage_pairing",
    "lepage_correspondence",
    "lepage_hamiltonian",
    "pseudofiber_at",
    "correspondence_residual",
    "closed_form_trivial",
    "closed_form_harmonic",
    "closed_form_maxwell",
]


class NewtonDivergence(RuntimeError):
    pass


class SingularJacobian(RuntimeError):
    pass


@dataclass(frozen=True)
class LagrangianDensity:
    """L(x, y, v) with analytic first and second v-derivatives.

    ``dL_dv`` returns an array shaped like ``v``; ``d2L_dv2`` returns
    ``(k, n, k, n)``.
    """

    n: int
    k: int
    eval: Callable
    dL_dv: Callable
    dL_dy: Callable
    d2L_dv2: Callable
    name: str = ""


@dataclass(frozen=True)
class HamiltonianDensity:
    chart: object
    scalar: SmoothScalar
    name: str = ""

    def eval(self, z):
        return self.scalar(z)

    def grad(self, z):
        return self.scalar.grad(z)


# ---------------------------------------------------------------------------
# Lagrangians


def phi3_lagrangian(m: float, lam: float, metric: MetricSignature = MINKOWSKI) -> LagrangianDensity:
    """1/2 eta^{mu nu} v_mu v_nu + m^2/2 y^2 + lam/3 y^3 for a scalar field."""
    eta = metric.upper
    n = metric.n

    def L(x, y, v):
        v = np.asarray(v, dtype=float)[0]
        y = float(np.asarray(y).ravel()[0])
        return 0.5 * v @ eta @ v + 0.5 * m**2 * y**2 + lam / 3 * y**3

    def dv(x, y, v):
        return (eta @ np.asarray(v, dtype=float)[0])[None, :]

    def dy(x, y, v):
        y = float(np.asarray(y).ravel()[0])
        return np.array([m**2 * y + lam * y**2])

    def d2v(x, y, v):
        return eta.reshape(1, n, 1, n).copy()

    return LagrangianDensity(n, 1, L, dv, dy, d2v, "phi3")


def harmonic_map_lagrangian(n: int = 2, k: int = 2) -> LagrangianDensity:
    """1/2 |v|^2."""

    def L(x, y, v):
        return 0.5 * float(np.sum(np.asarray(v, dtype=float) ** 2))

    return LagrangianDensity(
        n, k, L,
        lambda x, y, v: np.array(v, dtype=float),
        lambda x, y, v: np.zeros(k),
        lambda x, y, v: np.eye(k * n).reshape(k, n, k, n),
        "harmonic",
    )


def maxwell2d_lagrangian() -> LagrangianDensity:
    """-1/2 (v^1_2 - v^2_1)^2."""
    # curl = v[0, 1] - v[1, 0]
    g = np.zeros((2, 2))
    g[0, 1], g[1, 0] = 1.0, -1.0

    def L(x, y, v):
        v = np.asarray(v, dtype=float)
        return -0.5 * (v[0, 1] - v[1, 0]) ** 2

    def dv(x, y, v):
        v = np.asarray(v, dtype=float)
        return -(v[0, 1] - v[1, 0]) * g

    return LagrangianDensity(
        2, 2, L, dv,
        lambda x, y, v: np.zeros(2),
        lambda x, y, v: -np.einsum("ab,cd->abcd", g, g),
        "maxwell",
    )


def trivial_lagrangian(n: int = 2, k: int = 2) -> LagrangianDensity:
    return LagrangianDensity(
        n, k,
        lambda x, y, v: 0.0,
        lambda x, y, v: np.zeros((k, n)),
        lambda x, y, v: np.zeros(k),
        lambda x, y, v: np.zeros((k, n, k, n)),
        "trivial",
    )


# ---------------------------------------------------------------------------
# Hamiltonians on charts


def phi3_hamiltonian(m: float, lam: float, metric: MetricSignature = MINKOWSKI) -> HamiltonianDensity:
    """e + 1/2 eta_{mu nu} p^mu p^nu - m^2/2 phi^2 - lam/3 phi^3 on the (n, k=1) DW chart."""
    n = metric.n
    chart = DWChart.build(n, 1)
    eta_lo = metric.lower
    iy, ie = chart.index("y1"), chart.index("e")
    ip = [chart.index(chart.p(mu, 0)) for mu in range(n)]
    dim = chart.dim

    def value(z):
        z = np.asarray(z, dtype=float)
        p = z[..., ip]
        phi = z[..., iy]
        return z[..., ie] + 0.5 * np.einsum("...a,ab,...b->...", p, eta_lo, p) - 0.5 * m**2 * phi**2 - lam / 3 * phi**3

    def gradient(z):
        z = np.asarray(z, dtype=float)
        g = np.zeros(z.shape[:-1] + (dim,))
        phi = z[..., iy]
        g[..., ie] = 1.0
        g[..., iy] = -(m**2) * phi - lam * phi**2
        g[..., ip] = z[..., ip] @ eta_lo
        return g

    def hessian(z):
        z = np.asarray(z, dtype=float)
        h = np.zeros(z.shape[:-1] + (dim, dim))
        h[..., iy, iy] = -(m**2) - 2 * lam * z[..., iy]
        for a, ia in enumerate(ip):
            for b, ib in enumerate(ip):
                h[..., ia, ib] = eta_lo[a, b]
        return h

    deps = frozenset([iy, ie] + ip)
    return HamiltonianDensity(chart, SmoothScalar(dim, value, gradient, hessian, deps), "phi3")


def classical_hamiltonian(H: Callable, dH: Callable, name: str = "") -> HamiltonianDensity:
    """Lift H(q, p) to e + H on the n = 1, k = 1 chart (t, q, e, p).

    ``dH(q, p)`` returns the pair (dH/dq, dH/dp).
    """
    chart = DWChart.build(1, 1)
    iq, ie, ip = chart.index("y1"), chart.index("e"), chart.index("p0_1")

    def value(z):
        z = np.asarray(z, dtype=float)
        return z[..., ie] + H(z[..., iq], z[..., ip])

    def gradient(z):
        z = np.asarray(z, dtype=float)
        g = np.zeros(z.shape)
        hq, hp = dH(z[..., iq], z[..., ip])
        g[..., iq], g[..., ie], g[..., ip] = hq, 1.0, hp
        return g

    return HamiltonianDensity(chart, SmoothScalar(chart.dim, value, gradient, None, frozenset([iq, ie, ip])), name)


def lepage_trivial_hamiltonian() -> HamiltonianDensity:
    """e - det(p) / r on the Lepage chart (r != 0)."""
    chart = LepageChart22.build()
    ie, ir = chart.index("e"), chart.index("r")
    i11, i12, i21, i22 = (chart.index(chart.p(mu, i)) for mu in range(2) for i in range(2))

    def value(z):
        z = np.asarray(z, dtype=float)
        det = z[..., i11] * z[..., i22] - z[..., i12] * z[..., i21]
        return z[..., ie] - det / z[..., ir]

    def gradient(z):
        z = np.asarray(z, dtype=float)
        r = z[..., ir]
        g = np.zeros(z.shape)
        det = z[..., i11] * z[..., i22] - z[..., i12] * z[..., i21]
        g[..., ie] = 1.0
        g[..., i11] = -z[..., i22] / r
        g[..., i22] = -z[..., i11] / r
        g[..., i12] = z[..., i21] / r
        g[..., i21] = z[..., i12] / r
        g[..., ir] = det / r**2
        return g

    deps = frozenset([ie, ir, i11, i12, i21, i22])
    return HamiltonianDensity(chart, SmoothScalar(chart.dim, value, gradient, None, deps), "lepage-trivial")


# ---------------------------------------------------------------------------
# de Donder-Weyl


def dw_legendre(L: LagrangianDensity, x, y, v):
    """(p, H) with p^mu_i = dL/dv^i_mu and H = <p, v> - L."""
    v = np.asarray(v, dtype=float).reshape(L.k, L.n)
    p = np.asarray(L.dL_dv(x, y, v), dtype=float).reshape(L.k, L.n).T.copy()
    H = float(np.sum(p.T * v)) - float(L.eval(x, y, v))
    return p, H


def dw_inverse_legendre(H: HamiltonianDensity, x, y, p):
    """v^i_mu = dH/dp^mu_i, returned with shape (k, n)."""
    chart = H.chart
    n, k = chart.n, chart.k
    z = np.zeros(chart.dim)
    z[[chart.index(chart.x(mu)) for mu in range(n)]] = np.asarray(x, dtype=float).ravel()
    z[[chart.index(chart.y(i)) for i in range(k)]] = np.asarray(y, dtype=float).ravel()
    p = np.asarray(p, dtype=float).reshape(n, k)
    for mu in range(n):
        for i in range(k):
            z[chart.index(chart.p(mu, i))] = p[mu, i]
    g = H.grad(z)
    return np.array([[g[chart.index(chart.p(mu, i))] for mu in range(n)] for i in range(k)])


# ---------------------------------------------------------------------------
# Lepage-Dedecker, n = k = 2


def _det2(v):
    return v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]


def _cofactor(v):
    """d det(v) / d v^i_mu = eps^{mu nu} eps_{ij} v^j_nu, shape (k, n) = [i, mu]."""
    return np.einsum("mn,ij,jn->im", EPSILON, EPSILON, v)


# d cof[i, mu] / d v[j, nu] = eps^{mu nu} eps_{ij}
_DET_HESSIAN = np.einsum("mn,ij->imjn", EPSILON, EPSILON)


def lepage_pairing(v, P) -> float:
    """<T, P> = e + p^mu_i v^i_mu + r det(v) for P = (e, p, r)."""
    e, p, r = P
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    return float(e + np.sum(p.T * v) + r * _det2(v))


def lepage_correspondence(L: LagrangianDensity, x, y, v, r: float) -> np.ndarray:
    """Solve p^mu_i + eps^{mu nu} eps_{ij} v^j_nu r = dL/dv^i_mu for p."""
    v = np.asarray(v, dtype=float)
    return (np.asarray(L.dL_dv(x, y, v), dtype=float) - r * _cofactor(v)).T.copy()


def correspondence_residual(L: LagrangianDensity, x, y, v, P) -> np.ndarray:
    """dW/dT at (v, P), shape (k, n)."""
    _, p, r = P
    v = np.asarray(v, dtype=float)
    return np.asarray(p, dtype=float).T + r * _cofactor(v) - np.asarray(L.dL_dv(x, y, v), dtype=float)


def _newton(L, x, y, p, r, v0, tol, max_iter, sing_tol):
    v = np.array(v0, dtype=float).reshape(2, 2)
    P = (0.0, p, r)
    res = correspondence_residual(L, x, y, v, P).ravel()
    norm = np.max(np.abs(res))
    for _ in range(max_iter):
        if norm <= tol:
            return v
        J = (r * _DET_HESSIAN - np.asarray(L.d2L_dv2(x, y, v), dtype=float)).reshape(4, 4)
        if abs(np.linalg.det(J)) < sing_tol:
            raise SingularJacobian(f"|det d2W/dT2| < {sing_tol:g} at r={r:g}")
        step = np.linalg.solve(J, -res).reshape(2, 2)
        t = 1.0
        while True:
            trial = v + t * step
            tres = correspondence_residual(L, x, y, trial, P).ravel()
            tnorm = np.max(np.abs(tres))
            if tnorm < norm or t < 1e-6:
                break
            t *= 0.5
        v, res, norm = trial, tres, tnorm
    if norm <= tol:
        return v
    raise NewtonDivergence(f"Newton did not converge: |dW/dT| = {norm:.3e} after {max_iter} iterations")


def _dw_singular(L, x, y, sing_tol) -> bool:
    J = -np.asarray(L.d2L_dv2(x, y, np.zeros((2, 2))), dtype=float).reshape(4, 4)
    return abs(np.linalg.det(J)) < sing_tol


def lepage_hamiltonian(
    L: LagrangianDensity,
    x,
    y,
    P,
    v0=None,
    *,
    tol: float = 1e-12,
    max_iter: int = 50,
    homotopy_steps: int = 8,
    sing_tol: float = 1e-10,
    return_v: bool = False,
):
    """H(x, y, P) = W(x, y, T, P) with T implicit through dW/dT = 0.

    The implicit multivelocity is found by Newton's method.  When the r = 0
    (de Donder-Weyl) problem is regular it is solved first and continued to
    the requested r in ``homotopy_steps`` steps; otherwise Newton starts at
    the target r from ``v0`` (zero by default).
    """
    e, p, r = P
    p = np.asarray(p, dtype=float).reshape(2, 2)
    guess = np.zeros((2, 2)) if v0 is None else np.asarray(v0, dtype=float).reshape(2, 2)
    if v0 is None and not _dw_singular(L, x, y, sing_tol):
        v = _newton(L, x, y, p, 0.0, guess, tol, max_iter, sing_tol)
        for j in range(1, homotopy_steps):
            try:
                v = _newton(L, x, y, p, r * j / homotopy_steps, v, tol, max_iter, sing_tol)
            except (SingularJacobian, NewtonDivergence):
                # the path passes near the singular set; keep the last good guess
                continue
        v = _newton(L, x, y, p, r, v, tol, max_iter, sing_tol)
    else:
        v = _newton(L, x, y, p, r, guess, tol, max_iter, sing_tol)
    H = lepage_pairing(v, (e, p, r)) - float(L.eval(x, y, v))
    return (H, v) if return_v else H


@dataclass(frozen=True)
class Pseudofiber:
    """Affine plane base + s d1 + t d2 of 2-forms, each stored as (e, p, r)."""

    base: tuple
    directions: tuple

    def point(self, s: float, t: float) -> tuple:
        (e0, p0, r0), (e1, p1, r1), (e2, p2, r2) = self.base, *self.directions
        return (e0 + s * e1 + t * e2, p0 + s * p1 + t * p2, r0 + s * r1 + t * r2)

    @property
    def dimension(self) -> int:
        vecs = np.array([[d[0], *np.ravel(d[1]), d[2]] for d in self.directions])
        return int(np.linalg.matrix_rank(vecs))


def pseudofiber_at(L: LagrangianDensity, x, y, v) -> Pseudofiber:
    """Solutions P of the correspondence for fixed v.

    Directions: dx1^dx2, i.e. (1, 0, 0), and
    det(v) dx1^dx2 - eps_{ij} v^j_nu dy^i^dx^nu + dy1^dy2, which in (e, p, r)
    coordinates reads (det v, -eps^{mu nu} eps_{ij} v^j_nu, 1).
    """
    v = np.asarray(v, dtype=float)
    base = (0.0, lepage_correspondence(L, x, y, v, 0.0), 0.0)
    d1 = (1.0, np.zeros((2, 2)), 0.0)
    d2 = (float(_det2(v)), -_cofactor(v).T, 1.0)
    return Pseudofiber(base, (d1, d2))


# ---------------------------------------------------------------------------
# closed forms for the three worked n = k = 2 examples


def closed_form_trivial(e, p, r):
    p = np.asarray(p, dtype=float)
    if r == 0:
        return e if not np.any(p) else np.nan
    return e - _det2(p) / r


def closed_form_harmonic(e, p, r):
    p = np.asarray(p, dtype=float)
    return e + (0.5 * np.sum(p**2) + r * _det2(p)) / (1 - r**2)


def closed_form_maxwell(e, p, r):
    p = np.asarray(p, dtype=float)
    # p[0, 1] = p^1_2, p[1, 0] = p^2_1
    return e + ((p[0, 1] + p[1, 0]) ** 2 - 4 * p[0, 0] * p[1, 1]) / (4 * r) - 0.25 * (p[0, 1] - p[1, 0]) ** 2 / (2 + r)
