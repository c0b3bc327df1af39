"""Hamiltonian n-curves: the 1+1 lattice scalar field, its lift to the DW
chart, the n = 1 classical reduction and the explicit Lepage 2-curves of the
trivial variational problem.

Arrays on the lattice are indexed ``[n, j]`` with ``t = t0 + n dt`` and
``x = j dx`` on a periodic circle of length ``Nx dx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .charts import (
    MINKOWSKI,
    DWChart,
    LepageChart22,
    MetricSignature,
    build_omega_dDW,
    build_omega_lepage,
)
from .exterior import Multivector, interior_product

__all__ = [
    "CFLViolation",
    "NonFiniteField",
    "ZeroR",
    "Lattice1p1",
    "HamiltonianCurve",
    "ClassicalCurve",
    "LepageCurve22",
    "evolve_scalar",
    "initial_data",
    "discrete_plane_wave",
    "discrete_omega",
    "discrete_energy",
    "smooth_noise",
    "dt_centered",
    "dx_centered",
    "lift_to_curve",
    "verify_hamilton_flow",
    "hamilton_flow_residual",
    "classical_reduction",
    "lepage_trivial_curve",
]

BLOWUP = 1e12


class CFLViolation(ValueError):
    pass


class NonFiniteField(FloatingPointError):
    pass


class ZeroR(ValueError):
    pass


@dataclass(frozen=True)
class Lattice1p1:
    Nt: int
    Nx: int
    dt: float
    dx: float
    t0: float = 0.0

    def __post_init__(self):
        if self.Nx < 8 or self.Nt < 2:
            raise ValueError(f"need Nx >= 8 and Nt >= 2, got Nx={self.Nx}, Nt={self.Nt}")
        if self.dt <= 0 or self.dx <= 0:
            raise ValueError("spacings must be positive")
        if self.dt / self.dx > 1.0 + 1e-12:
            raise CFLViolation(f"dt/dx = {self.dt / self.dx:.4g} > 1")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.Nt)

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.Nx)

    @property
    def length(self) -> float:
        return self.Nx * self.dx

    def mesh(self):
        return np.meshgrid(self.t, self.x, indexing="ij")

    def refined(self, factor: int = 2) -> "Lattice1p1":
        """Same space-time box with both spacings divided by ``factor``."""
        return Lattice1p1(
            (self.Nt - 1) * factor + 1, self.Nx * factor, self.dt / factor, self.dx / factor, self.t0
        )

    def to_dict(self) -> dict:
        return {"Nt": self.Nt, "Nx": self.Nx, "dt": self.dt, "dx": self.dx, "t0": self.t0}


# ---------------------------------------------------------------------------
# finite differences


def laplacian_x(f, dx):
    return (np.roll(f, -1, axis=-1) - 2 * f + np.roll(f, 1, axis=-1)) / dx**2


def dx_centered(f, dx):
    """Periodic centered first difference along the last axis."""
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * dx)


def dt_centered(f, dt):
    """Centered first difference along axis 0, second-order one-sided at both ends."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] < 3:
        raise ValueError("need at least three time levels")
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dt)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dt)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dt)
    return out


# ---------------------------------------------------------------------------
# evolution


def evolve_scalar(phi0, phidot0, m: float, lam: float, lattice: Lattice1p1) -> np.ndarray:
    """Leapfrog for phi_tt = phi_xx - m^2 phi - lam phi^2 with a Taylor first step."""
    phi0 = np.asarray(phi0, dtype=float)
    phidot0 = np.asarray(phidot0, dtype=float)
    if phi0.shape != (lattice.Nx,) or phidot0.shape != (lattice.Nx,):
        raise ValueError("initial data must have shape (Nx,)")
    if not (np.all(np.isfinite(phi0)) and np.all(np.isfinite(phidot0))):
        raise NonFiniteField("initial data is not finite")
    dt, dx = lattice.dt, lattice.dx

    def acc(f):
        return laplacian_x(f, dx) - m**2 * f - lam * f**2

    phi = np.empty((lattice.Nt, lattice.Nx))
    phi[0] = phi0
    phi[1] = phi0 + dt * phidot0 + 0.5 * dt**2 * acc(phi0)
    for n in range(1, lattice.Nt - 1):
        phi[n + 1] = 2 * phi[n] - phi[n - 1] + dt**2 * acc(phi[n])
        if not np.all(np.abs(phi[n + 1]) <= BLOWUP):
            raise NonFiniteField(f"|phi| exceeded {BLOWUP:g} at step {n + 1}")
    return phi


def discrete_omega(k, m: float, dt: float, dx: float):
    """Frequency of the exact discrete plane wave of the compact leapfrog stencil."""
    s = (2 / dx * np.sin(np.asarray(k) * dx / 2)) ** 2 + m**2
    arg = dt * np.sqrt(s) / 2
    if np.any(arg > 1):
        raise CFLViolation("no real discrete frequency at this resolution")
    return 2 / dt * np.arcsin(arg)


def discrete_plane_wave(lattice: Lattice1p1, m: float, mode: int = 1, amplitude: float = 1.0, phase: float = 0.0):
    """A cos(k x - w t + phase) with the discrete dispersion: solves the free scheme exactly."""
    k = 2 * np.pi * mode / lattice.length
    w = discrete_omega(k, m, lattice.dt, lattice.dx)
    T, X = lattice.mesh()
    return amplitude * np.cos(k * X - w * T + phase)


def initial_data(preset: str, lattice: Lattice1p1, m: float = 1.0, amplitude: float = 0.5):
    """(phi0, phidot0) for a named preset: ``plane-wave``, ``gaussian`` or ``noise:SEED``."""
    x, L = lattice.x, lattice.length
    if preset == "plane-wave":
        k = 2 * np.pi / L
        w = np.sqrt(k**2 + m**2)
        return amplitude * np.cos(k * x), amplitude * w * np.sin(k * x)
    if preset == "gaussian":
        width = L / 10
        return amplitude * np.exp(-((x - L / 2) ** 2) / (2 * width**2)), np.zeros_like(x)
    if preset.startswith("noise"):
        _, _, seed = preset.partition(":")
        rng = np.random.default_rng(int(seed) if seed else 0)
        return smooth_noise(x, L, rng, amplitude), np.zeros_like(x)
    raise ValueError(f"unknown preset {preset!r}")


def smooth_noise(x, L, rng, amplitude=1.0, modes: int = 4):
    """Random superposition of the lowest Fourier modes (smooth, periodic)."""
    out = np.zeros(np.shape(x))
    for q in range(1, modes + 1):
        a, b = rng.normal(size=2) / q
        out = out + a * np.cos(2 * np.pi * q * x / L) + b * np.sin(2 * np.pi * q * x / L)
    return amplitude * out


def discrete_energy(phi, lattice: Lattice1p1, m: float, lam: float) -> np.ndarray:
    """E(t) = sum (phidot^2/2 + phi'^2/2 + m^2 phi^2/2 + lam phi^3/3) dx per slice."""
    phit = dt_centered(phi, lattice.dt)
    phix = dx_centered(phi, lattice.dx)
    dens = 0.5 * phit**2 + 0.5 * phix**2 + 0.5 * m**2 * phi**2 + lam / 3 * phi**3
    return dens.sum(axis=1) * lattice.dx


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class HamiltonianCurve:
    """Lattice Hamiltonian 2-curve on the (n=2, k=1) DW chart (t, x, phi, e, p0, p1)."""

    lattice: Lattice1p1
    phi: np.ndarray
    p: np.ndarray
    e: np.ndarray
    m: float
    lam: float
    H0: float = 0.0
    metric: MetricSignature = MINKOWSKI
    chart: DWChart = field(default_factory=lambda: DWChart.build(2, 1))

    @property
    def n(self) -> int:
        return 2

    def points(self) -> np.ndarray:
        lat, c = self.lattice, self.chart
        T, X = lat.mesh()
        z = np.zeros(self.phi.shape + (c.dim,))
        z[..., c.index("x0")] = T
        z[..., c.index("x1")] = X
        z[..., c.index("y1")] = self.phi
        z[..., c.index("e")] = self.e
        z[..., c.index("p0_1")] = self.p[..., 0]
        z[..., c.index("p1_1")] = self.p[..., 1]
        return z

    def tangents(self) -> np.ndarray:
        """X_mu = d/dx^mu of the embedding, shape (Nt, Nx, 2, dim)."""
        lat = self.lattice
        z = self.points()
        X = np.zeros(z.shape[:-1] + (2, z.shape[-1]))
        X[..., 0, :] = dt_centered(z, lat.dt)
        zt = np.moveaxis(z, -1, 0)
        X[..., 1, :] = np.moveaxis(dx_centered(zt, lat.dx), 0, -1)
        # the base coordinates are exact
        X[..., :, :2] = np.eye(2)
        return X

    def interior(self) -> slice:
        """Time layers whose tangents use centered stencils built from centered data."""
        return slice(2, self.lattice.Nt - 2)

    def hamiltonian_values(self) -> np.ndarray:
        eta = self.metric.lower
        quad = np.einsum("...a,ab,...b->...", self.p, eta, self.p)
        return self.e + 0.5 * quad - 0.5 * self.m**2 * self.phi**2 - self.lam / 3 * self.phi**3


def lift_to_curve(phi, m: float, lam: float, lattice: Lattice1p1, H0: float = 0.0, metric: MetricSignature = MINKOWSKI):
    """p^mu = eta^{mu nu} d_nu phi by finite differences; e fixed by H = H0."""
    phi = np.asarray(phi, dtype=float)
    grads = np.stack([dt_centered(phi, lattice.dt), dx_centered(phi, lattice.dx)], axis=-1)
    p = grads @ metric.upper.T
    quad = np.einsum("...a,ab,...b->...", p, metric.lower, p)
    e = H0 - 0.5 * quad + 0.5 * m**2 * phi**2 + lam / 3 * phi**3
    return HamiltonianCurve(lattice, phi, p, e, m, lam, H0, metric)


def hamilton_flow_residual(points, tangents, H, omega, n: int) -> np.ndarray:
    """Componentwise X ^| omega - (-1)^n dH, shape (..., dim)."""
    X = Multivector(points, tangents)
    lhs = interior_product(X, omega).dense()
    return lhs - (-1) ** n * H.grad(points)


def verify_hamilton_flow(curve, H, omega=None) -> float:
    """Max over interior sites and 1-form components of |X ^| omega - (-1)^n dH|."""
    if omega is None:
        omega = build_omega_lepage(curve.chart) if isinstance(curve.chart, LepageChart22) else build_omega_dDW(curve.chart)
    sl = curve.interior()
    res = hamilton_flow_residual(curve.points()[sl], curve.tangents()[sl], H, omega, curve.n)
    return float(np.max(np.abs(res)))


@dataclass(frozen=True, eq=False)
class ClassicalCurve:
    """A 1-curve on the chart (t, q, e, p)."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    e: np.ndarray
    chart: DWChart = field(default_factory=lambda: DWChart.build(1, 1))

    @property
    def n(self) -> int:
        return 1

    def points(self):
        c = self.chart
        z = np.zeros(self.t.shape + (c.dim,))
        z[:, c.index("x0")] = self.t
        z[:, c.index("y1")] = self.q
        z[:, c.index("e")] = self.e
        z[:, c.index("p0_1")] = self.p
        return z

    def tangents(self):
        dt = self.t[1] - self.t[0]
        X = dt_centered(self.points(), dt)
        X[:, self.chart.index("x0")] = 1.0
        return X[:, None, :]

    def interior(self):
        return slice(2, len(self.t) - 2)


def classical_reduction(H: Callable, dH: Callable, q0: float, p0: float, T: float, dt: float, H0: float = 0.0) -> ClassicalCurve:
    """RK4 for dq/dt = dH/dp, dp/dt = -dH/dq; ``dH(q, p)`` returns (H_q, H_p)."""
    steps = int(round(T / dt))

    def f(y):
        hq, hp = dH(y[0], y[1])
        return np.array([hp, -hq])

    ys = np.empty((steps + 1, 2))
    ys[0] = (q0, p0)
    for i in range(steps):
        y = ys[i]
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        ys[i + 1] = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    t = dt * np.arange(steps + 1)
    q, p = ys[:, 0], ys[:, 1]
    return ClassicalCurve(t, q, p, H0 - H(q, p))


# ---------------------------------------------------------------------------
# Lepage 2-curves of the trivial problem


def _cof(v):
    # d det / d v[i, mu] = eps^{mu nu} eps_{ij} v[j, nu], for 2x2 blocks (..., 2, 2)
    out = np.empty_like(v)
    out[..., 0, 0] = v[..., 1, 1]
    out[..., 1, 1] = v[..., 0, 0]
    out[..., 0, 1] = -v[..., 1, 0]
    out[..., 1, 0] = -v[..., 0, 1]
    return out


@dataclass(frozen=True, eq=False)
class LepageCurve22:
    """Embedding x -> (x, u, e, p, r) on the Lepage chart with analytic tangents."""

    x: np.ndarray
    u: np.ndarray
    e: np.ndarray
    p: np.ndarray
    r: np.ndarray
    h: float
    _tangents: np.ndarray
    chart: LepageChart22 = field(default_factory=LepageChart22.build)

    @property
    def n(self) -> int:
        return 2

    def points(self):
        c = self.chart
        z = np.zeros(self.x.shape[:-1] + (c.dim,))
        z[..., [c.index("x1"), c.index("x2")]] = self.x
        z[..., [c.index("y1"), c.index("y2")]] = self.u
        z[..., c.index("e")] = self.e
        for mu in range(2):
            for i in range(2):
                z[..., c.index(c.p(mu, i))] = self.p[..., mu, i]
        z[..., c.index("r")] = self.r
        return z

    def tangents(self):
        return self._tangents

    def interior(self):
        return (Ellipsis,)


def lepage_trivial_curve(u, du, d2u, r, dr, h: float, grid) -> LepageCurve22:
    """Build e = r det(du) + h and p^mu_i = -r eps^{mu nu} eps_{ij} du^j/dx^nu on ``grid``.

    ``u(x)``, ``du(x)[..., i, mu]``, ``d2u(x)[..., i, mu, nu]``, ``r(x)`` and
    ``dr(x)[..., mu]`` are analytic callables on points of shape (..., 2).
    """
    x = np.asarray(grid, dtype=float)
    rv = np.asarray(r(x), dtype=float)
    if np.any(rv == 0) or np.any(~np.isfinite(1 / rv)):
        raise ZeroR("r vanishes on the grid")
    v = np.asarray(du(x), dtype=float)
    w = np.asarray(d2u(x), dtype=float)
    drv = np.asarray(dr(x), dtype=float)
    det = v[..., 0, 0] * v[..., 1, 1] - v[..., 0, 1] * v[..., 1, 0]
    cof = _cof(v)
    e = rv * det + h
    p = -rv[..., None, None] * np.swapaxes(cof, -1, -2)

    c = LepageChart22.build()
    X = np.zeros(x.shape[:-1] + (2, c.dim))
    for lam in range(2):
        dv = w[..., lam]
        ddet = np.sum(cof * dv, axis=(-1, -2))
        dcof = _cof(dv)
        X[..., lam, c.index(c.x(lam))] = 1.0
        X[..., lam, c.index("y1")] = v[..., 0, lam]
        X[..., lam, c.index("y2")] = v[..., 1, lam]
        X[..., lam, c.index("e")] = drv[..., lam] * det + rv * ddet
        dp = -(drv[..., lam, None, None] * np.swapaxes(cof, -1, -2) + rv[..., None, None] * np.swapaxes(dcof, -1, -2))
        for mu in range(2):
            for i in range(2):
                X[..., lam, c.index(c.p(mu, i))] = dp[..., mu, i]
        X[..., lam, c.index("r")] = drv[..., lam]
    return LepageCurve22(x, np.asarray(u(x), dtype=float), e, p, rv, h, X, c)
