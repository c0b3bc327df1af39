"""Perturbative observable functionals for the phi^3 field in 1+1 dimensions.

First-order forms F1 built from a free solution Phi1, the retarded lattice
Green function of Delta + m^2, the second-order kernel
Phi2(x1, x2) = -sum_s Phi1(s) G(s, x1) G(s, x2) dt dx, tensor forms F2, and
boundary functionals over a slab between two time slices.

Boundary functionals live on half-integer slices: the slice ``n + 1/2`` sits
between layers ``n`` and ``n + 1`` and pairs the field with a kernel through
the staggered product

    S[Psi] = sum_j (phi^n Psi^{n+1} - phi^{n+1} Psi^n) dx / dt,

the lattice pull-back of F1 = (p^mu Psi - eta^{mu nu} phi d_nu Psi) omega_mu.
Summation by parts turns differences of S into exact slab sums, so the
lattice identities hold to round-off.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .charts import MINKOWSKI, DWChart, MetricSignature, build_omega_dDW, omega_mu
from .dynamics import (
    CFLViolation,
    Lattice1p1,
    discrete_plane_wave,
    dt_centered,
    dx_centered,
    evolve_scalar,
    laplacian_x,
)
from .exterior import Chart, DiffForm, SmoothScalar, exterior_derivative, sum_forms
from .observables import ObservableForm, SliceOutOfRange

__all__ = [
    "PlaneWave",
    "Separable",
    "LatticeField",
    "field_scalar",
    "build_F1",
    "xi1_components",
    "classify_dynamical",
    "DynamicalClassification",
    "LatticeGreen",
    "retarded_green",
    "Kernel2",
    "build_phi2",
    "TwoPoint",
    "TensorForm2",
    "build_F2",
    "staggered_index",
    "F1Kernel",
    "eval_tensor_boundary",
    "PerturbativeFunctional",
    "Term",
    "product_functionals",
    "ScalingConfig",
    "lambda_scaling_study",
    "loglog_slope",
]


# ---------------------------------------------------------------------------
# source fields Phi(t, x): value, gradient (d_t, d_x), Hessian


@dataclass(frozen=True)
class PlaneWave:
    """A cos(k x - w t + phase) in the continuum."""

    k: float
    w: float
    amplitude: float = 1.0
    phase: float = 0.0

    @classmethod
    def solution(cls, m: float, k: float, amplitude: float = 1.0, phase: float = 0.0) -> "PlaneWave":
        return cls(k, float(np.sqrt(k**2 + m**2)), amplitude, phase)

    def _arg(self, t, x):
        return self.k * np.asarray(x, dtype=float) - self.w * np.asarray(t, dtype=float) + self.phase

    def value(self, t, x):
        return self.amplitude * np.cos(self._arg(t, x))

    def grad(self, t, x):
        s = -self.amplitude * np.sin(self._arg(t, x))
        return np.stack([-self.w * s, self.k * s], axis=-1)

    def hess(self, t, x):
        c = -self.amplitude * np.cos(self._arg(t, x))
        kv = np.array([-self.w, self.k])
        return c[..., None, None] * np.outer(kv, kv)


@dataclass(frozen=True)
class Separable:
    """f(t) g(x) from analytic one-variable callables with two derivatives each."""

    f: tuple
    g: tuple

    def value(self, t, x):
        return self.f[0](t) * self.g[0](x)

    def grad(self, t, x):
        return np.stack([self.f[1](t) * self.g[0](x), self.f[0](t) * self.g[1](x)], axis=-1)

    def hess(self, t, x):
        f0, f1, f2 = (fn(t) for fn in self.f)
        g0, g1, g2 = (fn(x) for fn in self.g)
        tt, tx, xx = f2 * g0, f1 * g1, f0 * g2
        return np.stack([np.stack([tt, tx], -1), np.stack([tx, xx], -1)], -2)


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Grid function with discrete derivatives and nearest-site lookup.

    Pure second derivatives use compact three-point stencils, so the lattice
    wave operator applied through ``hess`` is exactly the one the leapfrog
    scheme solves.  Temporal end layers use second-order one-sided stencils.
    """

    values: np.ndarray
    lattice: Lattice1p1

    def _sites(self, t, x):
        lat = self.lattice
        n = np.rint((np.asarray(t, dtype=float) - lat.t0) / lat.dt).astype(int)
        j = np.rint(np.asarray(x, dtype=float) / lat.dx).astype(int) % lat.Nx
        if np.any(n < 0) or np.any(n >= lat.Nt):
            raise SliceOutOfRange("time outside the lattice")
        return n, j

    def value(self, t, x):
        n, j = self._sites(t, x)
        return self.values[n, j]

    def _grad_grid(self):
        lat = self.lattice
        return np.stack([dt_centered(self.values, lat.dt), dx_centered(self.values, lat.dx)], axis=-1)

    def _hess_grid(self):
        lat, V = self.lattice, self.values
        tt = np.empty_like(V)
        tt[1:-1] = (V[2:] - 2 * V[1:-1] + V[:-2]) / lat.dt**2
        tt[0] = (2 * V[0] - 5 * V[1] + 4 * V[2] - V[3]) / lat.dt**2
        tt[-1] = (2 * V[-1] - 5 * V[-2] + 4 * V[-3] - V[-4]) / lat.dt**2
        xx = laplacian_x(V, lat.dx)
        tx = dt_centered(dx_centered(V, lat.dx), lat.dt)
        return np.stack([np.stack([tt, tx], -1), np.stack([tx, xx], -1)], -2)

    def grad(self, t, x):
        n, j = self._sites(t, x)
        return self._cache("grad", self._grad_grid)[n, j]

    def hess(self, t, x):
        n, j = self._sites(t, x)
        return self._cache("hess", self._hess_grid)[n, j]

    def _cache(self, name, make):
        store = self.__dict__.setdefault("_derived", {})
        if name not in store:
            store[name] = make()
        return store[name]


def box(source, t, x, metric: MetricSignature = MINKOWSKI):
    """Delta Phi = -eta^{mu nu} d_mu d_nu Phi."""
    return -np.einsum("ab,...ab->...", metric.upper, source.hess(t, x))


def _sum_scalars(scalars):
    scalars = list(scalars)
    total = scalars[0]
    for f in scalars[1:]:
        total = total + f
    return total


def _values_only(dim, fn, deps):
    def no_gradient(z):
        raise ValueError("gradient not available for this coefficient")

    return SmoothScalar(dim, fn, no_gradient, None, deps)


def field_scalar(source, chart: Chart, labels=("x0", "x1")) -> SmoothScalar:
    """Phi(t, x) as a SmoothScalar on ``chart`` (depends only on the base coordinates)."""
    it, ix = (chart.index(lbl) for lbl in labels)
    dim = chart.dim

    def value(z):
        z = np.asarray(z, dtype=float)
        return source.value(z[..., it], z[..., ix])

    def gradient(z):
        z = np.asarray(z, dtype=float)
        g = np.zeros(z.shape)
        gr = source.grad(z[..., it], z[..., ix])
        g[..., it], g[..., ix] = gr[..., 0], gr[..., 1]
        return g

    def hessian(z):
        z = np.asarray(z, dtype=float)
        h = np.zeros(z.shape + (dim,))
        hs = source.hess(z[..., it], z[..., ix])
        for a, ia in enumerate((it, ix)):
            for b, ib in enumerate((it, ix)):
                h[..., ia, ib] = hs[..., a, b]
        return h

    return SmoothScalar(dim, value, gradient, hessian, frozenset((it, ix)))


# ---------------------------------------------------------------------------
# first order


def _coords(chart):
    dim = chart.dim
    phi = SmoothScalar.coordinate(chart.index("y1"), dim)
    p = [SmoothScalar.coordinate(chart.index(chart.p(mu, 0)), dim) for mu in range(chart.n)]
    return phi, p


def xi1_components(source, chart: DWChart, metric: MetricSignature = MINKOWSKI) -> tuple:
    """eta^{mu nu} d_nu Phi d/dp^mu - (phi Delta Phi + p^mu d_mu Phi) d/de + Phi d/dphi."""
    dim, n = chart.dim, chart.n
    it, ix = chart.index("x0"), chart.index("x1")
    ie, iy = chart.index("e"), chart.index("y1")
    ip = [chart.index(chart.p(mu, 0)) for mu in range(n)]
    base = frozenset((it, ix))
    eta = metric.upper

    def grad(z):
        return source.grad(z[..., it], z[..., ix])

    comps = [SmoothScalar.constant(0.0, dim) for _ in range(dim)]
    Phi = field_scalar(source, chart)
    comps[iy] = Phi
    dPhi = [Phi.partial(it), Phi.partial(ix)]
    for mu in range(n):
        # exact gradients (through the Hessian of Phi) so brackets can be differentiated
        comps[ip[mu]] = _sum_scalars(dPhi[nu] * float(eta[mu, nu]) for nu in range(n) if eta[mu, nu] != 0.0)

    def e_comp(z):
        z = np.asarray(z, dtype=float)
        bx = box(source, z[..., it], z[..., ix], metric)
        return -(z[..., iy] * bx + np.sum(z[..., ip] * grad(z), axis=-1))

    comps[ie] = _values_only(dim, e_comp, base | {iy, *ip})
    return tuple(comps)


def build_F1(source, metric: MetricSignature = MINKOWSKI) -> ObservableForm:
    """F1 = (p^mu Phi - eta^{mu nu} phi d_nu Phi) omega_mu with its analytic vector field."""
    chart = DWChart.build(2, 1)
    Phi = field_scalar(source, chart)
    phi, p = _coords(chart)
    dPhi = [Phi.partial(chart.index(chart.x(nu))) for nu in range(2)]
    eta = metric.upper
    parts = []
    for mu in range(2):
        coeff = p[mu] * Phi
        for nu in range(2):
            if eta[mu, nu] != 0.0:
                coeff = coeff - (phi * dPhi[nu]) * float(eta[mu, nu])
        parts.append(omega_mu(chart, mu).scale(coeff))
    omega = build_omega_dDW(chart)
    return ObservableForm(sum_forms(parts), omega, xi1_components(source, chart, metric), "algebraic")


@dataclass
class DynamicalClassification:
    verdict: str
    residuals: dict
    failed: list


def classify_dynamical(lam: float, Phi: SmoothScalar, E: SmoothScalar, P: Sequence[SmoothScalar], samples,
                       m: float = 1.0, metric: MetricSignature = MINKOWSKI, tol: float = 1e-10):
    """Check the conditions for xi built from (Phi, E, P^mu) to give a dynamical observable.

    Candidates are SmoothScalars on the coordinates (x0, x1, phi); ``samples``
    has shape (N, 3).  Failing conditions are listed in the order
    Phi-and-P, compatibility, then the algebraic condition on E.
    """
    z = np.asarray(samples, dtype=float)
    phi = z[..., 2]
    gPhi, gE = Phi.grad(z), E.grad(z)
    gP = [Pm.grad(z) for Pm in P]
    Pv = np.stack([Pm(z) for Pm in P], axis=-1)
    lower = metric.lower
    res = {
        "phi_and_P": float(max(np.max(np.abs(gPhi[..., 2])), np.max(np.abs(gPhi[..., :2] - Pv @ lower.T)))),
        "compatible": float(np.max(np.abs(gE[..., 2] - sum(gP[mu][..., mu] for mu in range(2))))),
        "algebraic_E": float(np.max(np.abs((m**2 * phi + lam * phi**2) * Phi(z) - E(z)))),
    }
    failed = [k for k in ("phi_and_P", "compatible", "algebraic_E") if res[k] > tol]
    return DynamicalClassification("dynamical" if not failed else "obstructed", res, failed)


# ---------------------------------------------------------------------------
# retarded Green function


@dataclass(frozen=True, eq=False)
class LatticeGreen:
    """Retarded Green function of Delta_h + m^2, delta normalized as 1/(dt dx).

    The lattice is translation invariant, so a single kernel
    ``K[lag, offset]`` serves every source: G(s, (n, j)) = K[n - n_s, j - j_s]
    for n > n_s and 0 otherwise.
    """

    m: float
    lattice: Lattice1p1
    K: np.ndarray

    def __call__(self, source) -> np.ndarray:
        ns, js = source
        lat = self.lattice
        out = np.zeros((lat.Nt, lat.Nx))
        lags = lat.Nt - ns
        if lags > 0:
            out[ns:] = np.roll(self.K[:lags], js, axis=1)
        return out

    @property
    def K_hat(self) -> np.ndarray:
        store = self.__dict__.setdefault("_derived", {})
        if "K_hat" not in store:
            store["K_hat"] = np.fft.fft(self.K, axis=1)
        return store["K_hat"]

    def circulant(self, lag: int) -> np.ndarray:
        """C[js, j] = K[lag, (j - js) mod Nx]."""
        Nx = self.lattice.Nx
        idx = (np.arange(Nx)[None, :] - np.arange(Nx)[:, None]) % Nx
        return self.K[lag][idx]


def wave_operator(u, lattice: Lattice1p1, m: float) -> np.ndarray:
    """(Delta_h + m^2) u on layers 1..Nt-2 (compact stencils)."""
    dt, dx = lattice.dt, lattice.dx
    tt = (u[2:] - 2 * u[1:-1] + u[:-2]) / dt**2
    return tt - laplacian_x(u[1:-1], dx) + m**2 * u[1:-1]


def retarded_green(m: float, lattice: Lattice1p1) -> LatticeGreen:
    if m < 0:
        raise ValueError("mass must be non-negative")
    dt, dx = lattice.dt, lattice.dx
    if dt / dx > 1.0 + 1e-12:
        raise CFLViolation(f"dt/dx = {dt / dx:.4g} > 1")
    K = np.zeros((lattice.Nt, lattice.Nx))
    if lattice.Nt > 1:
        K[1, 0] = dt / dx
    for n in range(1, lattice.Nt - 1):
        K[n + 1] = 2 * K[n] - K[n - 1] + dt**2 * (laplacian_x(K[n], dx) - m**2 * K[n])
    return LatticeGreen(m, lattice, K)


# ---------------------------------------------------------------------------
# second-order kernel


@dataclass(frozen=True, eq=False)
class Kernel2:
    """Phi2(x1, x2) = -dt dx sum_s Phi1(s) G(s, x1) G(s, x2), sources on layers n0+1..Nt-2.

    Sites are (layer, column) pairs.  Nothing of size (Nt Nx)^2 is stored:
    values, rows and layer blocks are computed on demand from the kernel K.
    """

    Phi1: np.ndarray
    green: LatticeGreen
    n0: int

    @property
    def lattice(self) -> Lattice1p1:
        return self.green.lattice

    @property
    def source_layers(self) -> range:
        return range(self.n0 + 1, self.lattice.Nt - 1)

    def value(self, a, b) -> float:
        (na, ja), (nb, jb) = a, b
        lat, K = self.lattice, self.green.K
        total = 0.0
        for ns in self.source_layers:
            if ns >= na or ns >= nb:
                break
            ka = K[na - ns][(ja - np.arange(lat.Nx)) % lat.Nx]
            kb = K[nb - ns][(jb - np.arange(lat.Nx)) % lat.Nx]
            # the summand is symmetric under a <-> b
            total += float(np.sum(self.Phi1[ns] * (ka * kb)))
        return -lat.dt * lat.dx * total

    order = 2

    def block(self, na: int, nb: int) -> np.ndarray:
        """Phi2 between layers na and nb as an (Nx, Nx) matrix (memoized)."""
        memo = self.__dict__.setdefault("_blocks", {})
        if (na, nb) not in memo:
            memo[(na, nb)] = self._block(na, nb)
        return memo[(na, nb)]

    def _block(self, na: int, nb: int) -> np.ndarray:
        lat = self.lattice
        out = np.zeros((lat.Nx, lat.Nx))
        for ns in self.source_layers:
            if ns >= na or ns >= nb:
                break
            Ca = self.green.circulant(na - ns)
            Cb = self.green.circulant(nb - ns)
            out += Ca.T @ (self.Phi1[ns][:, None] * Cb)
        return -lat.dt * lat.dx * out

    def row(self, site) -> np.ndarray:
        """Phi2(site, .) on the whole lattice, by causal FFT convolution."""
        na, ja = site
        lat = self.lattice
        Kh = self.green.K_hat
        acc = np.zeros((lat.Nt, lat.Nx), dtype=complex)
        for ns in self.source_layers:
            if ns >= na:
                break
            w = self.Phi1[ns] * np.roll(self.green.K[na - ns][::-1], ja + 1)
            acc[ns + 1:] += np.fft.fft(w)[None, :] * Kh[1: lat.Nt - ns]
        return -lat.dt * lat.dx * np.fft.ifft(acc, axis=1).real

    def slice_pair(self, curve, na: int, nb: int) -> float:
        """Staggered tensor pairing of the slices na + 1/2 and nb + 1/2."""
        lat = curve.lattice
        wa = _stagger_weights(curve.phi, na)
        wb = _stagger_weights(curve.phi, nb)
        total = 0.0
        for da in (0, 1):
            for db in (0, 1):
                total += wa[da] @ self.block(na + da, nb + db) @ wb[db]
        return float(total) * (lat.dx / lat.dt) ** 2

    def boundary(self, curve, slab) -> float:
        n0, n1 = _slab(curve.lattice, slab)
        s = self.slice_pair
        return s(curve, n1, n1) - s(curve, n1, n0) - s(curve, n0, n1) + s(curve, n0, n0)


def build_phi2(Phi1, green: LatticeGreen, n0: int) -> Kernel2:
    Phi1 = np.asarray(getattr(Phi1, "values", Phi1), dtype=float)
    if Phi1.shape != (green.lattice.Nt, green.lattice.Nx):
        raise ValueError("Phi1 must live on the Green function's lattice")
    if not 0 <= n0 < green.lattice.Nt - 1:
        raise SliceOutOfRange("t0 slice outside the lattice")
    return Kernel2(Phi1, green, n0)


# ---------------------------------------------------------------------------
# analytic tensor forms F2 (two-point function given as a sum of products)


@dataclass(frozen=True)
class TwoPoint:
    """Phi2(x1, x2) = sum_r c_r A_r(x1) B_r(x2) with analytic one-point factors."""

    terms: tuple  # of (c, A, B)

    def value(self, x1, x2):
        return sum(c * A.value(*x1) * B.value(*x2) for c, A, B in self.terms)


@dataclass(frozen=True, eq=False)
class TensorForm2:
    """F2 = (p1^mu - eta^{mu l} phi1 d_{1l})(p2^nu - eta^{nu s} phi2 d_{2s}) Phi2 omega_mu (x) omega_nu."""

    phi2: TwoPoint
    metric: MetricSignature = MINKOWSKI
    chart: DWChart = field(default_factory=lambda: DWChart.build(2, 1))

    def factors(self):
        return [(c, build_F1(A, self.metric), build_F1(B, self.metric)) for c, A, B in self.phi2.terms]

    def at(self, z1, z2) -> np.ndarray:
        """Coefficient array on basis (1-form, 1-form) pairs: shape (dim, dim)."""
        return sum(c * np.outer(Fa.form.at(z1).dense(), Fb.form.at(z2).dense()) for c, Fa, Fb in self.factors())

    def d2(self, z1, z2) -> np.ndarray:
        """d (x) d of F2 on (2-form, 2-form) basis pairs."""
        return sum(
            c * np.outer(exterior_derivative(Fa.form).at(z1).dense(), exterior_derivative(Fb.form).at(z2).dense())
            for c, Fa, Fb in self.factors()
        )

    def xi2(self, z1, z2) -> np.ndarray:
        """xi2^{IJ}: the per-argument operator of xi1 applied in each slot of Phi2."""
        chart = self.chart
        out = np.zeros((chart.dim, chart.dim))
        for c, A, B in self.phi2.terms:
            xa = np.array([comp(z1) for comp in xi1_components(A, chart, self.metric)])
            xb = np.array([comp(z2) for comp in xi1_components(B, chart, self.metric)])
            out += c * np.outer(xa, xb)
        return out

    def pseudobracket(self, H, z1, z2) -> float:
        """dH_{z1} (x) dH_{z2} (xi2)."""
        return float(H.grad(z1) @ self.xi2(z1, z2) @ H.grad(z2))

    def expansion(self, z1, z2, m: float, lam: float) -> float:
        """K1 K2 Phi2 with K = phi (Delta + m^2) + lam phi^2, expanded in powers of lam."""
        chart = self.chart
        it, ix, iy = chart.index("x0"), chart.index("x1"), chart.index("y1")
        phi1, phi2 = z1[iy], z2[iy]
        x1, x2 = (z1[it], z1[ix]), (z2[it], z2[ix])
        total = 0.0
        for c, A, B in self.phi2.terms:
            a0, b0 = A.value(*x1), B.value(*x2)
            aL = box(A, *x1, self.metric) + m**2 * a0
            bL = box(B, *x2, self.metric) + m**2 * b0
            total += c * (
                phi1 * phi2 * aL * bL
                + lam * (phi1**2 * phi2 * a0 * bL + phi1 * phi2**2 * aL * b0)
                + lam**2 * phi1**2 * phi2**2 * a0 * b0
            )
        return float(total)


def build_F2(phi2: TwoPoint, metric: MetricSignature = MINKOWSKI) -> TensorForm2:
    return TensorForm2(phi2, metric)


def contracted_omega2(omega: DiffForm, xi2: np.ndarray, z1, z2) -> np.ndarray:
    """xi2 ^|^2 (Omega (x) Omega) = sum_IJ xi^{IJ} (d_I ^| Omega)(z1) (x) (d_J ^| Omega)(z2)."""
    from .observables import contraction_matrices

    A1 = contraction_matrices(omega, z1)
    A2 = contraction_matrices(omega, z2)
    return A1 @ xi2 @ A2.T


# ---------------------------------------------------------------------------
# boundary functionals on the lattice


def staggered_index(lattice: Lattice1p1, t: float) -> int:
    """n such that the slice at t sits between layers n and n + 1."""
    n = int(np.floor((t - lattice.t0) / lattice.dt))
    if not 0 <= n < lattice.Nt - 1:
        raise SliceOutOfRange(f"slice t={t} is not between two lattice layers")
    return n


def _slab(lattice, slab):
    t0, t1 = slab
    n0, n1 = staggered_index(lattice, t0), staggered_index(lattice, t1)
    if n1 > lattice.Nt - 2 or n0 > n1:
        raise SliceOutOfRange("slab must satisfy t0 <= t1 inside the lattice")
    return n0, n1


def _stagger_weights(phi, n):
    """Row vectors (a, b) with S = a . Psi^n + b . Psi^{n+1}."""
    return -phi[n + 1], phi[n]


@dataclass(frozen=True, eq=False)
class F1Kernel:
    """Lattice F1 for a grid solution Phi1 of the free scheme."""

    Phi1: np.ndarray
    order: int = 1

    def slice(self, curve, n: int) -> float:
        lat = curve.lattice
        phi, Psi = curve.phi, self.Phi1
        return float(np.sum(phi[n] * Psi[n + 1] - phi[n + 1] * Psi[n]) * lat.dx / lat.dt)

    def boundary(self, curve, slab) -> float:
        n0, n1 = _slab(curve.lattice, slab)
        return self.slice(curve, n1) - self.slice(curve, n0)


def eval_tensor_boundary(curve, slab, tensor) -> float:
    """(int_{t1} - int_{t0})^k of an order-k lattice tensor kernel."""
    return tensor.boundary(curve, slab)


@dataclass(frozen=True, eq=False)
class ProductKernel:
    """Tensor product of lattice kernels; product quadrature factorizes."""

    left: object
    right: object

    @property
    def order(self) -> int:
        return self.left.order + self.right.order

    def boundary(self, curve, slab) -> float:
        return self.left.boundary(curve, slab) * self.right.boundary(curve, slab)


@dataclass(frozen=True)
class Term:
    order: int
    weight: float
    kernel: object


@dataclass(frozen=True)
class PerturbativeFunctional:
    """unit + sum_k lam^{k-1} (int_{Gamma cap dD})^k F^(k), stored as weighted kernels.

    ``unit`` is the order-0 scalar.  Series start at k = 1, so it is 1 for a
    plain series and 0 for the zero functional; the product law multiplies
    it like any other coefficient.
    """

    terms: tuple
    lam: float
    slab: tuple
    unit: float = 1.0

    @classmethod
    def series(cls, kernels: Sequence, lam: float, slab) -> "PerturbativeFunctional":
        return cls(tuple(Term(k + 1, lam**k, K) for k, K in enumerate(kernels)), lam, tuple(slab))

    @classmethod
    def zero(cls, lam: float, slab) -> "PerturbativeFunctional":
        return cls((), lam, tuple(slab), 0.0)

    def evaluate(self, curve) -> float:
        return self.unit + float(sum(t.weight * t.kernel.boundary(curve, self.slab) for t in self.terms))

    def truncated(self, order: int) -> "PerturbativeFunctional":
        return replace(self, terms=tuple(t for t in self.terms if t.order <= order))


def product_functionals(A: PerturbativeFunctional, B: PerturbativeFunctional, max_order: int = 2) -> PerturbativeFunctional:
    """Cauchy product sum_k sum_l F^(l) (x) G^(k-l), truncated at ``max_order``.

    The order-0 factors are the units of A and B, so an order-k term of one
    series reappears scaled by the other's unit.
    """
    if A.slab != B.slab:
        raise ValueError("functionals must share the slab")
    terms = [Term(a.order, a.weight * B.unit, a.kernel) for a in A.terms if B.unit and a.order <= max_order]
    terms += [Term(b.order, A.unit * b.weight, b.kernel) for b in B.terms if A.unit and b.order <= max_order]
    terms += [
        Term(a.order + b.order, a.weight * b.weight, ProductKernel(a.kernel, b.kernel))
        for a in A.terms
        for b in B.terms
        if a.order + b.order <= max_order
    ]
    return PerturbativeFunctional(tuple(terms), A.lam, A.slab, A.unit * B.unit)


# ---------------------------------------------------------------------------
# lambda scaling


@dataclass
class ScalingConfig:
    """Inputs of the lambda study.  ``n0``/``n1`` put the slab between the
    staggered slices (n0 + 1/2) dt and (n1 + 1/2) dt.

    ``phi1`` is ``"plane:K"`` (discrete plane wave of mode K) or
    ``"gaussian"`` (the free lattice evolution of a unit Gaussian pulse).
    """

    Nx: int = 64
    Nt: int = 128
    dx: float = 0.125
    dt: float = 0.0625
    m: float = 1.0
    lambdas: tuple = tuple(np.geomspace(1e-3, 1e-1, 8))
    amplitude: float = 0.5
    phi1: str = "plane:1"
    phi1_phase: float = 0.3
    init: str = "gaussian"
    n0: int = 4
    n1: int | None = 60

    def lattice(self) -> Lattice1p1:
        return Lattice1p1(self.Nt, self.Nx, self.dt, self.dx)

    def slab(self) -> tuple:
        n1 = self.Nt - 2 if self.n1 is None else self.n1
        t0 = self.lattice().t0
        return (t0 + (self.n0 + 0.5) * self.dt, t0 + (n1 + 0.5) * self.dt)

    def with_slab_times(self, t0: float, t1: float) -> "ScalingConfig":
        """Copy whose slab is bounded by the staggered slices containing t0 and t1."""
        lat = self.lattice()
        n0, n1 = staggered_index(lat, t0), staggered_index(lat, t1)
        if n1 <= n0:
            raise ValueError("need t1 > t0 with at least one layer in between")
        return replace(self, n0=n0, n1=n1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"] = [float(v) for v in self.lambdas]
        return d


def phi1_field(kind: str, lattice: Lattice1p1, m: float, phase: float = 0.3) -> np.ndarray:
    """A discrete free solution used as Phi1: ``plane:K`` or ``gaussian``."""
    if kind.startswith("plane"):
        _, _, mode = kind.partition(":")
        return discrete_plane_wave(lattice, m, int(mode or 1), 1.0, phase)
    if kind == "gaussian":
        from .dynamics import initial_data

        return evolve_scalar(*initial_data("gaussian", lattice, m, 1.0), m, 0.0, lattice)
    raise ValueError(f"unknown Phi1 source {kind!r}; expected 'plane:K' or 'gaussian'")


def loglog_slope(lams, values):
    lams, values = np.asarray(lams, dtype=float), np.abs(np.asarray(values, dtype=float))
    if len(lams) < 2 or np.any(lams <= 0) or np.any(values <= 0):
        return None
    return float(np.polyfit(np.log(lams), np.log(values), 1)[0])


def lambda_scaling_study(cfg: ScalingConfig, workers: int = 1) -> dict:
    """R1 and R2 = R1 + lam * (F2 boundary) on interacting curves for each lambda.

    The lambda points are independent; ``workers > 1`` runs them in a thread
    pool.  Rows keep the order of ``cfg.lambdas`` either way.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .dynamics import initial_data, lift_to_curve

    lat = cfg.lattice()
    slab = cfg.slab()
    n0, n1 = staggered_index(lat, slab[0]), staggered_index(lat, slab[1])
    Phi1 = phi1_field(cfg.phi1, lat, cfg.m, cfg.phi1_phase)
    K2 = build_phi2(Phi1, retarded_green(cfg.m, lat), n0)
    F1 = F1Kernel(Phi1)
    phi0, phidot0 = initial_data(cfg.init, lat, cfg.m, cfg.amplitude)
    # fill the memoized blocks once so worker threads only read them
    if workers > 1:
        layers = (n0, n0 + 1, n1, n1 + 1)
        for a in layers:
            for b in layers:
                K2.block(a, b)

    def point(lam):
        phi = evolve_scalar(phi0, phidot0, cfg.m, lam, lat)
        curve = lift_to_curve(phi, cfg.m, lam, lat)
        r1 = F1.boundary(curve, slab)
        r2 = r1 + lam * K2.boundary(curve, slab)
        volume = lam * lat.dt * lat.dx * float(np.sum(phi[n0 + 1: n1 + 1] ** 2 * Phi1[n0 + 1: n1 + 1]))
        return {"lambda": float(lam), "R1": r1, "R2": r2, "volume": volume}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, cfg.lambdas))
    else:
        rows = [point(lam) for lam in cfg.lambdas]
    positive = [r for r in rows if r["lambda"] > 0]
    lams = [r["lambda"] for r in positive]
    slope1 = loglog_slope(lams, [r["R1"] for r in positive])
    slope2 = loglog_slope(lams, [r["R2"] for r in positive])
    return {"rows": rows, "slope1": slope1, "slope2": slope2}
