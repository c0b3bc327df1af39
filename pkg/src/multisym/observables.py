"""Observable (n-1)-forms, their Hamiltonian vector fields, brackets and
slice functionals, plus lattice checks of the dynamical relations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exterior import (
    DiffForm,
    Multivector,
    alternating_tensor,
    contract,
    evaluate,
    evaluate_field,
    exterior_derivative,
    interior_product,
)

__all__ = [
    "NotAlgebraic",
    "ProjectionFailure",
    "SliceOutOfRange",
    "ObservableForm",
    "ObservabilityReport",
    "contraction_matrices",
    "solve_xi",
    "make_observable",
    "pseudobracket",
    "bracket",
    "bracket_at",
    "slice_index",
    "slice_eval",
    "slice_eval_at",
    "jacobi_slice_sum",
    "verify_dynamical_relation",
    "verify_pairwise_relation",
    "check_observable",
]

CONSISTENCY_TOL = 1e-8


class NotAlgebraic(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"dF + xi ^| Omega = 0 has no solution (least-squares residual {residual:.3e})")
        self.residual = residual


class ProjectionFailure(RuntimeError):
    pass


class SliceOutOfRange(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ObservableForm:
    """An (n-1)-form with its vector field (``None`` when only known pointwise)."""

    form: DiffForm
    omega: DiffForm
    xi: tuple | None = None
    classification: str = "unchecked"

    @property
    def chart(self):
        return self.form.chart

    def d(self) -> DiffForm:
        return exterior_derivative(self.form)

    def xi_at(self, points) -> np.ndarray:
        if self.xi is not None:
            return evaluate_field(self.xi, points)
        return solve_xi(self.form, self.omega, points)


def contraction_matrices(omega: DiffForm, points) -> np.ndarray:
    """Matrices of xi -> xi ^| omega at each point, shape (..., C(dim, deg-1), dim)."""
    points = np.asarray(points, dtype=float)
    dim = omega.chart.dim
    eye = np.eye(dim)[:, None, :]
    X = Multivector(np.broadcast_to(points[..., None, :], points.shape[:-1] + (dim, dim)), eye)
    return np.swapaxes(interior_product(X, omega).dense(), -1, -2)


def solve_xi(F: DiffForm, omega: DiffForm, points, tol: float = CONSISTENCY_TOL) -> np.ndarray:
    """Pointwise solution of dF + xi ^| omega = 0; shape (..., dim)."""
    if F.degree != omega.degree - 2:
        raise ValueError("F must have degree deg(omega) - 2")
    points = np.asarray(points, dtype=float)
    A = contraction_matrices(omega, points)
    b = -exterior_derivative(F).at(points).dense()
    xi = np.einsum("...ij,...j->...i", np.linalg.pinv(A), b)
    res = np.einsum("...ij,...j->...i", A, xi) - b
    worst = float(np.max(np.abs(res))) if res.size else 0.0
    if worst > tol:
        raise NotAlgebraic(worst)
    return xi


def make_observable(F: DiffForm, omega: DiffForm, xi=None) -> ObservableForm:
    return ObservableForm(F, omega, xi, "algebraic" if xi is not None else "unchecked")


def pseudobracket(H, F: ObservableForm, points) -> np.ndarray:
    """{H, F} = -dH(xi_F) at each point."""
    points = np.asarray(points, dtype=float)
    return -np.sum(H.grad(points) * F.xi_at(points), axis=-1)


def bracket(F: ObservableForm, G: ObservableForm) -> DiffForm:
    """{F, G} = xi_F ^ xi_G ^| Omega, an (n-1)-form; needs analytic vector fields."""
    if F.xi is None or G.xi is None:
        raise ValueError("bracket needs analytic vector fields; use bracket_at for sampled ones")
    return contract(G.xi, contract(F.xi, F.omega))


def bracket_at(F: ObservableForm, G: ObservableForm, points):
    """Pointwise {F, G} as a PointForm."""
    points = np.asarray(points, dtype=float)
    factors = np.stack([F.xi_at(points), G.xi_at(points)], axis=-2)
    return interior_product(Multivector(points, factors), F.omega)


# ---------------------------------------------------------------------------
# lattice functionals and checks


def slice_index(curve, t: float) -> int:
    lat = curve.lattice
    n = int(np.floor((t - lat.t0) / lat.dt + 0.5))
    if not 0 <= n < lat.Nt:
        raise SliceOutOfRange(f"t={t} outside [{lat.t[0]}, {lat.t[-1]}]")
    return n


def slice_eval(curve, t: float, F: DiffForm) -> float:
    """Integral of F over the nearest time slice, pulled back along the x-tangent."""
    n = slice_index(curve, t)
    pts = curve.points()[n]
    X1 = curve.tangents()[n][:, 1:2, :]
    return float(np.sum(evaluate(F, X1, pts)) * curve.lattice.dx)


def slice_eval_at(curve, t: float, values) -> float:
    """Slice integral of a pointwise 1-form: ``values(points)`` returns a
    PointForm of degree 1 on the slice's sites (n = 2 curves only)."""
    if curve.n != 2:
        raise NotImplementedError("pointwise slice integrals are implemented for n = 2")
    n = slice_index(curve, t)
    pts = curve.points()[n]
    X1 = curve.tangents()[n][:, 1, :]
    return float(np.sum(values(pts).dense() * X1) * curve.lattice.dx)


def jacobi_slice_sum(curve, t: float, F: ObservableForm, G: ObservableForm, K: ObservableForm) -> float:
    """Cyclic sum of the slice integrals of {{F, G}, K}.

    The inner bracket's vector field is solved pointwise from its differential.
    """
    total = 0.0
    for A, B, C in ((F, G, K), (G, K, F), (K, F, G)):
        AB = ObservableForm(bracket(A, B), A.omega)
        total += slice_eval_at(curve, t, lambda pts: bracket_at(AB, C, pts))
    return total


def _interior(curve):
    sl = curve.interior()
    return curve.points()[sl], curve.tangents()[sl]


def verify_dynamical_relation(curve, F: ObservableForm, H) -> float:
    """max |dF(X_1, ..., X_n) - {H, F} omega(X_1, ..., X_n)| over interior sites."""
    pts, X = _interior(curve)
    lhs = evaluate(F.d(), X, pts)
    vol = np.linalg.det(X[..., :, : curve.n])
    return float(np.max(np.abs(lhs - pseudobracket(H, F, pts) * vol)))


def verify_pairwise_relation(curve, F: ObservableForm, G: ObservableForm, H) -> float:
    """max |{H, F} dG(X) - {H, G} dF(X)| over interior sites."""
    pts, X = _interior(curve)
    dF = evaluate(F.d(), X, pts)
    dG = evaluate(G.d(), X, pts)
    return float(np.max(np.abs(pseudobracket(H, F, pts) * dG - pseudobracket(H, G, pts) * dF)))


# ---------------------------------------------------------------------------
# observable but not algebraic


@dataclass
class ObservabilityReport:
    observable: bool
    max_gap: float
    pairs: int
    counterexample: tuple | None = None


def _plucker(Y):
    q = Y.shape[0]
    if q == 1:
        return Y[0]
    if q == 2:
        return (np.outer(Y[0], Y[1]) - np.outer(Y[1], Y[0]))[np.triu_indices(Y.shape[1], 1)]
    raise NotImplementedError("Plucker coordinates are implemented for q <= 2")


def _contract_dense(A, Y):
    """Y ^| A for a dense alternating (q+1)-tensor and factors Y (q, dim)."""
    out = A
    for y in Y:
        out = np.tensordot(y, out, axes=(0, 0))
    return out


def _jacobian(A, Y):
    q, dim = Y.shape
    cols = []
    for s in range(q):
        out = A
        # contract all factors except s, keeping s's slot open at the front
        for j, y in enumerate(Y):
            if j == s:
                out = np.moveaxis(out, 0, -1)
            else:
                out = np.tensordot(y, out, axes=(0, 0))
        # out[a, b]: a = remaining 1-form slot, b = slot of factor s
        cols.append(out)
    return np.concatenate(cols, axis=1)


def _project(A, target, Y0, iters=60, tol=1e-13):
    Y = Y0.copy()
    q, dim = Y.shape
    for _ in range(iters):
        r = _contract_dense(A, Y) - target
        if np.max(np.abs(r)) < tol:
            return Y
        J = _jacobian(A, Y)
        step = -np.linalg.lstsq(J, r, rcond=None)[0]
        Y = Y + step.reshape(q, dim)
    r = _contract_dense(A, Y) - target
    return Y if np.max(np.abs(r)) < 1e-11 else None


def check_observable(F: DiffForm, omega: DiffForm, point, trials: int = 100, rng=None, tol: float = 1e-6,
                     spread: float = 0.5, max_attempts: int | None = None) -> ObservabilityReport:
    """Search for decomposable X, X~ with X ^| Omega = X~ ^| Omega but dF(X) != dF(X~).

    Pairs are built by Gauss-Newton projection of a perturbed copy of X onto
    the constraint set; only pairs whose Plucker coordinates differ count.
    """
    rng = np.random.default_rng(rng)
    point = np.asarray(point, dtype=float)
    dim = omega.chart.dim
    q = omega.degree - 1
    A = alternating_tensor(omega, point)
    dF = exterior_derivative(F)
    max_attempts = max_attempts or 20 * trials
    gap, pairs, worst = 0.0, 0, None
    for _ in range(max_attempts):
        X = rng.normal(size=(q, dim))
        target = _contract_dense(A, X)
        Y = _project(A, target, X + spread * rng.normal(size=(q, dim)))
        if Y is None:
            continue
        px, py = _plucker(X), _plucker(Y)
        if np.linalg.norm(px - py) < 1e-3 * np.linalg.norm(px):
            continue
        g = abs(float(evaluate(dF, X, point) - evaluate(dF, Y, point)))
        pairs += 1
        if g > gap:
            gap, worst = g, (X, Y)
        if pairs >= trials:
            break
    if pairs < trials:
        raise ProjectionFailure(f"only {pairs} of {trials} constraint-satisfying distinct pairs found")
    ok = gap <= tol
    return ObservabilityReport(ok, gap, pairs, None if ok else worst)
