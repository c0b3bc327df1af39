"""Exterior calculus on a single coordinate chart.

Coefficients are :class:`SmoothScalar` objects: vectorised value/gradient
closures (optionally with a Hessian), evaluated on point arrays of shape
``(..., dim)``.  Forms are stored in basis-tuple normal form: strictly
increasing index tuples with the permutation sign absorbed into the
coefficient.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Chart",
    "SmoothScalar",
    "DiffForm",
    "PointForm",
    "Multivector",
    "ChartMismatch",
    "DegreeError",
    "basis_tuples",
    "wedge",
    "exterior_derivative",
    "interior_product",
    "contract",
    "evaluate",
    "alternating_tensor",
    "vector_field",
]


class ChartMismatch(ValueError):
    pass


class DegreeError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate labels in {names}")
        if not names:
            raise ValueError("a chart needs at least one coordinate")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, label: str) -> int:
        try:
            return self.names.index(label)
        except ValueError:
            raise KeyError(f"no coordinate {label!r} in chart {self.names}") from None

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "names": list(self.names)})


def basis_tuples(dim: int, degree: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(dim), degree))


def _sort_sign(indices: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``indices`` (0 on repeats) and the sorted tuple."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return 0, tuple(sorted(idx))
    sign = 1
    # bubble sort; tuples here have length <= dim, which is small
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


# ---------------------------------------------------------------------------
# scalars


def _lead(z):
    return np.asarray(z, dtype=float).shape[:-1]


@dataclass(frozen=True, eq=False)
class SmoothScalar:
    """A smooth function on a chart with an exact gradient.

    ``value(z)`` maps ``(..., dim)`` to ``(...)``; ``gradient(z)`` to
    ``(..., dim)``; ``hessian(z)``, when present, to ``(..., dim, dim)``.
    ``deps`` lists the coordinates the function can depend on (``None``
    means unknown).  ``affine`` is ``(c0, c)`` when the function is exactly
    ``c0 + c . z``; such scalars have exact constant partials.
    """

    dim: int
    value: Callable
    gradient: Callable
    hessian: Callable | None = None
    deps: frozenset | None = None
    affine: tuple | None = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float, dim: int) -> "SmoothScalar":
        c = float(c)
        return cls._from_affine(c, np.zeros(dim))

    @classmethod
    def coordinate(cls, i: int, dim: int) -> "SmoothScalar":
        vec = np.zeros(dim)
        vec[i] = 1.0
        return cls._from_affine(0.0, vec)

    @classmethod
    def _from_affine(cls, c0: float, vec: np.ndarray) -> "SmoothScalar":
        vec = np.asarray(vec, dtype=float)
        dim = vec.shape[0]
        nz = np.flatnonzero(vec)

        def value(z):
            z = np.asarray(z, dtype=float)
            out = np.full(z.shape[:-1], c0)
            for i in nz:
                out = out + vec[i] * z[..., i]
            return out

        def gradient(z):
            return np.broadcast_to(vec, _lead(z) + (dim,)).copy()

        def hessian(z):
            return np.zeros(_lead(z) + (dim, dim))

        return cls(dim, value, gradient, hessian, frozenset(int(i) for i in nz), (c0, vec))

    # -- evaluation -------------------------------------------------------
    def __call__(self, z):
        return self.value(z)

    def grad(self, z):
        return self.gradient(z)

    def hess(self, z):
        if self.hessian is None:
            raise ValueError("second derivatives are not available for this scalar")
        return self.hessian(z)

    @property
    def is_constant(self) -> bool:
        return self.affine is not None and not np.any(self.affine[1])

    @property
    def is_zero(self) -> bool:
        return self.is_constant and self.affine[0] == 0.0

    def depends_on(self, i: int) -> bool:
        return self.deps is None or i in self.deps

    def partial(self, a: int) -> "SmoothScalar":
        if not self.depends_on(a):
            return SmoothScalar.constant(0.0, self.dim)
        if self.affine is not None:
            return SmoothScalar.constant(self.affine[1][a], self.dim)
        grad, hess = self.gradient, self.hessian

        def second(z):
            if hess is None:
                raise ValueError("cannot differentiate twice: no Hessian supplied")
            return hess(z)[..., a, :]

        return SmoothScalar(self.dim, lambda z: grad(z)[..., a], second, None, self.deps)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "SmoothScalar":
        if isinstance(other, SmoothScalar):
            if other.dim != self.dim:
                raise ChartMismatch("scalars live on charts of different dimension")
            return other
        return SmoothScalar.constant(float(other), self.dim)

    def __add__(self, other):
        g = self._coerce(other)
        f = self
        if f.is_zero:
            return g
        if g.is_zero:
            return f
        if f.affine is not None and g.affine is not None:
            return SmoothScalar._from_affine(f.affine[0] + g.affine[0], f.affine[1] + g.affine[1])
        hess = None
        if f.hessian is not None and g.hessian is not None:
            hess = lambda z: f.hessian(z) + g.hessian(z)
        return SmoothScalar(
            self.dim,
            lambda z: f.value(z) + g.value(z),
            lambda z: f.gradient(z) + g.gradient(z),
            hess,
            _union(f.deps, g.deps),
        )

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        g = self._coerce(other)
        f = self
        if f.is_constant or g.is_constant:
            if g.is_constant:
                f, g = g, f
            c = f.affine[0]
            if c == 0.0:
                return SmoothScalar.constant(0.0, self.dim)
            if c == 1.0:
                return g
            if g.affine is not None:
                return SmoothScalar._from_affine(c * g.affine[0], c * g.affine[1])
            hess = None if g.hessian is None else (lambda z: c * g.hessian(z))
            return SmoothScalar(
                self.dim, lambda z: c * g.value(z), lambda z: c * g.gradient(z), hess, g.deps
            )

        def gradient(z):
            return f.value(z)[..., None] * g.gradient(z) + g.value(z)[..., None] * f.gradient(z)

        hess = None
        if f.hessian is not None and g.hessian is not None:

            def hess(z):
                fv, gv = f.value(z)[..., None, None], g.value(z)[..., None, None]
                fg, gg = f.gradient(z), g.gradient(z)
                cross = fg[..., :, None] * gg[..., None, :]
                return fv * g.hessian(z) + gv * f.hessian(z) + cross + np.swapaxes(cross, -1, -2)

        return SmoothScalar(
            self.dim, lambda z: f.value(z) * g.value(z), gradient, hess, _union(f.deps, g.deps)
        )

    __rmul__ = __mul__


def _union(a, b):
    if a is None or b is None:
        return None
    return a | b


def vector_field(chart: Chart, components: Mapping[str, SmoothScalar | float]) -> tuple:
    """A tangent vector field given by label -> component; missing labels are zero."""
    out = [SmoothScalar.constant(0.0, chart.dim) for _ in range(chart.dim)]
    for label, comp in components.items():
        if not isinstance(comp, SmoothScalar):
            comp = SmoothScalar.constant(comp, chart.dim)
        out[chart.index(label)] = comp
    return tuple(out)


def evaluate_field(field: Sequence[SmoothScalar], z) -> np.ndarray:
    return np.stack([c(z) for c in field], axis=-1)


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True, eq=False)
class DiffForm:
    chart: Chart
    degree: int
    terms: Mapping[tuple, SmoothScalar] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.degree <= self.chart.dim:
            raise DegreeError(f"degree {self.degree} invalid on a {self.chart.dim}-dim chart")
        clean = {}
        for key, coeff in self.terms.items():
            key = tuple(int(k) for k in key)
            if len(key) != self.degree:
                raise DegreeError(f"tuple {key} does not match degree {self.degree}")
            if any(b <= a for a, b in zip(key, key[1:])) or any(k >= self.chart.dim or k < 0 for k in key):
                raise ValueError(f"index tuple {key} is not strictly increasing within the chart")
            if not isinstance(coeff, SmoothScalar):
                coeff = SmoothScalar.constant(coeff, self.chart.dim)
            if not coeff.is_zero:
                clean[key] = coeff
        object.__setattr__(self, "terms", clean)

    # -- builders ---------------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "DiffForm":
        return cls(chart, degree, {})

    @classmethod
    def function(cls, chart: Chart, f: SmoothScalar | float) -> "DiffForm":
        return cls(chart, 0, {(): f})

    @classmethod
    def coordinate(cls, chart: Chart, label: str) -> "DiffForm":
        """The coordinate function ``label`` as a 0-form."""
        return cls.function(chart, SmoothScalar.coordinate(chart.index(label), chart.dim))

    @classmethod
    def d(cls, chart: Chart, *labels: str) -> "DiffForm":
        """The basis form dz^a ^ dz^b ^ ... for the given labels (any order)."""
        sign, key = _sort_sign([chart.index(lab) for lab in labels])
        if sign == 0:
            return cls.zero(chart, len(labels))
        return cls(chart, len(labels), {key: float(sign)})

    # -- algebra ----------------------------------------------------------
    def _check(self, other: "DiffForm"):
        if other.chart != self.chart:
            raise ChartMismatch("forms live on different charts")
        if other.degree != self.degree:
            raise DegreeError("cannot add forms of different degree")

    def __add__(self, other: "DiffForm") -> "DiffForm":
        self._check(other)
        terms = dict(self.terms)
        for key, c in other.terms.items():
            _accumulate(terms, key, c)
        return DiffForm(self.chart, self.degree, terms)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f: SmoothScalar | float) -> "DiffForm":
        return DiffForm(self.chart, self.degree, {k: c * f for k, c in self.terms.items()})

    __mul__ = scale
    __rmul__ = scale

    def __xor__(self, other: "DiffForm") -> "DiffForm":
        return wedge(self, other)

    # -- evaluation -------------------------------------------------------
    def at(self, z) -> "PointForm":
        z = np.asarray(z, dtype=float)
        return PointForm(self.chart, self.degree, {k: c(z) for k, c in self.terms.items()}, _lead(z))

    def coefficient(self, labels: Sequence[str]) -> SmoothScalar:
        sign, key = _sort_sign([self.chart.index(lab) for lab in labels])
        c = self.terms.get(key)
        if c is None or sign == 0:
            return SmoothScalar.constant(0.0, self.chart.dim)
        return c * float(sign)

    def __repr__(self):
        parts = []
        for key in sorted(self.terms):
            name = "^".join("d" + self.chart.names[i] for i in key) or "1"
            c = self.terms[key]
            coef = f"{c.affine[0]:g}" if c.is_constant else "f"
            parts.append(f"{coef}*{name}")
        return f"DiffForm(deg={self.degree}, " + (" + ".join(parts) or "0") + ")"


def _accumulate(terms: dict, key: tuple, coeff: SmoothScalar):
    if key in terms:
        coeff = terms[key] + coeff
    if coeff.is_zero:
        terms.pop(key, None)
    else:
        terms[key] = coeff


@dataclass(frozen=True, eq=False)
class PointForm:
    """Values of a form's coefficients at a batch of points.

    ``values`` maps basis tuples to arrays of shape ``batch``.
    """

    chart: Chart
    degree: int
    values: Mapping[tuple, np.ndarray]
    batch: tuple = ()

    def get(self, key: tuple) -> np.ndarray:
        v = self.values.get(tuple(key))
        if v is None:
            return np.zeros(self.batch)
        return np.broadcast_to(v, self.batch)

    def dense(self) -> np.ndarray:
        """Coefficients on all basis tuples in lexicographic order: ``batch + (C(dim, q),)``."""
        keys = basis_tuples(self.chart.dim, self.degree)
        return np.stack([self.get(k) for k in keys], axis=-1)

    def __sub__(self, other: "PointForm") -> "PointForm":
        keys = set(self.values) | set(other.values)
        batch = np.broadcast_shapes(self.batch, other.batch)
        return PointForm(self.chart, self.degree, {k: self.get(k) - other.get(k) for k in keys}, batch)

    def max_abs(self) -> float:
        if not self.values:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self.values.values()))


@dataclass(frozen=True)
class Multivector:
    """Decomposable multivector X_1 ^ ... ^ X_q attached to (a batch of) points.

    ``point`` has shape ``(..., dim)`` and ``factors`` ``(..., q, dim)``.
    """

    point: np.ndarray
    factors: np.ndarray

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        factors = np.asarray(self.factors, dtype=float)
        if factors.ndim < 2 or factors.shape[-1] != point.shape[-1]:
            raise ValueError("factors must have shape (..., q, dim) matching the point")
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "factors", factors)

    @property
    def order(self) -> int:
        return self.factors.shape[-2]


# ---------------------------------------------------------------------------
# operations


def wedge(alpha: DiffForm, beta: DiffForm) -> DiffForm:
    if alpha.chart != beta.chart:
        raise ChartMismatch("cannot wedge forms on different charts")
    q = alpha.degree + beta.degree
    if q > alpha.chart.dim:
        raise DegreeError(f"wedge degree {q} exceeds chart dimension {alpha.chart.dim}")
    terms: dict = {}
    for ka, ca in alpha.terms.items():
        for kb, cb in beta.terms.items():
            sign, key = _sort_sign(ka + kb)
            if sign:
                _accumulate(terms, key, (ca * cb) * float(sign))
    return DiffForm(alpha.chart, q, terms)


def exterior_derivative(alpha: DiffForm) -> DiffForm:
    dim = alpha.chart.dim
    if alpha.degree == dim:
        raise DegreeError("d of a top-degree form leaves the chart")
    terms: dict = {}
    for key, c in alpha.terms.items():
        for a in range(dim):
            if a in key or not c.depends_on(a):
                continue
            sign, new = _sort_sign((a,) + key)
            part = c.partial(a)
            if not part.is_zero:
                _accumulate(terms, new, part * float(sign))
    return DiffForm(alpha.chart, alpha.degree + 1, terms)


def _det(m: np.ndarray) -> np.ndarray:
    q = m.shape[-1]
    if q == 0:
        return np.ones(m.shape[:-2])
    if q == 1:
        return m[..., 0, 0]
    if q == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if q == 3:
        return (
            m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
        )
    return np.linalg.det(m)


def _splits(degree: int, q: int):
    """(positions taken by the multivector, remaining positions, shuffle sign)."""
    for taken in itertools.combinations(range(degree), q):
        rest = tuple(i for i in range(degree) if i not in taken)
        sign = -1.0 if (sum(taken) - q * (q - 1) // 2) % 2 else 1.0
        yield taken, rest, sign


def interior_product(X: Multivector, omega: DiffForm) -> PointForm:
    """X ^| omega at X.point: the form V -> omega(X_1, ..., X_q, V, ...)."""
    q = X.order
    if X.point.shape[-1] != omega.chart.dim:
        raise ChartMismatch("multivector and form live on charts of different dimension")
    if omega.degree < q:
        raise DegreeError(f"cannot contract a {q}-vector into a {omega.degree}-form")
    batch = np.broadcast_shapes(X.point.shape[:-1], X.factors.shape[:-2])
    out: dict = {}
    for key, coeff in omega.terms.items():
        cval = coeff(X.point)
        for taken, rest, sign in _splits(omega.degree, q):
            cols = [key[i] for i in taken]
            minor = _det(X.factors[..., :, cols])
            contrib = sign * cval * minor
            rkey = tuple(key[i] for i in rest)
            out[rkey] = out[rkey] + contrib if rkey in out else contrib
    return PointForm(omega.chart, omega.degree - q, out, batch)


def evaluate(alpha: DiffForm, vectors, point) -> np.ndarray:
    """alpha(V_1, ..., V_q) at ``point``; ``vectors`` has shape ``(..., q, dim)``."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape[-2] != alpha.degree:
        raise DegreeError(f"a {alpha.degree}-form needs {alpha.degree} vectors, got {vectors.shape[-2]}")
    return interior_product(Multivector(point, vectors), alpha).get(())


def contract(xi: Sequence[SmoothScalar], alpha: DiffForm) -> DiffForm:
    """xi ^| alpha for a vector field with SmoothScalar components."""
    if len(xi) != alpha.chart.dim:
        raise ChartMismatch("vector field has the wrong number of components")
    if alpha.degree == 0:
        raise DegreeError("cannot contract into a 0-form")
    terms: dict = {}
    for key, c in alpha.terms.items():
        for pos, a in enumerate(key):
            comp = xi[a]
            if comp.is_zero:
                continue
            rest = key[:pos] + key[pos + 1:]
            sign = -1.0 if pos % 2 else 1.0
            _accumulate(terms, rest, (c * comp) * sign)
    return DiffForm(alpha.chart, alpha.degree - 1, terms)


def alternating_tensor(alpha: DiffForm, point) -> np.ndarray:
    """Dense fully antisymmetric array ``alpha_{a b c ...}`` at a single point."""
    dim, q = alpha.chart.dim, alpha.degree
    out = np.zeros((dim,) * q)
    point = np.asarray(point, dtype=float)
    for key, c in alpha.terms.items():
        val = float(c(point))
        for perm in itertools.permutations(range(q)):
            sign, _ = _sort_sign(perm)
            out[tuple(key[i] for i in perm)] = sign * val
    return out


def sum_forms(forms: Iterable[DiffForm]) -> DiffForm:
    forms = list(forms)
    total = forms[0]
    for f in forms[1:]:
        total = total + f
    return total
