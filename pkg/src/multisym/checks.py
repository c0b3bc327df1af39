"""Stand-alone verification checks driven by a JSON-style config.

These back ``multisym verify`` and ``multisym legendre``.  Each check returns
a plain dict report; the pass flag depends only on the residuals and the
tolerances declared in the config.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import charts, dynamics, legendre, observables, perturbation
from .acceptance import canonical_bracket_qp, free_curve, observed_order, stress_energy_form
from .exterior import DiffForm, SmoothScalar

__all__ = ["VerifyConfig", "CHECKS", "run_check", "legendre_table", "LEGENDRE_PROBLEMS"]


@dataclass
class VerifyConfig:
    """Finest grid plus ``levels`` grids in a x2 refinement ladder."""

    nx: int = 256
    nt: int = 400
    dx: float = 0.05
    dt: float = 0.025
    levels: int = 3
    m: float = 1.0
    lam: float = 0.0
    init: str = "gaussian"
    seed: int = 0
    order_tol: float = 0.3
    gap_tol: float = 1e-6
    trials: int = 100

    @classmethod
    def from_dict(cls, d: dict | None) -> "VerifyConfig":
        d = dict(d or {})
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        if cfg.levels < 1:
            raise ValueError("levels must be >= 1")
        return cfg

    def ladder(self):
        out = []
        for j in reversed(range(self.levels)):
            f = 2**j
            out.append(dynamics.Lattice1p1(self.nt // f, self.nx // f, self.dt * f, self.dx * f))
        return out

    def grid(self) -> dict:
        return {"nx": self.nx, "nt": self.nt, "dx": self.dx, "dt": self.dt}

    def to_dict(self) -> dict:
        return asdict(self)


def _ladder_report(name, cfg, residual_fn):
    ladder = cfg.ladder()
    res = [float(residual_fn(lat)) for lat in ladder]
    if len(ladder) < 2:
        raise ValueError(f"check {name!r} needs levels >= 2 to estimate an order")
    order = observed_order([lat.dx for lat in ladder], res)
    return {
        "check": name,
        "grid": cfg.grid(),
        "residual": res[-1],
        "residuals": res,
        "order_estimate": order,
        "pass": bool(abs(order - 2.0) <= cfg.order_tol),
    }


def check_flow(cfg: VerifyConfig) -> dict:
    H = legendre.phi3_hamiltonian(cfg.m, cfg.lam)
    return _ladder_report(
        "flow", cfg, lambda lat: dynamics.verify_hamilton_flow(free_curve(lat, cfg.m, cfg.lam, cfg.init), H)
    )


def check_dynrel(cfg: VerifyConfig) -> dict:
    """F1 of a continuum plane-wave solution and both stress-energy forms."""
    H = legendre.phi3_hamiltonian(cfg.m, 0.0)
    k = 2 * np.pi / cfg.ladder()[-1].length
    c = charts.DWChart.build(2, 1)
    forms = [
        perturbation.build_F1(perturbation.PlaneWave.solution(cfg.m, k, 1.0, 0.4)),
        stress_energy_form(c, 0),
        stress_energy_form(c, 1),
    ]

    def residual(lat):
        curve = free_curve(lat, cfg.m, 0.0, cfg.init)
        return max(observables.verify_dynamical_relation(curve, F, H) for F in forms)

    return _ladder_report("dynrel", cfg, residual)


def check_pairwise(cfg: VerifyConfig) -> dict:
    H = legendre.phi3_hamiltonian(cfg.m, 0.0)
    k = 2 * np.pi / cfg.ladder()[-1].length
    Fa = perturbation.build_F1(perturbation.PlaneWave(k, 1.6, 1.0, 0.1))
    Fb = perturbation.build_F1(perturbation.PlaneWave(-k, 0.4, 0.6, 1.2))
    return _ladder_report(
        "pairwise", cfg,
        lambda lat: observables.verify_pairwise_relation(free_curve(lat, cfg.m, 0.0, cfg.init), Fa, Fb, H),
    )


def check_bracket(cfg: VerifyConfig) -> dict:
    value = canonical_bracket_qp()
    residual = abs(abs(value) - 1.0)
    return {"check": "bracket", "grid": None, "residual": residual, "value": value,
            "order_estimate": None, "pass": residual == 0.0}


def check_observable(cfg: VerifyConfig) -> dict:
    """y1 dy2 on the n = k = 2 chart: NotAlgebraic yet observable."""
    c = charts.DWChart.build(2, 2)
    omega = charts.build_omega_dDW(c)
    F = DiffForm.d(c, "y2").scale(SmoothScalar.coordinate(c.index("y1"), c.dim))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    point = rng.normal(size=c.dim)
    try:
        observables.solve_xi(F, omega, point[None])
        not_algebraic = False
    except observables.NotAlgebraic:
        not_algebraic = True
    report = observables.check_observable(F, omega, point, trials=cfg.trials, rng=rng, tol=cfg.gap_tol)
    return {
        "check": "observable",
        "grid": None,
        "residual": report.max_gap,
        "pairs": report.pairs,
        "not_algebraic": not_algebraic,
        "order_estimate": None,
        "pass": bool(not_algebraic and report.max_gap <= cfg.gap_tol),
    }


CHECKS = {
    "flow": check_flow,
    "dynrel": check_dynrel,
    "pairwise": check_pairwise,
    "bracket": check_bracket,
    "observable": check_observable,
}


def run_check(name: str, config: dict | None = None) -> dict:
    cfg = VerifyConfig.from_dict(config)
    report = CHECKS[name](cfg)
    report["config"] = cfg.to_dict()
    return report


# ---------------------------------------------------------------------------
# Legendre table


LEGENDRE_PROBLEMS = {
    "trivial": (legendre.trivial_lagrangian, legendre.closed_form_trivial),
    "harmonic": (legendre.harmonic_map_lagrangian, legendre.closed_form_harmonic),
    "maxwell": (legendre.maxwell2d_lagrangian, legendre.closed_form_maxwell),
}


def _admissible_r(problem, rng):
    # keep away from the singular sets: r = 0 (trivial), |r| = 1 (harmonic), r in {0, -2} (Maxwell)
    bad = {"trivial": (0.0,), "harmonic": (-1.0, 1.0), "maxwell": (0.0, -2.0)}[problem]
    while True:
        r = rng.uniform(-2.5, 2.5)
        if min(abs(r - b) for b in bad) > 0.1:
            return r


def legendre_table(problem: str, points: int, seed: int = 0) -> list[dict]:
    """Newton Hamiltonian against the closed form at random admissible points."""
    make_L, closed = LEGENDRE_PROBLEMS[problem]
    L = make_L()
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    x = y = np.zeros(2)
    rows = []
    for _ in range(points):
        e, p = rng.normal(), rng.normal(size=(2, 2))
        r = _admissible_r(problem, rng)
        H = legendre.lepage_hamiltonian(L, x, y, (e, p, r))
        ref = closed(e, p, r)
        row = {"e": e, "p11": p[0, 0], "p12": p[0, 1], "p21": p[1, 0], "p22": p[1, 1], "r": r,
               "H": H, "H_closed": ref, "abs_error": abs(H - ref)}
        rows.append({"problem": problem, **{k: float(v) for k, v in row.items()}})
    return rows
