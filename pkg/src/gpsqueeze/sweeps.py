"""Sweep drivers: squeezing versus geometric phase and versus atom number,
plus power-law fitting of the N-scaling and its extrapolation.

Each sweep row is an independent evolution to the decoupling time t_1; the
coupling for a requested phase theta is lambda = (omega_c/2) sqrt(theta/2pi).
Rows are dispatched (optionally across processes) and always gathered back
in grid order, so identical specs produce identical tables.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import EvolutionSpec, evolve_master, lambda_from_theta
from .hilbert import HilbertSpace, spin_reduced
from .metrics import squeezing_report, theta_opt
from .model import DickeParams

THETA_GRID_DEFAULT = tuple(np.geomspace(0.1, 2.0, 25))
N_GRID_DEFAULT = (10, 16, 25, 40, 63, 100)
N_SWEEP_MAX_ATOMS = 100
FIT_MIN_ATOMS = 10


@dataclass(frozen=True)
class SweepSpec:
    kind: str  # "theta_sweep" | "n_sweep"
    base: DickeParams  # omega_c / kappa / omega_q / Gamma_phi; lam is set per row
    grid: tuple  # theta/theta_opt ratios, or N_a values
    theta_rule: float = 1.0  # n_sweep: theta = theta_rule * theta_opt(N)
    n_max: int = 16
    rtol: float = 1e-8
    atol: float = 1e-10
    frame: str = "lab"
    backend: str | None = None

    def __post_init__(self):
        if self.kind not in ("theta_sweep", "n_sweep"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        grid = tuple(self.grid)
        if not grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if self.kind == "n_sweep":
            if any(int(n) != n or n < 2 for n in grid):
                raise ValueError("n_sweep grid must contain integers >= 2")
            if max(grid) > N_SWEEP_MAX_ATOMS:
                raise ValueError(
                    f"n_sweep is limited to N_a <= {N_SWEEP_MAX_ATOMS}"
                )
        elif any(r <= 0 for r in grid):
            raise ValueError("theta ratios must be positive")


@dataclass(frozen=True)
class SweepRow:
    n_atoms: int
    theta_ratio: float
    theta: float
    lam: float
    xi_s_sq: float | None
    xi_R_sq: float | None
    xi_R_db: float | None
    trace_drift: float | None
    tail_pop: float | None
    status: str
    n_rhs_evals: int = 0
    error: str | None = None
    herm_drift: float | None = None
    min_eigenvalue: float | None = None


def _run_row(spec: SweepSpec, n_atoms: int, theta_ratio: float) -> SweepRow:
    theta = theta_ratio * theta_opt(n_atoms)
    lam = lambda_from_theta(theta, spec.base.omega_c)
    params = replace(spec.base, N_a=n_atoms, lam=lam)
    space = HilbertSpace(n_atoms, spec.n_max)
    try:
        result = evolve_master(EvolutionSpec(
            dicke=params, space=space, rtol=spec.rtol, atol=spec.atol,
            frame=spec.frame, backend=spec.backend,
        ))
        report = squeezing_report(spin_reduced(result.final_state, result.space), n_atoms)
        return SweepRow(
            n_atoms=n_atoms,
            theta_ratio=theta_ratio,
            theta=theta,
            lam=lam,
            xi_s_sq=report.xi_s_sq,
            xi_R_sq=report.xi_R_sq,
            xi_R_db=report.xi_R_sq_db,
            trace_drift=result.trace_drift,
            tail_pop=result.max_tail_population,
            status=result.status,
            n_rhs_evals=result.n_rhs_evals,
            herm_drift=result.hermiticity_drift,
            min_eigenvalue=result.min_eigenvalue(),
        )
    except Exception as exc:  # row failures are recorded, the sweep continues
        return SweepRow(
            n_atoms=n_atoms, theta_ratio=theta_ratio, theta=theta, lam=lam,
            xi_s_sq=None, xi_R_sq=None, xi_R_db=None,
            trace_drift=None, tail_pop=None,
            status="error", error=f"{type(exc).__name__}: {exc}",
        )


def _row_inputs(spec: SweepSpec):
    if spec.kind == "theta_sweep":
        return [(spec.base.N_a, float(r)) for r in spec.grid]
    return [(int(n), spec.theta_rule) for n in spec.grid]


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    inputs = _row_inputs(spec)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_row, spec, n, r) for n, r in inputs]
            return [f.result() for f in futures]  # gathered in grid order
    return [_run_row(spec, n, r) for n, r in inputs]


def run_theta_sweep(spec: SweepSpec, workers: int = 1) -> list:
    if spec.kind != "theta_sweep":
        raise ValueError("spec.kind must be 'theta_sweep'")
    return run_sweep(spec, workers)


def run_n_sweep(spec: SweepSpec, workers: int = 1) -> list:
    if spec.kind != "n_sweep":
        raise ValueError("spec.kind must be 'n_sweep'")
    return run_sweep(spec, workers)


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    r_squared: float
    n_points: int
    residuals: tuple  # log-space residuals, one per fitted point
    sensitivity: dict = field(default_factory=dict)  # fit-range variations of b


def fit_power_law(points) -> FitResult:
    """Least-squares fit of xi_R^2 = a * N^b in (ln N, ln xi_R^2)."""
    pts = [(float(n), float(x)) for n, x in points]
    if len(pts) < 3:
        raise ValueError("power-law fit needs at least 3 points")
    if any(x <= 0 for _, x in pts):
        raise ValueError("all xi_R^2 values must be positive")
    ns = np.array([n for n, _ in pts])
    if np.all(ns == ns[0]):
        raise ValueError("degenerate grid: all N equal")
    logn = np.log(ns)
    logx = np.log(np.array([x for _, x in pts]))

    def line_fit(lx, ly):
        slope, intercept = np.polyfit(lx, ly, 1)
        return slope, intercept

    b, intercept = line_fit(logn, logx)
    pred = b * logn + intercept
    resid = logx - pred
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((logx - logx.mean()) ** 2))
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    sensitivity = {}
    if len(pts) >= 4:
        sensitivity["b_drop_smallest_n"] = float(line_fit(logn[1:], logx[1:])[0])
        sensitivity["b_drop_largest_n"] = float(line_fit(logn[:-1], logx[:-1])[0])

    return FitResult(
        a=float(np.exp(intercept)),
        b=float(b),
        r_squared=float(r_sq),
        n_points=len(pts),
        residuals=tuple(float(r) for r in resid),
        sensitivity=sensitivity,
    )


def fit_sweep_rows(rows, min_n: int = FIT_MIN_ATOMS) -> FitResult:
    """Fit an n-sweep table, using only rows that passed all diagnostics."""
    points = [
        (row.n_atoms, row.xi_R_sq)
        for row in rows
        if row.status == "ok" and row.n_atoms >= min_n and row.xi_R_sq is not None
    ]
    return fit_power_law(points)


def extrapolate(fit: FitResult, n_target: float) -> dict:
    """Evaluate the fitted power law at n_target; never a simulation result."""
    xi = fit.a * n_target**fit.b
    return {
        "n_target": float(n_target),
        "xi_R_sq": float(xi),
        "db": float(-10.0 * np.log10(xi)),
        "label": "EXTRAPOLATED",
    }
