"""Smoothing projected gradient solver for the dual tracking problem.

The solver minimises the smoothed dual objective over the product
feasible set, shrinking the smoothing level geometrically between
inner descent phases.  Each phase runs projected gradient steps with
Armijo backtracking until the scaled displacement falls under a
threshold tied to the current smoothing level; the overall run stops
once the projected-gradient residual and the smoothing level are both
small, or when iteration budgets are exhausted.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError
from .model import (
    AmbiguityParams,
    DualPoint,
    ModelParams,
    SampleSet,
    evaluate_phi_n,
    var_threshold,
)
from .projections import project_feasible
from .smoothing import SmoothingParam, grad_smooth_phi, smooth_phi

__all__ = [
    "SpgParams",
    "ArmijoStep",
    "SolveResult",
    "STATUS_CONVERGED",
    "STATUS_ITERATION_CAP",
    "STATUS_STALLED",
    "default_start",
    "stationarity_residual",
    "armijo_search",
    "spg_solve",
]

STATUS_CONVERGED = "converged"
STATUS_ITERATION_CAP = "iteration-cap"
STATUS_STALLED = "stalled"

# Hard floor keeping the smoothing level representable; reached only if
# the stopping test somehow never fires within the iteration budget.
_MU_MIN = 1e-300

# Consecutive stalled inner phases tolerated before giving up.
_MAX_CONSECUTIVE_STALLS = 3


@dataclass(frozen=True)
class SpgParams:
    """Tuning constants of the smoothing projected gradient method.

    ``alpha0``, ``sigma``, ``rho`` control the Armijo backtracking
    line search; ``mu0`` and ``omega`` the initial smoothing level and
    its shrink factor; ``eta`` and ``n0`` the inner-phase exit test
    (leave after at least ``n0`` steps once the displacement per unit
    stepsize drops under ``eta`` times the smoothing level).
    ``epsilon`` bounds the projected-gradient residual and ``mu_stop``
    the smoothing level in the joint stopping test.
    ``max_inner_per_phase`` bounds one phase's descent steps; at tiny
    smoothing levels ill-conditioned instances can otherwise keep a
    phase busy indefinitely before its displacement exit fires.
    """

    alpha0: float = 1.0
    sigma: float = 1e-6
    rho: float = 0.5
    mu0: float = 1.0
    eta: float = 1e3
    omega: float = 0.5
    epsilon: float = 1e-4
    n0: int = 5
    mu_stop: float = 2e-6
    max_outer_iters: int = 3000
    max_backtracks: int = 60
    max_inner_per_phase: int = 10_000

    def __post_init__(self) -> None:
        checks = [
            (self.alpha0 > 0, "alpha0 must be positive"),
            (0.0 < self.sigma < 1.0, "sigma must lie in (0, 1)"),
            (0.0 < self.rho < 1.0, "rho must lie in (0, 1)"),
            (self.mu0 > 0, "mu0 must be positive"),
            (self.eta > 0, "eta must be positive"),
            (0.0 < self.omega < 1.0, "omega must lie in (0, 1)"),
            (self.epsilon > 0, "epsilon must be positive"),
            (self.n0 >= 1, "n0 must be at least 1"),
            (self.mu_stop > 0, "mu_stop must be positive"),
            (self.max_outer_iters >= 1, "max_outer_iters must be at least 1"),
            (self.max_backtracks >= 1, "max_backtracks must be at least 1"),
            (
                self.max_inner_per_phase >= 1,
                "max_inner_per_phase must be at least 1",
            ),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidInputError(message)


class ArmijoStep(NamedTuple):
    """Outcome of one backtracking projected-gradient step."""

    y_next: DualPoint
    objective: float
    stepsize: float
    backtracks: int
    stalled: bool


@dataclass(frozen=True)
class SolveResult:
    """Terminal state and accounting of one solver run.

    ``objective`` is the exact (unsmoothed) dual objective at ``nu``;
    ``smooth_objective`` and ``residual`` are taken at the final
    smoothing level ``mu_final``.  ``trace`` holds one
    ``(cpu_seconds, smoothed objective)`` pair per accepted inner step
    and ``phase_objectives`` the smoothed-objective sequence of every
    inner phase; both are None unless tracing was requested.
    """

    nu: DualPoint
    objective: float
    smooth_objective: float
    residual: float
    mu_final: float
    outer_iters: int
    inner_iters: int
    grad_evals: int
    wall_seconds: float
    status: str
    trace: tuple[tuple[float, float], ...] | None = None
    phase_objectives: tuple[tuple[float, ...], ...] | None = None


def default_start(samples: SampleSet, model: ModelParams) -> DualPoint:
    """Feasible starting point: uniform weights, loss quantile threshold.

    ``alpha`` starts at the value-at-risk of the uniform portfolio so
    the CVaR plus-parts begin on their kink; both multipliers start at
    zero.
    """
    d = samples.n_assets
    x = np.full(d, 1.0 / d)
    alpha = var_threshold(x, samples, model.beta)
    return DualPoint(
        x=x, alpha=alpha, q=np.zeros(d + 1), lam=np.zeros((d + 1, d + 1))
    )


def _projected_step(y: DualPoint, gflat: np.ndarray, stepsize: float) -> DualPoint:
    return project_feasible(DualPoint.from_array(y.to_array() - stepsize * gflat, y.dim))


def stationarity_residual(
    nu: DualPoint,
    samples: SampleSet,
    mu,
    amb: AmbiguityParams,
    model: ModelParams,
) -> float:
    """Norm of the unit-step projected-gradient displacement at ``nu``."""
    grad = grad_smooth_phi(nu, samples, mu, amb, model)
    moved = _projected_step(nu, grad.to_array(), 1.0)
    return float(np.linalg.norm(moved.to_array() - nu.to_array()))


def _armijo_from(
    y: DualPoint,
    fy: float,
    grad: DualPoint,
    mu: float,
    samples: SampleSet,
    amb: AmbiguityParams,
    model: ModelParams,
    spg: SpgParams,
) -> ArmijoStep:
    gflat = grad.to_array()
    yflat = y.to_array()
    stepsize = spg.alpha0
    for backtracks in range(spg.max_backtracks + 1):
        cand = _projected_step(y, gflat, stepsize)
        fc = smooth_phi(cand, samples, mu, amb, model)
        decrease = float(gflat @ (cand.to_array() - yflat))
        if fc <= fy + spg.sigma * decrease:
            return ArmijoStep(cand, fc, stepsize, backtracks, False)
        stepsize *= spg.rho
    return ArmijoStep(y, fy, stepsize, spg.max_backtracks + 1, True)


def armijo_search(
    y: DualPoint,
    mu,
    samples: SampleSet,
    amb: AmbiguityParams,
    model: ModelParams,
    spg: SpgParams = SpgParams(),
) -> ArmijoStep:
    """One Armijo-backtracked projected-gradient step from ``y``.

    Halves the trial stepsize until the sufficient-decrease test
    against the projected step passes; reports a stall after
    ``max_backtracks`` rejections instead of looping forever.
    """
    mu = mu.mu if isinstance(mu, SmoothingParam) else float(mu)
    fy = smooth_phi(y, samples, mu, amb, model)
    grad = grad_smooth_phi(y, samples, mu, amb, model)
    return _armijo_from(y, fy, grad, mu, samples, amb, model, spg)


def spg_solve(
    nu0: DualPoint,
    samples: SampleSet,
    amb: AmbiguityParams,
    model: ModelParams,
    spg: SpgParams = SpgParams(),
    record_trace: bool = False,
) -> SolveResult:
    """Minimise the dual objective by smoothing projected gradient.

    Starting from the projection of ``nu0``, alternates inner Armijo
    descent phases on the smoothed objective with geometric reduction
    of the smoothing level.  A phase is skipped when the residual is
    already below ``epsilon``; the run converges once residual and
    smoothing level are jointly small, stalls after three consecutive
    phases whose line search failed, and otherwise stops at the outer
    iteration cap.
    """
    if samples.n_assets != nu0.dim:
        raise InvalidInputError(
            f"start point has {nu0.dim} assets, samples have {samples.n_assets}"
        )
    start_time = time.perf_counter()
    nu = project_feasible(nu0)
    mu_k = spg.mu0
    grad_evals = 0
    inner_total = 0
    outer_done = 0
    consecutive_stalls = 0
    status = STATUS_ITERATION_CAP
    residual = math.inf
    trace: list[tuple[float, float]] | None = [] if record_trace else None
    phases: list[tuple[float, ...]] | None = [] if record_trace else None

    def _trace_point(value: float) -> None:
        if trace is not None:
            trace.append((time.perf_counter() - start_time, value))

    if trace is not None:
        _trace_point(smooth_phi(nu, samples, mu_k, amb, model))
    for k in range(spg.max_outer_iters):
        grad = grad_smooth_phi(nu, samples, mu_k, amb, model)
        grad_evals += 1
        moved = _projected_step(nu, grad.to_array(), 1.0)
        residual = float(np.linalg.norm(moved.to_array() - nu.to_array()))
        if residual <= spg.epsilon and mu_k <= spg.mu_stop:
            status = STATUS_CONVERGED
            outer_done = k
            break
        if residual >= spg.epsilon:
            fy = smooth_phi(nu, samples, mu_k, amb, model)
            phase_log = [fy]
            y = nu
            stalled = False
            j = 0
            while True:
                gy = grad if j == 0 else grad_smooth_phi(y, samples, mu_k, amb, model)
                if j > 0:
                    grad_evals += 1
                step = _armijo_from(y, fy, gy, mu_k, samples, amb, model, spg)
                if step.stalled:
                    stalled = True
                    break
                displacement = float(
                    np.linalg.norm(step.y_next.to_array() - y.to_array())
                )
                y = step.y_next
                fy = step.objective
                phase_log.append(fy)
                inner_total += 1
                _trace_point(fy)
                j += 1
                if j >= spg.n0 and displacement / step.stepsize < spg.eta * mu_k:
                    break
                if j >= spg.max_inner_per_phase:
                    break
            nu = y
            if phases is not None:
                phases.append(tuple(phase_log))
            if stalled:
                consecutive_stalls += 1
                if consecutive_stalls >= _MAX_CONSECUTIVE_STALLS:
                    status = STATUS_STALLED
                    outer_done = k + 1
                    break
            else:
                consecutive_stalls = 0
        else:
            consecutive_stalls = 0
        mu_k = max(spg.omega * mu_k, _MU_MIN)
        outer_done = k + 1
    else:
        status = STATUS_ITERATION_CAP

    if status != STATUS_CONVERGED:
        grad = grad_smooth_phi(nu, samples, mu_k, amb, model)
        grad_evals += 1
        moved = _projected_step(nu, grad.to_array(), 1.0)
        residual = float(np.linalg.norm(moved.to_array() - nu.to_array()))
    objective, _ = evaluate_phi_n(nu, samples, amb, model)
    return SolveResult(
        nu=nu,
        objective=objective,
        smooth_objective=smooth_phi(nu, samples, mu_k, amb, model),
        residual=residual,
        mu_final=mu_k,
        outer_iters=outer_done,
        inner_iters=inner_total,
        grad_evals=grad_evals,
        wall_seconds=time.perf_counter() - start_time,
        status=status,
        trace=tuple(trace) if trace is not None else None,
        phase_objectives=tuple(phases) if phases is not None else None,
    )
