"""Accelerated universal solver for composite sums, with tracing.

``ufgm_solve`` runs the universal fast gradient method: an accelerated
proximal scheme that needs only a target accuracy ``epsilon`` and learns a
working quadratic-model constant by doubling, so no smoothness constants
are ever supplied.  ``r_ufgm_solve`` wraps it in an epsilon-halving restart
schedule for problems whose optimal value is known.  Projected subgradient
descent and weighted regularized dual averaging are included as benchmark
baselines.

Every outer iteration appends one :class:`TraceRecord`; the records carry
enough state (A_k, phi_k^*, objective) for the gap certificate

    A_k * (F(y_k) + psi(y_k) - epsilon / 2)  <=  phi_k^*

to be re-checked offline from a serialized trace.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BacktrackExhausted, ConfigError, NumericalError
from .geometry import composite_step, model_argmin
from .problems import CompositeProblem

_L_FLOOR = 1e-300


class StopReason(enum.Enum):
    CONVERGED = "converged"
    BUDGET = "budget"
    ERROR = "error"


@dataclass(frozen=True)
class KnownOptimum:
    """Stop once F(y) + psi(y) - p_star <= tol."""

    p_star: float
    tol: float


@dataclass(frozen=True)
class CertificateStop:
    """Stop once the computable gap certificate reaches epsilon.

    ``distance_bound`` must upper-bound xi(x0, x_star); the model minimum
    phi_k^* then yields the lower bound (phi_k^* - distance_bound) / A_k on
    the optimal value.
    """

    distance_bound: float


@dataclass(frozen=True)
class BudgetStop:
    """Run until the iteration budget is spent."""


StopRule = KnownOptimum | CertificateStop | BudgetStop


@dataclass
class SolverConfig:
    epsilon: float
    l0: float = 1.0
    max_iters: int = 1000
    max_doublings: int = 60
    stop: StopRule = field(default_factory=BudgetStop)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.l0 <= 0:
            raise ConfigError("l0 must be positive")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.max_doublings < 1:
            raise ConfigError("max_doublings must be at least 1")


@dataclass(frozen=True)
class TraceRecord:
    """One completed outer iteration (all quantities post-update)."""

    k: int
    i_k: int
    A_k: float
    a_k: float
    L_k: float
    tau_k: float
    obj: float
    phi_star: float
    cert_gap: float
    oracle_calls: int
    wall_ns: int


@dataclass(frozen=True)
class EpochRecord:
    """One restart epoch: its accuracy target and what it used."""

    index: int
    epsilon: float
    iterations: int
    final_objective: float
    oracle_calls: int
    l_final: float


@dataclass
class RunResult:
    y: np.ndarray
    objective: float
    iterations: int
    oracle_calls: int
    stop_reason: StopReason
    trace: list[TraceRecord]
    epochs: list[EpochRecord] | None = None


@dataclass
class SolverState:
    """All per-iteration solver quantities.

    ``g_acc`` and ``c_acc`` decompose the accumulated affine model so that
    its minimum phi_star is recomputable in O(n):  g_acc sums a_i * grad_i
    and c_acc sums a_i * (F(x_i) - <grad_i, x_i>).
    """

    k: int
    x0: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    A: float
    L: float
    g_acc: np.ndarray
    c_acc: float
    phi_star: float
    f_y: float
    calls_start: int


def solve_a(A: float, L_hat: float) -> float:
    """Positive root of L_hat * a^2 - a - A = 0 (the coupling equation
    a^2 = (A + a) / L_hat).  The discriminant is always >= 1."""
    if A < 0 or L_hat <= 0:
        raise ValueError("require A >= 0 and L_hat > 0")
    return (1.0 + math.sqrt(1.0 + 4.0 * L_hat * A)) / (2.0 * L_hat)


def init_state(problem: CompositeProblem, x0, config: SolverConfig) -> SolverState:
    """Evaluate the start point (one oracle call) and seed the state."""
    x0 = np.asarray(x0, dtype=float).copy()
    calls_start = problem.oracle_calls
    f0 = problem.evaluate(x0)
    return SolverState(
        k=0,
        x0=x0,
        x=x0.copy(),
        y=x0.copy(),
        v=x0.copy(),
        A=0.0,
        L=config.l0,
        g_acc=np.zeros_like(x0),
        c_acc=0.0,
        phi_star=0.0,
        f_y=f0.value,
        calls_start=calls_start,
    )


def ufgm_step(
    state: SolverState,
    problem: CompositeProblem,
    config: SolverConfig,
    wall_origin_ns: int | None = None,
) -> TraceRecord:
    """One outer iteration: doubling search, prox step, model update.

    Starting from i = 0, each trial solves the coupling equation at the
    inflated constant 2^i * L, forms the momentum point and the prox step,
    and tests the inexact descent inequality

        F(y') <= F(x') + <grad F(x'), y' - x'> + 2^{i-1} L ||y' - x'||^2
                 + eps * tau / 2

    with additive slack 1e-12 * (1 + |F(x')|) against round-off.  The first
    passing trial is accepted; L is then set to half the accepted constant
    (it may shrink on immediate acceptance, floored at 1e-300).
    """
    eps = config.epsilon
    simple = problem.simple
    geometry = problem.geometry
    for i in range(config.max_doublings + 1):
        L_hat = math.ldexp(state.L, i)  # 2^i * L, exact
        a = solve_a(state.A, L_hat)
        A_next = state.A + a
        if not (math.isfinite(a) and math.isfinite(A_next)):
            raise NumericalError("step coupling produced non-finite coefficients")
        tau = a / A_next
        x_trial = tau * state.v + (1.0 - tau) * state.y
        fx = problem.evaluate(x_trial)
        x_hat = composite_step(geometry, simple, state.v, fx.grad, a)
        y_trial = tau * x_hat + (1.0 - tau) * state.y
        fy = problem.evaluate(y_trial)
        dy = y_trial - x_trial
        rhs = (
            fx.value
            + float(fx.grad @ dy)
            + 0.5 * L_hat * float(dy @ dy)
            + 0.5 * eps * tau
        )
        if fy.value <= rhs + 1e-12 * (1.0 + abs(fx.value)):
            break
    else:
        raise BacktrackExhausted(
            f"no acceptable step after {config.max_doublings} doublings "
            f"(L reached {math.ldexp(state.L, config.max_doublings):.3e})"
        )

    state.x = x_trial
    state.y = y_trial
    state.f_y = fy.value
    state.A = A_next
    state.L = max(0.5 * L_hat, _L_FLOOR)
    state.g_acc = state.g_acc + a * fx.grad
    state.c_acc += a * (fx.value - float(fx.grad @ x_trial))
    state.v, reduced = model_argmin(geometry, simple, state.x0, state.g_acc, state.A)
    state.phi_star = reduced + state.c_acc
    state.k += 1

    obj = fy.value + simple.value(y_trial)
    cert_gap = state.A * (obj - 0.5 * eps) - state.phi_star
    wall = 0 if wall_origin_ns is None else time.perf_counter_ns() - wall_origin_ns
    return TraceRecord(
        k=state.k,
        i_k=i,
        A_k=state.A,
        a_k=a,
        L_k=state.L,
        tau_k=tau,
        obj=obj,
        phi_star=state.phi_star,
        cert_gap=cert_gap,
        oracle_calls=problem.oracle_calls - state.calls_start,
        wall_ns=wall,
    )


def _stop_hit(stop: StopRule, obj: float, state: SolverState, eps: float) -> bool:
    if isinstance(stop, KnownOptimum):
        return obj - stop.p_star <= stop.tol
    if isinstance(stop, CertificateStop):
        if state.A <= 0.0:
            return False
        lower = (state.phi_star - stop.distance_bound) / state.A
        return obj - lower <= eps
    return False


def ufgm_solve(problem: CompositeProblem, x0, config: SolverConfig) -> RunResult:
    """Run the universal fast gradient method from x0 (must lie in Q).

    Iterates until the stop rule fires or the budget is spent.  With
    ``KnownOptimum`` the start point itself is tested first, so an already
    optimal x0 returns in zero iterations.
    """
    state = init_state(problem, x0, config)
    origin = time.perf_counter_ns()
    obj = state.f_y + problem.simple.value(state.x0)
    trace: list[TraceRecord] = []
    if _stop_hit(config.stop, obj, state, config.epsilon):
        return RunResult(
            y=state.y.copy(),
            objective=obj,
            iterations=0,
            oracle_calls=problem.oracle_calls - state.calls_start,
            stop_reason=StopReason.CONVERGED,
            trace=trace,
        )
    reason = StopReason.BUDGET
    while state.k < config.max_iters:
        rec = ufgm_step(state, problem, config, wall_origin_ns=origin)
        trace.append(rec)
        obj = rec.obj
        if _stop_hit(config.stop, obj, state, config.epsilon):
            reason = StopReason.CONVERGED
            break
    return RunResult(
        y=state.y.copy(),
        objective=obj,
        iterations=state.k,
        oracle_calls=problem.oracle_calls - state.calls_start,
        stop_reason=reason,
        trace=trace,
    )


def r_ufgm_solve(
    problem: CompositeProblem, z0, config: SolverConfig, target_eps: float
) -> RunResult:
    """Epsilon-halving restarts of the universal method.

    Requires ``problem.p_star``.  The first epoch targets half the initial
    gap; each later epoch restarts from the previous output with the target
    halved, until the target reaches ``target_eps``.  The returned point is
    a ``target_eps``-minimizer.  ``config.max_iters`` caps each epoch; an
    epoch that exhausts it ends the run with ``StopReason.BUDGET``.
    """
    if problem.p_star is None:
        raise ConfigError("restarted solve requires a problem with known p_star")
    if target_eps <= 0:
        raise ConfigError("target accuracy must be positive")
    p_star = problem.p_star
    z = np.asarray(z0, dtype=float).copy()
    calls_start = problem.oracle_calls
    f0 = problem.evaluate(z)
    obj = f0.value + problem.simple.value(z)
    gap0 = obj - p_star
    epochs: list[EpochRecord] = []
    trace: list[TraceRecord] = []
    if gap0 <= target_eps:
        return RunResult(
            y=z,
            objective=obj,
            iterations=0,
            oracle_calls=problem.oracle_calls - calls_start,
            stop_reason=StopReason.CONVERGED,
            trace=trace,
            epochs=epochs,
        )
    eps_n = gap0 / 2.0
    total_iters = 0
    n = 0
    while True:
        sub = SolverConfig(
            epsilon=eps_n,
            l0=config.l0,
            max_iters=config.max_iters,
            max_doublings=config.max_doublings,
            stop=KnownOptimum(p_star, eps_n),
        )
        calls_before = problem.oracle_calls
        res = ufgm_solve(problem, z, sub)
        for rec in res.trace:
            trace.append(
                replace(
                    rec,
                    k=rec.k + total_iters,
                    oracle_calls=rec.oracle_calls + (calls_before - calls_start),
                )
            )
        l_final = res.trace[-1].L_k if res.trace else config.l0
        epochs.append(
            EpochRecord(
                index=n,
                epsilon=eps_n,
                iterations=res.iterations,
                final_objective=res.objective,
                oracle_calls=problem.oracle_calls - calls_before,
                l_final=l_final,
            )
        )
        total_iters += res.iterations
        z = res.y
        obj = res.objective
        if res.stop_reason is not StopReason.CONVERGED:
            return RunResult(
                y=z,
                objective=obj,
                iterations=total_iters,
                oracle_calls=problem.oracle_calls - calls_start,
                stop_reason=StopReason.BUDGET,
                trace=trace,
                epochs=epochs,
            )
        if eps_n <= target_eps:
            break
        eps_n /= 2.0
        n += 1
    return RunResult(
        y=z,
        objective=obj,
        iterations=total_iters,
        oracle_calls=problem.oracle_calls - calls_start,
        stop_reason=StopReason.CONVERGED,
        trace=trace,
        epochs=epochs,
    )


def _baseline_record(k, obj_best, calls, origin) -> TraceRecord:
    wall = 0 if origin is None else time.perf_counter_ns() - origin
    return TraceRecord(
        k=k,
        i_k=0,
        A_k=0.0,
        a_k=0.0,
        L_k=0.0,
        tau_k=0.0,
        obj=obj_best,
        phi_star=0.0,
        cert_gap=0.0,
        oracle_calls=calls,
        wall_ns=wall,
    )


def subgradient_solve(
    problem: CompositeProblem,
    x0,
    c: float,
    iters: int,
    track_wall: bool = False,
    on_divergence: str = "raise",
) -> RunResult:
    """Projected subgradient descent with diminishing steps c / (k + 1).

    Records the best objective (F + psi) seen so far in each trace row, so
    the logged curve is non-increasing by construction.  Divergence to
    non-finite values raises by default; ``on_divergence="stop"`` instead
    ends the run with the partial trace and ``StopReason.ERROR`` (used by
    benchmark comparisons, where a diverging parameterization is a result).
    """
    if c <= 0:
        raise ConfigError("step constant must be positive")
    x = np.asarray(x0, dtype=float).copy()
    simple = problem.simple
    calls_start = problem.oracle_calls
    origin = time.perf_counter_ns() if track_wall else None
    best = math.inf
    trace: list[TraceRecord] = []
    reason = StopReason.BUDGET
    iterations = 0
    for k in range(iters):
        try:
            ev = problem.evaluate(x)
        except NumericalError:
            if on_divergence == "stop":
                reason = StopReason.ERROR
                break
            raise
        best = min(best, ev.value + simple.value(x))
        trace.append(
            _baseline_record(k + 1, best, problem.oracle_calls - calls_start, origin)
        )
        iterations = k + 1
        x = simple.project(x - (c / (k + 1.0)) * ev.grad)
        if not np.all(np.isfinite(x)):
            if on_divergence == "stop":
                reason = StopReason.ERROR
                break
            raise NumericalError("subgradient iterate diverged to non-finite values")
    return RunResult(
        y=x,
        objective=best,
        iterations=iterations,
        oracle_calls=problem.oracle_calls - calls_start,
        stop_reason=reason,
        trace=trace,
    )


RDA_SCHEDULES = ("short", "medium", "long")


def rda_solve(
    problem: CompositeProblem,
    x0,
    schedule: str,
    iters: int,
    track_wall: bool = False,
    on_divergence: str = "raise",
) -> RunResult:
    """Weighted regularized dual averaging.

    With 1-based step index k, gradient weights lambda_k in {1, k, k^2}
    (schedules short / medium / long) and beta_k = sqrt(k):

        x_{k+1} = argmin_{x in Q}  sum_{i<=k} lambda_i <g_i, x>
                  + (sum_{i<=k} lambda_i) psi(x) + beta_k xi(x0, x)

    which the Euclidean prox resolves as prox(x0 - S_k / beta_k) with scale
    Lambda_k / beta_k.  Trace rows carry the best objective seen.  See
    :func:`subgradient_solve` for the ``on_divergence`` contract.
    """
    if schedule not in RDA_SCHEDULES:
        raise ConfigError(f"unknown schedule {schedule!r}; pick from {RDA_SCHEDULES}")
    x0 = np.asarray(x0, dtype=float).copy()
    x = x0.copy()
    simple = problem.simple
    calls_start = problem.oracle_calls
    origin = time.perf_counter_ns() if track_wall else None
    S = np.zeros_like(x0)
    lam_sum = 0.0
    best = math.inf
    trace: list[TraceRecord] = []
    reason = StopReason.BUDGET
    iterations = 0
    for k in range(1, iters + 1):
        try:
            ev = problem.evaluate(x)
        except NumericalError:
            if on_divergence == "stop":
                reason = StopReason.ERROR
                break
            raise
        best = min(best, ev.value + simple.value(x))
        trace.append(
            _baseline_record(k, best, problem.oracle_calls - calls_start, origin)
        )
        iterations = k
        if schedule == "short":
            lam = 1.0
        elif schedule == "medium":
            lam = float(k)
        else:
            lam = float(k) ** 2
        S = S + lam * ev.grad
        lam_sum += lam
        beta = math.sqrt(float(k))
        x = simple.prox(x0 - S / beta, lam_sum / beta)
        if not np.all(np.isfinite(x)):
            if on_divergence == "stop":
                reason = StopReason.ERROR
                break
            raise NumericalError("dual-averaging iterate diverged to non-finite values")
    return RunResult(
        y=x,
        objective=best,
        iterations=iterations,
        oracle_calls=problem.oracle_calls - calls_start,
        stop_reason=reason,
        trace=trace,
    )
