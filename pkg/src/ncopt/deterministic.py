"""Deterministic solvers combining descent and negative-curvature steps.

`two_step_solve` alternates a curvature step and a descent step with fixed
stepsizes; `dynamic_solve` picks per iteration whichever step's upper-model
reduction is larger, accepts it only if the objective decreases at least as
much as the model predicts, and inflates the corresponding curvature
constant otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ncopt.linalg import leftmost_eigenpair
from ncopt.steps import (
    DirectionCriteria,
    LipschitzState,
    certify_curvature_direction,
    descent_direction,
    direction_from_eigenpair,
    lipschitz_hat,
    model_reduction_curvature,
    model_reduction_descent,
    optimal_stepsizes,
)


class TerminationReason(enum.Enum):
    SECOND_ORDER_POINT = "second_order_point"
    TOLERANCE_MET = "tolerance_met"
    MAX_ITERATIONS = "max_iterations"
    TINY_STEP = "tiny_step"


class InnerLoopStall(RuntimeError):
    """The dynamic method's inner loop exceeded its safety cap.

    The theory guarantees a finite loop, so this signals a defect; the
    partial report accumulated so far is attached for post-mortems.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class TerminationSpec:
    """Stopping rules shared by the deterministic solvers.

    Relative tolerances follow the usual practice of scaling by the
    magnitudes at the starting point (floored at 1); `min_step_norm` stops on
    an accepted displacement smaller than the given norm.  `epsilon_g` and
    `epsilon_H` are optional absolute targets used only by the complexity
    census.
    """

    grad_tol_rel: float = 1e-5
    curv_tol_rel: float = 1e-5
    max_iterations: int = 10000
    min_step_norm: float = 1e-16
    epsilon_g: float | None = None
    epsilon_H: float | None = None

    def __post_init__(self):
        if min(self.grad_tol_rel, self.curv_tol_rel, self.min_step_norm) <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class IterationRecord:
    index: int
    x: np.ndarray
    f_value: float
    gradient_norm: float
    lam: float
    s: np.ndarray
    d: np.ndarray
    step_taken: str  # descent | curvature | both | none
    x_hat: np.ndarray | None = None
    alpha: float | None = None
    beta: float | None = None
    model_reduction_s: float | None = None
    model_reduction_d: float | None = None
    inner_loop_count: int = 0
    feval_count: int = 0
    lipschitz_L: float | None = None
    lipschitz_sigma: float | None = None


@dataclass
class SolverReport:
    """Full per-iteration trace plus termination summary.

    A report is immutable by convention once a solve returns; `f` values
    along accepted steps are non-increasing for the deterministic solvers.
    """

    problem_name: str
    records: list[IterationRecord] = field(default_factory=list)
    termination_reason: TerminationReason | None = None
    final_f: float = np.nan
    final_gradient_norm: float = np.nan
    final_lambda: float = np.nan
    total_fevals: int = 0
    total_iterations: int = 0
    problem_lower_bound: float | None = None
    config: dict = field(default_factory=dict)

    @property
    def used_negative_curvature(self):
        return any(np.any(r.d != 0.0) for r in self.records)

    def finish(self, reason):
        last = self.records[-1]
        self.termination_reason = reason
        self.final_f = last.f_value
        self.final_gradient_norm = last.gradient_norm
        self.final_lambda = last.lam
        self.total_fevals = last.feval_count
        self.total_iterations = len(self.records)
        return self


def _neg(lam):
    return max(0.0, -lam)


def _config_echo(problem, criteria, termination, **extra):
    echo = {
        "problem": problem.name,
        "criteria": {
            "gamma": criteria.gamma, "theta": criteria.theta,
            "delta": criteria.delta, "zeta": criteria.zeta, "eta": criteria.eta,
        },
        "termination": {
            "grad_tol_rel": termination.grad_tol_rel,
            "curv_tol_rel": termination.curv_tol_rel,
            "max_iterations": termination.max_iterations,
            "min_step_norm": termination.min_step_norm,
        },
    }
    echo.update(extra)
    return echo


def _terminal_record(k, x, f, gnorm, lam, fevals):
    return IterationRecord(
        index=k, x=np.array(x, dtype=float), f_value=f, gradient_norm=gnorm,
        lam=lam, s=np.zeros_like(x), d=np.zeros_like(x), step_taken="none",
        feval_count=fevals,
    )


def two_step_solve(problem, criteria=None, alpha=None, beta=None,
                   termination=None, strategy="steepest", x0=None,
                   zero_curvature_tol=1e-12):
    """Alternate a fixed-size curvature step and a fixed-size descent step.

    The caller supplies the stepsizes; they are admissible when
    alpha < 2*delta*zeta/(L*eta^2) and beta < 3*gamma/(sigma*theta) for the
    problem's true curvature constants, which is only verifiable on problems
    with documented constants.  Returns the current iterate as soon as both
    directions vanish.
    """
    if alpha is None or beta is None or alpha <= 0.0 or beta <= 0.0:
        raise ValueError("two_step_solve needs positive fixed stepsizes")
    criteria = criteria or DirectionCriteria()
    termination = termination or TerminationSpec()
    x = np.array(problem.default_start if x0 is None else x0, dtype=float)

    report = SolverReport(
        problem_name=problem.name,
        problem_lower_bound=problem.lower_bound,
        config=_config_echo(problem, criteria, termination, method="two_step",
                            strategy=strategy, alpha=alpha, beta=beta),
    )
    g1_scale = lam1_scale = None
    for k in range(1, termination.max_iterations + 1):
        f = problem.evaluate(x)
        g = problem.gradient(x)
        H = problem.hessian(x)
        eig = leftmost_eigenpair(H)
        lam = eig.leftmost_value
        gnorm = float(np.linalg.norm(g))
        if g1_scale is None:
            g1_scale = max(1.0, gnorm)
            lam1_scale = max(1.0, _neg(lam))

        d = direction_from_eigenpair(eig, g, criteria, zero_curvature_tol)
        if np.any(d != 0.0):
            certify_curvature_direction(d, H, lam, g, criteria)
        x_hat = x + beta * d

        if np.any(d != 0.0):
            g_hat = problem.gradient(x_hat)
        else:
            g_hat = g
        if float(np.linalg.norm(g_hat)) == 0.0:
            s_hat = np.zeros_like(x)
        else:
            H_hat = problem.hessian(x_hat) if strategy == "modified_newton" else H
            s_hat, _ = descent_direction(strategy, g_hat, H_hat, criteria)

        if not np.any(d != 0.0) and not np.any(s_hat != 0.0):
            report.records.append(
                _terminal_record(k, x, f, gnorm, lam, problem.evaluation_count)
            )
            return report.finish(TerminationReason.SECOND_ORDER_POINT)

        if gnorm <= termination.grad_tol_rel * g1_scale and \
                _neg(lam) <= termination.curv_tol_rel * lam1_scale:
            report.records.append(
                _terminal_record(k, x, f, gnorm, lam, problem.evaluation_count)
            )
            return report.finish(TerminationReason.TOLERANCE_MET)

        x_next = x_hat + alpha * s_hat
        if np.any(d != 0.0) and np.any(s_hat != 0.0):
            taken = "both"
        elif np.any(d != 0.0):
            taken = "curvature"
        else:
            taken = "descent"
        report.records.append(IterationRecord(
            index=k, x=x.copy(), f_value=f, gradient_norm=gnorm, lam=lam,
            s=s_hat, d=d, step_taken=taken, x_hat=x_hat.copy(),
            alpha=alpha, beta=beta, feval_count=problem.evaluation_count,
        ))
        step_norm = float(np.linalg.norm(x_next - x))
        x = x_next
        if step_norm < termination.min_step_norm:
            return _finalize_at(problem, report, k + 1, x,
                                TerminationReason.TINY_STEP)
    return _finalize_at(problem, report, termination.max_iterations + 1, x,
                        TerminationReason.MAX_ITERATIONS)


def _finalize_at(problem, report, k, x, reason):
    f = problem.evaluate(x)
    g = problem.gradient(x)
    eig = leftmost_eigenpair(problem.hessian(x))
    report.records.append(_terminal_record(
        k, x, f, float(np.linalg.norm(g)), eig.leftmost_value,
        problem.evaluation_count,
    ))
    return report.finish(reason)


def dynamic_solve(problem, criteria=None, strategy="steepest",
                  lipschitz_init=None, termination=None, x0=None,
                  use_curvature=True, condition_cap=1e8,
                  zero_curvature_tol=1e-12, inner_loop_cap=1000):
    """Adaptive method choosing between descent and curvature steps.

    Each iteration compares the optimal model reductions of the two
    candidate steps, tests the chosen step's actual decrease against its
    model, and on failure inflates the corresponding constant (factor in
    [rho, clamp_up]) and retries.  After acceptance the constant used is
    relaxed toward the value that made model and actual decrease agree.
    With use_curvature=False the curvature direction is suppressed, giving
    the descent-only twin used as a comparison baseline.
    """
    criteria = criteria or DirectionCriteria()
    termination = termination or TerminationSpec()
    state = (lipschitz_init or LipschitzState()).copy()
    x = np.array(problem.default_start if x0 is None else x0, dtype=float)

    report = SolverReport(
        problem_name=problem.name,
        problem_lower_bound=problem.lower_bound,
        config=_config_echo(
            problem, criteria, termination, method="dynamic", strategy=strategy,
            use_curvature=use_curvature, L_init=state.L_current,
            sigma_init=state.sigma_current, rho=state.rho,
        ),
    )
    f = problem.evaluate(x)
    g1_scale = lam1_scale = None
    for k in range(1, termination.max_iterations + 1):
        g = problem.gradient(x)
        H = problem.hessian(x)
        eig = leftmost_eigenpair(H)
        lam = eig.leftmost_value
        gnorm = float(np.linalg.norm(g))
        if g1_scale is None:
            g1_scale = max(1.0, gnorm)
            lam1_scale = max(1.0, _neg(lam))

        if use_curvature and lam < -zero_curvature_tol:
            d = direction_from_eigenpair(eig, g, criteria, zero_curvature_tol)
            certify_curvature_direction(d, H, lam, g, criteria)
        else:
            d = np.zeros_like(x)
        has_d = bool(np.any(d != 0.0))

        if gnorm == 0.0:
            s = np.zeros_like(x)
        else:
            s, _ = descent_direction(strategy, g, H, criteria,
                                     condition_cap=condition_cap,
                                     enforce_norm_band=False)
        has_s = bool(np.any(s != 0.0))

        if not has_d and not has_s:
            report.records.append(
                _terminal_record(k, x, f, gnorm, lam, problem.evaluation_count)
            )
            return report.finish(TerminationReason.SECOND_ORDER_POINT)

        if gnorm <= termination.grad_tol_rel * g1_scale and \
                _neg(lam) <= termination.curv_tol_rel * lam1_scale:
            report.records.append(
                _terminal_record(k, x, f, gnorm, lam, problem.evaluation_count)
            )
            return report.finish(TerminationReason.TOLERANCE_MET)

        inner = 0
        while True:
            inner += 1
            if inner > inner_loop_cap:
                report.records.append(
                    _terminal_record(k, x, f, gnorm, lam, problem.evaluation_count)
                )
                report.finish(None)
                raise InnerLoopStall(
                    "inner loop exceeded %d passes at iteration %d (L=%g, sigma=%g)"
                    % (inner_loop_cap, k, state.L_current, state.sigma_current),
                    report,
                )
            sizes = optimal_stepsizes(g, s if has_s else None,
                                      d if has_d else None, H, state)
            m_s = (model_reduction_descent(g, s, state.L_current, sizes.alpha)
                   if has_s else -np.inf)
            m_d = (model_reduction_curvature(g, d, H, state.sigma_current, sizes.beta)
                   if has_d else -np.inf)
            if m_s >= m_d:
                trial = x + sizes.alpha * s
                f_trial = problem.evaluate(trial)
                hat = lipschitz_hat("gradient", f_trial, f, m_s, sizes.alpha,
                                    float(np.linalg.norm(s)), state.L_current)
                if f_trial <= f - m_s:
                    branch = "descent"
                    break
                state.inflate("gradient", hat)
            else:
                trial = x + sizes.beta * d
                f_trial = problem.evaluate(trial)
                hat = lipschitz_hat("hessian", f_trial, f, m_d, sizes.beta,
                                    float(np.linalg.norm(d)), state.sigma_current)
                if f_trial <= f - m_d:
                    branch = "curvature"
                    break
                state.inflate("hessian", hat)

        report.records.append(IterationRecord(
            index=k, x=x.copy(), f_value=f, gradient_norm=gnorm, lam=lam,
            s=s, d=d, step_taken=branch, alpha=sizes.alpha, beta=sizes.beta,
            model_reduction_s=None if not has_s else m_s,
            model_reduction_d=None if not has_d else m_d,
            inner_loop_count=inner, feval_count=problem.evaluation_count,
            lipschitz_L=state.L_current, lipschitz_sigma=state.sigma_current,
        ))
        # accepted: relax the constant that was exercised, keep the other
        state.settle("gradient" if branch == "descent" else "hessian", hat)
        step_norm = float(np.linalg.norm(trial - x))
        x, f = trial, f_trial
        if step_norm < termination.min_step_norm:
            return _finalize_at(problem, report, k + 1, x,
                                TerminationReason.TINY_STEP)
    return _finalize_at(problem, report, termination.max_iterations + 1, x,
                        TerminationReason.MAX_ITERATIONS)


@dataclass
class ComplexityCensus:
    count_G: int
    count_H: int
    bound_G: float | None
    bound_H: float | None


def complexity_census(report, epsilon_g, epsilon_H):
    """Count iterates with large gradient / strong negative curvature and the
    matching worst-case cardinality bounds.

    Counts come straight from the trace.  The bounds use the realized
    maxima of the constant estimates along the run and the problem's known
    lower bound; without a lower bound the counts are still returned and the
    bounds are None.
    """
    records = report.records
    if not records:
        raise ValueError("report has no records")
    count_G = sum(1 for r in records if r.gradient_norm > epsilon_g)
    count_H = sum(1 for r in records if _neg(r.lam) > epsilon_H)
    lower = report.problem_lower_bound
    if lower is None:
        return ComplexityCensus(count_G, count_H, None, None)
    gap = records[0].f_value - lower
    criteria = report.config.get("criteria", {})
    delta = criteria.get("delta", 1.0)
    gamma = criteria.get("gamma", 1.0)
    l_values = [r.lipschitz_L for r in records if r.lipschitz_L is not None]
    s_values = [r.lipschitz_sigma for r in records if r.lipschitz_sigma is not None]
    L_max = max(l_values) if l_values else report.config.get("L_init", 1.0)
    sigma_max = max(s_values) if s_values else report.config.get("sigma_init", 1.0)
    bound_G = (2.0 * L_max * gap / delta ** 2) / epsilon_g ** 2
    bound_H = (3.0 * sigma_max ** 2 * gap / (2.0 * gamma ** 3)) / epsilon_H ** 3
    return ComplexityCensus(count_G, count_H, bound_G, bound_H)
