"""Stochastic solvers: curvature noise over mini-batch estimates.

The two-step method adds a zero-mean multiple of an estimated
negative-curvature direction to each stochastic gradient step.  The dynamic
method extracts both the step and the curvature direction from a truncated
CG solve on the sampled system and drives the stepsizes 1/L_k and 1/sigma_k
with stochastic value estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ncopt.linalg import CgStatus, leftmost_eigenpair, truncated_cg
from ncopt.steps import DirectionCriteria, certify_curvature_direction

_TINY = 1e-12


class ExpectedDecreaseViolation(RuntimeError):
    """The Monte Carlo single-step decrease exceeded its theoretical bound."""


@dataclass(frozen=True)
class MomentBounds:
    """Second-moment envelope constants for the stochastic directions.

    E||s||^2 <= M_s1 + M_s2 ||grad f||^2 and likewise (M_d1, M_d2) for the
    curvature direction.  Documentation fields; measured empirically in test
    mode.
    """

    M_s1: float
    M_s2: float
    M_d1: float
    M_d2: float


@dataclass
class StochasticStepConfig:
    """Stepsize schedules and certification constants for the two-step method.

    Exactly one of `alpha_constant` or the diminishing pair
    (`diminishing_a`, `diminishing_b`) must be set; the diminishing schedule
    a/(b+k) is harmonic-type, so its sums diverge while its squared sums
    converge.  beta defaults to chi * alpha.
    """

    alpha_constant: float | None = None
    diminishing_a: float | None = None
    diminishing_b: float | None = None
    beta_constant: float | None = None
    chi: float = 1.0
    moment_bounds: MomentBounds | None = None
    gradient_lipschitz: float | None = None
    delta: float = 1.0
    eta: float = 1.0
    gamma: float = 1.0
    track_exact_gradient: bool = True

    def __post_init__(self):
        constant = self.alpha_constant is not None
        diminishing = self.diminishing_a is not None or self.diminishing_b is not None
        if constant == diminishing:
            raise ValueError("set alpha_constant or the diminishing pair, not both")
        if diminishing and (self.diminishing_a is None or self.diminishing_b is None):
            raise ValueError("diminishing schedule needs both a and b")
        if constant and self.alpha_constant < 0.0:
            raise ValueError("alpha_constant must be nonnegative")
        if diminishing and (self.diminishing_a <= 0.0 or self.diminishing_b < 0.0):
            raise ValueError("diminishing schedule needs a > 0, b >= 0")
        if self.chi <= 0.0:
            raise ValueError("chi must be positive")
        if constant and self.moment_bounds is not None and \
                self.gradient_lipschitz is not None:
            cap = admissible_constant_step(
                self.moment_bounds, self.gradient_lipschitz, self.delta
            )
            if self.alpha_constant > cap * (1.0 + 1e-12):
                raise ValueError(
                    "constant stepsize %.3e exceeds admissible bound %.3e"
                    % (self.alpha_constant, cap)
                )

    def alpha(self, k):
        if self.alpha_constant is not None:
            return self.alpha_constant
        return self.diminishing_a / (self.diminishing_b + k)

    def beta(self, k):
        if self.beta_constant is not None:
            return self.beta_constant
        return self.chi * self.alpha(k)


def admissible_constant_step(moments, gradient_lipschitz, delta=1.0):
    """Largest constant stepsize admitted by the mean-square gradient bound."""
    return delta / (2.0 * gradient_lipschitz * max(moments.M_s2, moments.M_d2))


def constant_step_mean_square_bound(moments, gradient_lipschitz, delta, alpha,
                                    iterations, initial_gap):
    """Bound on the average squared gradient norm over `iterations` iterates
    of the constant-stepsize two-step method."""
    return (
        2.0 * alpha * gradient_lipschitz * max(moments.M_s1, moments.M_d1) / delta
        + 2.0 * initial_gap / (iterations * delta * alpha)
    )


@dataclass(frozen=True)
class SafeguardConfig:
    """Displacement safeguards and constant initialization for the dynamic
    stochastic method."""

    max_s_norm: float = 10.0
    max_ratio_d_to_s: float = 0.2
    inflate_factor: float = 1.2
    L_init: float = 80.0
    sigma_init: float = 100.0

    def __post_init__(self):
        values = (self.max_s_norm, self.max_ratio_d_to_s, self.inflate_factor,
                  self.L_init, self.sigma_init)
        if any(v <= 0.0 for v in values):
            raise ValueError("all safeguard values must be positive")
        if self.inflate_factor <= 1.0:
            raise ValueError("inflate_factor must exceed 1")


def apply_safeguards(s, d, alpha, beta, config):
    """Scale s to norm at most max_s_norm and d so ||beta d|| stays within
    max_ratio_d_to_s of ||alpha s||.  Idempotent."""
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    snorm = float(np.linalg.norm(s))
    if snorm > config.max_s_norm:
        s = s * (config.max_s_norm / snorm)
        snorm = config.max_s_norm
    dnorm = float(np.linalg.norm(d))
    if dnorm > 0.0:
        cap = config.max_ratio_d_to_s * alpha * snorm
        if beta * dnorm > cap:
            d = d * (cap / (beta * dnorm))
    return s, d


@dataclass
class StochasticIterationRecord:
    index: int
    x: np.ndarray
    alpha: float
    beta: float
    s_norm: float
    d_norm: float
    omega: float | None = None
    sampled_lambda: float | None = None
    cg_status: CgStatus | None = None
    value_before: float | None = None
    value_after_descent: float | None = None
    value_after_curvature: float | None = None
    lipschitz_L: float | None = None
    lipschitz_sigma: float | None = None
    reverted_curvature_step: bool = False
    exact_gradient_norm: float | None = None


@dataclass
class StochasticReport:
    problem_name: str
    records: list[StochasticIterationRecord] = field(default_factory=list)
    final_x: np.ndarray | None = None
    final_exact_f: float | None = None
    total_iterations: int = 0
    seed: int | None = None
    config: dict = field(default_factory=dict)
    moment_bounds: MomentBounds | None = None

    @property
    def used_negative_curvature(self):
        return any(r.d_norm > 0.0 for r in self.records)

    def exact_gradient_norms(self):
        return np.array([r.exact_gradient_norm for r in self.records], dtype=float)

    def mean_square_gradient(self):
        norms = self.exact_gradient_norms()
        if np.any(np.isnan(norms)):
            raise ValueError("exact gradients were not tracked")
        return float(np.mean(norms ** 2))


def curvature_noise_step(x, oracle, criteria=None, alpha_k=None, beta_k=None,
                         zero_curvature_tol=1e-12):
    """One iteration of the stochastic two-step method.

    Draws a gradient-batch step s = -(gradient estimate), an independent
    Hessian estimate whose leftmost eigenvector (scaled to ||s||) gives the
    curvature direction, and a uniform omega in [-1, 1]; the step is
    x + alpha*s + beta*omega*d.  Returns (x_next, record).
    """
    if alpha_k is None or beta_k is None or alpha_k <= 0.0 or beta_k <= 0.0:
        raise ValueError("stepsizes must be positive")
    criteria = criteria or DirectionCriteria()
    x = np.asarray(x, dtype=float)
    problem = oracle.problem
    index = oracle.draw_count(0) + 1

    grad_batch = oracle.next_gradient_batch()
    hess_batch = oracle.next_hessian_batch()
    omega = oracle.next_omega()
    value_est = problem.batch_value(x, grad_batch)
    s = -problem.batch_gradient(x, grad_batch)
    H_est = problem.batch_hessian(x, hess_batch)

    eig = leftmost_eigenpair(H_est)
    lam = eig.leftmost_value
    snorm = float(np.linalg.norm(s))
    if lam >= -zero_curvature_tol or snorm == 0.0:
        d = np.zeros_like(x)
    else:
        d = snorm * eig.leftmost_vector
        # deterministic sign for replay stability; omega makes it zero-mean
        lead = int(np.argmax(np.abs(d)))
        if d[lead] < 0.0:
            d = -d
        certify_curvature_direction(d, H_est, lam, None, criteria,
                                    check_norm_cap=False)

    x_next = x + alpha_k * s + beta_k * omega * d
    record = StochasticIterationRecord(
        index=index, x=x.copy(), alpha=alpha_k, beta=beta_k,
        s_norm=snorm, d_norm=float(np.linalg.norm(d)), omega=omega,
        sampled_lambda=lam, value_before=value_est,
    )
    return x_next, record


def two_step_stochastic_solve(oracle, config, iterations, x0=None):
    """Run the stochastic two-step method for a fixed iteration budget.

    When the underlying problem exposes exact derivatives (always true for
    finite sums) the true gradient norm at each iterate is recorded so the
    mean-square gradient bound can be checked.
    """
    problem = oracle.problem
    x = np.array(problem.default_start if x0 is None else x0, dtype=float)
    criteria = DirectionCriteria(gamma=config.gamma, delta=config.delta,
                                 eta=max(1.0, config.eta))
    report = StochasticReport(
        problem_name=problem.name,
        seed=oracle.seed,
        config={
            "method": "stochastic_two_step",
            "alpha_constant": config.alpha_constant,
            "diminishing": (config.diminishing_a, config.diminishing_b),
            "chi": config.chi,
            "batch_size": oracle.batch_size,
            "iterations": iterations,
        },
        moment_bounds=config.moment_bounds,
    )
    for k in range(1, iterations + 1):
        alpha_k = config.alpha(k)
        beta_k = config.beta(k)
        x_next, record = curvature_noise_step(x, oracle, criteria, alpha_k, beta_k)
        if config.track_exact_gradient:
            record.exact_gradient_norm = float(np.linalg.norm(problem.gradient(x)))
        report.records.append(record)
        x = x_next
    report.final_x = x
    report.final_exact_f = problem.evaluate(x)
    report.total_iterations = iterations
    return report


def dynamic_stochastic_solve(oracle, safeguards=None, iterations=1000, x0=None,
                             use_curvature=True, cg_max_iterations=10,
                             track_exact=True):
    """Dynamic stochastic method with CG-derived step and curvature direction.

    Per iteration: sample a gradient and an independent Hessian estimate,
    run CG on the sampled system for at most `cg_max_iterations`, take the
    safeguarded step alpha_k*s_k with alpha_k = 1/L_k, then the curvature
    step beta_k*d_k with beta_k = 1/sigma_k.  Value estimates on the
    iteration's gradient batch drive the constants: a predicted increase
    inflates the constant by `inflate_factor` (never decreased) and a
    predicted increase from the curvature step also resets it.  With
    use_curvature=False the curvature step is suppressed (the descent-only
    twin used as a baseline).
    """
    safeguards = safeguards or SafeguardConfig()
    problem = oracle.problem
    x = np.array(problem.default_start if x0 is None else x0, dtype=float)
    L = safeguards.L_init
    sigma = safeguards.sigma_init
    report = StochasticReport(
        problem_name=problem.name,
        seed=oracle.seed,
        config={
            "method": "stochastic_dynamic",
            "use_curvature": use_curvature,
            "L_init": safeguards.L_init, "sigma_init": safeguards.sigma_init,
            "inflate_factor": safeguards.inflate_factor,
            "max_s_norm": safeguards.max_s_norm,
            "max_ratio_d_to_s": safeguards.max_ratio_d_to_s,
            "cg_max_iterations": cg_max_iterations,
            "batch_size": oracle.batch_size,
            "iterations": iterations,
        },
    )
    for k in range(1, iterations + 1):
        grad_batch = oracle.next_gradient_batch()
        hess_batch = oracle.next_hessian_batch()
        g_est = problem.batch_gradient(x, grad_batch)
        H_est = problem.batch_hessian(x, hess_batch)
        cg = truncated_cg(H_est, g_est, max_iterations=cg_max_iterations)
        s = cg.solution
        d = (cg.curvature_direction
             if use_curvature and cg.curvature_direction is not None
             else np.zeros_like(x))
        alpha_k = 1.0 / L
        beta_k = 1.0 / sigma
        s, d = apply_safeguards(s, d, alpha_k, beta_k, safeguards)

        f_here = problem.batch_value(x, grad_batch)
        x_hat = x + alpha_k * s
        f_hat = problem.batch_value(x_hat, grad_batch)
        L_next = L * safeguards.inflate_factor if f_hat > f_here else L

        reverted = False
        if np.any(d != 0.0):
            x_next = x_hat + beta_k * d
            f_next = problem.batch_value(x_next, grad_batch)
            if f_next > f_hat:
                sigma_next = sigma * safeguards.inflate_factor
                x_next = x_hat
                reverted = True
            else:
                sigma_next = sigma
        else:
            x_next, f_next, sigma_next = x_hat, f_hat, sigma

        report.records.append(StochasticIterationRecord(
            index=k, x=x.copy(), alpha=alpha_k, beta=beta_k,
            s_norm=float(np.linalg.norm(s)), d_norm=float(np.linalg.norm(d)),
            cg_status=cg.status, value_before=f_here,
            value_after_descent=f_hat, value_after_curvature=f_next,
            lipschitz_L=L, lipschitz_sigma=sigma,
            reverted_curvature_step=reverted,
            exact_gradient_norm=(float(np.linalg.norm(problem.gradient(x)))
                                 if track_exact else None),
        ))
        x = x_next
        L, sigma = L_next, sigma_next
    report.final_x = x
    report.final_exact_f = problem.evaluate(x)
    report.total_iterations = iterations
    return report


def measure_moment_constants(oracle, x, draws=10000, margin=1.5):
    """Empirical second-moment envelope of (s, d) at a point.

    Uses the oracle's own streams; the squared-norm coefficients are set to
    `margin` (an unbiased mini-batch gradient has coefficient exactly 1) and
    the constant terms to `margin` times the measured variance, so the
    envelope holds with headroom at the measured point.  The curvature
    direction is scaled to ||s|| and inherits the same bounds.
    """
    x = np.asarray(x, dtype=float)
    problem = oracle.problem
    exact_g = problem.gradient(x)
    deviations = np.empty(draws)
    for i in range(draws):
        batch = oracle.next_gradient_batch()
        s = -problem.batch_gradient(x, batch)
        deviations[i] = float((s + exact_g) @ (s + exact_g))
    m1 = margin * float(np.mean(deviations)) + _TINY
    return MomentBounds(M_s1=m1, M_s2=margin, M_d1=m1, M_d2=margin)


@dataclass
class DescentCheckResult:
    empirical_decrease: float
    bound: float
    standard_error: float
    replications: int


def expected_descent_check(problem, x, config, replications, seed=0,
                           batch_size=2, moments=None, measure_draws=2000):
    """Monte Carlo check of the expected single-step decrease bound.

    Estimates E[f(x + alpha s + beta omega d)] - f(x) over fresh draws and
    compares against the bound built from the (measured) moment constants
    and the problem's documented gradient Lipschitz constant.  Raises
    ExpectedDecreaseViolation if the estimate exceeds the bound by more than
    three standard errors.
    """
    from ncopt.finite_sum import StochasticOracle

    x = np.asarray(x, dtype=float)
    L = config.gradient_lipschitz or problem.local_gradient_lipschitz
    if L is None:
        raise ValueError("a documented gradient Lipschitz constant is required")
    alpha = config.alpha(1)
    beta = config.beta(1)
    if alpha == 0.0 and beta == 0.0:
        return DescentCheckResult(0.0, 0.0, 0.0, replications)
    oracle = StochasticOracle(problem, batch_size=batch_size, seed=seed)
    if moments is None:
        moments = measure_moment_constants(oracle, x, draws=measure_draws)
    f_x = problem.evaluate(x)
    gnorm2 = float(problem.gradient(x) @ problem.gradient(x))

    decreases = np.empty(replications)
    criteria = DirectionCriteria(gamma=config.gamma)
    for i in range(replications):
        x_next, _ = curvature_noise_step(x, oracle, criteria, alpha, beta)
        decreases[i] = problem.evaluate(x_next) - f_x
    empirical = float(np.mean(decreases))
    stderr = float(np.std(decreases, ddof=1) / np.sqrt(replications)) \
        if replications > 1 else 0.0
    bound = (
        -(config.delta * alpha - 0.5 * L * moments.M_s2 * alpha ** 2
          - L * moments.M_d2 * beta ** 2 / 6.0) * gnorm2
        + 0.5 * L * moments.M_s1 * alpha ** 2
        + L * moments.M_d1 * beta ** 2 / 6.0
    )
    if empirical > bound + 3.0 * stderr:
        raise ExpectedDecreaseViolation(
            "empirical decrease %.6e exceeds bound %.6e + 3*SE %.2e"
            % (empirical, bound, stderr)
        )
    return DescentCheckResult(empirical_decrease=empirical, bound=bound,
                              standard_error=stderr, replications=replications)
