"""Experiment harness: configured runs, comparison measures, campaigns.

Each experiment writes a JSON summary and a per-iteration CSV trace with a
fixed column order and 17-significant-digit formatting so reruns can be
diffed bit for bit.  Comparisons pair a descent-only run (a) against a
curvature-enabled run (b) on the same problem and report the three relative
measures (objective gap, iterations, function evaluations).
"""

from __future__ import annotations

import configparser
import csv
import json
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ncopt.deterministic import (
    InnerLoopStall,
    SolverReport,
    TerminationSpec,
    dynamic_solve,
    two_step_solve,
)
from ncopt.finite_sum import FiniteSumProblem, StochasticOracle, load_dataset
from ncopt.problems import list_problems, make_problem
from ncopt.steps import DirectionCriteria, LipschitzState
from ncopt.stochastic import (
    SafeguardConfig,
    StochasticReport,
    StochasticStepConfig,
    dynamic_stochastic_solve,
    two_step_stochastic_solve,
)

DETERMINISTIC_VARIANTS = (
    "two_step",
    "dynamic_sd",
    "dynamic_mn",
    "dynamic_sd_descent_only",
    "dynamic_mn_descent_only",
)
STOCHASTIC_VARIANTS = (
    "stoch_two_step",
    "stoch_dynamic",
    "stoch_dynamic_descent_only",
)
VARIANTS = DETERMINISTIC_VARIANTS + STOCHASTIC_VARIANTS

OUTPUT_DIR_ENV = "NCOPT_OUTPUT_DIR"

TRACE_COLUMNS = ("k", "f", "gnorm", "lambda", "alpha", "beta", "branch",
                 "Lk", "sigmak", "fevals")


class UsageError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass
class ExperimentConfig:
    variant: str = "dynamic_sd"
    problem: str | None = None
    dataset: str | None = None
    dataset_has_header: bool = False
    dataset_model: str = "linear"
    start: np.ndarray | None = None
    seed: int | None = None
    criteria: DirectionCriteria | None = None
    termination: TerminationSpec = field(default_factory=TerminationSpec)
    lipschitz: LipschitzState = field(default_factory=LipschitzState)
    alpha: float | None = None
    beta: float | None = None
    batch_size: int = 32
    iterations: int = 1000
    safeguards: SafeguardConfig = field(default_factory=SafeguardConfig)
    out_dir: str | None = None
    label: str | None = None

    def resolved_out_dir(self):
        return self.out_dir or os.environ.get(OUTPUT_DIR_ENV, "ncopt_runs")


def default_output_dir():
    return os.environ.get(OUTPUT_DIR_ENV, "ncopt_runs")


def validate_config(config):
    if config.variant not in VARIANTS:
        raise UsageError(
            "variant: unknown %r (choose from %s)" % (config.variant, ", ".join(VARIANTS))
        )
    if config.problem is None and config.dataset is None:
        raise UsageError("problem: either a problem name or a dataset path is required")
    if config.problem is not None and config.problem not in list_problems():
        raise UsageError(
            "problem: unknown %r; available: %s"
            % (config.problem, ", ".join(list_problems()))
        )
    if config.variant in STOCHASTIC_VARIANTS:
        if config.seed is None:
            raise UsageError("seed: stochastic variants need an explicit seed")
        if config.iterations < 1:
            raise UsageError("iterations: must be positive")
        if config.batch_size < 1:
            raise UsageError("batch_size: must be positive")
    if config.variant == "two_step":
        if config.alpha is None or config.beta is None:
            raise UsageError("alpha: the two_step variant needs fixed alpha and beta")
    if config.variant == "stoch_two_step" and config.alpha is None:
        raise UsageError("alpha: stoch_two_step needs a constant stepsize")


def variant_criteria(variant, criteria=None):
    if criteria is not None:
        return criteria
    if "mn" in variant:
        return DirectionCriteria(delta=1e-8)
    return DirectionCriteria()


def build_problem(config):
    if config.dataset is not None:
        return load_dataset(config.dataset, has_header=config.dataset_has_header,
                            model=config.dataset_model)
    return make_problem(config.problem)


def starting_point(config, problem):
    if config.start is not None:
        x0 = np.asarray(config.start, dtype=float)
        if x0.shape != (problem.dimension,):
            raise UsageError("start: dimension %d does not match problem dimension %d"
                             % (x0.size, problem.dimension))
        return x0
    if config.seed is not None and config.variant in DETERMINISTIC_VARIANTS:
        rng = np.random.default_rng(config.seed)
        return problem.default_start + rng.uniform(-0.5, 0.5, problem.dimension)
    return problem.default_start.copy()


def _run_solver(config, problem, x0):
    criteria = variant_criteria(config.variant, config.criteria)
    strategy = "modified_newton" if "mn" in config.variant else "steepest"
    if config.variant == "two_step":
        return two_step_solve(problem, criteria, alpha=config.alpha,
                              beta=config.beta, termination=config.termination,
                              x0=x0)
    if config.variant in DETERMINISTIC_VARIANTS:
        return dynamic_solve(
            problem, criteria, strategy=strategy, lipschitz_init=config.lipschitz,
            termination=config.termination, x0=x0,
            use_curvature=not config.variant.endswith("descent_only"),
        )
    oracle = StochasticOracle(problem, batch_size=config.batch_size,
                              seed=config.seed)
    if config.variant == "stoch_two_step":
        step_config = StochasticStepConfig(alpha_constant=config.alpha,
                                           gamma=criteria.gamma,
                                           delta=criteria.delta)
        return two_step_stochastic_solve(oracle, step_config, config.iterations,
                                         x0=x0)
    return dynamic_stochastic_solve(
        oracle, config.safeguards, iterations=config.iterations, x0=x0,
        use_curvature=(config.variant != "stoch_dynamic_descent_only"),
    )


def run_experiment(config):
    """Execute one configured solve and write its report and trace.

    Returns (report, paths).  On an abnormal solver termination the partial
    trace is still written before the exception propagates.
    """
    validate_config(config)
    problem = build_problem(config)
    if config.variant in STOCHASTIC_VARIANTS and \
            not isinstance(problem, FiniteSumProblem):
        raise UsageError("problem: stochastic variants need a finite-sum problem")
    x0 = starting_point(config, problem)
    out_dir = config.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    label = config.label or "%s_%s" % (problem.name, config.variant)
    paths = {
        "report": os.path.join(out_dir, label + ".json"),
        "trace": os.path.join(out_dir, label + ".csv"),
    }
    try:
        report = _run_solver(config, problem, x0)
    except InnerLoopStall as stall:
        write_report_json(stall.report, paths["report"], config, abnormal=True)
        write_trace_csv(stall.report, paths["trace"])
        raise
    write_report_json(report, paths["report"], config)
    write_trace_csv(report, paths["trace"])
    return report, paths


def _g17(value):
    if value is None:
        return ""
    return "%.17g" % value


def report_summary(report, config=None, abnormal=False):
    if isinstance(report, StochasticReport):
        summary = {
            "problem": report.problem_name,
            "kind": "stochastic",
            "termination_reason": "iteration_budget",
            "abnormal": abnormal,
            "final_f": report.final_exact_f,
            "total_iterations": report.total_iterations,
            "total_fevals": report.total_iterations,
            "used_negative_curvature": report.used_negative_curvature,
            "seed": report.seed,
            "config": report.config,
        }
    else:
        summary = {
            "problem": report.problem_name,
            "kind": "deterministic",
            "termination_reason": (report.termination_reason.value
                                   if report.termination_reason else None),
            "abnormal": abnormal or report.termination_reason is None,
            "final_f": report.final_f,
            "final_gradient_norm": report.final_gradient_norm,
            "final_lambda": report.final_lambda,
            "total_iterations": report.total_iterations,
            "total_fevals": report.total_fevals,
            "used_negative_curvature": report.used_negative_curvature,
            "config": report.config,
        }
    if config is not None:
        summary["variant"] = config.variant
        summary["seed"] = config.seed
    return summary


def write_report_json(report, path, config=None, abnormal=False):
    with open(path, "w") as handle:
        json.dump(report_summary(report, config, abnormal), handle, indent=2,
                  default=float)
        handle.write("\n")
    return path


def _trace_rows(report):
    if isinstance(report, StochasticReport):
        for r in report.records:
            yield (r.index, r.value_before, r.exact_gradient_norm,
                   r.sampled_lambda, r.alpha, r.beta,
                   r.cg_status.value if r.cg_status else "noise",
                   r.lipschitz_L, r.lipschitz_sigma, None)
    else:
        for r in report.records:
            yield (r.index, r.f_value, r.gradient_norm, r.lam, r.alpha, r.beta,
                   r.step_taken, r.lipschitz_L, r.lipschitz_sigma, r.feval_count)


def write_trace_csv(report, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for row in _trace_rows(report):
            k, f, gnorm, lam, alpha, beta, branch, L, sigma, fevals = row
            writer.writerow([
                k, _g17(f), _g17(gnorm), _g17(lam), _g17(alpha), _g17(beta),
                branch, _g17(L), _g17(sigma),
                "" if fevals is None else fevals,
            ])
    return path


@dataclass
class ComparisonRow:
    """Relative performance of a curvature-enabled run (b) against its
    descent-only twin (a); positive values favor the curvature run."""

    problem: str
    f_measure: float
    iter_measure: float
    feval_measure: float
    used_negative_curvature: bool


def _as_summary(report):
    if isinstance(report, dict):
        return report
    return report_summary(report)


def compare(report_a, report_b):
    """Comparison measures between a descent-only report (a) and a
    curvature-enabled report (b) on the same problem."""
    a = _as_summary(report_a)
    b = _as_summary(report_b)
    if a["problem"] != b["problem"]:
        raise ValueError("reports compare different problems: %r vs %r"
                         % (a["problem"], b["problem"]))
    fa, fb = a["final_f"], b["final_f"]
    f_measure = (fa - fb) / max(abs(fa), abs(fb), 1.0)
    ia, ib = a["total_iterations"], b["total_iterations"]
    iter_measure = (ia - ib) / max(ia, ib, 1)
    ea, eb = a["total_fevals"], b["total_fevals"]
    feval_measure = (ea - eb) / max(ea, eb, 1)
    return ComparisonRow(
        problem=a["problem"],
        f_measure=f_measure,
        iter_measure=iter_measure,
        feval_measure=feval_measure,
        used_negative_curvature=bool(b["used_negative_curvature"]),
    )


def load_report_summary(path):
    with open(path) as handle:
        return json.load(handle)


# starting points biased toward saddle regions and ridges: the descent-only
# baseline either stalls (quartic: gradient flow into the saddle) or crawls,
# while the curvature run cuts across
CAMPAIGN_STARTS = {
    "quartic_saddle": np.array([0.0, 1.0]),
    "monkey_saddle": np.array([0.02, 0.015]),
    "himmelblau": np.array([-0.270845, -0.923039]),
    "rastrigin": np.array([0.51, 0.49, -0.52, 0.48, -0.51]),
    "rosenbrock2": np.array([-0.5, 2.5]),
    "rosenbrock10": None,
    "beale": np.array([-1.8, -1.0]),
    "sphere": None,
    "random_quadratic": None,
    "two_layer_net": None,
    "quadratic_sum": None,
}


def standard_campaign_pairs(strategy="sd", seed=0, out_dir=None,
                            max_iterations=2000, problems=None):
    """Experiment-config pairs (descent-only, with-curvature) over the
    built-in suite with the standard starting points."""
    if strategy not in ("sd", "mn"):
        raise UsageError("strategy: must be 'sd' or 'mn'")
    base = "dynamic_%s" % strategy
    termination = TerminationSpec(max_iterations=max_iterations)
    pairs = []
    for name in problems or list_problems():
        start = CAMPAIGN_STARTS.get(name)
        common = dict(problem=name, seed=seed, termination=termination,
                      out_dir=out_dir,
                      start=None if start is None else np.array(start))
        pairs.append((
            ExperimentConfig(variant=base + "_descent_only",
                             label="%s_%s_descent_only" % (name, strategy), **common),
            ExperimentConfig(variant=base,
                             label="%s_%s_with_curvature" % (name, strategy), **common),
        ))
    return pairs


def campaign(pairs, out_dir=None):
    """Run comparison pairs, keep rows where curvature was actually used,
    and write the sorted table plus one plot-data file per measure.

    Individual failures are recorded and the campaign continues.
    """
    if not pairs:
        raise UsageError("suite: campaign needs at least one experiment pair")
    out_dir = out_dir or pairs[0][0].resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    rows, failures = [], []
    for config_a, config_b in pairs:
        try:
            report_a, _ = run_experiment(replace(config_a, out_dir=out_dir))
            report_b, _ = run_experiment(replace(config_b, out_dir=out_dir))
            rows.append(compare(report_a, report_b))
        except Exception as err:  # failures are per-row data, not fatal
            failures.append((config_b.problem or config_b.dataset, repr(err)))
    kept = [r for r in rows if r.used_negative_curvature]
    kept.sort(key=lambda r: r.f_measure, reverse=True)
    if not kept:
        warnings.warn("campaign: no run used a negative curvature direction")

    table_path = os.path.join(out_dir, "comparison.csv")
    with open(table_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["problem", "f_measure", "iter_measure", "feval_measure",
                         "used_negative_curvature"])
        for r in kept:
            writer.writerow([r.problem, _g17(r.f_measure), _g17(r.iter_measure),
                             _g17(r.feval_measure), r.used_negative_curvature])
    plot_paths = {}
    for measure, attr in (("f_diff", "f_measure"), ("iterates", "iter_measure"),
                          ("fevals", "feval_measure")):
        path = os.path.join(out_dir, "plot_%s.csv" % measure)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["problem", "value"])
            for r in kept:
                writer.writerow([r.problem, _g17(getattr(r, attr))])
        plot_paths[measure] = path
    if failures:
        failures_path = os.path.join(out_dir, "failures.csv")
        with open(failures_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["problem", "error"])
            writer.writerows(failures)
        plot_paths["failures"] = failures_path
    return kept, table_path, plot_paths


def _get_typed(section, key, cast, current):
    if key in section:
        raw = section[key]
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return current


def load_config_file(path, config=None):
    """Flat key-value config with sections; CLI flags override file values."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError("config: cannot read %r" % path)
    config = config or ExperimentConfig()
    if parser.has_section("experiment"):
        exp = parser["experiment"]
        config.variant = exp.get("variant", config.variant)
        config.problem = exp.get("problem", config.problem)
        config.dataset = exp.get("dataset", config.dataset)
        config.dataset_model = exp.get("dataset_model", config.dataset_model)
        config.dataset_has_header = _get_typed(exp, "dataset_has_header", bool,
                                               config.dataset_has_header)
        config.label = exp.get("label", config.label)
        config.out_dir = exp.get("out", config.out_dir)
        config.seed = _get_typed(exp, "seed", int, config.seed)
        config.alpha = _get_typed(exp, "alpha", float, config.alpha)
        config.beta = _get_typed(exp, "beta", float, config.beta)
        config.batch_size = _get_typed(exp, "batch_size", int, config.batch_size)
        config.iterations = _get_typed(exp, "iterations", int, config.iterations)
        if "start" in exp:
            config.start = np.array([float(v) for v in exp["start"].split(",")])
    if parser.has_section("criteria"):
        sec = parser["criteria"]
        base = config.criteria or DirectionCriteria()
        config.criteria = DirectionCriteria(
            gamma=_get_typed(sec, "gamma", float, base.gamma),
            theta=_get_typed(sec, "theta", float, base.theta),
            delta=_get_typed(sec, "delta", float, base.delta),
            zeta=_get_typed(sec, "zeta", float, base.zeta),
            eta=_get_typed(sec, "eta", float, base.eta),
        )
    if parser.has_section("termination"):
        sec = parser["termination"]
        t = config.termination
        config.termination = TerminationSpec(
            grad_tol_rel=_get_typed(sec, "grad_tol_rel", float, t.grad_tol_rel),
            curv_tol_rel=_get_typed(sec, "curv_tol_rel", float, t.curv_tol_rel),
            max_iterations=_get_typed(sec, "max_iterations", int, t.max_iterations),
            min_step_norm=_get_typed(sec, "min_step_norm", float, t.min_step_norm),
        )
    if parser.has_section("lipschitz"):
        sec = parser["lipschitz"]
        s = config.lipschitz
        config.lipschitz = LipschitzState(
            L_current=_get_typed(sec, "l_init", float, s.L_current),
            sigma_current=_get_typed(sec, "sigma_init", float, s.sigma_current),
            rho=_get_typed(sec, "rho", float, s.rho),
        )
    if parser.has_section("safeguards"):
        sec = parser["safeguards"]
        g = config.safeguards
        config.safeguards = SafeguardConfig(
            max_s_norm=_get_typed(sec, "max_s_norm", float, g.max_s_norm),
            max_ratio_d_to_s=_get_typed(sec, "max_ratio_d_to_s", float,
                                        g.max_ratio_d_to_s),
            inflate_factor=_get_typed(sec, "inflate_factor", float,
                                      g.inflate_factor),
            L_init=_get_typed(sec, "l_init", float, g.L_init),
            sigma_init=_get_typed(sec, "sigma_init", float, g.sigma_init),
        )
    return config
