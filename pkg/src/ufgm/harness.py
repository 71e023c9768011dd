"""Experiment configuration, trace serialization, reports, and figures.

Configs are versioned JSON with a fail-closed schema: unknown fields are
rejected and every error names the offending field path.  Trace CSVs use a
fixed header and 17-significant-digit floats so files round-trip bit for
bit.  The wall_ns column is written as 0 unless timings are explicitly
requested, keeping trace files bitwise identical across repeated runs of
the same seed.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Geometry, SimpleTerm, xi
from .problems import (
    CompositeProblem,
    HingeSum,
    HolderPower,
    LpTerm,
    Ridge,
    Scaled,
    SummandSpec,
    estimate_constants,
    gen_gaussian_instance,
    gen_svm_instance,
    gen_symmetric_instance,
    load_libsvm,
    load_symmetric_matrix,
    max_singular_value,
    specproj_terms,
)
from .solver import (
    BudgetStop,
    CertificateStop,
    KnownOptimum,
    RunResult,
    SolverConfig,
    StopReason,
    TraceRecord,
    r_ufgm_solve,
    rda_solve,
    subgradient_solve,
    ufgm_solve,
)
from . import theory

TRACE_HEADER = [
    "k", "i_k", "A_k", "a_k", "L_k", "tau_k", "obj",
    "phi_star", "cert_gap", "oracle_calls", "wall_ns",
]

CONFIG_VERSION = 1

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2


def fmt_float(x: float) -> str:
    """17 significant digits: enough for a bit-faithful float round trip."""
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# trace serialization and offline certificate verification
# ---------------------------------------------------------------------------


def write_trace_csv(path, trace, keep_wall: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in trace:
            writer.writerow(
                [
                    r.k,
                    r.i_k,
                    fmt_float(r.A_k),
                    fmt_float(r.a_k),
                    fmt_float(r.L_k),
                    fmt_float(r.tau_k),
                    fmt_float(r.obj),
                    fmt_float(r.phi_star),
                    fmt_float(r.cert_gap),
                    r.oracle_calls,
                    r.wall_ns if keep_wall else 0,
                ]
            )


def read_trace_csv(path) -> list[TraceRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ConfigError(f"unexpected trace header: {header}")
        for row in reader:
            records.append(
                TraceRecord(
                    k=int(row[0]),
                    i_k=int(row[1]),
                    A_k=float(row[2]),
                    a_k=float(row[3]),
                    L_k=float(row[4]),
                    tau_k=float(row[5]),
                    obj=float(row[6]),
                    phi_star=float(row[7]),
                    cert_gap=float(row[8]),
                    oracle_calls=int(row[9]),
                    wall_ns=int(row[10]),
                )
            )
    return records


def verify_trace(records, epsilon: float, rel_slack: float = 1e-7) -> list[int]:
    """Re-check the gap certificate A_k (obj - eps/2) <= phi_k^* from logged
    columns.  Returns the iteration numbers of violating rows (empty when
    the whole trace certifies).  Rows with A_k = 0 (baseline traces) are
    skipped."""
    bad = []
    for r in records:
        if r.A_k <= 0.0:
            continue
        lhs = r.A_k * (r.obj - 0.5 * epsilon)
        slack = rel_slack * max(1.0, abs(r.phi_star), abs(lhs))
        if lhs > r.phi_star + slack:
            bad.append(r.k)
    return bad


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    version: int
    problem: dict
    solver: dict
    epsilon: float
    l0: float = 1.0
    max_iters: int = 1000
    max_doublings: int = 60
    stop: dict = field(default_factory=lambda: {"rule": "budget"})
    x0: list | None = None
    output: str | None = None

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "problem": dict(self.problem),
            "solver": dict(self.solver),
            "epsilon": self.epsilon,
            "l0": self.l0,
            "max_iters": self.max_iters,
            "max_doublings": self.max_doublings,
            "stop": dict(self.stop),
            "x0": None if self.x0 is None else list(self.x0),
            "output": self.output,
        }


def _check_fields(d: dict, required: dict, optional: dict, path: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    for name in required:
        if name not in d:
            raise ConfigError(f"{path}.{name}: missing required field")
    for name, value in d.items():
        kinds = required.get(name, optional.get(name))
        if kinds is not None and not isinstance(value, kinds):
            raise ConfigError(f"{path}.{name}: wrong type {type(value).__name__}")


_NUM = (int, float)

_PROBLEM_SCHEMAS = {
    "quadratic": ({"dimension": (int,)}, {"seed": (int,)}),
    "two_term": (
        {"m": (int,), "n": (int,), "c": _NUM, "seed": (int,)},
        {},
    ),
    "lasso": (
        {"m": (int,), "n": (int,), "seed": (int,)},
        {"l1_weight": _NUM},
    ),
    "svm": (
        {},
        {
            "path": (str,),
            "samples": (int,),
            "features": (int,),
            "seed": (int,),
            "lam": _NUM,
            "p_star": _NUM,
        },
    ),
    "specproj": (
        {"alpha": _NUM},
        {"matrix_path": (str,), "dimension": (int,), "seed": (int,)},
    ),
    "holder_sum": (
        {"terms": (list,), "dimension": (int,)},
        {},
    ),
}

_SOLVER_SCHEMAS = {
    "ufgm": ({}, {}),
    "r_ufgm": ({"target_eps": _NUM}, {}),
    "subgradient": ({"c": _NUM}, {}),
    "rda": ({"schedule": (str,)}, {}),
}

_STOP_SCHEMAS = {
    "budget": ({}, {}),
    "known_optimum": ({"tol": _NUM}, {"p_star": _NUM}),
    "certificate": ({"distance_bound": _NUM}, {}),
}


def parse_config(data: dict, path: str = "config") -> ExperimentConfig:
    _check_fields(
        data,
        required={"version": (int,), "problem": (dict,), "solver": (dict,),
                  "epsilon": _NUM},
        optional={"l0": _NUM, "max_iters": (int,), "max_doublings": (int,),
                  "stop": (dict,), "x0": (list, type(None)),
                  "output": (str, type(None))},
        path=path,
    )
    if data["version"] != CONFIG_VERSION:
        raise ConfigError(f"{path}.version: unsupported version {data['version']}")

    prob = data["problem"]
    kind = prob.get("kind")
    if kind not in _PROBLEM_SCHEMAS:
        raise ConfigError(f"{path}.problem.kind: unknown kind {kind!r}")
    req, opt = _PROBLEM_SCHEMAS[kind]
    _check_fields(prob, {**req, "kind": (str,)}, opt, f"{path}.problem")
    if kind == "svm" and "path" not in prob:
        for name in ("samples", "features", "seed"):
            if name not in prob:
                raise ConfigError(
                    f"{path}.problem.{name}: required when no path is given"
                )
    if kind == "specproj" and "matrix_path" not in prob:
        for name in ("dimension", "seed"):
            if name not in prob:
                raise ConfigError(
                    f"{path}.problem.{name}: required when no matrix_path is given"
                )
    if kind == "holder_sum":
        for i, term in enumerate(prob["terms"]):
            _check_fields(term, {"M": _NUM, "v": _NUM}, {},
                          f"{path}.problem.terms[{i}]")

    solver = data["solver"]
    skind = solver.get("kind")
    if skind not in _SOLVER_SCHEMAS:
        raise ConfigError(f"{path}.solver.kind: unknown kind {skind!r}")
    req, opt = _SOLVER_SCHEMAS[skind]
    _check_fields(solver, {**req, "kind": (str,)}, opt, f"{path}.solver")
    if skind == "rda" and solver["schedule"] not in ("short", "medium", "long"):
        raise ConfigError(f"{path}.solver.schedule: must be short, medium or long")

    stop = data.get("stop", {"rule": "budget"})
    rule = stop.get("rule")
    if rule not in _STOP_SCHEMAS:
        raise ConfigError(f"{path}.stop.rule: unknown rule {rule!r}")
    req, opt = _STOP_SCHEMAS[rule]
    _check_fields(stop, {**req, "rule": (str,)}, opt, f"{path}.stop")

    if data["epsilon"] <= 0:
        raise ConfigError(f"{path}.epsilon: must be positive")
    if data.get("l0", 1.0) <= 0:
        raise ConfigError(f"{path}.l0: must be positive")
    if data.get("max_iters", 1000) < 0:
        raise ConfigError(f"{path}.max_iters: must be nonnegative")

    return ExperimentConfig(
        version=data["version"],
        problem=dict(prob),
        solver=dict(solver),
        epsilon=float(data["epsilon"]),
        l0=float(data.get("l0", 1.0)),
        max_iters=int(data.get("max_iters", 1000)),
        max_doublings=int(data.get("max_doublings", 60)),
        stop=dict(stop),
        x0=None if data.get("x0") is None else list(data["x0"]),
        output=data.get("output"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# problem construction
# ---------------------------------------------------------------------------


def build_problem(spec: dict) -> tuple[CompositeProblem, dict]:
    """Instantiate the problem named by a config dict.

    Returns the problem plus an info dict with whatever side knowledge the
    construction yields (planted minimizer, smoothness metadata, growth
    modulus) for use by reports and bound columns.
    """
    kind = spec["kind"]
    info: dict = {"kind": kind}
    if kind == "quadratic":
        n = spec["dimension"]
        rng = np.random.default_rng(spec.get("seed", 0))
        center = rng.standard_normal(n)
        problem = CompositeProblem(
            [Scaled(LpTerm(np.eye(n), center, 2.0), 0.5)], p_star=0.0
        )
        info.update(x_star=center, specs=[estimate_constants(np.eye(n), center, 2.0)])
        return problem, info
    if kind == "two_term":
        m, n, c, seed = spec["m"], spec["n"], spec["c"], spec["seed"]
        A1, b1, x_star = gen_gaussian_instance(m, n, seed)
        A2, _, _ = gen_gaussian_instance(m, n, seed + 1)
        b2 = A2 @ x_star
        smooth = Scaled(LpTerm(A1, b1, 2.0), 0.5)
        nonsmooth = Scaled(LpTerm(A2, b2, 1.0), c)
        s2 = estimate_constants(A1, b1, 2.0)
        s1 = estimate_constants(A2, b2, 1.0)
        specs = [s2, SummandSpec(c * s1.M, s1.v, s1.label)]
        problem = CompositeProblem([(smooth, specs[0]), (nonsmooth, specs[1])],
                                   p_star=0.0)
        info.update(x_star=x_star, specs=specs)
        return problem, info
    if kind == "lasso":
        m, n, seed = spec["m"], spec["n"], spec["seed"]
        w = spec.get("l1_weight", 0.1)
        A, b, x_star = gen_gaussian_instance(m, n, seed)
        problem = CompositeProblem(
            [Scaled(LpTerm(A, b, 2.0), 0.5)], simple=SimpleTerm.l1(w)
        )
        info.update(x_star_ls=x_star)
        return problem, info
    if kind == "svm":
        lam = spec.get("lam", 1.0)
        if "path" in spec:
            X, y = load_libsvm(spec["path"])
        else:
            X, y = gen_svm_instance(spec["samples"], spec["features"], spec["seed"])
        d = X.shape[1]
        problem = CompositeProblem(
            [HingeSum(X, y), Ridge(lam, d)], p_star=spec.get("p_star")
        )
        M_hinge = max_singular_value(X) * math.sqrt(X.shape[0])
        specs = [SummandSpec(M_hinge, 0.0, "hinge"), problem.terms[1][1]]
        info.update(specs=specs, mu=lam, growth_p=2.0)
        return problem, info
    if kind == "specproj":
        alpha = spec["alpha"]
        if "matrix_path" in spec:
            L = load_symmetric_matrix(spec["matrix_path"])
            rng = np.random.default_rng(spec.get("seed", 0))
        else:
            L = gen_symmetric_instance(spec["dimension"], spec["seed"])
            rng = np.random.default_rng(spec["seed"] + 1)
        d = L.shape[0]
        y_bar = np.diag(L) + np.abs(rng.standard_normal(d)) + 0.5
        quad, pen = specproj_terms(L, alpha, y_bar)
        problem = CompositeProblem([quad, pen])
        info.update(y_bar=y_bar, mu=1.0, growth_p=2.0,
                    specs=[quad.holder, pen.holder])
        return problem, info
    if kind == "holder_sum":
        n = spec["dimension"]
        oracles = [HolderPower(t["M"], t["v"]) for t in spec["terms"]]
        problem = CompositeProblem(oracles, dimension=n, p_star=0.0)
        info.update(x_star=np.zeros(n), specs=[o.holder for o in oracles])
        return problem, info
    raise ConfigError(f"problem.kind: unknown kind {kind!r}")


def _build_stop(stop: dict, problem: CompositeProblem):
    rule = stop["rule"]
    if rule == "budget":
        return BudgetStop()
    if rule == "known_optimum":
        p_star = stop.get("p_star", problem.p_star)
        if p_star is None:
            raise ConfigError(
                "stop.p_star: not given and the problem has no known optimum"
            )
        return KnownOptimum(float(p_star), float(stop["tol"]))
    return CertificateStop(float(stop["distance_bound"]))


def run_experiment(cfg: ExperimentConfig) -> tuple[RunResult, CompositeProblem, dict]:
    """Build the configured problem and run the configured solver."""
    problem, info = build_problem(cfg.problem)
    x0 = (
        np.zeros(problem.dimension)
        if cfg.x0 is None
        else np.asarray(cfg.x0, dtype=float)
    )
    if x0.shape != (problem.dimension,):
        raise ConfigError(
            f"x0: has length {x0.shape[0]}, problem dimension is {problem.dimension}"
        )
    sconf = SolverConfig(
        epsilon=cfg.epsilon,
        l0=cfg.l0,
        max_iters=cfg.max_iters,
        max_doublings=cfg.max_doublings,
        stop=_build_stop(cfg.stop, problem),
    )
    kind = cfg.solver["kind"]
    if kind == "ufgm":
        result = ufgm_solve(problem, x0, sconf)
    elif kind == "r_ufgm":
        result = r_ufgm_solve(problem, x0, sconf, float(cfg.solver["target_eps"]))
    elif kind == "subgradient":
        result = subgradient_solve(problem, x0, float(cfg.solver["c"]), cfg.max_iters)
    else:
        result = rda_solve(problem, x0, cfg.solver["schedule"], cfg.max_iters)
    return result, problem, info


def exit_code(result: RunResult) -> int:
    if result.stop_reason is StopReason.CONVERGED:
        return EXIT_CONVERGED
    if result.stop_reason is StopReason.BUDGET:
        return EXIT_BUDGET
    return EXIT_ERROR


# ---------------------------------------------------------------------------
# comparison runs and reports
# ---------------------------------------------------------------------------

COMPARE_METHODS = (
    "ufgm",
    "subgradient_short",
    "subgradient_medium",
    "subgradient_long",
    "rda_short",
    "rda_medium",
    "rda_long",
)

_SUBGRAD_STEPS = {"short": 0.1, "medium": 1.0, "long": 10.0}


def _run_compare_method(name: str, cfg: ExperimentConfig, x0) -> RunResult:
    problem, _ = build_problem(cfg.problem)
    if name == "ufgm":
        sconf = SolverConfig(
            epsilon=cfg.epsilon,
            l0=cfg.l0,
            max_iters=cfg.max_iters,
            max_doublings=cfg.max_doublings,
            stop=BudgetStop(),
        )
        return ufgm_solve(problem, x0, sconf)
    family, variant = name.split("_", 1)
    if family == "subgradient":
        return subgradient_solve(
            problem, x0, _SUBGRAD_STEPS[variant], cfg.max_iters, on_divergence="stop"
        )
    return rda_solve(problem, x0, variant, cfg.max_iters, on_divergence="stop")


def compare_run(cfg: ExperimentConfig) -> dict:
    """Run the universal solver plus all six baseline parameterizations on
    one problem and start point, aligned on a common iteration budget.

    Parallelism across the independent runs is capped by UFGM_THREADS
    (default 1).  Returns per-method best-gap-seen columns, the reference
    optimal value used, and the summary rows.
    """
    problem, info = build_problem(cfg.problem)
    x0 = (
        np.zeros(problem.dimension)
        if cfg.x0 is None
        else np.asarray(cfg.x0, dtype=float)
    )
    workers = int(os.environ.get("UFGM_THREADS", "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda m: _run_compare_method(m, cfg, x0), COMPARE_METHODS)
            )
    else:
        results = [_run_compare_method(m, cfg, x0) for m in COMPARE_METHODS]
    runs = dict(zip(COMPARE_METHODS, results))

    best_objs = {}
    for name, res in runs.items():
        vals = np.array([r.obj for r in res.trace])
        col = np.minimum.accumulate(vals) if len(vals) else vals
        if len(col) < cfg.max_iters:
            # a diverged baseline keeps its last best for the remaining budget
            fill = col[-1] if len(col) else math.inf
            col = np.concatenate([col, np.full(cfg.max_iters - len(col), fill)])
        best_objs[name] = col
    if problem.p_star is not None:
        p_ref = problem.p_star
    else:
        p_ref = min(float(col[-1]) for col in best_objs.values() if len(col))
    columns = {name: col - p_ref for name, col in best_objs.items()}

    summary = _summarize(cfg, info, runs, columns, p_ref)
    return {"columns": columns, "p_ref": p_ref, "summary": summary, "runs": runs}


def _summarize(cfg, info, runs, columns, p_ref) -> list[dict]:
    specs = info.get("specs")
    x_star = info.get("x_star")
    xi0 = None
    if x_star is not None:
        x0 = (
            np.zeros(len(x_star)) if cfg.x0 is None else np.asarray(cfg.x0, float)
        )
        xi0 = xi(Geometry.EUCLIDEAN, x0, x_star)
    explicit = implicit5 = growth = None
    if specs is not None and xi0 is not None:
        inputs = theory.RateInputs(specs, cfg.epsilon, xi0)
        explicit = theory.explicit_bound(inputs)
        try:
            implicit5 = theory.implicit_bound(inputs)[1]
        except ConfigError:
            implicit5 = None
    if specs is not None and info.get("mu") is not None:
        gap0 = None
        ufgm_col = columns.get("ufgm")
        if ufgm_col is not None and len(ufgm_col):
            gap0 = float(ufgm_col[0])
        if gap0 and gap0 > cfg.epsilon:
            growth = theory.growth_bound(
                theory.RateInputs(specs, cfg.epsilon, 1.0),
                theory.GrowthSpec(info["mu"], info.get("growth_p", 2.0), gap0),
                cfg.epsilon,
            )
    rows = []
    for name, res in runs.items():
        col = columns[name]
        first_hit = None
        hits = np.nonzero(col <= cfg.epsilon)[0]
        if len(hits):
            first_hit = int(hits[0]) + 1
        row = {
            "method": name,
            "iterations": res.iterations,
            "oracle_calls": res.oracle_calls,
            "final_gap": float(col[-1]) if len(col) else "",
            "iters_to_eps": first_hit if first_hit is not None else "",
            "explicit_bound": "",
            "implicit_5k": "",
            "growth_bound": "",
            "within_explicit": "",
            "within_implicit": "",
        }
        if name == "ufgm":
            if explicit is not None:
                row["explicit_bound"] = explicit
                if first_hit is not None:
                    row["within_explicit"] = int(first_hit <= explicit)
            if implicit5 is not None:
                row["implicit_5k"] = implicit5
                if first_hit is not None:
                    row["within_implicit"] = int(first_hit <= implicit5)
            if growth is not None:
                row["growth_bound"] = growth
        rows.append(row)
    return rows


def write_compare_csv(path, columns) -> None:
    names = list(columns)
    length = max((len(col) for col in columns.values()), default=0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k"] + names)
        for k in range(length):
            row = [k + 1]
            for name in names:
                col = columns[name]
                row.append(fmt_float(col[k]) if k < len(col) else "")
            writer.writerow(row)


def write_summary_csv(path, rows) -> None:
    if not rows:
        return
    names = list(rows[0])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            out = []
            for name in names:
                val = row[name]
                out.append(fmt_float(val) if isinstance(val, float) else val)
            writer.writerow(out)


# ---------------------------------------------------------------------------
# figures (rendered alongside the delimited output)
# ---------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_trace_figure(trace, path, epsilon=None, p_star=None) -> None:
    """Objective (or gap, when the optimum is known) versus iteration."""
    plt = _pyplot()
    ks = [r.k for r in trace]
    if p_star is not None:
        vals = [max(r.obj - p_star, 1e-300) for r in trace]
        label = "objective gap"
    else:
        vals = [r.obj for r in trace]
        label = "objective"
    fig, ax = plt.subplots(figsize=(6, 4))
    if p_star is not None:
        ax.semilogy(ks, vals, lw=1.2)
    else:
        ax.plot(ks, vals, lw=1.2)
    if epsilon is not None and p_star is not None:
        ax.axhline(epsilon, ls="--", c="gray", lw=0.8, label="target")
        ax.legend(frameon=False)
    ax.set_xlabel("iteration")
    ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_compare_figure(columns, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, col in columns.items():
        if not len(col):
            continue
        ks = np.arange(1, len(col) + 1)
        vals = np.maximum(np.asarray(col, float), 1e-300)
        style = "-" if name == "ufgm" else "--"
        ax.semilogy(ks, vals, style, lw=1.4 if name == "ufgm" else 0.9, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best objective gap seen")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_recurrence_figure(seq, bounds, path) -> None:
    plt = _pyplot()
    ks = np.arange(len(seq))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, seq, lw=1.2, label="extremal A_k")
    ax.plot(ks, bounds, "--", lw=1.0, label="step-count bound at A_k")
    ax.set_xlabel("k")
    ax.set_ylabel("value")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def figure_path(out_path) -> str:
    root, _ = os.path.splitext(str(out_path))
    return root + ".png"
