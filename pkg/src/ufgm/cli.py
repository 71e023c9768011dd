"""Command-line entry point.

Subcommands: ``solve``, ``rate``, ``recurrence``, ``compare``, ``gen``.
Report-producing commands write a rendered figure next to their delimited
output unless ``--no-plot`` is given.  Exit codes: 0 converged / success,
2 budget exhausted, 1 any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, theory
from .errors import ConfigError, NumericalError, ParseError
from .problems import gen_gaussian_instance, gen_svm_instance, gen_symmetric_instance


def _parse_terms(values) -> list:
    from .problems import SummandSpec

    terms = []
    for tok in values:
        m, _, v = tok.partition(":")
        try:
            terms.append(SummandSpec(float(m), float(v)))
        except ValueError:
            raise ConfigError(f"--term expects M:V, got {tok!r}") from None
    return terms


def _parse_pairs(values) -> theory.RecurrenceSpec:
    pairs = []
    for tok in values:
        a, _, q = tok.partition(":")
        try:
            pairs.append((float(a), float(q)))
        except ValueError:
            raise ConfigError(f"--pair expects ALPHA:Q, got {tok!r}") from None
    return theory.RecurrenceSpec(pairs)


def _cmd_solve(args) -> int:
    cfg = harness.load_config(args.config)
    if args.eps is not None:
        cfg.epsilon = args.eps
    if args.l0 is not None:
        cfg.l0 = args.l0
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    if args.seed is not None and "seed" in cfg.problem:
        cfg.problem["seed"] = args.seed
    out = args.out or cfg.output
    result, problem, _ = harness.run_experiment(cfg)
    if out:
        harness.write_trace_csv(out, result.trace, keep_wall=args.timings)
        if not args.no_plot:
            harness.render_trace_figure(
                result.trace,
                harness.figure_path(out),
                epsilon=cfg.epsilon,
                p_star=problem.p_star,
            )
    print(
        f"{cfg.solver['kind']}: {result.stop_reason.value} after "
        f"{result.iterations} iterations, objective {result.objective:.12g}, "
        f"{result.oracle_calls} oracle calls"
    )
    return harness.exit_code(result)


def _cmd_rate(args) -> int:
    terms = _parse_terms(args.term)
    inputs = theory.RateInputs(terms, args.eps, args.xi)
    contribs = theory.explicit_bound_terms(inputs)
    print(f"{'term':>6} {'M':>12} {'v':>6} {'contribution':>16}")
    for i, (t, contrib) in enumerate(zip(terms, contribs), 1):
        print(f"{i:>6} {t.M:>12g} {t.v:>6g} {contrib:>16g}")
    print(f"explicit bound: {sum(contribs):g}")
    if args.implicit:
        K, five = theory.implicit_bound(inputs)
        print(f"implicit K: {K:.12g}")
        print(f"implicit bound (5K): {five:.12g}")
    if args.growth is not None:
        mu, p, gap0, target = args.growth
        g = theory.growth_bound(
            inputs, theory.GrowthSpec(mu, p, gap0), target
        )
        print(f"growth bound: {g:g}")
    return 0


def _cmd_recurrence(args) -> int:
    spec = _parse_pairs(args.pair)
    seq = theory.recurrence_extremal(spec, args.steps)
    bounds = [theory.recurrence_count_bound(spec, A) for A in seq]
    flags = []
    for k, A in enumerate(seq):
        if k == 0 or A <= 0.0:
            flags.append(1)
        else:
            C = theory.recurrence_threshold_root(spec, A)
            flags.append(int(k <= 5.0 * C))
    import csv

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "A_k", "lemma3_rhs", "lemma4_flag"])
        for k, (A, b, f) in enumerate(zip(seq, bounds, flags)):
            writer.writerow([k, harness.fmt_float(A), harness.fmt_float(b), f])
    if not args.no_plot:
        harness.render_recurrence_figure(seq, bounds, harness.figure_path(args.out))
    print(f"wrote {len(seq)} rows to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    cfg = harness.load_config(args.config)
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    out = args.out or cfg.output
    if out is None:
        raise ConfigError("compare needs an output path (--out or config.output)")
    report = harness.compare_run(cfg)
    harness.write_compare_csv(out, report["columns"])
    root, _ = os.path.splitext(str(out))
    harness.write_summary_csv(root + ".summary.csv", report["summary"])
    if not args.no_plot:
        harness.render_compare_figure(report["columns"], harness.figure_path(out))
    print(f"compared {len(report['columns'])} methods; reference value "
          f"{report['p_ref']:.12g}")
    return 0


def _cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    meta = {"kind": args.kind, "seed": args.seed}
    if args.kind == "gaussian":
        A, b, x_star = gen_gaussian_instance(args.m, args.n, args.seed)
        np.savetxt(os.path.join(args.out, "A.csv"), A, fmt="%.17g", delimiter=",")
        np.savetxt(os.path.join(args.out, "b.csv"), b, fmt="%.17g")
        np.savetxt(os.path.join(args.out, "x_star.csv"), x_star, fmt="%.17g")
        meta.update(m=args.m, n=args.n,
                    files={"A": "A.csv", "b": "b.csv", "x_star": "x_star.csv"})
    elif args.kind == "svm":
        X, y = gen_svm_instance(args.samples, args.features, args.seed)
        path = os.path.join(args.out, "data.libsvm")
        with open(path, "w", encoding="utf-8") as fh:
            for row, label in zip(X, y):
                feats = " ".join(
                    f"{j + 1}:{val:.17g}" for j, val in enumerate(row) if val != 0.0
                )
                fh.write(f"{int(label):+d} {feats}\n")
        meta.update(samples=args.samples, features=args.features,
                    files={"data": "data.libsvm"})
    elif args.kind == "matrix":
        S = gen_symmetric_instance(args.dimension, args.seed)
        path = os.path.join(args.out, "matrix.edges")
        with open(path, "w", encoding="utf-8") as fh:
            n = S.shape[0]
            for i in range(n):
                for j in range(i, n):
                    if S[i, j] != 0.0:
                        fh.write(f"{i + 1} {j + 1} {S[i, j]:.17g}\n")
        meta.update(dimension=args.dimension, files={"matrix": "matrix.edges"})
    else:
        raise ConfigError(f"gen.kind: unknown kind {args.kind!r}")
    with open(os.path.join(args.out, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.kind} instance to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ufgm",
        description="Universal first-order solver toolkit: run solvers, "
        "evaluate iteration bounds, simulate growth recurrences, and "
        "generate benchmark data.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("solve", help="run one configured solver, write a trace CSV")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", help="trace CSV path (overrides config.output)")
    p.add_argument("--eps", type=float, help="override epsilon")
    p.add_argument("--l0", type=float, help="override the initial constant")
    p.add_argument("--max-iters", type=int, help="override the iteration budget")
    p.add_argument("--seed", type=int, help="override the problem seed")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.add_argument(
        "--timings",
        action="store_true",
        help="keep wall-clock ns in the CSV (breaks bitwise reproducibility)",
    )
    p.set_defaults(func=_cmd_solve)

    p = subs.add_parser("rate", help="evaluate iteration bounds for given terms")
    p.add_argument("--term", action="append", required=True, metavar="M:V",
                   help="summand smoothness, repeatable")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--xi", type=float, required=True,
                   help="initial Bregman distance (or an upper bound)")
    p.add_argument("--implicit", action="store_true",
                   help="also solve the implicit bound")
    p.add_argument("--growth", nargs=4, type=float,
                   metavar=("MU", "P", "GAP0", "TARGET"),
                   help="also evaluate the restart bound under (mu, p) growth")
    p.set_defaults(func=_cmd_rate)

    p = subs.add_parser("recurrence",
                        help="simulate the slowest admissible growth sequence")
    p.add_argument("--pair", action="append", required=True, metavar="ALPHA:Q",
                   help="recurrence coefficients, repeatable")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_recurrence)

    p = subs.add_parser("compare",
                        help="universal solver vs subgradient and dual averaging")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="columns CSV path (summary written next to it)")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_compare)

    p = subs.add_parser("gen", help="generate benchmark data files")
    p.add_argument("--kind", required=True, choices=("gaussian", "svm", "matrix"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--features", type=int, default=20)
    p.add_argument("--dimension", type=int, default=50)
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return harness.EXIT_ERROR
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return harness.EXIT_ERROR
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return harness.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
