"""Command-line entry point.

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
configuration error (bad flag, unreadable input, contract violation).
Output goes to stdout as JSON (default) or CSV for tabular reports.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from .grid import ContractError
from .measures import EXHAUSTIVE_MAX_N, Budget, DTMEvaluator, classify, evaluator_from_json


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    raw = os.environ.get("QML_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"QML_SEED must be an integer, got {raw!r}") from None


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _measure(path: str, n: int | None = None) -> DTMEvaluator:
    try:
        m = evaluator_from_json(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed measure ({exc!r})") from None
    if n is not None and m.n != n:
        raise ConfigError(f"{path}: measure lives on a {m.n}x{m.n} grid, --n says {n}")
    return m


def _require_small(n: int, what: str):
    if n > EXHAUSTIVE_MAX_N:
        raise ConfigError(f"{what} exhaustive needs n <= {EXHAUSTIVE_MAX_N}, got n = {n}")


def _emit(out, doc, rows=None, fmt="json"):
    if fmt == "csv" and rows is not None:
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        out.write(buf.getvalue())
    else:
        from .scenarios import _plain

        out.write(json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n")


# --- subcommands ----------------------------------------------------------------------


def cmd_axioms(args, out) -> int:
    m = _measure(args.input, args.n)
    if args.budget == "exhaustive":
        _require_small(m.n, "--budget")
        budget = Budget.exhaustive()
    else:
        budget = Budget.sampled(args.samples, _seed(args))
    c = classify(m, budget)
    doc = c.to_json()
    rows = [
        {"axiom": r.axiom, "verdict": r.verdict, "margin": r.margin, "sets_checked": r.sets_checked}
        for r in [*c.dtm, c.tm, c.measure]
    ]
    _emit(out, doc, rows, args.format)
    return 0 if c.is_dtm else 1


def cmd_integrate(args, out) -> int:
    from .integral import GridFunction, integrate_full

    m = _measure(args.measure)
    try:
        f = GridFunction.from_json(_read_json(args.function))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.function}: malformed function ({exc!r})") from None
    if f.n != m.n:
        raise ConfigError(f"function on {f.n}x{f.n} grid, measure on {m.n}x{m.n}")
    res = integrate_full(m, f, brute=args.brute)
    doc = res.to_json()
    _emit(out, doc, [{"value": res.value, "r2_equal": res.r2_equal}], args.format)
    return 0


def _sequence(obj: dict):
    from .convergence import (
        alternating_sequence,
        constant_sequence,
        mixing_sequence,
        shrinking_indicator_sequence,
    )
    from .grid import PointRef

    kind = obj.get("type")
    h = int(obj.get("horizon", 64))
    if kind == "mixing":
        return mixing_sequence(evaluator_from_json(obj["nu_hat"]), evaluator_from_json(obj["limit"]), h)
    if kind == "shrinking_indicator":
        return shrinking_indicator_sequence(int(obj["n"]), int(obj["a"]), float(obj.get("r0", 0.25)), h)
    if kind == "alternating":
        n = int(obj["n"])
        return alternating_sequence(PointRef(n, int(obj["a"])), PointRef(n, int(obj["b"])), h)
    if kind == "constant":
        return constant_sequence(evaluator_from_json(obj["measure"]), h)
    raise ConfigError(f"sequence.type: unknown {kind!r}")


def _sequence_anchors(obj: dict) -> list[int]:
    if "anchors" in obj:
        return [int(a) for a in obj["anchors"]]
    return [int(obj[k]) for k in ("a", "b") if k in obj]


def cmd_converge(args, out) -> int:
    from .convergence import crosscheck, default_config

    obj = _read_json(args.sequence)
    try:
        s = _sequence(obj)
    except KeyError as exc:
        raise ConfigError(f"{args.sequence}: sequence.{exc.args[0]}: missing") from None
    cfg = default_config(s.n, _sequence_anchors(obj), args.epsilon, _seed(args), random_functions=args.random_functions)
    rep = crosscheck(s, cfg)
    rows = [
        {"condition": k, "verdict": c.verdict, "index": c.index, "margin": c.margin}
        for k, c in rep.conditions.items()
    ]
    _emit(out, rep.to_json(), rows, args.format)
    if rep.anomalies:
        return 1
    if args.expect and rep.verdict != args.expect:
        return 1
    return 0


def cmd_metrics(args, out) -> int:
    from .metrics import LipFamily, SetFamily, kr, prokhorov

    if args.pair:
        if args.mu or args.nu:
            raise ConfigError("give either --pair or --mu/--nu")
        args.mu, args.nu = args.pair
    if not (args.mu and args.nu):
        raise ConfigError("metrics needs --pair A B or both --mu and --nu")
    mu, nu = _measure(args.mu), _measure(args.nu)
    if mu.n != nu.n:
        raise ConfigError("measures live on different grids")
    metric = {"prokhorov": "P", "kr": "KR"}.get(args.metric, args.metric)
    if metric == "P":
        if args.family == "exhaustive":
            _require_small(mu.n, "--family")
            fam = "exhaustive"
        elif args.family == "generated":
            fam = SetFamily.generated(mu.n, _seed(args))
        else:
            fam = SetFamily.structured(mu.n)
        res = prokhorov(mu, nu, fam, args.resolution)
    else:
        res = kr(mu, nu, LipFamily.clamped_cones(mu.n))
    _emit(out, res.to_json(), [{"metric": metric, "value": res.value, "mode": res.mode}], args.format)
    return 0


def cmd_families(args, out) -> int:
    from .families import MeasureFamily, tightness_witness, variation_bound

    fam = MeasureFamily([_measure(p) for p in args.inputs], "cli")
    if len({m.n for m in fam.members}) != 1:
        raise ConfigError("family members live on different grids")
    doc = {"check": args.check, "variation_bound": variation_bound(fam)}
    if args.check == "variation":
        _emit(out, doc, [doc], args.format)
        return 0
    K = tightness_witness(fam, args.eps, args.mode)
    doc.update(mode=args.mode, eps=args.eps, tight=K is not None, witness=K.to_json() if K is not None else None)
    _emit(out, doc, [{k: doc[k] for k in ("check", "variation_bound", "mode", "eps", "tight")}], args.format)
    return 0 if K is not None else 1


def cmd_scenario(args, out) -> int:
    from . import scenarios

    if args.action == "list":
        ids = scenarios.list_builtin()
        _emit(out, ids, [{"id": i} for i in ids], args.format)
        return 0
    # no ids means the whole corpus
    refs = args.ids if args.ids and not args.all else scenarios.list_builtin()
    reports = []
    for ref in refs:
        try:
            reports.append(scenarios.run(ref, _seed(args) if args.seed is not None or "QML_SEED" in os.environ else None))
        except scenarios.ScenarioError as exc:
            raise ConfigError(str(exc)) from None
    rows = [
        {"scenario": r.id, "expectation": e.name, "op": e.op, "expected": e.expected, "observed": e.observed, "passed": e.passed}
        for r in reports
        for e in r.expectations
    ]
    doc = reports[0].to_json() if len(args.ids) == 1 and not args.all else [r.to_json() for r in reports]
    _emit(out, doc, rows, args.format)
    return 0 if all(r.passed for r in reports) else 1


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="topomeasure", description="Deficient topological measures on grids.")
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=None, help="overrides QML_SEED (default 0)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("axioms", parents=[common], help="verify DTM/TM/measure axioms")
    a.add_argument("--input", required=True)
    a.add_argument("--budget", choices=("exhaustive", "sampled"), default="sampled")
    a.add_argument("--samples", type=int, default=200)
    a.add_argument("--n", type=int, default=None)
    a.set_defaults(func=cmd_axioms)

    i = sub.add_parser("integrate", parents=[common], help="quasi-integral of a function")
    i.add_argument("--measure", required=True)
    i.add_argument("--function", required=True)
    i.add_argument("--brute", action="store_true", help="skip closed-form level profiles")
    i.set_defaults(func=cmd_integrate)

    c = sub.add_parser("converge", parents=[common], help="weak-convergence crosscheck of a sequence")
    c.add_argument("--sequence", required=True)
    c.add_argument("--epsilon", type=float, default=1e-2)
    c.add_argument("--random-functions", type=int, default=2)
    c.add_argument("--expect", choices=("converged", "violated", "inconclusive"), default=None)
    c.set_defaults(func=cmd_converge)

    m = sub.add_parser("metrics", parents=[common], help="Prokhorov or KR distance")
    m.add_argument("--pair", nargs=2, metavar=("MU", "NU"))
    m.add_argument("--mu")
    m.add_argument("--nu")
    m.add_argument("--metric", choices=("P", "KR", "prokhorov", "kr"), default="P")
    m.add_argument("--family", choices=("exhaustive", "structured", "generated"), default="structured")
    m.add_argument("--resolution", type=float, default=None)
    m.set_defaults(func=cmd_metrics)

    f = sub.add_parser("families", parents=[common], help="variation bound and tightness of a family")
    f.add_argument("inputs", nargs="+")
    f.add_argument("--check", choices=("tightness", "variation"), default="tightness")
    f.add_argument("--eps", "--epsilon", dest="eps", type=float, default=0.1)
    f.add_argument("--mode", choices=("paper_literal", "classical"), default="classical")
    f.set_defaults(func=cmd_families)

    s = sub.add_parser("scenario", parents=[common], help="built-in experiment corpus")
    s.add_argument("action", choices=("run", "list"))
    s.add_argument("ids", nargs="*")
    s.add_argument("--all", action="store_true")
    s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
