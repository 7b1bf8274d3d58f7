"""Command-line interface.

Exit codes: 0 success, 2 usage or input-schema error, 3 estimation failure.
Errors are also written to stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from typing import Sequence

import jsonschema

from .bayes import crc_credible_interval, narrower_of, rs_comparator_interval
from .core import (
    CRCError,
    CellCounts,
    DesignParams,
    RandomSampleData,
    TestAccuracy,
    ValidationCounts,
)
from .estimators import crc_closed_form, rs_estimate
from .fixtures import (
    EXAMPLE_ACC1,
    EXAMPLE_ACC2,
    EXAMPLE_CELLS,
    EXAMPLE_DESIGN,
    VALIDATION_STREAM1,
    VALIDATION_STREAM2,
)
from .likelihood import fit_mle
from .mi import MiConfig, mi_estimate
from .simulation import emit_table, load_scenarios, run_scenario
from .stochastic import DEFAULT_SEED, SeedStream

EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("anchorcrc").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(_fail(EXIT_USAGE, "usage", message))


def _min_draws(text: str) -> int:
    value = int(text)
    if value < 100:
        raise argparse.ArgumentTypeError(f"must be at least 100, got {value}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _at_least_two(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"must be at least 2, got {value}")
    return value


def _read_input(path: str, schema: str) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from None
    try:
        jsonschema.validate(obj, load_schema(schema))
    except jsonschema.ValidationError as exc:
        raise UsageError(f"schema violation: {exc.message}") from None
    return obj


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_common(obj: dict):
    try:
        design = DesignParams.from_json(obj["design"])
        cells = CellCounts.from_json(obj["cells"]) if "cells" in obj else None
        sample = RandomSampleData.from_json(obj["sample"]) if "sample" in obj else None
        acc1 = TestAccuracy.from_json(obj["acc1"]) if "acc1" in obj else None
        acc2 = TestAccuracy.from_json(obj["acc2"]) if "acc2" in obj else None
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    return design, cells, sample, acc1, acc2


def cmd_estimate(args) -> int:
    obj = _read_input(args.input, "estimate_input")
    design, cells, sample, acc1, acc2 = _parse_common(obj)
    methods = {"rs", "crc", "mle"} if args.method == "all" else {args.method}
    if acc2 is None:
        raise UsageError("acc2 is required")
    if methods & {"crc", "mle"}:
        if cells is None:
            raise UsageError("crc and mle estimators need 'cells'")
        if acc1 is None:
            raise UsageError("crc and mle estimators need 'acc1'")
    if sample is None:
        sample = cells.stream2_margin()

    root = SeedStream(args.seed)
    estimates, errors = [], {}
    crc_ci = rs_ci = None
    mle_params = None
    if "rs" in methods:
        estimates.append(rs_estimate(sample, acc2, design))
        rs_ci = rs_comparator_interval(sample, design, acc2, args.draws, root.child(2))
    if "crc" in methods:
        crc = crc_closed_form(cells, design, acc1, acc2)
        crc_ci = crc_credible_interval(cells, design, acc1, acc2, args.draws, root.child(1))
        estimates.append(replace(crc, credible_ci=crc_ci.as_tuple(),
                                 credible_width=crc_ci.width))
        if rs_ci is None:
            try:
                rs_ci = rs_comparator_interval(sample, design, acc2, args.draws, root.child(2))
            except CRCError as exc:
                errors["rs_comparator"] = str(exc)
    if "mle" in methods:
        fit = fit_mle(cells, design, acc1, acc2)
        estimates.append(fit.report(design.n_tot))
        mle_params = {"phi": fit.params.phi, "pi1": fit.params.pi1,
                      "pi01": fit.params.pi01, "psi": fit.params.psi}

    chosen = narrower_of(crc_ci, rs_ci) if (crc_ci or rs_ci) else None
    doc = {
        "design": design.to_json(),
        "seed": args.seed,
        "draws": args.draws,
        "estimates": [e.to_json() for e in estimates],
        "mle_params": mle_params,
        "credible_intervals": {
            "crc": crc_ci.to_json() if crc_ci else None,
            "rs_comparator": rs_ci.to_json() if rs_ci else None,
            "narrower_of": chosen.to_json() if chosen else None,
        },
    }
    if errors:
        doc["errors"] = errors
    _write(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_mi_estimate(args) -> int:
    obj = _read_input(args.input, "estimate_input")
    design, cells, sample, _, _ = _parse_common(obj)
    if "val1" not in obj or "val2" not in obj:
        raise UsageError("mi-estimate needs validation tables 'val1' and 'val2'")
    val1 = ValidationCounts.from_json(obj["val1"])
    val2 = ValidationCounts.from_json(obj["val2"])
    which = ["RS", "CRC"] if args.method == "all" else [args.method.upper()]
    if "CRC" in which and cells is None:
        raise UsageError("the CRC estimator needs 'cells'")
    cfg = MiConfig(m=args.m, s_per_imputation=args.draws, seed=args.seed)
    results = [mi_estimate(cells if cells is not None else sample, design, val1, val2, cfg, w)
               for w in which]
    doc = {
        "design": design.to_json(),
        "seed": args.seed,
        "m": args.m,
        "draws": args.draws,
        "results": [r.to_json() for r in results],
    }
    _write(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    try:
        with open(args.scenarios) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {args.scenarios}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {args.scenarios}: {exc}") from None
    try:
        jsonschema.validate(raw, load_schema("scenarios"))
    except jsonschema.ValidationError as exc:
        raise UsageError(f"schema violation: {exc.message}") from None
    for sc in raw:
        sc.setdefault("seed", args.seed)
    try:
        configs = load_scenarios(raw, n_replicates=args.replicates, s_draws=args.draws)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None

    summaries = []
    for i, cfg in enumerate(configs):
        def progress(done, total, i=i):
            if done == total or done % max(1, total // 10) == 0:
                print(f"scenario {i + 1}/{len(configs)}: {done}/{total} replicates",
                      file=sys.stderr)
        summaries.append(run_scenario(cfg, workers=args.workers, progress=progress))
    _write(emit_table(summaries, args.format), args.out)
    return 0


def example_rows(seed: int = DEFAULT_SEED, m: int = 100, draws: int = 1000) -> list[dict]:
    """The four-row report for the bundled example."""
    rs = rs_estimate(EXAMPLE_CELLS.stream2_margin(), EXAMPLE_ACC2, EXAMPLE_DESIGN)
    crc = crc_closed_form(EXAMPLE_CELLS, EXAMPLE_DESIGN, EXAMPLE_ACC1, EXAMPLE_ACC2)
    crc_ci = crc_credible_interval(EXAMPLE_CELLS, EXAMPLE_DESIGN, EXAMPLE_ACC1, EXAMPLE_ACC2,
                                   draws, SeedStream(seed).child(1))
    cfg = MiConfig(m=m, s_per_imputation=draws, seed=seed)
    rs_mi = mi_estimate(EXAMPLE_CELLS, EXAMPLE_DESIGN, VALIDATION_STREAM1, VALIDATION_STREAM2,
                        cfg, "RS")
    crc_mi = mi_estimate(EXAMPLE_CELLS, EXAMPLE_DESIGN, VALIDATION_STREAM1, VALIDATION_STREAM2,
                         cfg, "CRC")

    def row(tag, point, se, wald, width, cred=None):
        return {
            "estimator": tag, "point": point, "se": se, "wald_ci": list(wald),
            "wald_width": width,
            "credible_ci": list(cred.as_tuple()) if cred is not None else None,
            "credible_width": cred.width if cred is not None else None,
        }

    return [
        row("RS", rs.point, rs.se, rs.wald_ci, rs.wald_width),
        row("CRC_CLOSED", crc.point, crc.se, crc.wald_ci, crc.wald_width, crc_ci),
        row("RS_MI", rs_mi.pooled_point, rs_mi.se, rs_mi.wald_ci, rs_mi.wald_width),
        row("CRC_MI", crc_mi.pooled_point, crc_mi.se, crc_mi.wald_ci, crc_mi.wald_width,
            crc_mi.pooled_credible_ci),
    ]


def _format_example(rows: list[dict]) -> str:
    def pair(p):
        return f"({p[0]:.1f}, {p[1]:.1f})"

    lines = [f"{'Estimator':<12}{'Mean':>8}{'SE':>7}  {'95% CI':<32}Width"]
    for r in rows:
        ci = pair(r["wald_ci"])
        width = f"{r['wald_width']:.1f}"
        if r["credible_ci"] is not None:
            ci += ", " + pair(r["credible_ci"]) + "*"
            width += f", {r['credible_width']:.1f}*"
        lines.append(f"{r['estimator']:<12}{r['point']:>8.1f}{r['se']:>7.1f}  {ci:<32}{width}")
    lines.append("* scale-shift credible interval")
    return "\n".join(lines) + "\n"


def cmd_example(args) -> int:
    rows = example_rows(args.seed, args.m, args.draws)
    if args.format == "json":
        doc = {"seed": args.seed, "m": args.m, "draws": args.draws, "rows": rows}
        _write(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        _write(_format_example(rows), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anchorcrc",
                     description="Misclassification-corrected anchor-stream case count estimation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, draws=True):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"root random seed (default {DEFAULT_SEED})")
        if draws:
            p.add_argument("--draws", type=_min_draws, default=1000,
                           help="posterior draws S (default 1000)")
        p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("estimate", help="estimate the case count from observed data")
    p.add_argument("input", help="input JSON file")
    p.add_argument("--method", choices=["rs", "crc", "mle", "all"], default="all")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mi-estimate", help="multiple imputation over validation data")
    p.add_argument("input", help="input JSON file with val1/val2 validation tables")
    p.add_argument("--method", choices=["rs", "crc", "all"], default="all")
    p.add_argument("--m", type=_at_least_two, default=100, help="imputations (default 100)")
    common(p)
    p.set_defaults(func=cmd_mi_estimate)

    p = sub.add_parser("simulate", help="run simulation scenarios")
    p.add_argument("--scenarios", required=True, help="JSON array of scenario objects")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--format", choices=["csv", "json", "markdown"], default="csv")
    p.add_argument("--replicates", type=_positive, default=None,
                   help="override n_replicates of every scenario")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--draws", type=_min_draws, default=None,
                   help="override s_draws of every scenario")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", help="reproduce the bundled worked example")
    p.add_argument("--m", type=_at_least_two, default=100)
    p.add_argument("--format", choices=["text", "json"], default="text")
    common(p)
    p.set_defaults(func=cmd_example)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except CRCError as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
