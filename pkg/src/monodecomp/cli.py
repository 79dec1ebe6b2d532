"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse failure, 2 invalid input or flags,
3 strategy inapplicable, 4 statistical preconditions not met.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .clustering import (
    Linkage,
    decomposition_to_dict,
    load_decomposition,
    parameters_to_dict,
    save_decomposition,
)
from .errors import (
    EngineError,
    InputError,
    ModelFormatError,
    ModelValidationError,
    SampleTooSmall,
    StorageError,
    StrategyInapplicable,
    ZeroDenominator,
)
from .experiment import (
    SweepConfig,
    comparison_report,
    regression_report,
    run_sweep,
    run_sweeps,
    summarize,
)
from .experiment.analysis import json_safe, record_to_row
from .experiment.sweep import STRATEGIES, generate_decomposition
from .ingestion import SyntheticSpec, dump_json, generate_synthetic, load_model, model_to_dict, write_text
from .metrics import MetricRecord, evaluate, normalize, read_metrics_csv, records_to_csv
from .model import Parameters
from .sa_similarity import MeasureWeights
from .vectorization import AccessWeights, TypeWeights

log = logging.getLogger("monodecomp")

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_INAPPLICABLE, EXIT_STATS = 0, 1, 2, 3, 4


def _setup_logging() -> None:
    level_name = os.environ.get("DECOMP_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    root = logging.getLogger("monodecomp")
    root.setLevel(level)
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)


def _emit(text: str, out: str | None) -> None:
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _json_text(obj) -> str:
    return json.dumps(json_safe(obj), indent=1, allow_nan=False) + "\n"


def _weights(text: str | None, count: int, flag: str) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"{flag} must be comma-separated numbers, got {text!r}") from None
    if len(values) != count:
        raise InputError(f"{flag} needs {count} values, got {len(values)}")
    return values


def _table(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else row.get(c) for c in columns])
    return buf.getvalue()


def _read_csv(path: str) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return read_metrics_csv(text)


# --- commands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        load_model(args.model)
        issues = ()
    except ModelValidationError as exc:
        issues = exc.report
    if args.format == "json":
        sys.stdout.write(_json_text({"valid": not issues,
                                     "issues": [{"code": i.code, "subject": i.subject, "message": i.message}
                                                for i in issues]}))
    else:
        for i in issues:
            sys.stdout.write(f"{i.code}\t{i.subject}\t{i.message}\n")
        if not issues:
            sys.stdout.write("ok\n")
    return EXIT_INPUT if issues else EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        entity_count=args.entities,
        functionality_count=args.functionalities,
        methods_per_class=args.methods_per_class,
        embedding_dimension=args.dimension,
        trace_length_range=(args.trace_min, args.trace_max),
        seed=args.seed,
    )
    spec.validate()
    model = generate_synthetic(spec)
    _emit(dump_json(model_to_dict(model)), args.out)
    return EXIT_OK


def _generation_parameters(args) -> Parameters:
    strategy = args.strategy.upper()
    tw = _weights(args.type_weights, 4, "--type-weights")
    aw = _weights(args.access_weights, 2, "--access-weights")
    mw = _weights(args.measure_weights, 4, "--measure-weights")
    depth = None
    if strategy == "FVCG":
        tw = tw or (25.0, 25.0, 25.0, 25.0)
        TypeWeights(*tw)
        depth = args.depth
        if depth < 1:
            raise InputError(f"--depth must be >= 1, got {depth}")
    elif strategy == "FVSA":
        aw = aw or (50.0, 50.0)
        AccessWeights(*aw)
    elif strategy == "SA":
        mw = mw or (25.0, 25.0, 25.0, 25.0)
        MeasureWeights(*mw)
    return Parameters(
        linkage=Linkage(args.linkage).value,
        depth=depth,
        type_weights=tw if strategy == "FVCG" else None,
        access_weights=aw if strategy == "FVSA" else None,
        measure_weights=mw if strategy == "SA" else None,
    )


def cmd_generate(args) -> int:
    params = _generation_parameters(args)
    if args.n < 1:
        raise InputError(f"--n must be >= 1, got {args.n}", code="BAD_CLUSTER_COUNT")
    model = load_model(args.model)
    dec = generate_decomposition(model, args.strategy, params, args.n)
    save_decomposition(dec, args.out)
    sys.stdout.write(f"{dec.actual_n}\n")
    return EXIT_OK


def _record_dict(record: MetricRecord, path: str) -> dict:
    out = {"decomposition": path, "codebase": record.codebase,
           "cohesion": record.cohesion, "coupling": record.coupling, "complexity": record.complexity}
    if record.uniform_complexity is not None:
        out["uniformComplexity"] = record.uniform_complexity
        out["combined"] = record.combined
    if record.provenance is not None:
        p = record.provenance
        out["provenance"] = {"strategy": p.strategy, "parameters": parameters_to_dict(p.parameters),
                             "requestedN": p.requested_n, "actualN": p.actual_n}
    return out


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    decs = [load_decomposition(p) for p in args.decompositions]
    known = set(model.entities)
    for path, dec in zip(args.decompositions, decs):
        unknown = sorted(dec.entities() - known)
        if unknown:
            raise InputError(f"{path}: entities not in the model: {', '.join(unknown)}", code="UNKNOWN_ENTITY")
    records = [evaluate(dec, model) for dec in decs]
    top = args.max_complexity
    if top is None and len(records) > 1:
        top = max(r.complexity for r in records)
    if top is not None:
        if top < 0:
            raise InputError(f"--max-complexity must be >= 0, got {top}")
        records = [normalize(r, top) for r in records]
    if args.format == "csv":
        sys.stdout.write(records_to_csv(records))
    else:
        docs = [_record_dict(r, p) for r, p in zip(records, args.decompositions)]
        sys.stdout.write(_json_text(docs[0] if len(docs) == 1 else docs))
    return EXIT_OK


def _sweep_config_kwargs(args) -> dict:
    try:
        linkages = tuple(Linkage(l) for l in args.linkages.split(","))
    except ValueError:
        raise InputError(f"--linkages must name single, complete or average, got {args.linkages!r}") from None
    return {
        "weight_step": args.weight_step,
        "depth_range": (args.depth_min, args.depth_max),
        "linkages": linkages,
    }


def cmd_sweep(args) -> int:
    kwargs = _sweep_config_kwargs(args)
    strategies = list(STRATEGIES) if args.strategy.lower() == "all" else [args.strategy]
    for s in strategies:
        SweepConfig(s, **kwargs)
    if args.jobs < 1:
        raise InputError(f"--jobs must be >= 1, got {args.jobs}")
    model = load_model(args.model)
    if len(strategies) == 1:
        res = run_sweep(model, SweepConfig(strategies[0], **kwargs), jobs=args.jobs)
        pairs, diagnostics, violations, failures = res.records, res.diagnostics, res.violations, {}
    else:
        pairs, diagnostics, violations, failures = run_sweeps(model, strategies, jobs=args.jobs, **kwargs)
        if not pairs and failures:
            raise next(iter(failures.values()))

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {out_dir}: {exc}") from exc
    records = [r for _, r in pairs]
    if args.format == "json":
        write_text(out_dir / "metrics.json", _json_text([record_to_row(r) for r in records]))
    else:
        write_text(out_dir / "metrics.csv", records_to_csv(records))
    write_text(out_dir / "decompositions.jsonl",
               "".join(json.dumps(decomposition_to_dict(d), separators=(",", ":")) + "\n" for d, _ in pairs))
    log_lines = [f"STRATEGY_INAPPLICABLE {s}: {exc}" for s, exc in sorted(failures.items())]
    log_lines += diagnostics + violations
    write_text(out_dir / "diagnostics.log", "".join(line + "\n" for line in log_lines))
    sys.stdout.write(f"{len(records)} records\n")
    return EXIT_OK


def _load_sources(paths) -> list[tuple[str, list[dict]]]:
    return [(p, _read_csv(p)) for p in paths]


def cmd_compare(args) -> int:
    sources = _load_sources(args.csv)
    report = comparison_report(sources, metric=args.metric, by_clusters=args.by_clusters, best=args.best)
    if args.format == "csv":
        rows = []
        for c in report["comparisons"]:
            row = {k: c[k] for k in ("a", "b", "clusters", "nA", "nB")}
            row.update(c.get("result", {}))
            row["reject"] = c.get("reject")
            row["error"] = c.get("error")
            rows.append(row)
        cols = ["a", "b", "clusters", "nA", "nB", "t", "df", "p", "mean_a", "mean_b", "reject", "error"]
        _emit(_table(rows, cols), args.out)
    else:
        _emit(_json_text(report), args.out)
    too_small = any(c.get("error") == SampleTooSmall.code for c in report["comparisons"])
    return EXIT_STATS if too_small else EXIT_OK


def cmd_regress(args) -> int:
    params = args.params.split(",") if args.params else None
    rows = _read_csv(args.csv)
    report = regression_report(rows, metric=args.metric, params=params)
    if args.format == "csv":
        out_rows = []
        for entry in report["strategies"]:
            for fit in entry["fits"] or [{}]:
                base = {"strategy": entry["strategy"], "omitted": fit.get("omitted"),
                        "error": fit.get("error") or entry.get("error")}
                names = fit.get("names", ())
                for i, name in enumerate(names):
                    out_rows.append({**base, "term": name, "coefficient": fit["coefficients"][i],
                                     "stdError": fit["std_errors"][i], "t": fit["t_values"][i],
                                     "p": fit["p_values"][i], "rSquared": fit["r_squared"]})
                if "intercept" in fit and fit["intercept"] is not None:
                    out_rows.append({**base, "term": "intercept", "coefficient": fit["intercept"],
                                     "stdError": fit["intercept_std_error"], "t": fit["intercept_t"],
                                     "p": fit["intercept_p"], "rSquared": fit["r_squared"]})
                if not names and fit.get("intercept") is None:
                    out_rows.append(base)
        cols = ["strategy", "omitted", "term", "coefficient", "stdError", "t", "p", "rSquared", "error"]
        _emit(_table(out_rows, cols), args.out)
    else:
        _emit(_json_text(report), args.out)
    too_small = any(e.get("error") == SampleTooSmall.code for e in report["strategies"])
    return EXIT_STATS if too_small else EXIT_OK


def cmd_summarize(args) -> int:
    rows = _read_csv(args.csv)
    group_by = [g for g in args.group_by.split(",") if g]
    summary = summarize(rows, group_by, args.metric)
    if args.format == "csv":
        flat = []
        for s in summary:
            flat.append({**s["group"], **{k: s[k] for k in ("n", "min", "q1", "median", "q3", "max")},
                         "outliers": ";".join(repr(v) for v in s["outliers"])})
        _emit(_table(flat, [*group_by, "n", "min", "q1", "median", "q3", "max", "outliers"]), args.out)
    else:
        _emit(_json_text({"metric": args.metric, "groupBy": group_by, "groups": summary}), args.out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monodecomp", description="Microservice decomposition of monolith models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a codebase model")
    p.add_argument("model")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="write a seeded synthetic codebase model")
    p.add_argument("--entities", type=int, required=True)
    p.add_argument("--functionalities", type=int, required=True)
    p.add_argument("--methods-per-class", type=int, default=3)
    p.add_argument("--dimension", type=int, default=384)
    p.add_argument("--trace-min", type=int, default=1)
    p.add_argument("--trace-max", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("generate", help="one decomposition for one parameter tuple")
    p.add_argument("model")
    p.add_argument("--strategy", type=str.upper, choices=STRATEGIES, required=True)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--type-weights")
    p.add_argument("--access-weights")
    p.add_argument("--measure-weights")
    p.add_argument("--linkage", choices=[l.value for l in Linkage], default="average")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score decompositions against a model")
    p.add_argument("model")
    p.add_argument("decompositions", nargs="+")
    p.add_argument("--max-complexity", type=float)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="every decomposition of a strategy with metrics")
    p.add_argument("model")
    p.add_argument("--strategy", type=str.upper, choices=(*STRATEGIES, "ALL"), required=True)
    p.add_argument("--weight-step", type=float, default=10)
    p.add_argument("--depth-min", type=int, default=1)
    p.add_argument("--depth-max", type=int, default=6)
    p.add_argument("--linkages", default="single,complete,average")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="Welch's t-tests between strategies or runs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--metric", default="combined")
    p.add_argument("--by-clusters", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--best", action="store_true", help="keep only the best record per cluster count")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("regress", help="OLS of a metric on strategy parameters")
    p.add_argument("csv")
    p.add_argument("--params", help="comma-separated columns; defaults to the strategy's weights")
    p.add_argument("--metric", default="combined")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("summarize", help="box-plot statistics of a metric per group")
    p.add_argument("csv")
    p.add_argument("--group-by", default="strategy")
    p.add_argument("--metric", default="combined")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_summarize)
    return parser


def exit_code(exc: EngineError) -> int:
    if isinstance(exc, (StorageError, ModelFormatError)):
        return EXIT_IO
    if isinstance(exc, (StrategyInapplicable, ZeroDenominator)):
        return EXIT_INAPPLICABLE
    if isinstance(exc, SampleTooSmall):
        return EXIT_STATS
    return EXIT_INPUT


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelValidationError as exc:
        for issue in exc.report:
            log.error("%s %s: %s", issue.code, issue.subject, issue.message)
        return EXIT_INPUT
    except EngineError as exc:
        log.error("%s", exc)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
