"""Report builders over metric rows (the dict form of a metrics CSV row)."""

from __future__ import annotations

import math
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from ..errors import InputError, SampleTooSmall, SingularDesign
from ..metrics import CSV_COLUMNS, MetricRecord, csv_row, parse_number
from .stats import drop_one_regressions, ols_fit, welch_t_test

ALPHA = 0.05
PARAMETER_COLUMNS = ("linkage", "depth", "wc", "ws", "we", "wi", "wr", "ww",
                     "wAccess", "wRead", "wWrite", "wSequence")
WEIGHT_FAMILIES = {
    "FVCG": ("wc", "ws", "we", "wi"),
    "FVSA": ("wr", "ww"),
    "SA": ("wAccess", "wRead", "wWrite", "wSequence"),
}
_TEXT_COLUMNS = ("codebase", "strategy", "linkage")


def record_to_row(record: MetricRecord) -> dict:
    """Same dict a metrics CSV row parses into (values rounded as written)."""
    row = {}
    for key, value in zip(CSV_COLUMNS, csv_row(record)):
        row[key] = value if key in _TEXT_COLUMNS else parse_number(value)
    return row


def check_columns(names: Iterable[str]) -> None:
    unknown = [n for n in names if n not in CSV_COLUMNS]
    if unknown:
        raise InputError(f"unknown column(s): {', '.join(unknown)}", code="UNKNOWN_COLUMN")


def parameter_key(row: dict) -> tuple:
    key = []
    for col in PARAMETER_COLUMNS:
        v = row.get(col)
        key.append((0, "") if v is None else (1, v))
    return tuple(key)


def select_best(rows: Sequence[dict], metric: str = "combined", direction: str | None = None) -> list[dict]:
    """Best row per (codebase, strategy, actual cluster count).

    Cohesion is maximized by default, every other metric minimized. Ties go to
    the smallest parameter tuple, then the smallest requested count.
    """
    if not rows:
        raise InputError("no records to select from", code="EMPTY_INPUT")
    check_columns([metric])
    direction = direction or ("max" if metric == "cohesion" else "min")
    if direction not in ("min", "max"):
        raise InputError(f"direction must be 'min' or 'max', got {direction!r}")
    sign = -1.0 if direction == "max" else 1.0
    best: dict[tuple, dict] = {}
    for row in rows:
        if row.get(metric) is None:
            raise InputError(f"row has no {metric} value")
        group = (row["codebase"], row["strategy"], row["actualN"])
        score = (sign * row[metric], parameter_key(row), row["requestedN"])
        current = best.get(group)
        if current is None or score < current[0]:
            best[group] = (score, row)
    return [best[g][1] for g in sorted(best)]


def _median(sorted_vals: Sequence[float]) -> float:
    n = len(sorted_vals)
    mid = n // 2
    if n % 2:
        return sorted_vals[mid]
    return (sorted_vals[mid - 1] + sorted_vals[mid]) / 2.0


def five_numbers(values: Sequence[float]) -> dict:
    """Tukey box statistics; quartiles are medians of the halves (median shared when n is odd).

    ``min``/``max`` are the whisker ends: the extreme values inside the
    1.5 x IQR fences. Points beyond the fences are listed as outliers.
    """
    vals = sorted(float(v) for v in values)
    if not vals:
        raise InputError("no values to summarize", code="EMPTY_INPUT")
    n = len(vals)
    half = (n + 1) // 2
    q1 = _median(vals[:half])
    q3 = _median(vals[n - half:])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = [v for v in vals if lo_fence <= v <= hi_fence]
    return {
        "n": n,
        "min": inside[0],
        "q1": q1,
        "median": _median(vals),
        "q3": q3,
        "max": inside[-1],
        "outliers": [v for v in vals if v < lo_fence or v > hi_fence],
    }


def _sortable(v):
    if v is None:
        return (0, 0.0, "")
    if isinstance(v, str):
        return (2, 0.0, v)
    return (1, float(v), "")


def summarize(rows: Sequence[dict], group_by: Sequence[str], metric: str) -> list[dict]:
    if not rows:
        raise InputError("no records to summarize", code="EMPTY_INPUT")
    check_columns([*group_by, metric])
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        key = tuple(row.get(col) for col in group_by)
        if row.get(metric) is not None:
            groups.setdefault(key, []).append(row[metric])
    out = []
    for key in sorted(groups, key=lambda k: tuple(_sortable(v) for v in k)):
        out.append({"group": dict(zip(group_by, key)), "metric": metric, **five_numbers(groups[key])})
    return out


def _welch_entry(a_label: str, b_label: str, clusters, a: list[float], b: list[float]) -> dict:
    entry = {"a": a_label, "b": b_label, "clusters": clusters, "nA": len(a), "nB": len(b)}
    try:
        res = welch_t_test(a, b)
    except SampleTooSmall as exc:
        entry["error"] = exc.code
        return entry
    entry["result"] = res.as_dict()
    entry["reject"] = bool(res.p < ALPHA)
    return entry


def comparison_report(sources: Sequence[tuple[str, Sequence[dict]]], metric: str = "combined",
                      by_clusters: bool = True, best: bool = False) -> dict:
    """Welch's t-tests between samples of ``metric``.

    With one source, every pair of strategies in it is compared. With several
    sources, each strategy is compared across every pair of sources.
    Samples are split by actual cluster count when ``by_clusters`` is set.
    """
    check_columns([metric])
    samples: dict[tuple[int, str], dict] = {}
    for idx, (_, rows) in enumerate(sources):
        if best and rows:
            rows = select_best(rows, metric)
        for row in rows:
            if row.get(metric) is None:
                continue
            bucket = int(row["actualN"]) if by_clusters else "all"
            samples.setdefault((idx, row["strategy"]), {}).setdefault(bucket, []).append(row[metric])

    labels = [label for label, _ in sources]
    strategies = sorted({s for (_, s) in samples})
    pairs = []
    if len(sources) == 1:
        for sa, sb in combinations(strategies, 2):
            pairs.append(((0, sa), (0, sb), sa, sb))
    else:
        for s in strategies:
            for la, lb in combinations(range(len(labels)), 2):
                pairs.append(((la, s), (lb, s), f"{labels[la]}:{s}", f"{labels[lb]}:{s}"))

    comparisons = []
    for key_a, key_b, name_a, name_b in pairs:
        buckets_a = samples.get(key_a, {})
        buckets_b = samples.get(key_b, {})
        for bucket in sorted(set(buckets_a) | set(buckets_b)):
            comparisons.append(_welch_entry(name_a, name_b, bucket,
                                            buckets_a.get(bucket, []), buckets_b.get(bucket, [])))
    return {"metric": metric, "alpha": ALPHA, "byClusters": by_clusters, "best": best,
            "comparisons": comparisons}


def _design(rows: Sequence[dict], params: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    """Numeric columns as-is; linkage dummy-coded against its first level."""
    cols, names = [], []
    for p in params:
        if p == "linkage":
            levels = sorted({r["linkage"] for r in rows})
            for level in levels[1:]:
                cols.append([1.0 if r["linkage"] == level else 0.0 for r in rows])
                names.append(f"linkage[{level}]")
        else:
            if any(r.get(p) is None for r in rows):
                raise InputError(f"column {p} is blank for some rows of this strategy")
            cols.append([r[p] for r in rows])
            names.append(p)
    return np.array(cols, dtype=float).T.reshape(len(rows), len(cols)), names


def _fit_entry(omitted, fit) -> dict:
    if isinstance(fit, SingularDesign):
        return {"omitted": omitted, "error": fit.code}
    d = fit.as_dict()
    d["omitted"] = omitted
    d["reject"] = bool(d["f_p_value"] is not None and d["f_p_value"] < ALPHA)
    return d


def regression_report(rows: Sequence[dict], metric: str = "combined",
                      params: Sequence[str] | None = None) -> dict:
    """OLS of ``metric`` on a parameter family, per strategy.

    A family whose columns sum to the same constant on every row (a weight
    family) is collinear with the intercept, so it is fitted once per omitted
    column instead.
    """
    check_columns([metric, *(params or [])])
    by_strategy: dict[str, list[dict]] = {}
    for row in rows:
        if row.get(metric) is not None:
            by_strategy.setdefault(row["strategy"], []).append(row)
    report = {"metric": metric, "alpha": ALPHA, "strategies": []}
    for strategy in sorted(by_strategy):
        srows = by_strategy[strategy]
        family = list(params) if params else list(WEIGHT_FAMILIES.get(strategy, ("linkage",)))
        entry: dict = {"strategy": strategy, "family": family, "n": len(srows), "fits": []}
        try:
            x, names = _design(srows, family)
        except InputError as exc:
            entry["error"] = str(exc)
            report["strategies"].append(entry)
            continue
        y = [r[metric] for r in srows]
        sums = x.sum(axis=1) if x.size else np.zeros(len(srows))
        constant_sum = x.shape[1] > 1 and bool(np.allclose(sums, sums[0])) and all(
            not n.startswith("linkage[") for n in names)
        try:
            if constant_sum:
                entry["dropOne"] = True
                entry["fits"] = [_fit_entry(om, fit) for om, fit in drop_one_regressions(x, y, names)]
            else:
                entry["dropOne"] = False
                entry["fits"] = [_fit_entry(None, ols_fit(x, y, True, names))]
        except SingularDesign as exc:
            entry["fits"] = [_fit_entry(None, exc)]
        except SampleTooSmall as exc:
            entry["error"] = exc.code
        report["strategies"].append(entry)
    return report


def json_safe(obj):
    """Replace non-finite floats with strings so reports stay strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    return obj

