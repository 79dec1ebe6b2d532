import pytest

from monodecomp.errors import InputError
from monodecomp.experiment import comparison_report, regression_report, select_best, summarize
from monodecomp.experiment.analysis import five_numbers, json_safe, record_to_row
from monodecomp.metrics import MetricRecord
from monodecomp.model import Parameters, Provenance


def row(strategy="EV", linkage="average", actual=3, requested=None, combined=0.5, codebase="cb", **extra):
    base = {c: None for c in ("depth", "wc", "ws", "we", "wi", "wr", "ww", "wAccess", "wRead", "wWrite", "wSequence")}
    base.update(codebase=codebase, strategy=strategy, linkage=linkage, actualN=actual,
                requestedN=requested or actual, cohesion=0.5, coupling=0.2, complexity=1.0,
                uniformComplexity=0.5, combined=combined)
    base.update(extra)
    return base


def test_select_best_single_and_min():
    assert select_best([row()]) == [row()]
    a, b = row(combined=0.3, linkage="single"), row(combined=0.4, linkage="average")
    assert select_best([b, a]) == [a]


def test_select_best_tie_goes_to_smaller_parameters():
    a, b = row(linkage="complete"), row(linkage="average")
    assert select_best([a, b]) == [b]


def test_select_best_maximizes_cohesion():
    a, b = row(cohesion=0.9, linkage="single"), row(cohesion=0.1)
    assert select_best([a, b], metric="cohesion") == [a]


def test_five_numbers():
    assert five_numbers([4.0]) == {"n": 1, "min": 4.0, "q1": 4.0, "median": 4.0, "q3": 4.0, "max": 4.0,
                                   "outliers": []}
    s = five_numbers([5, 3, 1, 2, 4])
    assert (s["median"], s["q1"], s["q3"], s["min"], s["max"]) == (3, 2, 4, 1, 5)
    s = five_numbers([1, 2, 3, 4, 100])
    assert s["outliers"] == [100] and s["max"] == 4
    with pytest.raises(InputError):
        five_numbers([])


def test_summarize_groups():
    rows = [row("EV", combined=0.1), row("EV", combined=0.3), row("CV", combined=0.2)]
    out = summarize(rows, ["strategy"], "combined")
    assert [g["group"] for g in out] == [{"strategy": "CV"}, {"strategy": "EV"}]
    assert out[1]["median"] == pytest.approx(0.2)
    assert len(summarize(rows, [], "combined")) == 1
    with pytest.raises(InputError) as info:
        summarize(rows, ["nope"], "combined")
    assert info.value.code == "UNKNOWN_COLUMN"


def test_compare_identical_sources():
    rows = [row("EV", combined=v) for v in (0.1, 0.2, 0.4)] + [row("CV", combined=v) for v in (0.3, 0.5, 0.6)]
    rep = comparison_report([("a", rows), ("b", rows)])
    assert len(rep["comparisons"]) == 2
    assert all(c["result"]["p"] == 1.0 and c["result"]["t"] == 0.0 for c in rep["comparisons"])


def test_compare_strategies_in_one_source():
    rows = [row("EV", combined=v) for v in (0.1, 0.2, 0.3)] + [row("CV", combined=v) for v in (0.6, 0.7, 0.8)]
    rep = comparison_report([("only", rows)])
    (c,) = rep["comparisons"]
    assert (c["a"], c["b"]) == ("CV", "EV")
    assert c["reject"] is True


def test_compare_reports_small_groups_per_bucket():
    rows = [row("EV", actual=3, combined=0.1), row("EV", actual=3, combined=0.2), row("EV", actual=4),
            row("CV", actual=3, combined=0.3), row("CV", actual=3, combined=0.5), row("CV", actual=4)]
    rep = comparison_report([("x", rows)])
    by_bucket = {c["clusters"]: c for c in rep["comparisons"]}
    assert "result" in by_bucket[3]
    assert by_bucket[4]["error"] == "SAMPLE_TOO_SMALL"
    pooled = comparison_report([("x", rows)], by_clusters=False)
    assert [c["clusters"] for c in pooled["comparisons"]] == ["all"]


def test_regression_constant_metric_zero_slopes():
    rows = [row("FVSA", wr=float(w), ww=float(100 - w), combined=0.25) for w in range(0, 101, 10)]
    rep = regression_report(rows)
    (entry,) = rep["strategies"]
    assert entry["dropOne"] is True and len(entry["fits"]) == 2
    for fit in entry["fits"]:
        assert list(fit["coefficients"]) == [0.0]


def test_regression_linkage_dummies():
    rows = []
    for i, linkage in enumerate(["average", "complete", "single"] * 4):
        rows.append(row("EV", linkage=linkage, combined=0.1 * (i % 3) + 0.01 * i))
    rep = regression_report(rows)
    fit = rep["strategies"][0]["fits"][0]
    assert fit["names"] == ("linkage[complete]", "linkage[single]")


def test_regression_too_few_rows():
    rep = regression_report([row("EV", linkage="single"), row("EV", linkage="average")])
    assert rep["strategies"][0]["error"] == "SAMPLE_TOO_SMALL"


def test_regression_unknown_param():
    with pytest.raises(InputError):
        regression_report([row()], params=["bogus"])


def test_record_to_row_matches_csv_rounding():
    prov = Provenance("SA", Parameters("single", measure_weights=(10.0, 20.0, 30.0, 40.0)), 3, 3)
    r = record_to_row(MetricRecord(1 / 3, 0.0, 2.0, 0.5, 0.3888888, prov, "cb"))
    assert r["cohesion"] == 0.333333 and r["wSequence"] == 40 and r["depth"] is None


def test_json_safe():
    assert json_safe({"a": [float("inf"), float("-inf"), float("nan"), 1.0]}) == {"a": ["inf", "-inf", "nan", 1.0]}
