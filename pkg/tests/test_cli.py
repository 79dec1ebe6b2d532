import json

import pytest

from monodecomp.cli import main
from monodecomp.ingestion import load_model
from monodecomp.metrics import read_metrics_csv


@pytest.fixture
def model_path(tmp_path):
    path = tmp_path / "model.json"
    assert main(["synth", "--entities", "12", "--functionalities", "20", "--seed", "7",
                 "--dimension", "32", "--out", str(path)]) == 0
    return path


def test_synth_is_valid_and_deterministic(tmp_path, model_path):
    again = tmp_path / "again.json"
    main(["synth", "--entities", "12", "--functionalities", "20", "--seed", "7", "--dimension", "32",
          "--out", str(again)])
    assert again.read_bytes() == model_path.read_bytes()
    assert len(load_model(model_path).entities) == 12


def test_synth_bad_flags(capsys):
    assert main(["synth", "--entities", "0", "--functionalities", "3"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["synth", "--entities", "x", "--functionalities", "3"])
    assert info.value.code == 2


def test_synth_unwritable(tmp_path):
    assert main(["synth", "--entities", "3", "--functionalities", "3",
                 "--out", str(tmp_path / "missing" / "m.json")]) == 1


def test_validate_exit_codes(tmp_path, model_path, capsys):
    assert main(["validate", str(model_path)]) == 0
    doc = json.loads(model_path.read_text())
    doc["methods"][0]["calls"].append("X")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    capsys.readouterr()
    assert main(["validate", str(bad), "--format", "json"]) == 2
    report = json.loads(capsys.readouterr().out)
    assert {"code": "DANGLING_CALL", "subject": "X"}.items() <= report["issues"][0].items()
    assert main(["validate", str(tmp_path / "absent.json")]) == 1
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{")
    assert main(["validate", str(garbled)]) == 1


def test_generate(tmp_path, model_path, capsys):
    out = tmp_path / "d.json"
    args = ["generate", str(model_path), "--strategy", "fvcg", "--depth", "2", "--linkage", "average", "--n", "5"]
    assert main([*args, "--type-weights", "25,25,25,25", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["provenance"]["actualN"] <= 5
    assert capsys.readouterr().out.strip() == str(doc["provenance"]["actualN"])
    assert main([*args, "--type-weights", "30,30,30,20", "--out", str(out)]) == 2
    assert main([*args, "--type-weights", "30,30,20,20", "--out", str(out)]) == 0
    assert main(["generate", str(model_path), "--strategy", "sa", "--measure-weights", "100,0,0,0",
                 "--n", "4", "--out", str(out)]) == 0
    entities = {e for c in json.loads(out.read_text())["clusters"] for e in c}
    assert entities <= set(load_model(model_path).entities)
    assert main([*args, "--type-weights", "0,0,0,100", "--depth", "1", "--out", str(out)]) == 3


def test_generate_inapplicable(tmp_path):
    model = tmp_path / "m.json"
    main(["synth", "--entities", "5", "--functionalities", "4", "--trace-min", "0", "--trace-max", "0",
          "--out", str(model)])
    assert main(["generate", str(model), "--strategy", "sa", "--n", "3", "--out", str(tmp_path / "d.json")]) == 3


def test_evaluate(tmp_path, model_path, capsys):
    entities = load_model(model_path).entities
    one = tmp_path / "one.json"
    one.write_text(json.dumps({"clusters": [list(entities)]}))
    capsys.readouterr()
    assert main(["evaluate", str(model_path), str(one)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["complexity"] == 0 and doc["coupling"] == 0
    assert "combined" not in doc
    assert main(["evaluate", str(model_path), str(one), "--max-complexity", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["uniformComplexity"] == 0
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"clusters": [["NotAnEntity"]]}))
    assert main(["evaluate", str(model_path), str(wrong)]) == 2


def test_evaluate_set_normalizes(tmp_path, model_path, capsys):
    entities = list(load_model(model_path).entities)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps({"clusters": [entities]}))
    b.write_text(json.dumps({"clusters": [[e] for e in entities]}))
    capsys.readouterr()
    assert main(["evaluate", str(model_path), str(a), str(b), "--format", "csv"]) == 0
    rows = read_metrics_csv(capsys.readouterr().out)
    assert [r["uniformComplexity"] for r in rows] == [0.0, 1.0]


def test_sweep_ev_and_reports(tmp_path, model_path, capsys):
    out = tmp_path / "ev"
    assert main(["sweep", str(model_path), "--strategy", "ev", "--out-dir", str(out)]) == 0
    rows = read_metrics_csv((out / "metrics.csv").read_text())
    assert len(rows) == 9
    assert len((out / "decompositions.jsonl").read_text().splitlines()) == 9
    assert (out / "diagnostics.log").exists()
    assert main(["summarize", str(out / "metrics.csv"), "--group-by", "linkage"]) == 0
    assert main(["summarize", str(out / "metrics.csv"), "--group-by", "bogus"]) == 2
    assert main(["regress", str(out / "metrics.csv"), "--metric", "nope"]) == 2


def test_sweep_all_and_compare_self(tmp_path, model_path, capsys):
    out = tmp_path / "all"
    assert main(["sweep", str(model_path), "--strategy", "all", "--weight-step", "50",
                 "--depth-max", "2", "--out-dir", str(out)]) == 0
    rows = read_metrics_csv((out / "metrics.csv").read_text())
    assert {r["strategy"] for r in rows} == {"FVCG", "FVSA", "SA", "CV", "EV"}
    csv_path = str(out / "metrics.csv")
    report_path = tmp_path / "cmp.json"
    code = main(["compare", csv_path, csv_path, "--out", str(report_path)])
    report = json.loads(report_path.read_text())
    tested = [c for c in report["comparisons"] if "result" in c]
    assert tested and all(c["result"]["p"] == 1.0 for c in tested)
    too_small = [c for c in report["comparisons"] if c.get("error") == "SAMPLE_TOO_SMALL"]
    assert code == (4 if too_small else 0)
    assert main(["compare", csv_path, "--format", "csv", "--out", str(tmp_path / "cmp.csv")]) in (0, 4)
    assert main(["regress", csv_path, "--format", "csv", "--out", str(tmp_path / "reg.csv")]) == 0


def test_sweep_inapplicable(tmp_path):
    model = tmp_path / "m.json"
    main(["synth", "--entities", "5", "--functionalities", "4", "--trace-min", "0", "--trace-max", "0",
          "--out", str(model)])
    assert main(["sweep", str(model), "--strategy", "sa", "--out-dir", str(tmp_path / "o")]) == 3


def test_sweep_bad_flags_before_io(tmp_path):
    assert main(["sweep", str(tmp_path / "absent.json"), "--strategy", "ev", "--weight-step", "30",
                 "--out-dir", str(tmp_path / "o")]) == 2
    assert main(["sweep", str(tmp_path / "absent.json"), "--strategy", "ev", "--linkages", "ward",
                 "--out-dir", str(tmp_path / "o")]) == 2
    assert main(["sweep", str(tmp_path / "absent.json"), "--strategy", "ev", "--out-dir", str(tmp_path / "o")]) == 1


def test_regress_constant_metric(tmp_path, capsys):
    header = ("codebase,strategy,linkage,depth,wc,ws,we,wi,wr,ww,wAccess,wRead,wWrite,wSequence,"
              "requestedN,actualN,cohesion,coupling,complexity,uniformComplexity,combined\n")
    lines = [f"cb,FVSA,average,,,,,,{w},{100 - w},,,,,3,3,0.5,0.5,1.000000,0.5,0.400000\n"
             for w in range(0, 101, 10)]
    path = tmp_path / "m.csv"
    path.write_text(header + "".join(lines))
    capsys.readouterr()
    assert main(["regress", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert all(fit["coefficients"] == [0.0] for fit in report["strategies"][0]["fits"])
    assert main(["summarize", str(path), "--metric", "combined", "--group-by", ""]) == 0
    one = tmp_path / "one.csv"
    one.write_text(header + lines[0])
    capsys.readouterr()
    assert main(["summarize", str(one)]) == 0
    (group,) = json.loads(capsys.readouterr().out)["groups"]
    assert group["min"] == group["q1"] == group["median"] == group["q3"] == group["max"] == 0.4
