import hashlib
import json
import math

import pytest

from builders import entity_model
from monodecomp.errors import InputError, ModelFormatError, ModelValidationError, StorageError
from monodecomp.ingestion import (
    SyntheticSpec,
    dump_json,
    generate_synthetic,
    hash_embedding,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from monodecomp.model import MethodType, validate_model


def minimal_doc():
    return {
        "version": "cdm/1",
        "name": "mini",
        "embeddingDimension": 2,
        "methods": [
            {"id": "C.run", "className": "C", "methodType": "controller", "embedding": [1, 0], "calls": ["E.get"]},
            {"id": "E.get", "className": "E", "methodType": "entity", "entityName": "E",
             "embedding": [0, 1], "calls": []},
        ],
        "entities": ["E"],
        "functionalities": [{"name": "f", "controllerMethodId": "C.run", "trace": [{"entity": "E", "mode": "R"}]}],
    }


def write(tmp_path, doc, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_minimal_file_loads(tmp_path):
    model = load_model(write(tmp_path, minimal_doc()))
    assert len(model.methods) == 2
    assert model.method_by_id["E.get"].method_type is MethodType.ENTITY


def test_wrong_embedding_length_is_validation_error(tmp_path):
    doc = minimal_doc()
    doc["methods"][1]["embedding"] = [0, 1, 2]
    with pytest.raises(ModelValidationError) as info:
        load_model(write(tmp_path, doc))
    assert "EMBEDDING_DIM" in {i.code for i in info.value.report}


def test_unknown_key_rejected():
    doc = minimal_doc()
    doc["methods"][0]["visibility"] = "public"
    with pytest.raises(ModelFormatError) as info:
        model_from_dict(doc)
    assert info.value.code == "SCHEMA_ERROR"


def test_bad_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": ')
    with pytest.raises(ModelFormatError, match="line 1"):
        load_model(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(StorageError):
        load_model(tmp_path / "absent.json")


@pytest.mark.parametrize("label", ["repository", "configuration", "other"])
def test_auxiliary_labels_become_intermediate(label):
    doc = minimal_doc()
    doc["methods"].append({"id": "R.x", "className": "R", "methodType": label, "embedding": [0, 0], "calls": []})
    assert model_from_dict(doc).method_by_id["R.x"].method_type is MethodType.INTERMEDIATE


def test_round_trip_and_byte_identical_saves(tmp_path):
    model = generate_synthetic(SyntheticSpec(5, 6, embedding_dimension=8, seed=4))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_model(model, a)
    save_model(model, b)
    assert a.read_bytes() == b.read_bytes()
    assert load_model(a) == model


def test_round_trip_of_hand_model():
    model = entity_model({"f1": "R:a W:b R:a"})
    assert model_from_dict(json.loads(dump_json(model_to_dict(model)))) == model


def test_save_to_unwritable_path(tmp_path):
    with pytest.raises(StorageError):
        save_model(entity_model({"f": "R:a"}), tmp_path / "no" / "such" / "dir" / "m.json")


def test_hash_embedding_empty_is_zero():
    assert hash_embedding([], 5) == (0.0,) * 5


def test_hash_embedding_single_token():
    vec = hash_embedding(["getUser"], 8)
    h = int.from_bytes(hashlib.blake2b(b"getUser", digest_size=8).digest(), "little")
    expected = [0.0] * 8
    expected[h % 8] = -1.0 if h >= 2**63 else 1.0
    assert list(vec) == expected
    assert math.isclose(sum(v * v for v in vec), 1.0)
    assert hash_embedding(["getUser"], 8) == vec


def test_hash_embedding_sign_independent_of_slot():
    # the sign must not be tied to the slot index
    signs = {}
    for i in range(400):
        v = hash_embedding([f"t{i}"], 4)
        slot = next(k for k, x in enumerate(v) if x)
        signs.setdefault(slot, set()).add(v[slot] > 0)
    assert all(s == {True, False} for s in signs.values())


def test_synthetic_is_seeded_and_valid():
    spec = SyntheticSpec(5, 8, seed=42, embedding_dimension=16)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a == b
    assert len(a.entities) == 5 and len(a.functionalities) == 8
    assert validate_model(a) == []
    assert generate_synthetic(SyntheticSpec(5, 8, seed=43, embedding_dimension=16)) != a


def test_synthetic_empty_traces():
    model = generate_synthetic(SyntheticSpec(3, 4, trace_length_range=(0, 0), embedding_dimension=4))
    assert all(f.trace == () for f in model.functionalities)


def test_synthetic_rejects_bad_spec():
    with pytest.raises(InputError):
        generate_synthetic(SyntheticSpec(0, 3))
    with pytest.raises(InputError):
        generate_synthetic(SyntheticSpec(3, 3, trace_length_range=(4, 2)))
