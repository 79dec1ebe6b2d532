"""Codebase-model files (``cdm/1`` JSON) and deterministic synthetic models."""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError, ModelFormatError, ModelValidationError, StorageError
from .model import (
    RAW_METHOD_TYPES,
    Access,
    CodebaseModel,
    Functionality,
    MethodRecord,
    MethodType,
    Mode,
    validate_model,
)

FORMAT_VERSION = "cdm/1"
DEFAULT_DIMENSION = 384

_TOP_KEYS = {"version", "name", "embeddingDimension", "methods", "entities", "functionalities"}
_METHOD_REQUIRED = {"id", "className", "methodType", "embedding", "calls"}
_METHOD_OPTIONAL = {"superClass", "entityName"}
_FUNC_KEYS = {"name", "controllerMethodId", "trace"}
_ACCESS_KEYS = {"entity", "mode"}

# Written label per normalized type; intermediate is stored as "other".
_TYPE_LABEL = {
    MethodType.CONTROLLER: "controller",
    MethodType.SERVICE: "service",
    MethodType.ENTITY: "entity",
    MethodType.INTERMEDIATE: "other",
}


def _check_keys(obj, required: set, optional: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected an object", code="SCHEMA_ERROR")
    missing = required - obj.keys()
    extra = obj.keys() - required - optional
    if missing:
        raise ModelFormatError(f"{where}: missing field(s) {sorted(missing)}", code="SCHEMA_ERROR")
    if extra:
        raise ModelFormatError(f"{where}: unknown field(s) {sorted(extra)}", code="SCHEMA_ERROR")


def _expect(value, kind, where: str):
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ModelFormatError(f"{where}: expected {kind.__name__}, got {type(value).__name__}",
                               code="SCHEMA_ERROR")
    return value


def model_from_dict(doc) -> CodebaseModel:
    """Build a model from parsed JSON, enforcing the schema (not the invariants)."""
    _check_keys(doc, _TOP_KEYS, set(), "model")
    if doc["version"] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported version {doc['version']!r}", code="SCHEMA_ERROR")
    methods = []
    for i, raw in enumerate(_expect(doc["methods"], list, "methods")):
        where = f"methods[{i}]"
        _check_keys(raw, _METHOD_REQUIRED, _METHOD_OPTIONAL, where)
        label = raw["methodType"]
        if label not in RAW_METHOD_TYPES:
            raise ModelFormatError(f"{where}: unknown methodType {label!r}", code="SCHEMA_ERROR")
        embedding = tuple(float(_expect(v, float, f"{where}.embedding"))
                          for v in _expect(raw["embedding"], list, f"{where}.embedding"))
        calls = tuple(_expect(c, str, f"{where}.calls") for c in _expect(raw["calls"], list, f"{where}.calls"))
        methods.append(MethodRecord(
            id=_expect(raw["id"], str, f"{where}.id"),
            class_name=_expect(raw["className"], str, f"{where}.className"),
            method_type=RAW_METHOD_TYPES[label],
            embedding=embedding,
            calls=calls,
            super_class=_expect(raw["superClass"], str, f"{where}.superClass") if raw.get("superClass") is not None else None,
            entity_name=_expect(raw["entityName"], str, f"{where}.entityName") if raw.get("entityName") is not None else None,
        ))
    functionalities = []
    for i, raw in enumerate(_expect(doc["functionalities"], list, "functionalities")):
        where = f"functionalities[{i}]"
        _check_keys(raw, _FUNC_KEYS, set(), where)
        trace = []
        for j, acc in enumerate(_expect(raw["trace"], list, f"{where}.trace")):
            _check_keys(acc, _ACCESS_KEYS, set(), f"{where}.trace[{j}]")
            if acc["mode"] not in ("R", "W"):
                raise ModelFormatError(f"{where}.trace[{j}]: mode must be 'R' or 'W'", code="SCHEMA_ERROR")
            trace.append(Access(_expect(acc["entity"], str, f"{where}.trace[{j}].entity"), Mode(acc["mode"])))
        functionalities.append(Functionality(
            name=_expect(raw["name"], str, f"{where}.name"),
            controller_method_id=_expect(raw["controllerMethodId"], str, f"{where}.controllerMethodId"),
            trace=tuple(trace),
        ))
    entities = tuple(_expect(e, str, "entities") for e in _expect(doc["entities"], list, "entities"))
    return CodebaseModel(
        name=_expect(doc["name"], str, "name"),
        embedding_dimension=_expect(doc["embeddingDimension"], int, "embeddingDimension"),
        methods=tuple(methods),
        entities=entities,
        functionalities=tuple(functionalities),
    )


def model_to_dict(model: CodebaseModel) -> dict:
    methods = []
    for m in model.methods:
        obj = {"id": m.id, "className": m.class_name}
        if m.super_class is not None:
            obj["superClass"] = m.super_class
        obj["methodType"] = _TYPE_LABEL[m.method_type]
        if m.entity_name is not None:
            obj["entityName"] = m.entity_name
        obj["embedding"] = list(m.embedding)
        obj["calls"] = list(m.calls)
        methods.append(obj)
    return {
        "version": FORMAT_VERSION,
        "name": model.name,
        "embeddingDimension": model.embedding_dimension,
        "methods": methods,
        "entities": list(model.entities),
        "functionalities": [
            {
                "name": f.name,
                "controllerMethodId": f.controller_method_id,
                "trace": [{"entity": a.entity, "mode": a.mode.value} for a in f.trace],
            }
            for f in model.functionalities
        ],
    }


def load_model(path) -> CodebaseModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    model = model_from_dict(doc)
    report = validate_model(model)
    if report:
        raise ModelValidationError(report)
    return model


def dump_json(obj) -> str:
    """Canonical JSON text used for every file this package writes."""
    return json.dumps(obj, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def save_model(model: CodebaseModel, path) -> None:
    write_text(path, dump_json(model_to_dict(model)))


def hash_embedding(tokens, dimension: int) -> tuple[float, ...]:
    """Signed feature hashing of ``tokens`` into a unit vector.

    Each token's 64-bit BLAKE2b digest (little-endian) picks the slot
    ``h % dimension`` and its top bit the sign (clear adds +1, set adds -1),
    so the sign does not depend on the slot. The sum is L2-normalized unless
    it is all zeros.
    """
    if dimension < 1:
        raise InputError(f"dimension must be >= 1, got {dimension}")
    acc = [0] * dimension
    for token in tokens:
        h = token_hash(token)
        acc[h % dimension] += -1 if h >> 63 else 1
    norm = math.sqrt(sum(v * v for v in acc))
    if norm == 0:
        return tuple(0.0 for _ in acc)
    return tuple(v / norm for v in acc)


def token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SyntheticSpec:
    entity_count: int
    functionality_count: int
    methods_per_class: int = 3
    embedding_dimension: int = DEFAULT_DIMENSION
    trace_length_range: tuple[int, int] = (1, 6)
    seed: int = 0

    def validate(self) -> None:
        for name in ("entity_count", "functionality_count", "methods_per_class", "embedding_dimension"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1, got {getattr(self, name)}")
        lo, hi = self.trace_length_range
        if lo < 0 or hi < lo:
            raise InputError(f"bad trace length range {self.trace_length_range}")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")


_VERBS = ["get", "set", "find", "create", "update", "delete", "list", "check", "compute",
          "load", "save", "apply", "build", "validate", "submit", "cancel", "approve", "sync"]
_NOUNS = ["user", "order", "item", "invoice", "payment", "account", "product", "cart",
          "review", "shipment", "stock", "price", "customer", "report", "session", "tag",
          "address", "coupon", "ticket", "event", "message", "course", "grade", "room"]
_BODY = ["if", "return", "for", "new", "null", "list", "map", "stream", "filter", "id",
         "name", "status", "date", "count", "total", "amount", "repository", "service",
         "optional", "exception", "throw", "equals", "size", "add", "remove", "value"]


def generate_synthetic(spec: SyntheticSpec) -> CodebaseModel:
    """Generate a layered Spring-style monolith with stand-in embeddings.

    Layout: entity classes (some extending a shared base entity), one
    repository per entity, a layer of services that call each other,
    repositories and entities, and controllers that each start one
    functionality. Every functionality's trace favours a random "home" group of
    entities so clustering has structure to find.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    dim = spec.embedding_dimension
    k = spec.methods_per_class
    methods: list[MethodRecord] = []
    pending: list[dict] = []

    def add(cls, name, mtype, calls=(), super_class=None, entity=None, extra_tokens=()):
        body = [rng.choice(_BODY) for _ in range(rng.randint(4, 12))]
        tokens = [t.lower() for t in (cls, name)] + list(extra_tokens) + body
        pending.append(dict(id=f"{cls}.{name}", class_name=cls, method_type=mtype, calls=list(calls),
                            super_class=super_class, entity_name=entity, tokens=tokens))
        return f"{cls}.{name}"

    def method_name(i):
        return f"{rng.choice(_VERBS)}{rng.choice(_NOUNS).capitalize()}{i}"

    width = len(str(spec.entity_count))
    entities = [f"Entity{i:0{width}d}" for i in range(1, spec.entity_count + 1)]
    nouns = {e: rng.choice(_NOUNS) for e in entities}

    base_methods = [add("BaseEntity", f"{v}Id", MethodType.INTERMEDIATE) for v in ("get", "set")]
    entity_methods: dict[str, list[str]] = {}
    for e in entities:
        parent = "BaseEntity" if rng.random() < 0.5 else None
        entity_methods[e] = [
            add(e, method_name(i), MethodType.ENTITY, super_class=parent, entity=e, extra_tokens=[nouns[e]])
            for i in range(k)
        ]
    repo_methods: dict[str, list[str]] = {}
    for e in entities:
        repo = f"{e}Repository"
        repo_methods[e] = [
            add(repo, method_name(i), MethodType.INTERMEDIATE,
                calls=rng.sample(entity_methods[e], rng.randint(0, min(2, k))), extra_tokens=[nouns[e]])
            for i in range(k)
        ]

    service_count = max(1, (spec.entity_count + 1) // 2)
    services: list[list[str]] = []
    service_entities: list[list[str]] = []
    for s in range(service_count):
        owned = rng.sample(entities, min(len(entities), rng.randint(1, 3)))
        service_entities.append(owned)
        cls = f"Service{s + 1:0{len(str(service_count))}d}"
        ids = []
        for i in range(k):
            calls = []
            for e in owned:
                if rng.random() < 0.7:
                    calls.append(rng.choice(repo_methods[e]))
                if rng.random() < 0.3:
                    calls.append(rng.choice(entity_methods[e]))
            if rng.random() < 0.2:
                calls.append(rng.choice(base_methods))
            ids.append(add(cls, method_name(i), MethodType.SERVICE, calls=sorted(set(calls)),
                           extra_tokens=[nouns[e] for e in owned]))
        services.append(ids)
    # service-to-service calls, including occasional cycles
    all_service_ids = [m for ids in services for m in ids]
    for rec in pending:
        if rec["method_type"] is MethodType.SERVICE and rng.random() < 0.3:
            other = rng.choice(all_service_ids)
            if other != rec["id"] and other not in rec["calls"]:
                rec["calls"].append(other)

    width_f = len(str(spec.functionality_count))
    functionalities = []
    for f in range(spec.functionality_count):
        cls = f"Controller{f // k + 1:0{width_f}d}"
        home = rng.randrange(service_count)
        picked = [rng.choice(services[home])]
        if rng.random() < 0.4:
            picked.append(rng.choice(rng.choice(services)))
        name = f"{rng.choice(_VERBS)}{rng.choice(_NOUNS).capitalize()}{f + 1:0{width_f}d}"
        ctrl = add(cls, name, MethodType.CONTROLLER, calls=sorted(set(picked)),
                   extra_tokens=[nouns[e] for e in service_entities[home]])
        lo, hi = spec.trace_length_range
        length = rng.randint(lo, hi)
        trace = []
        for _ in range(length):
            pool = service_entities[home] if rng.random() < 0.75 else entities
            trace.append(Access(rng.choice(pool), Mode.WRITE if rng.random() < 0.35 else Mode.READ))
        functionalities.append(Functionality(f"F{f + 1:0{width_f}d}_{name}", ctrl, tuple(trace)))

    for rec in pending:
        tokens = rec.pop("tokens")
        rec["calls"] = tuple(sorted(set(rec["calls"])))
        methods.append(MethodRecord(embedding=hash_embedding(tokens, dim), **rec))

    return CodebaseModel(
        name=f"synthetic-{spec.seed}",
        embedding_dimension=dim,
        methods=tuple(methods),
        entities=tuple(entities),
        functionalities=tuple(functionalities),
    )
