"""Codebase model: methods, call edges, embeddings, entities and functionality traces.

All types are frozen. :class:`CodebaseModel` sorts its collections on
construction (methods by id, entities by name, functionalities by name) so two
models holding the same content compare equal regardless of input order.
Duplicates are kept so that :func:`validate_model` can report them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

Embedding = tuple[float, ...]


class MethodType(enum.Enum):
    CONTROLLER = "controller"
    SERVICE = "service"
    ENTITY = "entity"
    INTERMEDIATE = "intermediate"


# Collector labels -> weight categories. Repository and configuration methods
# have no weight of their own and fall in with the intermediate ones.
RAW_METHOD_TYPES = {
    "controller": MethodType.CONTROLLER,
    "service": MethodType.SERVICE,
    "entity": MethodType.ENTITY,
    "repository": MethodType.INTERMEDIATE,
    "configuration": MethodType.INTERMEDIATE,
    "other": MethodType.INTERMEDIATE,
}


class Mode(enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True)
class MethodRecord:
    id: str
    class_name: str
    method_type: MethodType
    embedding: Embedding
    calls: tuple[str, ...] = ()
    super_class: str | None = None
    entity_name: str | None = None


@dataclass(frozen=True)
class Access:
    entity: str
    mode: Mode

    def __str__(self) -> str:
        return f"{self.mode.value}({self.entity})"


@dataclass(frozen=True)
class Functionality:
    name: str
    controller_method_id: str
    trace: tuple[Access, ...] = ()


@dataclass(frozen=True)
class CodebaseModel:
    name: str
    embedding_dimension: int
    methods: tuple[MethodRecord, ...]
    entities: tuple[str, ...]
    functionalities: tuple[Functionality, ...]

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(sorted(self.methods, key=lambda m: m.id)))
        object.__setattr__(self, "entities", tuple(sorted(self.entities)))
        object.__setattr__(
            self, "functionalities", tuple(sorted(self.functionalities, key=lambda f: f.name))
        )

    # Lookup tables. Built lazily; cached_property writes straight into the
    # instance dict so it works on a frozen dataclass.

    @cached_property
    def method_by_id(self) -> dict[str, MethodRecord]:
        return {m.id: m for m in self.methods}

    @cached_property
    def functionality_by_name(self) -> dict[str, Functionality]:
        return {f.name: f for f in self.functionalities}

    @cached_property
    def class_methods(self) -> dict[str, tuple[MethodRecord, ...]]:
        """Own methods per class, including classes known only as a superclass."""
        table: dict[str, list[MethodRecord]] = {}
        for m in self.methods:
            table.setdefault(m.class_name, []).append(m)
        for m in self.methods:
            if m.super_class is not None:
                table.setdefault(m.super_class, [])
        return {name: tuple(ms) for name, ms in sorted(table.items())}

    @cached_property
    def super_class_of(self) -> dict[str, str]:
        parents: dict[str, str] = {}
        for m in self.methods:
            if m.super_class is not None:
                parents.setdefault(m.class_name, m.super_class)
        return parents

    @cached_property
    def entity_class(self) -> dict[str, str]:
        """Entity name -> declaring class."""
        table: dict[str, str] = {}
        for m in self.methods:
            if m.entity_name is not None:
                table.setdefault(m.entity_name, m.class_name)
        return table

    @cached_property
    def class_entity(self) -> dict[str, str]:
        """Declaring class -> entity name."""
        return {cls: entity for entity, cls in self.entity_class.items()}


@dataclass(frozen=True)
class Provenance:
    strategy: str
    parameters: "Parameters"
    requested_n: int
    actual_n: int


@dataclass(frozen=True, order=True)
class Parameters:
    """Full parameter tuple of one decomposition run.

    Field order doubles as the canonical sort order used by sweeps and by
    tie-breaking in best-decomposition selection.
    """

    linkage: str
    depth: int | None = None
    type_weights: tuple[float, ...] | None = None
    access_weights: tuple[float, ...] | None = None
    measure_weights: tuple[float, ...] | None = None

    def sort_key(self) -> tuple:
        return (
            self.linkage,
            self.depth or 0,
            self.type_weights or (),
            self.access_weights or (),
            self.measure_weights or (),
        )


@dataclass(frozen=True)
class Decomposition:
    clusters: tuple[tuple[str, ...], ...]
    provenance: Provenance | None = None
    omitted: tuple[str, ...] = field(default=(), compare=False)

    @property
    def actual_n(self) -> int:
        return len(self.clusters)

    def entities(self) -> set[str]:
        return {e for c in self.clusters for e in c}

    def canonical(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(c) for c in self.clusters)


@dataclass(frozen=True, order=True)
class Issue:
    code: str
    subject: str
    message: str = ""

    def as_dict(self) -> dict:
        return {"code": self.code, "subject": self.subject, "message": self.message}


def _is_finite(values: Iterable[float]) -> bool:
    try:
        return all(math.isfinite(v) for v in values)
    except TypeError:
        return False


def validate_model(model: CodebaseModel) -> list[Issue]:
    """Return every invariant violation, sorted by (code, subject). Empty means valid."""
    issues: list[Issue] = []

    def report(code: str, subject: str, message: str) -> None:
        issues.append(Issue(code, subject, message))

    dim = model.embedding_dimension
    if not isinstance(dim, int) or dim < 1:
        report("BAD_DIMENSION", model.name, f"embedding dimension must be a positive integer, got {dim!r}")

    seen: set[str] = set()
    for m in model.methods:
        if m.id in seen:
            report("DUPLICATE_METHOD_ID", m.id, "method id declared more than once")
        seen.add(m.id)

    entity_set = set(model.entities)
    if len(entity_set) != len(model.entities):
        for e in sorted(entity_set):
            if model.entities.count(e) > 1:
                report("DUPLICATE_ENTITY", e, "entity declared more than once")

    declaring: dict[str, set[str]] = {}
    for m in model.methods:
        if len(m.embedding) != dim:
            report("EMBEDDING_DIM", m.id, f"embedding has length {len(m.embedding)}, expected {dim}")
        if not _is_finite(m.embedding):
            report("NON_FINITE_EMBEDDING", m.id, "embedding contains NaN, infinity or non-numbers")
        for callee in m.calls:
            if callee not in model.method_by_id:
                report("DANGLING_CALL", callee, f"called from {m.id} but not declared")
        is_entity_type = m.method_type is MethodType.ENTITY
        if is_entity_type != (m.entity_name is not None):
            report("ENTITY_TYPE_MISMATCH", m.id, "entityName must be present exactly for entity methods")
        if m.entity_name is not None:
            declaring.setdefault(m.entity_name, set()).add(m.class_name)
            if m.entity_name not in entity_set:
                report("UNDECLARED_METHOD_ENTITY", m.id, f"entity {m.entity_name!r} not in entity list")
        if m.super_class == m.class_name:
            report("INHERITANCE_CYCLE", m.class_name, "class extends itself")

    class_entities: dict[str, set[str]] = {}
    for entity, classes in declaring.items():
        if len(classes) > 1:
            report("ENTITY_CLASS_CONFLICT", entity, f"declared by several classes: {sorted(classes)}")
        for cls in classes:
            class_entities.setdefault(cls, set()).add(entity)
    for cls, ents in class_entities.items():
        if len(ents) > 1:
            report("CLASS_ENTITY_CONFLICT", cls, f"class declares several entities: {sorted(ents)}")

    for e in sorted(entity_set):
        if e not in declaring:
            report("ENTITY_WITHOUT_METHODS", e, "no entity-typed method declares this entity")

    supers: dict[str, set[str]] = {}
    for m in model.methods:
        if m.super_class is not None:
            supers.setdefault(m.class_name, set()).add(m.super_class)
    for cls, parents in sorted(supers.items()):
        if len(parents) > 1:
            report("SUPERCLASS_CONFLICT", cls, f"methods disagree on superclass: {sorted(parents)}")
    parent_of = model.super_class_of
    cyclic: set[str] = set()
    for start in parent_of:
        node = parent_of.get(start)
        for _ in range(len(parent_of)):
            if node is None or node == start:
                break
            node = parent_of.get(node)
        if node == start and parent_of[start] != start:
            cyclic.add(start)
    # one issue per cycle, named after its smallest member
    for cls in sorted(cyclic):
        members = {cls}
        node = parent_of[cls]
        while node != cls:
            members.add(node)
            node = parent_of[node]
        if cls == min(members):
            report("INHERITANCE_CYCLE", cls, f"superclass chain loops: {sorted(members)}")

    fnames: set[str] = set()
    for f in model.functionalities:
        if f.name in fnames:
            report("DUPLICATE_FUNCTIONALITY", f.name, "functionality declared more than once")
        fnames.add(f.name)
        ctrl = model.method_by_id.get(f.controller_method_id)
        if ctrl is None:
            report("UNKNOWN_CONTROLLER", f.name, f"controller {f.controller_method_id!r} not declared")
        elif ctrl.method_type is not MethodType.CONTROLLER:
            report("CONTROLLER_TYPE", f.name, f"{ctrl.id} is a {ctrl.method_type.value} method")
        for pos, access in enumerate(f.trace):
            if access.entity not in entity_set:
                report("UNKNOWN_TRACE_ENTITY", f.name, f"access #{pos} to undeclared entity {access.entity!r}")
            if not isinstance(access.mode, Mode):
                report("BAD_ACCESS_MODE", f.name, f"access #{pos} has mode {access.mode!r}")

    return sorted(set(issues))
