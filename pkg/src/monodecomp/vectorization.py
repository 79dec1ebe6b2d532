"""Class, entity and functionality embeddings.

Functionality vectors come in two flavours:

* call-graph vectors: a method-type weighted mean over the methods reachable
  from the functionality's controller within a depth bound;
* access-sequence vectors: a read/write weighted mean over the embeddings of
  the entities in the functionality's trace, one term per access.

Both are computed in grouped form: embeddings are first summed per weight
category, then combined as ``(w @ sums) / (w @ counts)``. This is the same
weighted mean, lets a sweep reuse the per-category sums across every weight
tuple, and keeps scaling all weights by a power of two bit-exact.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyTrace, InputError, ZeroDenominator
from .model import CodebaseModel, Functionality, MethodRecord, MethodType, Mode

log = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9
TYPE_ORDER = (MethodType.CONTROLLER, MethodType.SERVICE, MethodType.ENTITY, MethodType.INTERMEDIATE)


def _check_weights(values, expected_len: int, name: str, check_sum: bool) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) != expected_len:
        raise InputError(f"{name} needs {expected_len} values, got {len(values)}")
    if any(not np.isfinite(v) or v < 0 for v in values):
        raise InputError(f"{name} must be finite and non-negative: {values}")
    if check_sum and abs(sum(values) - 100.0) > WEIGHT_TOLERANCE:
        raise InputError(f"{name} must sum to 100, got {sum(values)}")
    return values


@dataclass(frozen=True)
class TypeWeights:
    """Percent weights for controller, service, entity and intermediate methods."""

    wc: float
    ws: float
    we: float
    wi: float
    check_sum: bool = True

    def __post_init__(self):
        _check_weights(self.as_tuple(), 4, "type weights", self.check_sum)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.wc, self.ws, self.we, self.wi)


@dataclass(frozen=True)
class AccessWeights:
    wr: float
    ww: float
    check_sum: bool = True

    def __post_init__(self):
        _check_weights(self.as_tuple(), 2, "access weights", self.check_sum)

    def as_tuple(self) -> tuple[float, float]:
        return (self.wr, self.ww)


@dataclass(frozen=True)
class LabeledVectors:
    """Clustering input: one row per label, labels unique and sorted."""

    labels: tuple[str, ...]
    vectors: np.ndarray
    skipped: tuple[str, ...] = ()

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[0] != len(self.labels):
            raise InputError(f"need one row per label, got shape {vecs.shape} for {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise InputError("labels must be unique")
        order = sorted(range(len(self.labels)), key=self.labels.__getitem__)
        vecs = vecs[order] if order != list(range(len(order))) else vecs.copy()
        vecs.flags.writeable = False
        object.__setattr__(self, "labels", tuple(self.labels[i] for i in order))
        object.__setattr__(self, "vectors", vecs)

    def __len__(self) -> int:
        return len(self.labels)

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(zip(self.labels, self.vectors))


def mean_embedding(vectors: Sequence) -> np.ndarray:
    if len(vectors) == 0:
        raise InputError("mean of no embeddings", code="EMPTY_INPUT")
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2:
        raise InputError("embeddings must share one dimension", code="DIMENSION_MISMATCH")
    return arr.mean(axis=0)


def class_methods_closure(model: CodebaseModel, class_name: str) -> list[MethodRecord]:
    """Own methods first, then each ancestor's, each level sorted by method id."""
    if class_name not in model.class_methods:
        raise InputError(f"unknown class {class_name!r}", code="UNKNOWN_CLASS")
    out: list[MethodRecord] = []
    seen = set()
    cls: str | None = class_name
    while cls is not None and cls not in seen:
        seen.add(cls)
        out.extend(model.class_methods.get(cls, ()))
        cls = model.super_class_of.get(cls)
    return out


def class_embedding(model: CodebaseModel, class_name: str) -> np.ndarray:
    closure = class_methods_closure(model, class_name)
    if not closure:
        raise InputError(f"class {class_name!r} has no methods, own or inherited", code="EMPTY_CLASS")
    return mean_embedding([m.embedding for m in closure])


def entity_embedding(model: CodebaseModel, entity: str) -> np.ndarray:
    cls = model.entity_class.get(entity)
    if cls is None:
        raise InputError(f"unknown entity {entity!r}", code="UNKNOWN_ENTITY")
    return class_embedding(model, cls)


def call_graph_nodes(model: CodebaseModel, controller_method_id: str, depth: int) -> set[str]:
    """Methods within ``depth - 1`` call edges of the controller (breadth-first)."""
    if controller_method_id not in model.method_by_id:
        raise InputError(f"unknown method {controller_method_id!r}", code="UNKNOWN_METHOD")
    if depth < 1:
        raise InputError(f"depth must be >= 1, got {depth}")
    reached = {controller_method_id}
    frontier = deque([(controller_method_id, 1)])
    while frontier:
        mid, level = frontier.popleft()
        if level >= depth:
            continue
        for callee in model.method_by_id[mid].calls:
            if callee not in reached:
                reached.add(callee)
                frontier.append((callee, level + 1))
    return reached


def _weighted_sums(weights, sums: np.ndarray, counts: np.ndarray):
    """Numerator and denominator of a category-weighted mean.

    ``sums`` has shape (..., K, dim) and ``counts`` (..., K). Terms are added in
    category order with elementwise operations, so a single functionality and
    a batch give bit-identical results.
    """
    numer = weights[0] * sums[..., 0, :]
    denom = weights[0] * counts[..., 0]
    for k in range(1, len(weights)):
        numer = numer + weights[k] * sums[..., k, :]
        denom = denom + weights[k] * counts[..., k]
    return numer, denom


def _combine(weights, sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
    numer, denom = _weighted_sums(weights, sums, counts)
    if denom == 0.0:
        raise ZeroDenominator("every contributing element has zero weight")
    return numer / denom


def type_sums(model: CodebaseModel, functionality: Functionality, depth: int):
    """Per-method-type embedding sums (4 x dim) and node counts over the call graph."""
    nodes = sorted(call_graph_nodes(model, functionality.controller_method_id, depth))
    sums = np.zeros((4, model.embedding_dimension))
    counts = np.zeros(4)
    for mid in nodes:
        m = model.method_by_id[mid]
        k = TYPE_ORDER.index(m.method_type)
        sums[k] += m.embedding
        counts[k] += 1
    return sums, counts


def fvcg_vector(model: CodebaseModel, functionality: Functionality, depth: int,
                weights: TypeWeights) -> np.ndarray:
    sums, counts = type_sums(model, functionality, depth)
    return _combine(weights.as_tuple(), sums, counts)


def access_sums(model: CodebaseModel, functionality: Functionality, entity_vectors=None):
    """Read/write embedding sums (2 x dim) and access counts; every occurrence counts."""
    if not functionality.trace:
        raise EmptyTrace(f"functionality {functionality.name!r} has an empty trace")
    if entity_vectors is None:
        entity_vectors = {}
    sums = np.zeros((2, model.embedding_dimension))
    counts = np.zeros(2)
    for access in functionality.trace:
        vec = entity_vectors.get(access.entity)
        if vec is None:
            vec = entity_vectors[access.entity] = entity_embedding(model, access.entity)
        k = 0 if access.mode is Mode.READ else 1
        sums[k] += vec
        counts[k] += 1
    return sums, counts


def fvsa_vector(model: CodebaseModel, functionality: Functionality, weights: AccessWeights,
                entity_vectors=None) -> np.ndarray:
    sums, counts = access_sums(model, functionality, entity_vectors)
    return _combine(weights.as_tuple(), sums, counts)


def cv_vectors(model: CodebaseModel) -> LabeledVectors:
    labels, rows, skipped = [], [], []
    for cls in model.class_methods:
        closure = class_methods_closure(model, cls)
        if not closure:
            log.warning("EMPTY_CLASS: class %s has no methods; skipped from class vectors", cls)
            skipped.append(f"EMPTY_CLASS:{cls}")
            continue
        labels.append(cls)
        rows.append(mean_embedding([m.embedding for m in closure]))
    return LabeledVectors(tuple(labels), np.array(rows).reshape(len(rows), model.embedding_dimension),
                          tuple(skipped))


def ev_vectors(model: CodebaseModel) -> LabeledVectors:
    rows = [entity_embedding(model, e) for e in model.entities]
    return LabeledVectors(model.entities, np.array(rows).reshape(len(rows), model.embedding_dimension))


class FvcgBasis:
    """Per-depth type sums for every functionality, reused across weight tuples."""

    def __init__(self, model: CodebaseModel, depth: int):
        self.labels = tuple(f.name for f in model.functionalities)
        self.dimension = model.embedding_dimension
        pairs = [type_sums(model, f, depth) for f in model.functionalities]
        self.sums = np.array([s for s, _ in pairs]).reshape(len(pairs), 4, self.dimension)
        self.counts = np.array([c for _, c in pairs]).reshape(len(pairs), 4)

    def vectors(self, weights: TypeWeights) -> LabeledVectors:
        numer, denom = _weighted_sums(weights.as_tuple(), self.sums, self.counts)
        if np.any(denom == 0.0):
            bad = [self.labels[i] for i in np.flatnonzero(denom == 0.0)]
            raise ZeroDenominator(f"weights {weights.as_tuple()} give zero weight to every node of {bad[:3]}")
        return LabeledVectors(self.labels, numer / denom[:, None])


class FvsaBasis:
    """Read/write sums for every functionality with a non-empty trace."""

    def __init__(self, model: CodebaseModel):
        entity_vectors: dict = {}
        labels, sums, counts, skipped = [], [], [], []
        for f in model.functionalities:
            if not f.trace:
                log.warning("EMPTY_TRACE: functionality %s skipped from access-sequence vectors", f.name)
                skipped.append(f"EMPTY_TRACE:{f.name}")
                continue
            s, c = access_sums(model, f, entity_vectors)
            labels.append(f.name)
            sums.append(s)
            counts.append(c)
        self.labels = tuple(labels)
        self.skipped = tuple(skipped)
        self.sums = np.array(sums).reshape(len(sums), 2, model.embedding_dimension)
        self.counts = np.array(counts).reshape(len(counts), 2)

    def vectors(self, weights: AccessWeights) -> LabeledVectors:
        numer, denom = _weighted_sums(weights.as_tuple(), self.sums, self.counts)
        if np.any(denom == 0.0):
            bad = [self.labels[i] for i in np.flatnonzero(denom == 0.0)]
            raise ZeroDenominator(f"weights {weights.as_tuple()} give zero weight to every access of {bad[:3]}")
        return LabeledVectors(self.labels, numer / denom[:, None], self.skipped)


def fvcg_vectors(model: CodebaseModel, depth: int, weights: TypeWeights) -> LabeledVectors:
    return FvcgBasis(model, depth).vectors(weights)


def fvsa_vectors(model: CodebaseModel, weights: AccessWeights) -> LabeledVectors:
    return FvsaBasis(model).vectors(weights)
