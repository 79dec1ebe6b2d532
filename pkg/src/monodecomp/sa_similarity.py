"""Access-based entity similarity and the sequence-of-accesses feature vectors.

Access, read and write similarity are directional: ``m(ei, ej)`` is the share
of functionalities touching ``ei`` (in the relevant mode) that also touch
``ej``. Sequence similarity is symmetric: the number of adjacent trace
positions pairing the two entities, relative to the busiest pair.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import pairwise

import numpy as np

from .errors import InputError
from .model import CodebaseModel, Mode
from .vectorization import LabeledVectors, _check_weights

MEASURES = ("access", "read", "write", "sequence")


@dataclass(frozen=True)
class MeasureWeights:
    w_access: float
    w_read: float
    w_write: float
    w_sequence: float
    check_sum: bool = True

    def __post_init__(self):
        _check_weights(self.as_tuple(), 4, "measure weights", self.check_sum)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_access, self.w_read, self.w_write, self.w_sequence)


@dataclass(frozen=True)
class AccessSets:
    readers: dict[str, frozenset[str]]
    writers: dict[str, frozenset[str]]

    def accessors(self, entity: str) -> frozenset[str]:
        return self.readers.get(entity, frozenset()) | self.writers.get(entity, frozenset())


def build_access_sets(model: CodebaseModel) -> AccessSets:
    readers: dict[str, set[str]] = {e: set() for e in model.entities}
    writers: dict[str, set[str]] = {e: set() for e in model.entities}
    for f in model.functionalities:
        for access in f.trace:
            target = readers if access.mode is Mode.READ else writers
            target.setdefault(access.entity, set()).add(f.name)
    return AccessSets(
        {e: frozenset(s) for e, s in sorted(readers.items())},
        {e: frozenset(s) for e, s in sorted(writers.items())},
    )


def _share(base: frozenset, other: frozenset) -> float:
    # an entity nobody touches is similar to nothing
    if not base:
        return 0.0
    return len(base & other) / len(base)


def measure_access(sets: AccessSets, ei: str, ej: str) -> float:
    return _share(sets.accessors(ei), sets.accessors(ej))


def measure_read(sets: AccessSets, ei: str, ej: str) -> float:
    return _share(sets.readers.get(ei, frozenset()), sets.readers.get(ej, frozenset()))


def measure_write(sets: AccessSets, ei: str, ej: str) -> float:
    return _share(sets.writers.get(ei, frozenset()), sets.writers.get(ej, frozenset()))


def sequence_counts(model: CodebaseModel) -> Counter:
    """Adjacent-access counts per unordered pair of distinct entities."""
    counts: Counter = Counter()
    for f in model.functionalities:
        for a, b in pairwise(f.trace):
            if a.entity != b.entity:
                counts[frozenset((a.entity, b.entity))] += 1
    return counts


def measure_sequence(model: CodebaseModel, ei: str, ej: str, counts: Counter | None = None) -> float:
    if counts is None:
        counts = sequence_counts(model)
    top = max(counts.values(), default=0)
    if top == 0 or ei == ej:
        return 0.0
    return counts.get(frozenset((ei, ej)), 0) / top


def similarity_matrices(model: CodebaseModel) -> dict[str, np.ndarray]:
    """All four measures as entity x entity matrices, rows/columns sorted by name."""
    entities = model.entities
    sets = build_access_sets(model)
    counts = sequence_counts(model)
    n = len(entities)
    mats = {name: np.zeros((n, n)) for name in MEASURES}
    for i, ei in enumerate(entities):
        for j, ej in enumerate(entities):
            mats["access"][i, j] = measure_access(sets, ei, ej)
            mats["read"][i, j] = measure_read(sets, ei, ej)
            mats["write"][i, j] = measure_write(sets, ei, ej)
            mats["sequence"][i, j] = measure_sequence(model, ei, ej, counts)
    return mats


def combine_matrices(mats: dict[str, np.ndarray], weights: MeasureWeights) -> np.ndarray:
    out = np.zeros_like(mats["access"])
    for name, w in zip(MEASURES, weights.as_tuple()):
        out = out + (w / 100.0) * mats[name]
    return out


def sa_feature_vectors(model: CodebaseModel, weights: MeasureWeights, mats=None) -> LabeledVectors:
    """Entity i's feature vector is row i of the weighted similarity matrix."""
    if len(model.entities) < 2:
        raise InputError("sequence-of-accesses similarity needs at least 2 entities", code="TOO_FEW_ENTITIES")
    if mats is None:
        mats = similarity_matrices(model)
    return LabeledVectors(model.entities, combine_matrices(mats, weights))

