"""Agglomerative clustering over labeled vectors and conversion to entity clusters.

Leaves are always processed in sorted label order, so a cluster's
representative (its smallest leaf index) is also its smallest label. Ties in
the linkage distance go to the lexicographically smallest pair of
representatives, which makes the merge sequence independent of input order.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, ModelFormatError, StorageError
from .ingestion import dump_json, write_text
from .model import CodebaseModel, Decomposition, Parameters, Provenance
from .vectorization import LabeledVectors

log = logging.getLogger(__name__)


class Linkage(enum.Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


@dataclass(frozen=True)
class CondensedDistances:
    """Upper-triangle distances in row-major order: (0,1), (0,2), ..., (n-2,n-1)."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (n * (n - 1) // 2,):
            raise InputError(f"condensed matrix for {n} points needs {n * (n - 1) // 2} values")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def square(self) -> np.ndarray:
        n = len(self.labels)
        out = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        out[iu] = self.values
        out[(iu[1], iu[0])] = self.values
        return out


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Leaves are nodes ``0..n-1``; merge ``k`` creates node ``n + k``."""

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]

    @property
    def heights(self) -> list[float]:
        return [m.height for m in self.merges]


def pairwise_distances(vectors: LabeledVectors) -> CondensedDistances:
    n = len(vectors)
    if n < 2:
        raise InputError(f"need at least 2 points, got {n}", code="TOO_FEW_POINTS")
    x = np.asarray(vectors.vectors, dtype=float)
    parts = [np.sqrt(((x[i + 1:] - x[i]) ** 2).sum(axis=1)) for i in range(n - 1)]
    return CondensedDistances(vectors.labels, np.concatenate(parts))


def _sorted_square(distances: CondensedDistances) -> tuple[tuple[str, ...], np.ndarray]:
    labels = distances.labels
    sq = distances.square()
    order = sorted(range(len(labels)), key=labels.__getitem__)
    if order != list(range(len(labels))):
        sq = sq[np.ix_(order, order)]
        labels = tuple(labels[i] for i in order)
    return labels, sq


def agglomerate(distances: CondensedDistances, linkage: Linkage) -> Dendrogram:
    """Greedy agglomeration: always merge the closest pair of active clusters.

    Single and complete linkage update by min/max of the two merged rows.
    Average linkage recomputes the mean of all point distances with a
    correctly rounded sum, so heights do not depend on merge history.
    """
    linkage = Linkage(linkage)
    labels, base = _sorted_square(distances)
    n = len(labels)
    if n < 1:
        raise InputError("nothing to cluster", code="TOO_FEW_POINTS")
    dist = base.copy()
    # candidate pairs live in the strict upper triangle; everything else is +inf
    work = np.where(np.triu(np.ones((n, n), dtype=bool), k=1), dist, np.inf)
    members = {i: [i] for i in range(n)}
    node = list(range(n))
    merges = []
    for step in range(n - 1):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        height = float(work[i, j])
        merges.append(Merge(node[i], node[j], height, len(members[i]) + len(members[j])))
        members[i] = members[i] + members.pop(j)
        node[i] = n + step
        work[j, :] = np.inf
        work[:, j] = np.inf
        others = [k for k in members if k != i]
        if linkage is Linkage.SINGLE:
            row = np.minimum(dist[i], dist[j])
        elif linkage is Linkage.COMPLETE:
            row = np.maximum(dist[i], dist[j])
        else:
            row = dist[i].copy()
            block = base[members[i]]
            for k in others:
                cols = members[k]
                row[k] = math.fsum(block[:, cols].ravel().tolist()) / (len(members[i]) * len(cols))
        for k in others:
            dist[i, k] = dist[k, i] = row[k]
            if k < i:
                work[k, i] = row[k]
            else:
                work[i, k] = row[k]
    return Dendrogram(labels, tuple(merges))


def cut(dendrogram: Dendrogram, n: int) -> list[tuple[str, ...]]:
    """Undo the last ``n - 1`` merges; groups come ordered by smallest label."""
    leaves = dendrogram.leaves
    if not 1 <= n <= len(leaves):
        raise InputError(f"cannot cut {len(leaves)} leaves into {n} clusters", code="BAD_CLUSTER_COUNT")
    owner = list(range(len(leaves) + len(dendrogram.merges)))

    def find(x):
        while owner[x] != x:
            owner[x] = owner[owner[x]]
            x = owner[x]
        return x

    for k, m in enumerate(dendrogram.merges[: len(leaves) - n]):
        new = len(leaves) + k
        owner[find(m.left)] = new
        owner[find(m.right)] = new
    groups: dict[int, list[str]] = {}
    for i, label in enumerate(leaves):
        groups.setdefault(find(i), []).append(label)
    return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda g: g[0])


def convert_class_to_entity(clusters, model: CodebaseModel) -> Decomposition:
    """Keep entity classes only, renamed to their entity; drop emptied clusters."""
    if isinstance(clusters, Decomposition):
        return clusters
    out = []
    for group in clusters:
        ents = sorted(model.class_entity[c] for c in group if c in model.class_entity)
        if ents:
            out.append(tuple(ents))
    return Decomposition(tuple(out))


def convert_functionality_to_entity(clusters, model: CodebaseModel) -> Decomposition:
    """Give every entity to the functionality cluster that accesses it most often.

    Counts are trace occurrences summed over the cluster's functionalities.
    Ties go to the lower cluster index; entities nobody accesses are omitted.
    """
    if isinstance(clusters, Decomposition):
        return clusters
    votes: dict[str, Counter] = {}
    for idx, group in enumerate(clusters):
        for fname in group:
            f = model.functionality_by_name.get(fname)
            if f is None:
                raise InputError(f"unknown functionality {fname!r}")
            for access in f.trace:
                votes.setdefault(access.entity, Counter())[idx] += 1
    assigned: dict[int, list[str]] = {}
    omitted = []
    for entity in model.entities:
        tally = votes.get(entity)
        if not tally:
            omitted.append(entity)
            continue
        best = min(tally, key=lambda idx: (-tally[idx], idx))
        assigned.setdefault(best, []).append(entity)
    if omitted:
        log.info("UNACCESSED_ENTITY: %s omitted from converted decomposition", ", ".join(omitted))
    out = tuple(tuple(sorted(assigned[idx])) for idx in sorted(assigned))
    return Decomposition(out, omitted=tuple(omitted))


def with_provenance(decomposition: Decomposition, strategy: str, parameters: Parameters,
                    requested_n: int) -> Decomposition:
    prov = Provenance(strategy, parameters, requested_n, decomposition.actual_n)
    return replace(decomposition, provenance=prov)


def parameters_to_dict(p: Parameters) -> dict:
    out: dict = {"linkage": p.linkage}
    if p.depth is not None:
        out["depth"] = p.depth
    for key, value in (("typeWeights", p.type_weights), ("accessWeights", p.access_weights),
                       ("measureWeights", p.measure_weights)):
        if value is not None:
            out[key] = [_plain(v) for v in value]
    return out


def _plain(v: float):
    return int(v) if float(v).is_integer() else float(v)


def parameters_from_dict(d: dict) -> Parameters:
    allowed = {"linkage", "depth", "typeWeights", "accessWeights", "measureWeights"}
    if not isinstance(d, dict) or "linkage" not in d or set(d) - allowed:
        raise ModelFormatError(f"bad parameters object {d!r}", code="SCHEMA_ERROR")

    def weights(key):
        return tuple(float(v) for v in d[key]) if key in d else None

    return Parameters(
        linkage=str(d["linkage"]), depth=d.get("depth"), type_weights=weights("typeWeights"),
        access_weights=weights("accessWeights"), measure_weights=weights("measureWeights"),
    )


def decomposition_to_dict(dec: Decomposition) -> dict:
    out: dict = {}
    if dec.provenance is not None:
        p = dec.provenance
        out["provenance"] = {
            "strategy": p.strategy,
            "parameters": parameters_to_dict(p.parameters),
            "requestedN": p.requested_n,
            "actualN": p.actual_n,
        }
    out["clusters"] = [sorted(c) for c in dec.clusters]
    return out


def decomposition_from_dict(doc) -> Decomposition:
    if not isinstance(doc, dict) or "clusters" not in doc or set(doc) - {"provenance", "clusters"}:
        raise ModelFormatError("decomposition needs 'clusters' and optional 'provenance'", code="SCHEMA_ERROR")
    clusters = doc["clusters"]
    if not isinstance(clusters, list) or not all(isinstance(c, list) and c for c in clusters):
        raise ModelFormatError("clusters must be non-empty arrays of entity names", code="SCHEMA_ERROR")
    flat = [e for c in clusters for e in c]
    if not all(isinstance(e, str) for e in flat):
        raise ModelFormatError("entity names must be strings", code="SCHEMA_ERROR")
    if len(flat) != len(set(flat)):
        raise ModelFormatError("clusters must be pairwise disjoint", code="SCHEMA_ERROR")
    if not clusters:
        raise ModelFormatError("a decomposition needs at least one cluster", code="SCHEMA_ERROR")
    prov = None
    if "provenance" in doc:
        raw = doc["provenance"]
        keys = {"strategy", "parameters", "requestedN", "actualN"}
        if not isinstance(raw, dict) or set(raw) != keys:
            raise ModelFormatError(f"provenance needs exactly {sorted(keys)}", code="SCHEMA_ERROR")
        if raw["actualN"] != len(clusters):
            raise ModelFormatError("actualN does not match the number of clusters", code="SCHEMA_ERROR")
        prov = Provenance(raw["strategy"], parameters_from_dict(raw["parameters"]),
                          int(raw["requestedN"]), int(raw["actualN"]))
    return Decomposition(tuple(tuple(sorted(c)) for c in clusters), prov)


def save_decomposition(dec: Decomposition, path) -> None:
    write_text(path, dump_json(decomposition_to_dict(dec)))


def load_decomposition(path) -> Decomposition:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return decomposition_from_dict(doc)


def cluster_labels(vectors: LabeledVectors, linkage: Linkage, n: int) -> Sequence[tuple[str, ...]]:
    """One-shot convenience: distances, dendrogram and cut."""
    return cut(agglomerate(pairwise_distances(vectors), linkage), n)
