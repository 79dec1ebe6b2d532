"""Decomposition quality: cohesion, coupling, complexity and the combined score.

Accesses to entities that a decomposition does not cover (conversion may drop
entities nobody accesses) are removed from each trace before any metric sees
it.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from itertools import groupby, pairwise

from .errors import InputError
from .model import Access, CodebaseModel, Decomposition, Mode, Parameters, Provenance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LocalTransaction:
    cluster_index: int
    accesses: tuple[Access, ...]


@dataclass(frozen=True)
class MetricRecord:
    cohesion: float
    coupling: float
    complexity: float
    uniform_complexity: float | None = None
    combined: float | None = None
    provenance: Provenance | None = None
    codebase: str = ""
    skipped_accesses: int = field(default=0, compare=False)


def _cluster_of(decomposition: Decomposition) -> dict[str, int]:
    return {e: idx for idx, cluster in enumerate(decomposition.clusters) for e in cluster}


def _covered(trace, cluster_of) -> list[Access]:
    return [a for a in trace if a.entity in cluster_of]


def local_transactions(trace, decomposition: Decomposition) -> list[LocalTransaction]:
    """Maximal runs of consecutive accesses that stay in one cluster."""
    cluster_of = _cluster_of(decomposition)
    kept = _covered(trace, cluster_of)
    if len(kept) != len(trace):
        log.info("UNASSIGNED_ACCESS: %d access(es) to entities outside the decomposition skipped",
                 len(trace) - len(kept))
    return [LocalTransaction(idx, tuple(run)) for idx, run in groupby(kept, key=lambda a: cluster_of[a.entity])]


def cohesion(decomposition: Decomposition, model: CodebaseModel) -> float:
    cluster_of = _cluster_of(decomposition)
    touched: list[list[set[str]]] = [[] for _ in decomposition.clusters]
    for f in model.functionalities:
        per_cluster: dict[int, set[str]] = {}
        for a in f.trace:
            idx = cluster_of.get(a.entity)
            if idx is not None:
                per_cluster.setdefault(idx, set()).add(a.entity)
        for idx, ents in per_cluster.items():
            touched[idx].append(ents)
    scores = []
    for idx, cluster in enumerate(decomposition.clusters):
        if touched[idx]:
            scores.append(sum(len(ents) / len(cluster) for ents in touched[idx]) / len(touched[idx]))
        else:
            scores.append(0.0)
    return sum(scores) / len(scores)


def coupling(decomposition: Decomposition, model: CodebaseModel) -> float:
    k = len(decomposition.clusters)
    if k < 2:
        return 0.0
    cluster_of = _cluster_of(decomposition)
    exposed: dict[tuple[int, int], set[str]] = {}
    for f in model.functionalities:
        for a, b in pairwise(_covered(f.trace, cluster_of)):
            ca, cb = cluster_of[a.entity], cluster_of[b.entity]
            if ca != cb:
                exposed.setdefault((ca, cb), set()).add(b.entity)
    total = sum(len(ents) / len(decomposition.clusters[dst]) for (_, dst), ents in exposed.items())
    return total / (k * (k - 1))


def functionality_complexities(decomposition: Decomposition, model: CodebaseModel) -> dict[str, int]:
    """Complexity of every functionality.

    A functionality with fewer than two local transactions costs nothing.
    Otherwise each local transaction adds, per distinct (entity, mode) it
    touches, the number of *other* distributed functionalities that access the
    same entity in the opposite mode: writers for a read, readers for a write.
    """
    cluster_of = _cluster_of(decomposition)
    transactions = {}
    for f in model.functionalities:
        kept = _covered(f.trace, cluster_of)
        transactions[f.name] = [list(run) for _, run in groupby(kept, key=lambda a: cluster_of[a.entity])]
    distributed = [name for name, lts in transactions.items() if len(lts) >= 2]
    readers: dict[str, set[str]] = {}
    writers: dict[str, set[str]] = {}
    for name in distributed:
        for lt in transactions[name]:
            for a in lt:
                (readers if a.mode is Mode.READ else writers).setdefault(a.entity, set()).add(name)
    out = {}
    for name, lts in transactions.items():
        if len(lts) < 2:
            out[name] = 0
            continue
        total = 0
        for lt in lts:
            for entity, mode in sorted({(a.entity, a.mode.value) for a in lt}):
                peers = writers if mode == Mode.READ.value else readers
                total += len(peers.get(entity, set()) - {name})
        out[name] = total
    return out


def complexity(decomposition: Decomposition, model: CodebaseModel) -> int:
    return sum(functionality_complexities(decomposition, model).values())


def uniform_complexity(value: float, max_over_set: float) -> float:
    if max_over_set == 0:
        return 0.0
    if value > max_over_set:
        raise InputError(f"complexity {value} exceeds the set maximum {max_over_set}", code="VALUE_EXCEEDS_MAX")
    return value / max_over_set


def combined(cohesion_value: float, coupling_value: float, uniform_complexity_value: float) -> float:
    """Lower is better: 0 for perfect cohesion with no coupling or complexity."""
    for name, v in (("cohesion", cohesion_value), ("coupling", coupling_value),
                    ("uniform complexity", uniform_complexity_value)):
        if not 0.0 <= v <= 1.0:
            raise InputError(f"{name} {v} outside [0, 1]", code="OUT_OF_RANGE_INPUT")
    return (1.0 + uniform_complexity_value + coupling_value - cohesion_value) / 3.0


def skipped_access_count(decomposition: Decomposition, model: CodebaseModel) -> int:
    covered = decomposition.entities()
    return sum(1 for f in model.functionalities for a in f.trace if a.entity not in covered)


def evaluate(decomposition: Decomposition, model: CodebaseModel, max_complexity: float | None = None) -> MetricRecord:
    """Raw metrics; uniform complexity and the combined score need the set maximum."""
    if not decomposition.clusters:
        raise InputError("decomposition has no clusters")
    skipped = skipped_access_count(decomposition, model)
    if skipped:
        log.info("UNASSIGNED_ACCESS: %d access(es) outside the decomposition skipped", skipped)
    record = MetricRecord(
        cohesion=cohesion(decomposition, model),
        coupling=coupling(decomposition, model),
        complexity=float(complexity(decomposition, model)),
        provenance=decomposition.provenance,
        codebase=model.name,
        skipped_accesses=skipped,
    )
    if max_complexity is not None:
        record = normalize(record, max_complexity)
    return record


def normalize(record: MetricRecord, max_complexity: float) -> MetricRecord:
    uc = uniform_complexity(record.complexity, max_complexity)
    return MetricRecord(
        cohesion=record.cohesion, coupling=record.coupling, complexity=record.complexity,
        uniform_complexity=uc, combined=combined(record.cohesion, record.coupling, uc),
        provenance=record.provenance, codebase=record.codebase, skipped_accesses=record.skipped_accesses,
    )


def normalize_all(records: list[MetricRecord]) -> list[MetricRecord]:
    """Uniform complexity over one record set: the maximum is taken per codebase."""
    top: dict[str, float] = {}
    for r in records:
        top[r.codebase] = max(top.get(r.codebase, 0.0), r.complexity)
    return [normalize(r, top[r.codebase]) for r in records]


CSV_COLUMNS = (
    "codebase", "strategy", "linkage", "depth", "wc", "ws", "we", "wi", "wr", "ww",
    "wAccess", "wRead", "wWrite", "wSequence", "requestedN", "actualN",
    "cohesion", "coupling", "complexity", "uniformComplexity", "combined",
)
METRIC_COLUMNS = ("cohesion", "coupling", "complexity", "uniformComplexity", "combined")


def _num(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _metric(v) -> str:
    return "" if v is None else f"{v:.6f}"


def csv_row(record: MetricRecord) -> list[str]:
    prov = record.provenance
    p = prov.parameters if prov is not None else Parameters("")
    tw = p.type_weights or (None,) * 4
    aw = p.access_weights or (None,) * 2
    mw = p.measure_weights or (None,) * 4
    return [
        record.codebase, prov.strategy if prov else "", p.linkage, _num(p.depth),
        *(_num(v) for v in tw), *(_num(v) for v in aw), *(_num(v) for v in mw),
        str(prov.requested_n) if prov else "", str(prov.actual_n) if prov else "",
        _metric(record.cohesion), _metric(record.coupling), _metric(record.complexity),
        _metric(record.uniform_complexity), _metric(record.combined),
    ]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(csv_row(r))
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[dict]:
    """Parse a metrics CSV into dicts; numeric columns become floats, blanks None."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise InputError(f"not a metrics CSV; expected columns {', '.join(CSV_COLUMNS)}", code="SCHEMA_ERROR")
    rows = []
    for raw in reader:
        row: dict = {}
        for key, value in raw.items():
            if key in ("codebase", "strategy", "linkage"):
                row[key] = value
            else:
                row[key] = parse_number(value)
        rows.append(row)
    return rows


def parse_number(text: str):
    """Blank is None; integers written without a point stay ints."""
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise InputError(f"not a number: {text!r}", code="SCHEMA_ERROR") from None
