"""Exhaustive decomposition sweeps.

For every parameter tuple of a strategy the engine builds the clustering
vectors, agglomerates them, then cuts the dendrogram at requested cluster
counts 3, 4, ... . Strategies that cluster classes or functionalities can lose
clusters in the conversion to entities, so the requested count keeps rising
until the converted decomposition exceeds the cap for the codebase size (or
the dendrogram runs out of leaves). Only the first decomposition per actual
cluster count is kept.
"""

from __future__ import annotations

import hashlib
import logging
import multiprocessing
from dataclasses import dataclass, field
from math import comb

from ..clustering import (
    Linkage,
    agglomerate,
    convert_class_to_entity,
    convert_functionality_to_entity,
    cut,
    pairwise_distances,
    with_provenance,
)
from ..errors import InputError, StrategyInapplicable, ZeroDenominator
from ..metrics import MetricRecord, cohesion, complexity, coupling, normalize_all, skipped_access_count
from ..model import CodebaseModel, Decomposition, Parameters
from ..sa_similarity import MeasureWeights, sa_feature_vectors, similarity_matrices
from ..vectorization import AccessWeights, FvcgBasis, FvsaBasis, TypeWeights, cv_vectors, ev_vectors

log = logging.getLogger(__name__)

STRATEGIES = ("FVCG", "FVSA", "SA", "CV", "EV")
ENTITY_NATIVE = ("SA", "EV")
MIN_CLUSTERS = 3


def weight_grid(k: int, step: float = 10) -> list[tuple[int, ...]]:
    """All k-tuples of multiples of ``step`` summing to 100, in lexicographic order."""
    if k < 1:
        raise InputError(f"need at least one weight, got k={k}")
    if step <= 0 or 100 % step != 0:
        raise InputError(f"step {step} does not divide 100", code="BAD_STEP")
    units = int(100 // step)

    def compositions(parts: int, total: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(parts - 1, total - first):
                yield (first, *rest)

    def value(u):
        v = u * step
        return int(v) if float(v).is_integer() else float(v)

    return [tuple(value(u) for u in c) for c in compositions(k, units)]


def weight_grid_size(k: int, step: float = 10) -> int:
    return comb(int(100 // step) + k - 1, k - 1)


def cluster_count_range(entity_count: int) -> tuple[int, int]:
    if entity_count < 1:
        raise InputError("a codebase needs at least one entity")
    if entity_count <= 10:
        return MIN_CLUSTERS, 3
    if entity_count <= 20:
        return MIN_CLUSTERS, 5
    return MIN_CLUSTERS, 10


@dataclass(frozen=True)
class SweepConfig:
    strategy: str
    weight_step: float = 10
    depth_range: tuple[int, int] = (1, 6)
    linkages: tuple[Linkage, ...] = (Linkage.SINGLE, Linkage.COMPLETE, Linkage.AVERAGE)

    def __post_init__(self):
        object.__setattr__(self, "strategy", self.strategy.upper())
        object.__setattr__(self, "linkages", tuple(sorted({Linkage(l) for l in self.linkages},
                                                          key=lambda l: l.value)))
        if self.strategy not in STRATEGIES:
            raise InputError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if self.weight_step <= 0 or 100 % self.weight_step != 0:
            raise InputError(f"weight step {self.weight_step} does not divide 100", code="BAD_STEP")
        lo, hi = self.depth_range
        if not 1 <= lo <= hi <= 32:
            raise InputError(f"depth range {self.depth_range} must lie within [1, 32]")
        if not self.linkages:
            raise InputError("at least one linkage is required")

    def vector_units(self) -> list[tuple]:
        """Parameter tuples without linkage: each yields one set of vectors."""
        s = self.strategy
        if s == "FVCG":
            lo, hi = self.depth_range
            return [(d, w) for d in range(lo, hi + 1) for w in weight_grid(4, self.weight_step)]
        if s in ("FVSA", "SA"):
            return [(None, w) for w in weight_grid(2 if s == "FVSA" else 4, self.weight_step)]
        return [(None, None)]

    def parameter_tuples(self) -> list[Parameters]:
        out = [_parameters(self.strategy, linkage, unit) for linkage in self.linkages
               for unit in self.vector_units()]
        return sorted(out, key=Parameters.sort_key)


def _parameters(strategy: str, linkage: Linkage, unit) -> Parameters:
    depth, weights = unit
    w = tuple(float(v) for v in weights) if weights is not None else None
    return Parameters(
        linkage=linkage.value,
        depth=depth,
        type_weights=w if strategy == "FVCG" else None,
        access_weights=w if strategy == "FVSA" else None,
        measure_weights=w if strategy == "SA" else None,
    )


@dataclass
class SweepResult:
    records: list[tuple[Decomposition, MetricRecord]] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def metric_records(self) -> list[MetricRecord]:
        return [r for _, r in self.records]


class _StrategyRunner:
    """Per-process state: precomputed strategy inputs and memo tables."""

    def __init__(self, model: CodebaseModel, config: SweepConfig):
        self.model = model
        self.config = config
        self.lo, self.hi = cluster_count_range(len(model.entities))
        self._bases: dict = {}
        self._dendrograms: dict = {}
        self._metrics: dict = {}
        self._conversions: dict = {}
        self.static_vectors = None
        s = config.strategy
        if s == "CV":
            self.static_vectors = cv_vectors(model)
        elif s == "EV":
            self.static_vectors = ev_vectors(model)
        elif s == "SA":
            self.sa_mats = similarity_matrices(model)
        elif s == "FVSA":
            self._bases["fvsa"] = FvsaBasis(model)
        self.convert = {
            "FVCG": convert_functionality_to_entity,
            "FVSA": convert_functionality_to_entity,
            "CV": convert_class_to_entity,
        }.get(s)

    def check_applicable(self) -> None:
        m, s = self.model, self.config.strategy
        if s == "SA":
            if len(m.entities) < 2:
                raise StrategyInapplicable("SA needs at least 2 entities")
            if not any(f.trace for f in m.functionalities):
                raise StrategyInapplicable("SA needs at least one non-empty trace")
        elif s == "FVSA":
            if len(self._bases["fvsa"].labels) < 2:
                raise StrategyInapplicable("FVSA needs at least 2 functionalities with non-empty traces")
        elif s == "FVCG":
            if len(m.functionalities) < 2:
                raise StrategyInapplicable("FVCG needs at least 2 functionalities")
        elif len(self.static_vectors) < 2:
            raise StrategyInapplicable(f"{s} needs at least 2 vectors")

    def vectors(self, unit):
        depth, weights = unit
        s = self.config.strategy
        if s == "FVCG":
            basis = self._bases.get(depth)
            if basis is None:
                basis = self._bases[depth] = FvcgBasis(self.model, depth)
            return basis.vectors(TypeWeights(*weights))
        if s == "FVSA":
            return self._bases["fvsa"].vectors(AccessWeights(*weights))
        if s == "SA":
            return sa_feature_vectors(self.model, MeasureWeights(*weights), self.sa_mats)
        return self.static_vectors

    def dendrogram(self, vectors, linkage: Linkage):
        digest = hashlib.blake2b(vectors.vectors.tobytes(), digest_size=16).digest()
        key = (linkage, vectors.labels, digest)
        dend = self._dendrograms.get(key)
        if dend is None:
            dend = self._dendrograms[key] = agglomerate(pairwise_distances(vectors), linkage)
        return dend

    def to_entities(self, groups) -> Decomposition:
        key = tuple(groups)
        dec = self._conversions.get(key)
        if dec is None:
            dec = self.convert(groups, self.model) if self.convert else _entity_groups(groups)
            self._conversions[key] = dec
        return dec

    def metrics(self, dec: Decomposition) -> MetricRecord:
        key = dec.canonical()
        raw = self._metrics.get(key)
        if raw is None:
            raw = self._metrics[key] = (cohesion(dec, self.model), coupling(dec, self.model),
                                        float(complexity(dec, self.model)),
                                        skipped_access_count(dec, self.model))
        coh, cou, cpx, skipped = raw
        return MetricRecord(cohesion=coh, coupling=cou, complexity=cpx, provenance=dec.provenance,
                            codebase=self.model.name, skipped_accesses=skipped)

    def run_unit(self, unit) -> tuple[list, list[str]]:
        s = self.config.strategy
        out, diags = [], []
        try:
            vectors = self.vectors(unit)
        except ZeroDenominator:
            diags.append(f"ZERO_DENOMINATOR {s} depth={unit[0]} weights={unit[1]}: combination skipped")
            return out, diags
        leaves = len(vectors)
        for linkage in self.config.linkages:
            params = _parameters(s, linkage, unit)
            if leaves < 2 or leaves < self.lo:
                diags.append(f"TOO_FEW_POINTS {s} {describe(params)}: {leaves} vectors")
                continue
            dend = self.dendrogram(vectors, linkage)
            seen: set[int] = set()
            for n in range(self.lo, leaves + 1):
                dec = self.to_entities(cut(dend, n))
                if dec.actual_n > self.hi:
                    break
                if dec.actual_n == 0 or dec.actual_n in seen:
                    continue
                seen.add(dec.actual_n)
                dec = with_provenance(dec, s, params, n)
                out.append((dec, self.metrics(dec)))
        return out, diags


def describe(p: Parameters) -> str:
    parts = [f"linkage={p.linkage}"]
    if p.depth is not None:
        parts.append(f"depth={p.depth}")
    for name, w in (("typeWeights", p.type_weights), ("accessWeights", p.access_weights),
                    ("measureWeights", p.measure_weights)):
        if w is not None:
            parts.append(f"{name}={','.join(f'{v:g}' for v in w)}")
    return " ".join(parts)


def _entity_groups(groups) -> Decomposition:
    return Decomposition(tuple(tuple(g) for g in groups))


# Worker-process globals for parallel sweeps.
_WORKER: _StrategyRunner | None = None


def _init_worker(model: CodebaseModel, config: SweepConfig) -> None:
    global _WORKER
    _WORKER = _StrategyRunner(model, config)


def _run_chunk(chunk):
    return [(_idx, *_WORKER.run_unit(unit)) for _idx, unit in chunk]


def run_sweep(model: CodebaseModel, config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Every decomposition of one strategy, with metrics normalized over the sweep.

    ``jobs > 1`` spreads vector units over worker processes; results are
    merged back in canonical parameter order, so the output does not depend
    on the number of workers.
    """
    runner = _StrategyRunner(model, config)
    runner.check_applicable()
    units = config.vector_units()
    indexed = list(enumerate(units))
    if jobs > 1 and len(units) > 1:
        size = max(1, len(indexed) // (jobs * 4))
        chunks = [indexed[i:i + size] for i in range(0, len(indexed), size)]
        with multiprocessing.Pool(jobs, initializer=_init_worker, initargs=(model, config)) as pool:
            parts = [item for chunk_out in pool.map(_run_chunk, chunks) for item in chunk_out]
    else:
        parts = [(idx, *runner.run_unit(unit)) for idx, unit in indexed]
    parts.sort(key=lambda p: p[0])

    result = SweepResult()
    pairs = []
    for _, out, diags in parts:
        pairs.extend(out)
        result.diagnostics.extend(diags)
    if config.strategy == "CV" and runner.static_vectors.skipped:
        result.diagnostics[:0] = [f"{d} (CV)" for d in runner.static_vectors.skipped]
    if config.strategy == "FVSA" and runner._bases["fvsa"].skipped:
        result.diagnostics[:0] = [f"{d} (FVSA)" for d in runner._bases["fvsa"].skipped]
    pairs.sort(key=lambda p: (p[0].provenance.parameters.sort_key(), p[0].provenance.requested_n))
    normalized = normalize_all([r for _, r in pairs])
    result.records = [(dec, rec) for (dec, _), rec in zip(pairs, normalized)]
    result.violations = check_records(result.records, model)
    for d in result.diagnostics:
        log.info(d)
    for v in result.violations:
        log.error(v)
    return result


def check_records(records, model: CodebaseModel) -> list[str]:
    """Structural and range invariants every sweep record must satisfy."""
    problems = []
    entity_set = set(model.entities)
    for dec, rec in records:
        prov = dec.provenance
        tag = f"{prov.strategy} {describe(prov.parameters)} n={prov.requested_n}"
        flat = [e for c in dec.clusters for e in c]
        if len(flat) != len(set(flat)) or not all(dec.clusters):
            problems.append(f"INVARIANT_VIOLATION clusters not disjoint/non-empty: {tag}")
        if not set(flat) <= entity_set:
            problems.append(f"INVARIANT_VIOLATION unknown entity in clusters: {tag}")
        if prov.actual_n != len(dec.clusters) or prov.actual_n < 1:
            problems.append(f"INVARIANT_VIOLATION actual count {prov.actual_n}: {tag}")
        if prov.strategy in ENTITY_NATIVE and prov.actual_n != prov.requested_n:
            problems.append(f"INVARIANT_VIOLATION entity strategy lost clusters: {tag}")
        for name in ("cohesion", "coupling", "uniform_complexity", "combined"):
            v = getattr(rec, name)
            if v is None or not 0.0 <= v <= 1.0:
                problems.append(f"INVARIANT_VIOLATION {name}={v} outside [0, 1]: {tag}")
        if rec.complexity < 0:
            problems.append(f"INVARIANT_VIOLATION negative complexity: {tag}")
        if len(dec.clusters) == 1 and (rec.complexity != 0 or rec.coupling != 0):
            problems.append(f"INVARIANT_VIOLATION single cluster with complexity/coupling: {tag}")
    return problems


def run_sweeps(model: CodebaseModel, strategies, jobs: int = 1, **config_kwargs):
    """Several strategies over one codebase, sharing one uniform-complexity maximum.

    Returns ``(records, diagnostics, violations, failures)`` where failures maps
    strategy to the error that made it inapplicable.
    """
    pairs, diagnostics, violations, failures = [], [], [], {}
    for strategy in strategies:
        cfg = SweepConfig(strategy, **config_kwargs)
        try:
            res = run_sweep(model, cfg, jobs=jobs)
        except StrategyInapplicable as exc:
            log.warning("%s skipped: %s", strategy, exc)
            failures[cfg.strategy] = exc
            continue
        pairs.extend(res.records)
        diagnostics.extend(res.diagnostics)
    normalized = normalize_all([r for _, r in pairs])
    records = [(dec, rec) for (dec, _), rec in zip(pairs, normalized)]
    violations = check_records(records, model)
    for v in violations:
        log.error(v)
    return records, diagnostics, violations, failures


def generate_decomposition(model: CodebaseModel, strategy: str, parameters: Parameters,
                           requested_n: int) -> Decomposition:
    """One decomposition for one parameter tuple, cut at ``requested_n`` clusters."""
    cfg = SweepConfig(strategy, linkages=(Linkage(parameters.linkage),))
    runner = _StrategyRunner(model, cfg)
    runner.check_applicable()
    weights = parameters.type_weights or parameters.access_weights or parameters.measure_weights
    vectors = runner.vectors((parameters.depth, weights))
    dend = runner.dendrogram(vectors, Linkage(parameters.linkage))
    dec = runner.to_entities(cut(dend, requested_n))
    if dec.actual_n == 0:
        raise StrategyInapplicable("conversion left no entity clusters")
    return with_provenance(dec, cfg.strategy, parameters, requested_n)
