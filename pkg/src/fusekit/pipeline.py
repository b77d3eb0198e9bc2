"""Two-stage retrieval orchestration: decompose, retrieve, fuse, rerank.

A run reads its inputs either from fixture files (sub-query map plus
per-sub-query run file plus optional rerank-score run file) or from live
decomposer/retriever clients, and always emits three stage run files

  subqueries.run  one ranked list per sub-query
  fused.run       one fused list per original query
  reranked.run    fused lists with external scores injected in the head

plus ``manifest.json`` recording the toolkit version, the configuration,
the seed list, and a sha256 digest of every input file, which makes a run
reproducible: identical inputs and config yield byte-identical outputs.
Stage files are written atomically (temp file, then rename).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .core import (
    RunSet,
    ScoredList,
    SubQueryMap,
    parse_run,
    parse_subquery_map,
    write_run,
)
from .ablation import fuse_runs
from .errors import PipelineStageError, TransportError, ValidationError
from .fusion import FusionStrategy
from .metrics import Cutoffs, DEFAULT_CUTOFFS

logger = logging.getLogger(__name__)

MAX_SUB_QUERIES = 25

# service endpoints honoured in a config file; reranking never runs live,
# its scores always arrive as a run file
ENDPOINT_NAMES = ("decomposer", "retriever", "reranker")

STAGE_FILES = ("subqueries.run", "fused.run", "reranked.run")


@dataclass(frozen=True)
class PipelineConfig:
    strategy: FusionStrategy
    first_stage_depth: int = 1000
    rerank_depth: int = 100
    cutoffs: Cutoffs = DEFAULT_CUTOFFS
    filter_threshold: float = 0.5
    seeds: tuple[int, ...] = ()
    endpoints: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.first_stage_depth < 1:
            raise ValidationError("first_stage_depth must be positive")
        if self.rerank_depth < 1:
            raise ValidationError("rerank_depth must be positive")
        if self.rerank_depth > self.first_stage_depth:
            raise ValidationError(
                f"rerank_depth {self.rerank_depth} exceeds first_stage_depth {self.first_stage_depth}"
            )
        if not 0.0 <= self.filter_threshold <= 1.0:
            raise ValidationError("filter_threshold must be in [0, 1]")
        for name in self.endpoints:
            if name not in ENDPOINT_NAMES:
                raise ValidationError(
                    f"unknown endpoint {name!r}; expected one of {ENDPOINT_NAMES}"
                )

    def to_dict(self) -> dict:
        return {
            "strategy": {"kind": self.strategy.kind, "k": self.strategy.k_constant},
            "first_stage_depth": self.first_stage_depth,
            "rerank_depth": self.rerank_depth,
            "cutoffs": list(self.cutoffs.values),
            "filter_threshold": self.filter_threshold,
            "seeds": list(self.seeds),
            "endpoints": dict(self.endpoints),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        strategy = data.get("strategy", {})
        return cls(
            strategy=FusionStrategy(
                kind=strategy.get("kind", "rrf"), k_constant=int(strategy.get("k", 60))
            ),
            first_stage_depth=int(data.get("first_stage_depth", 1000)),
            rerank_depth=int(data.get("rerank_depth", 100)),
            cutoffs=Cutoffs(tuple(data.get("cutoffs", (10, 20, 100)))),
            filter_threshold=float(data.get("filter_threshold", 0.5)),
            seeds=tuple(int(s) for s in data.get("seeds", ())),
            endpoints=dict(data.get("endpoints", {})),
        )


@dataclass(frozen=True)
class DecompositionResult:
    query_id: str
    sub_queries: tuple[str, ...]
    fallback_used: bool = False

    def __post_init__(self):
        if not self.sub_queries:
            raise ValidationError(f"query {self.query_id!r} decomposed to nothing")


def decompose(record: dict, decomposer) -> DecompositionResult:
    """Ask the decomposer for sub-queries; fall back to the query itself.

    Any malformed response (not a JSON array of non-empty strings) is not
    an error: the original query text becomes the sole sub-query and
    ``fallback_used`` is set. Arrays longer than 25 are truncated. Only a
    transport failure propagates.
    """
    for name in ("query_id", "query"):
        if not record.get(name):
            raise ValidationError(f"query record is missing {name!r}")
    raw = decomposer.decompose_raw(record)
    sub_queries = _parse_sub_queries(raw)
    if sub_queries is None:
        logger.warning(
            "query %s: malformed decomposition output, falling back to the query text",
            record["query_id"],
        )
        return DecompositionResult(
            query_id=record["query_id"],
            sub_queries=(record["query"],),
            fallback_used=True,
        )
    return DecompositionResult(
        query_id=record["query_id"],
        sub_queries=tuple(sub_queries[:MAX_SUB_QUERIES]),
        fallback_used=False,
    )


def _parse_sub_queries(raw: str) -> list[str] | None:
    try:
        parsed = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(parsed, list) or not parsed:
        return None
    out = []
    for item in parsed:
        if not isinstance(item, str) or not item.strip():
            return None
        out.append(item.strip())
    return out


def sub_query_id(query_id: str, position: int) -> str:
    return f"{query_id}-s{position:03d}"


def decompose_all(records: list[dict], decomposer) -> tuple[SubQueryMap, list[DecompositionResult]]:
    """Decompose every query record and assemble the sub-query map.

    Sub-query ids are ``<query_id>-s<NNN>`` in sub-query order.
    """
    groups = {}
    results = []
    for record in records:
        result = decompose(record, decomposer)
        results.append(result)
        groups[result.query_id] = tuple(
            (sub_query_id(result.query_id, i), text)
            for i, text in enumerate(result.sub_queries)
        )
    return SubQueryMap(groups), results


def inject_rerank(fused: RunSet, rerank: RunSet, rerank_depth: int) -> RunSet:
    """Reorder each query's top ``rerank_depth`` by external scores.

    Scored documents sort by external score (doc-id ascending on ties) and
    move ahead of unscored ones, which keep their fused order; everything
    below the head is untouched. External scores for documents outside the
    head are ignored with a warning. Reordered lists carry positional
    scores (1/rank), since external and fused scores do not share a scale;
    queries without any external score are passed through unchanged. The
    output tag gains a ``-reranked`` suffix.
    """
    if rerank_depth < 0:
        raise ValueError("rerank_depth must be >= 0")
    lists = {}
    for qid, fused_list in fused.lists.items():
        external = rerank.lists.get(qid)
        if external is None or not external.entries:
            lists[qid] = fused_list
            continue
        head = fused_list.entries[:rerank_depth]
        tail = fused_list.entries[rerank_depth:]
        head_docs = {doc for doc, _ in head}
        scores = external.scores()
        outside = sorted(set(scores) - head_docs)
        if outside:
            logger.warning(
                "query %s: ignoring rerank scores for %d documents outside the fused top %d: %s",
                qid, len(outside), rerank_depth, ", ".join(outside[:5]),
            )
        scored = sorted(
            (entry for entry in head if entry[0] in scores),
            key=lambda entry: (-scores[entry[0]], entry[0]),
        )
        unscored = [entry for entry in head if entry[0] not in scores]
        lists[qid] = _positional(tuple(scored) + tuple(unscored) + tail)
    for qid in rerank.lists:
        if qid not in fused.lists:
            logger.warning("rerank scores for unknown query %s ignored", qid)
    return RunSet(lists=lists, tag=f"{fused.tag}-reranked")


def _positional(entries: tuple[tuple[str, float], ...]) -> ScoredList:
    return ScoredList(tuple((doc, 1.0 / rank) for rank, (doc, _) in enumerate(entries, start=1)))


@dataclass(frozen=True)
class PipelineResult:
    final: RunSet
    stage_paths: dict[str, Path]
    manifest_path: Path
    manifest: dict


def run_pipeline(
    config: PipelineConfig,
    out_dir: str | Path,
    *,
    queries_path: str | Path | None = None,
    subquery_map_path: str | Path | None = None,
    subquery_runs_path: str | Path | None = None,
    rerank_path: str | Path | None = None,
    decomposer=None,
    retriever=None,
) -> PipelineResult:
    """Execute decomposition -> retrieval -> fusion -> rerank injection.

    Each stage takes either a fixture file or a live client; any stage
    failure aborts with the stage name and the query id being processed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs: dict[str, Path] = {}
    for name, path in (
        ("queries", queries_path),
        ("subquery_map", subquery_map_path),
        ("subquery_runs", subquery_runs_path),
        ("rerank", rerank_path),
    ):
        if path is not None:
            inputs[name] = Path(path)

    # stage 1: sub-query map
    if "subquery_map" in inputs:
        mapping = _stage("decompose", None, parse_subquery_map, inputs["subquery_map"].read_bytes())
    elif "queries" in inputs and decomposer is not None:
        records = _read_query_records(inputs["queries"])
        groups = {}
        for record in records:
            result = _stage("decompose", record.get("query_id"), decompose, record, decomposer)
            groups[result.query_id] = tuple(
                (sub_query_id(result.query_id, i), text)
                for i, text in enumerate(result.sub_queries)
            )
        mapping = SubQueryMap(groups)
    else:
        raise ValidationError("pipeline needs a sub-query map file or queries plus a decomposer")

    # stage 2: per-sub-query ranked lists
    if "subquery_runs" in inputs:
        raw_runs = _stage("retrieve", None, parse_run, inputs["subquery_runs"].read_bytes())
        sub_runs = _collect_sub_lists(mapping, raw_runs, config.first_stage_depth)
    elif retriever is not None:
        sub_runs = _retrieve_all(mapping, retriever, config.first_stage_depth)
    else:
        raise ValidationError("pipeline needs a per-sub-query run file or a retriever client")

    # stage 3: fusion
    fused = _stage(
        "fuse", None, fuse_runs, mapping, sub_runs, config.strategy, config.first_stage_depth
    )

    # stage 4: rerank injection (empty scores when no rerank file was given)
    rerank_scores = (
        _stage("rerank", None, parse_run, inputs["rerank"].read_bytes())
        if "rerank" in inputs
        else RunSet(lists={}, tag="rerank")
    )
    reranked = _stage("rerank", None, inject_rerank, fused, rerank_scores, config.rerank_depth)

    stage_paths = {
        "subqueries.run": out_dir / "subqueries.run",
        "fused.run": out_dir / "fused.run",
        "reranked.run": out_dir / "reranked.run",
    }
    _atomic_write(stage_paths["subqueries.run"], write_run(sub_runs, config.first_stage_depth))
    _atomic_write(stage_paths["fused.run"], write_run(fused, config.first_stage_depth))
    _atomic_write(stage_paths["reranked.run"], write_run(reranked, config.first_stage_depth))

    manifest = {
        "toolkit_version": __version__,
        "config": config.to_dict(),
        "seeds": list(config.seeds),
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in sorted(inputs.items())
        },
    }
    manifest_path = out_dir / "manifest.json"
    _atomic_write(manifest_path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return PipelineResult(
        final=reranked, stage_paths=stage_paths, manifest_path=manifest_path, manifest=manifest
    )


def _stage(stage: str, query_id, fn, *args):
    try:
        return fn(*args)
    except PipelineStageError:
        raise
    except Exception as e:
        raise PipelineStageError(stage, query_id, e) from e


def _read_query_records(path: Path) -> list[dict]:
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            records.append(json.loads(line))
    return records


def _collect_sub_lists(mapping: SubQueryMap, raw: RunSet, depth: int) -> RunSet:
    lists = {}
    for qid, subs in mapping.groups.items():
        for sub_id, _ in subs:
            if sub_id not in raw.lists:
                raise PipelineStageError(
                    "retrieve", qid, ValidationError(f"no ranked list for sub-query {sub_id!r}")
                )
            lists[sub_id] = ScoredList(raw.lists[sub_id].entries[:depth])
    return RunSet(lists=lists, tag="subqueries")


def _retrieve_all(mapping: SubQueryMap, retriever, depth: int) -> RunSet:
    lists = {}
    for qid, subs in mapping.groups.items():
        for sub_id, text in subs:
            try:
                pairs = retriever.retrieve(sub_id, text, depth)
            except (TransportError, ValidationError) as e:
                raise PipelineStageError("retrieve", qid, e) from e
            lists[sub_id] = ScoredList.from_pairs(pairs)
    return RunSet(lists=lists, tag="subqueries")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
