"""Per-trial and per-run measurements over run logs.

Covers the dominant-response proportion, Shannon entropy (nats) of the
response distribution, pairwise coordination rate, same-hashtag clusters
on the topology, and the node-by-trial colormap grid. All functions are
pure over immutable logs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .engine import NON_RESPONSE, RunLog, TrialRecord
from .topology import StructureKind, Topology

COLORMAP_BLANK = "—"  # em dash sentinel for non-responses
COLORMAP_PREFIX = 5

METRIC_COLUMNS = [
    "run_id",
    "trial",
    "dominance",
    "entropy",
    "coordination_rate",
    "structure",
    "spatial",
    "size",
]

PAIR_COLUMNS = [
    "run_id",
    "trial",
    "node_a",
    "node_b",
    "matched",
    "structure",
    "spatial",
    "size",
]


class MetricsDomainError(ValueError):
    """Raised when a measurement is undefined for the given distribution."""


@dataclass(frozen=True)
class ResponseDistribution:
    """Counts of normalized responses on one trial; non-responses share
    the NON_RESPONSE token and are part of the total."""

    trial: int
    counts: Mapping[str, int]
    total: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.total:
            raise MetricsDomainError(
                f"trial {self.trial}: counts sum to {sum(self.counts.values())}, "
                f"total is {self.total}"
            )


def trial_responses(records: Sequence[TrialRecord]) -> dict[int, str]:
    """node -> normalized response, from one trial's records."""
    out: dict[int, str] = {}
    for rec in records:
        out[rec.node_a] = rec.norm_a
        out[rec.node_b] = rec.norm_b
    return out


def distribution(records: Sequence[TrialRecord]) -> ResponseDistribution:
    if not records:
        raise MetricsDomainError("no records for trial")
    responses = trial_responses(records)
    counts: dict[str, int] = {}
    for resp in responses.values():
        counts[resp] = counts.get(resp, 0) + 1
    return ResponseDistribution(records[0].trial, counts, len(responses))


def dominant_proportion(dist: ResponseDistribution) -> float:
    """Share of players producing the modal real response.

    The non-response token is excluded from the max: a dominant silence is
    meaningless. Non-responders still count in the denominator.
    """
    if dist.total <= 0:
        raise MetricsDomainError("empty distribution")
    real = {tag: c for tag, c in dist.counts.items() if tag != NON_RESPONSE}
    if not real:
        raise MetricsDomainError("no real responses in distribution")
    return max(real.values()) / dist.total


def entropy(dist: ResponseDistribution) -> float:
    """Shannon entropy in nats over the full distribution."""
    if dist.total <= 0:
        raise MetricsDomainError("empty distribution")
    h = 0.0
    for count in dist.counts.values():
        if count > 0:
            p = count / dist.total
            h -= p * math.log(p)
    return max(h, 0.0)


def coordination_rate(records: Sequence[TrialRecord]) -> float:
    """Matched pairs / total pairs for one trial."""
    if not records:
        raise MetricsDomainError("no records for trial")
    return sum(1 for r in records if r.matched) / len(records)


@dataclass(frozen=True)
class TrialMetrics:
    trial: int
    dominance: float
    entropy: float
    coordination_rate: float


@dataclass(frozen=True)
class MetricSeries:
    run_id: str
    structure: StructureKind
    size: int
    values: tuple[TrialMetrics, ...]


def metric_series(run_log: RunLog) -> MetricSeries:
    """Dominance, entropy, and coordination rate for every trial of a run."""
    if run_log.config is None:
        raise MetricsDomainError("run log has no config")
    by_trial: dict[int, list[TrialRecord]] = {}
    for rec in run_log.trials:
        by_trial.setdefault(rec.trial, []).append(rec)
    values = []
    for trial in sorted(by_trial):
        records = by_trial[trial]
        dist = distribution(records)
        values.append(
            TrialMetrics(
                trial=trial,
                dominance=dominant_proportion(dist),
                entropy=entropy(dist),
                coordination_rate=coordination_rate(records),
            )
        )
    return MetricSeries(
        run_id=run_log.config.run_id,
        structure=run_log.config.structure,
        size=run_log.config.n,
        values=tuple(values),
    )


def _spatial_flag(kind: StructureKind) -> int:
    return 1 if kind is StructureKind.SPATIAL_RING else 0


def write_metric_table(series: Iterable[MetricSeries], path: str | Path) -> None:
    """Delimited per-trial table; input format for the regression fits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(METRIC_COLUMNS)
        for s in series:
            for tm in s.values:
                w.writerow(
                    [
                        s.run_id,
                        tm.trial,
                        f"{tm.dominance:.10g}",
                        f"{tm.entropy:.10g}",
                        f"{tm.coordination_rate:.10g}",
                        s.structure.value,
                        _spatial_flag(s.structure),
                        s.size,
                    ]
                )


def write_pair_table(run_logs: Iterable[RunLog], path: str | Path) -> None:
    """One row per pair-trial with a binary matched outcome."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(PAIR_COLUMNS)
        for run_log in run_logs:
            cfg = run_log.config
            if cfg is None:
                raise MetricsDomainError("run log has no config")
            for rec in run_log.trials:
                w.writerow(
                    [
                        cfg.run_id,
                        rec.trial,
                        rec.node_a,
                        rec.node_b,
                        int(rec.matched),
                        cfg.structure.value,
                        _spatial_flag(cfg.structure),
                        cfg.n,
                    ]
                )


@dataclass(frozen=True)
class Cluster:
    hashtag: str
    nodes: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.nodes)


def local_clusters(responses: Mapping[int, str], topo: Topology) -> list[Cluster]:
    """Maximal connected same-hashtag subgraphs; they partition the nodes.

    Non-responding nodes become singleton clusters: silence does not form
    a shared behaviour.
    """
    missing = set(range(topo.n)) - set(responses)
    if missing:
        raise MetricsDomainError(f"responses missing for nodes {sorted(missing)}")
    seen: set[int] = set()
    clusters: list[Cluster] = []
    for start in range(topo.n):
        if start in seen:
            continue
        label = responses[start]
        seen.add(start)
        component = {start}
        if label != NON_RESPONSE:
            stack = [start]
            while stack:
                u = stack.pop()
                for v in topo.neighbors(u):
                    if v not in seen and responses[v] == label:
                        seen.add(v)
                        component.add(v)
                        stack.append(v)
        clusters.append(Cluster(label, frozenset(component)))
    clusters.sort(key=lambda c: (-c.size, c.hashtag, min(c.nodes)))
    return clusters


def final_responses(run_log: RunLog) -> dict[int, str]:
    last = max((r.trial for r in run_log.trials), default=None)
    if last is None:
        raise MetricsDomainError("run log has no trials")
    return trial_responses(run_log.trial_records(last))


def write_clusters(clusters: Sequence[Cluster], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["hashtag", "size", "nodes"])
        for c in clusters:
            w.writerow([c.hashtag, c.size, " ".join(map(str, sorted(c.nodes)))])


@dataclass(frozen=True)
class ColormapGrid:
    """Node-by-trial grid of response labels plus an image-ready id matrix."""

    run_id: str
    nodes: tuple[int, ...]
    trials: tuple[int, ...]
    cells: tuple[tuple[str, ...], ...]  # rows: nodes; cols: trials
    ids: tuple[tuple[int, ...], ...]  # same shape; -1 marks a non-response


def colormap_grid(run_log: RunLog) -> ColormapGrid:
    """Cells hold the first five letters of each normalized response."""
    if run_log.config is None:
        raise MetricsDomainError("run log has no config")
    n = run_log.config.n
    trials = sorted({r.trial for r in run_log.trials})
    by_trial = {t: trial_responses(run_log.trial_records(t)) for t in trials}
    cells = []
    for node in range(n):
        row = []
        for t in trials:
            resp = by_trial[t].get(node, NON_RESPONSE)
            row.append(COLORMAP_BLANK if resp == NON_RESPONSE else resp[:COLORMAP_PREFIX])
        cells.append(tuple(row))
    labels = sorted({c for row in cells for c in row if c != COLORMAP_BLANK})
    label_id = {label: i for i, label in enumerate(labels)}
    ids = tuple(
        tuple(-1 if c == COLORMAP_BLANK else label_id[c] for c in row) for row in cells
    )
    return ColormapGrid(
        run_id=run_log.config.run_id,
        nodes=tuple(range(n)),
        trials=tuple(trials),
        cells=tuple(cells),
        ids=ids,
    )


def write_colormap(grid: ColormapGrid, cell_path: str | Path, id_path: str | Path) -> None:
    header = ["node"] + [str(t) for t in grid.trials]
    with open(cell_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(header)
        for node, row in zip(grid.nodes, grid.cells):
            w.writerow([node, *row])
    with open(id_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(header)
        for node, row in zip(grid.nodes, grid.ids):
            w.writerow([node, *row])
