"""Run engine: pre-interaction block, scored coordination trials, post block.

A run is fully deterministic given its config seed. Per-trial and per-node
random generators are derived from stable string keys so that execution
order never affects the outcome.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol, Sequence

from .topology import Matching, StructureKind, Topology, build, sample_matching

# Normalization can never produce a leading '#', so this token cannot
# collide with any real response.
NON_RESPONSE = "#none"

DEFAULT_TRIALS = 40
DOC_HASHTAG_COUNT = 10
TWEET_WORD_LIMIT = 140


class ProtocolError(ValueError):
    """A message or response that breaks the run protocol."""


def normalize_hashtag(raw: str | None) -> str:
    """Canonical form: drop all whitespace, strip leading '#', lowercase.

    An empty result (missing, blank, or bare '#') maps to NON_RESPONSE.
    """
    if raw is None:
        return NON_RESPONSE
    canon = "".join(raw.split()).lstrip("#").lower()
    return canon if canon else NON_RESPONSE


class Phase(str, Enum):
    PRE = "pre"
    POST = "post"


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    n: int
    structure: StructureKind
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    response_deadline: float = 60.0
    narrative_id: str = "fukushima"

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ProtocolError(f"trials must be >= 1, got {self.trials}")

    def build_topology(self) -> Topology:
        return build(self.structure, self.n)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    node_a: int
    node_b: int
    resp_a: str
    resp_b: str
    norm_a: str
    norm_b: str
    matched: bool
    cum_points_a: int
    cum_points_b: int


@dataclass(frozen=True)
class DocumentRecord:
    node: int
    phase: Phase
    tweet: str
    hashtags: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.hashtags) != DOC_HASHTAG_COUNT:
            raise ProtocolError(
                f"document needs exactly {DOC_HASHTAG_COUNT} hashtags, "
                f"got {len(self.hashtags)}"
            )


@dataclass
class RunLog:
    """Everything persisted about one run; see runlog for the line format."""

    config: RunConfig | None
    topology: Topology | None
    trials: list[TrialRecord] = field(default_factory=list)
    documents: list[DocumentRecord] = field(default_factory=list)

    def trial_records(self, trial: int) -> list[TrialRecord]:
        return [r for r in self.trials if r.trial == trial]

    def final_points(self) -> dict[int, int]:
        points: dict[int, int] = {}
        if self.config is not None:
            points = {node: 0 for node in range(self.config.n)}
        for rec in self.trials:
            points[rec.node_a] = rec.cum_points_a
            points[rec.node_b] = rec.cum_points_b
        return points


class DocumentSampler(Protocol):
    def sample(self, node: int, phase: Phase, rng: random.Random) -> tuple[str, Sequence[str]]:
        """Return (tweet, hashtags) for one node's pre/post document."""


@dataclass
class RunState:
    """Mutable per-run scoring state owned by whoever drives the trials."""

    config: RunConfig
    topology: Topology
    points: list[int]
    log: RunLog

    @classmethod
    def start(cls, config: RunConfig) -> "RunState":
        topo = config.build_topology()
        return cls(config, topo, [0] * config.n, RunLog(config, topo))

    def matching_rng(self, trial: int) -> random.Random:
        return derive_rng(self.config.seed, "match", trial)


def derive_rng(seed: int, *key: object) -> random.Random:
    """Stable stream per (seed, key): str seeding hashes all bits (sha512)."""
    return random.Random(":".join([str(seed), *map(str, key)]))


def run_trial(
    state: RunState,
    responses: Mapping[int, str | None],
    matching: Matching,
) -> list[TrialRecord]:
    """Score one trial: normalize, match, award one point per matched player.

    Missing responses become NON_RESPONSE, which never matches anything,
    another non-response included.
    """
    n = state.config.n
    for node in responses:
        if not (0 <= node < n):
            raise ProtocolError(f"unknown node id {node} in responses")
    records = []
    for a, b in matching.pairs:
        raw_a = responses.get(a)
        raw_b = responses.get(b)
        norm_a = normalize_hashtag(raw_a)
        norm_b = normalize_hashtag(raw_b)
        matched = norm_a == norm_b and norm_a != NON_RESPONSE
        if matched:
            state.points[a] += 1
            state.points[b] += 1
        records.append(
            TrialRecord(
                trial=matching.trial,
                node_a=a,
                node_b=b,
                resp_a=raw_a if raw_a is not None else "",
                resp_b=raw_b if raw_b is not None else "",
                norm_a=norm_a,
                norm_b=norm_b,
                matched=matched,
                cum_points_a=state.points[a],
                cum_points_b=state.points[b],
            )
        )
    state.log.trials.extend(records)
    return records


def _document_block(
    state: RunState, phase: Phase, sampler: DocumentSampler | None
) -> None:
    if sampler is None:
        return
    for node in range(state.config.n):
        rng = derive_rng(state.config.seed, "doc", phase.value, node)
        tweet, hashtags = sampler.sample(node, phase, rng)
        state.log.documents.append(
            DocumentRecord(node=node, phase=phase, tweet=tweet, hashtags=tuple(hashtags))
        )


def simulate_run(
    config: RunConfig,
    agents: Sequence,
    doc_sampler: DocumentSampler | None = None,
) -> RunLog:
    """Execute a full seeded run with simulated participants.

    Per trial: sample a matching within neighbourhoods, solicit one response
    per agent, score, then feed back (own, partner, matched) to every agent.
    All responses for a trial are committed before any agent sees feedback.
    """
    from .agents import choose_response, update

    if len(agents) != config.n:
        raise ProtocolError(f"population size {len(agents)} != n={config.n}")
    state = RunState.start(config)
    agent_rngs = [derive_rng(config.seed, "agent", node) for node in range(config.n)]

    _document_block(state, Phase.PRE, doc_sampler)
    for trial in range(1, config.trials + 1):
        matching = sample_matching(state.topology, trial, state.matching_rng(trial))
        responses = {
            node: choose_response(agents[node], agent_rngs[node])
            for node in range(config.n)
        }
        records = run_trial(state, responses, matching)
        for rec in records:
            update(agents[rec.node_a], rec.norm_a, rec.norm_b, rec.matched)
            update(agents[rec.node_b], rec.norm_b, rec.norm_a, rec.matched)
    _document_block(state, Phase.POST, doc_sampler)
    return state.log
