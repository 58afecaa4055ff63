"""Simulated participants: weighted-inventory reinforcement agents.

Each agent keeps a hashtag inventory with nonnegative weights. Greedy play
returns the max-weight tag (lexicographic tie-break); exploration samples
proportionally to weights. A reward reinforces the agent's own tag; a miss
adopts the partner's tag into the inventory.
"""

from __future__ import annotations

import configparser
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .engine import DOC_HASHTAG_COUNT, NON_RESPONSE, Phase

PARAMS_VERSION = 1


@dataclass(frozen=True)
class AgentParams:
    epsilon: float = 0.1
    reinforce: float = 1.0
    adopt_weight: float = 1.0
    seed_inventory: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0,1], got {self.epsilon}")
        if self.reinforce <= 0:
            raise ValueError(f"reinforce must be > 0, got {self.reinforce}")
        if self.adopt_weight <= 0:
            raise ValueError(f"adopt_weight must be > 0, got {self.adopt_weight}")


DEFAULT_PARAMS = AgentParams()


@dataclass
class Agent:
    node: int
    inventory: dict[str, float]
    params: AgentParams = DEFAULT_PARAMS

    def __post_init__(self) -> None:
        if not self.inventory or not any(w > 0 for w in self.inventory.values()):
            raise ValueError("inventory must hold at least one positive weight")
        if any(w < 0 for w in self.inventory.values()):
            raise ValueError("inventory weights must be nonnegative")


@dataclass(frozen=True)
class SeedPool:
    """Hashtags with sampling probabilities for initial inventories."""

    hashtags: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.hashtags:
            raise ValueError("seed pool must be non-empty")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"seed pool probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, hashtags: Sequence[str]) -> "SeedPool":
        p = 1.0 / len(hashtags)
        return cls(tuple(hashtags), tuple(p for _ in hashtags))

    def draw(self, rng: random.Random) -> str:
        r = rng.random()
        acc = 0.0
        for tag, p in zip(self.hashtags, self.probs):
            acc += p
            if r < acc:
                return tag
        return self.hashtags[-1]


def init_agent(
    node: int, pool: SeedPool, rng: random.Random, params: AgentParams = DEFAULT_PARAMS
) -> Agent:
    """Seed an inventory with params.seed_inventory pool draws, each at weight 1.

    Duplicate draws merge (the weight stays 1).
    """
    inventory = {pool.draw(rng): 1.0 for _ in range(params.seed_inventory)}
    return Agent(node=node, inventory=inventory, params=params)


def choose_response(agent: Agent, rng: random.Random) -> str:
    """Greedy with probability 1-epsilon, else sample proportional to weight."""
    items = sorted(agent.inventory.items())
    if rng.random() >= agent.params.epsilon:
        best = max(w for _, w in items)
        return next(tag for tag, w in items if w == best)
    total = sum(w for _, w in items)
    r = rng.random() * total
    acc = 0.0
    for tag, w in items:
        acc += w
        if r < acc:
            return tag
    return items[-1][0]


def update(agent: Agent, own: str, partner: str, matched: bool) -> Agent:
    """Reinforce on a match; otherwise adopt the partner's tag.

    The non-response token is never adopted: silence is not a behaviour
    worth copying. Mutates and returns the same agent.
    """
    if matched:
        agent.inventory[own] = agent.inventory.get(own, 0.0) + agent.params.reinforce
    elif partner and partner != NON_RESPONSE:
        agent.inventory[partner] = agent.inventory.get(partner, 0.0) + agent.params.adopt_weight
    return agent


def make_population(
    n: int, pool: SeedPool, seed: int, params: AgentParams = DEFAULT_PARAMS
) -> list[Agent]:
    """One agent per node, inventories seeded deterministically from `seed`."""
    from .engine import derive_rng

    return [init_agent(node, pool, derive_rng(seed, "init", node), params) for node in range(n)]


def load_agent_params(path: str | Path) -> AgentParams:
    """Read a plain key-value parameter file (see data/agent_params.cfg)."""
    parser = configparser.ConfigParser()
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[params]\n" + text)
    section = parser["params"]
    version = section.getint("version", fallback=PARAMS_VERSION)
    if version != PARAMS_VERSION:
        raise ValueError(f"unsupported agent params version {version}")
    return AgentParams(
        epsilon=section.getfloat("epsilon", fallback=DEFAULT_PARAMS.epsilon),
        reinforce=section.getfloat("reinforce", fallback=DEFAULT_PARAMS.reinforce),
        adopt_weight=section.getfloat("adopt_weight", fallback=DEFAULT_PARAMS.adopt_weight),
        seed_inventory=section.getint("seed_inventory", fallback=DEFAULT_PARAMS.seed_inventory),
    )


def load_seed_pool(path: str | Path) -> SeedPool:
    """Read a seed-pool file: one `hashtag probability` pair per line."""
    tags: list[str] = []
    probs: list[float] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tag, prob = line.split()
        tags.append(tag)
        probs.append(float(prob))
    total = sum(probs)
    if not tags or abs(total - 1.0) > 1e-6:
        raise ValueError(f"seed pool file {path}: probabilities sum to {total}")
    probs = [p / total for p in probs]
    return SeedPool(tuple(tags), tuple(probs))


@dataclass
class CorpusSampler:
    """Pre/post documents for simulation: tweet drawn from a fixed corpus,
    hashtags drawn from the seed pool. Stands in for human writing."""

    texts: tuple[str, ...]
    pool: SeedPool

    def sample(self, node: int, phase: Phase, rng: random.Random) -> tuple[str, list[str]]:
        tweet = self.texts[rng.randrange(len(self.texts))]
        hashtags = [self.pool.draw(rng) for _ in range(DOC_HASHTAG_COUNT)]
        return tweet, hashtags


def load_corpus(path: str | Path) -> tuple[str, ...]:
    """One document per line; blank lines and '#' comments are skipped."""
    texts = tuple(
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.strip().startswith("#")
    )
    if not texts:
        raise ValueError(f"corpus file {path} holds no documents")
    return texts
