"""Network structures for coordination runs.

Two fixed topologies are supported: a spatially-embedded ring lattice in
which every node is linked to its four nearest ring neighbours (offsets
+-1 and +-2), and a homogeneously-mixed complete graph. Per-trial pairings
are perfect matchings sampled within these neighbourhoods.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

RING_OFFSETS = (1, 2)
MAX_MATCHING_RESTARTS = 1000


class InvalidConfigError(ValueError):
    """Raised for node counts a topology cannot support."""


class MatchingFailureError(RuntimeError):
    """Raised when no perfect matching is found within the restart bound."""


class StructureKind(str, Enum):
    SPATIAL_RING = "ring"
    HOMOGENEOUS_COMPLETE = "complete"


@dataclass(frozen=True)
class Topology:
    """Immutable graph: node ids are 0..n-1, neighbour lists are sorted."""

    kind: StructureKind
    n: int
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        """Neighbourhood size: 4 on the ring, n-1 on the complete graph."""
        return 2 * len(RING_OFFSETS) if self.kind is StructureKind.SPATIAL_RING else self.n - 1

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self.adjacency[node]

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adjacency[i]

    def edges(self) -> list[tuple[int, int]]:
        """All edges as (i, j) with i < j, sorted."""
        return [(i, j) for i in range(self.n) for j in self.adjacency[i] if i < j]

    def edge_record(self) -> dict:
        """Plain serializable record: kind, n, and "i j" pairs."""
        return {
            "kind": self.kind.value,
            "n": self.n,
            "edges": [f"{i} {j}" for i, j in self.edges()],
        }


def _check_even(n: int) -> None:
    # Odd n would strand one node every trial; there is no bye rule.
    if n % 2 != 0:
        raise InvalidConfigError(f"node count must be even, got {n}")


def build_ring(n: int) -> Topology:
    """Ring lattice with offsets +-1, +-2: every node has exactly 4 neighbours."""
    if n < 6:
        raise InvalidConfigError(f"ring needs at least 6 nodes, got {n}")
    _check_even(n)
    adjacency = tuple(
        tuple(sorted({(i + d) % n for off in RING_OFFSETS for d in (off, -off)}))
        for i in range(n)
    )
    return Topology(StructureKind.SPATIAL_RING, n, adjacency)


def build_complete(n: int) -> Topology:
    """Complete graph: every node adjacent to all n-1 others."""
    if n < 2:
        raise InvalidConfigError(f"complete graph needs at least 2 nodes, got {n}")
    _check_even(n)
    adjacency = tuple(
        tuple(j for j in range(n) if j != i) for i in range(n)
    )
    return Topology(StructureKind.HOMOGENEOUS_COMPLETE, n, adjacency)


def build(kind: StructureKind | str, n: int) -> Topology:
    kind = StructureKind(kind)
    if kind is StructureKind.SPATIAL_RING:
        return build_ring(n)
    return build_complete(n)


def from_edge_record(record: dict) -> Topology:
    """Rebuild a Topology from its edge_record(); validates degree invariants."""
    kind = StructureKind(record["kind"])
    n = int(record["n"])
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for pair in record["edges"]:
        i, j = (int(x) for x in pair.split())
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise InvalidConfigError(f"bad edge {pair!r} for n={n}")
        nbrs[i].add(j)
        nbrs[j].add(i)
    topo = Topology(kind, n, tuple(tuple(sorted(s)) for s in nbrs))
    want = 2 * len(RING_OFFSETS) if kind is StructureKind.SPATIAL_RING else n - 1
    degrees = {len(s) for s in topo.adjacency}
    if degrees != {want}:
        raise InvalidConfigError(f"edge record degrees {degrees} != {want} for {kind.value}")
    return topo


def diameter(topo: Topology) -> int:
    """Largest geodesic distance, by breadth-first search from every node."""
    best = 0
    for src in range(topo.n):
        dist = [-1] * topo.n
        dist[src] = 0
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in topo.adjacency[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        best = max(best, max(dist))
    return best


@dataclass(frozen=True)
class Matching:
    """One trial's pairing: every node in exactly one pair, pairs are edges."""

    trial: int
    pairs: tuple[tuple[int, int], ...]

    def partner_of(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for a, b in self.pairs:
            out[a] = b
            out[b] = a
        return out


def sample_matching(topo: Topology, trial: int, rng: random.Random) -> Matching:
    """Sample a perfect matching using only topology edges.

    Randomized greedy: walk a shuffled node order, pairing each still-free
    node with a uniformly chosen free neighbour; restart on dead ends
    (bounded). Marginally over many trials this is close enough to uniform
    per-edge for both supported structures.
    """
    n = topo.n
    if topo.kind is StructureKind.HOMOGENEOUS_COMPLETE:
        # Shuffle-and-pair is an exactly uniform perfect matching here.
        order = list(range(n))
        rng.shuffle(order)
        pairs = tuple(
            (min(a, b), max(a, b)) for a, b in zip(order[::2], order[1::2])
        )
        return Matching(trial, tuple(sorted(pairs)))

    for _ in range(MAX_MATCHING_RESTARTS):
        order = list(range(n))
        rng.shuffle(order)
        partner = [-1] * n
        pairs: list[tuple[int, int]] = []
        ok = True
        for u in order:
            if partner[u] >= 0:
                continue
            free = [v for v in topo.adjacency[u] if partner[v] < 0]
            if not free:
                ok = False
                break
            v = rng.choice(free)
            partner[u] = v
            partner[v] = u
            pairs.append((min(u, v), max(u, v)))
        if ok:
            return Matching(trial, tuple(sorted(pairs)))
    raise MatchingFailureError(
        f"no perfect matching found after {MAX_MATCHING_RESTARTS} restarts (n={n})"
    )
