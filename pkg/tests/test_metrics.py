import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hashlab.agents import SeedPool, make_population
from hashlab.engine import NON_RESPONSE, RunConfig, TrialRecord, simulate_run
from hashlab.metrics import (
    COLORMAP_BLANK,
    MetricsDomainError,
    ResponseDistribution,
    colormap_grid,
    coordination_rate,
    distribution,
    dominant_proportion,
    entropy,
    final_responses,
    local_clusters,
    metric_series,
    trial_responses,
)
from hashlab.topology import StructureKind, build_complete, build_ring
from oracles import entropy_bruteforce

POOL = SeedPool.uniform(["earthquake", "tsunami", "setsuden", "meltdown", "fukushima"])


def _dist(counts: dict, trial=1):
    return ResponseDistribution(trial, counts, sum(counts.values()))


def test_dominance_examples():
    assert dominant_proportion(_dist({"nuclear": 12, "other": 8})) == pytest.approx(0.6)
    assert dominant_proportion(_dist({"same": 20})) == 1.0
    assert dominant_proportion(_dist({f"t{i}": 1 for i in range(20)})) == pytest.approx(0.05)


def test_dominance_ignores_non_response_token():
    # 9 silent, 6 say "a", 5 say "b": dominance counts real responses only,
    # over the full population.
    d = _dist({NON_RESPONSE: 9, "a": 6, "b": 5})
    assert dominant_proportion(d) == pytest.approx(6 / 20)


def test_dominance_errors():
    with pytest.raises(MetricsDomainError):
        dominant_proportion(_dist({NON_RESPONSE: 4}))
    with pytest.raises(MetricsDomainError):
        dominant_proportion(ResponseDistribution(1, {}, 0))


def test_entropy_examples():
    assert entropy(_dist({"x": 7})) == 0.0
    assert entropy(_dist({"a": 1, "b": 1, "c": 1, "d": 1})) == pytest.approx(
        math.log(4), abs=1e-12
    )
    assert entropy(_dist({"a": 3, "b": 1})) == pytest.approx(0.5623351446188083, abs=1e-12)
    assert entropy(_dist({"a": 3, "b": 1})) == pytest.approx(
        entropy_bruteforce([3, 1]), abs=1e-15
    )


def test_coordination_rate_examples():
    def rec(matched, trial=1):
        return TrialRecord(trial, 0, 1, "x", "y", "x", "y", matched, 0, 0)

    assert coordination_rate([rec(True)] * 4 + [rec(False)] * 6) == pytest.approx(0.4)
    assert coordination_rate([rec(True)] * 3) == 1.0
    assert coordination_rate([rec(False)] * 3) == 0.0
    with pytest.raises(MetricsDomainError):
        coordination_rate([])


@given(
    st.dictionaries(
        st.text(alphabet="abcdef", min_size=1, max_size=3),
        st.integers(min_value=1, max_value=30),
        min_size=1,
        max_size=8,
    )
)
@settings(max_examples=120, deadline=None, derandomize=True)
def test_entropy_zero_iff_dominance_one(counts):
    d = _dist(dict(counts))
    h = entropy(d)
    dom = dominant_proportion(d)
    assert (h == 0.0) == (dom == 1.0)
    assert h <= math.log(d.total) + 1e-12
    assert h == pytest.approx(entropy_bruteforce(list(counts.values())), abs=1e-12)


@given(
    st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=8),
    st.permutations(list(range(8))),
)
@settings(max_examples=80, deadline=None, derandomize=True)
def test_dominance_invariant_under_relabeling(counts, perm):
    labels = [f"l{i}" for i in range(len(counts))]
    relabeled = [f"l{perm[i]}" for i in range(len(counts))]
    a = _dist(dict(zip(labels, counts)))
    b = _dist(dict(zip(relabeled, counts)))
    assert dominant_proportion(a) == pytest.approx(dominant_proportion(b))


def test_entropy_maximal_iff_all_distinct():
    n = 6
    uniform = _dist({f"t{i}": 1 for i in range(n)})
    assert entropy(uniform) == pytest.approx(math.log(n), abs=1e-12)
    lumped = _dist({"t0": 2, "t1": 1, "t2": 1, "t3": 1, "t4": 1})
    assert entropy(lumped) < math.log(n)


def test_local_clusters_ring_blocks():
    topo = build_ring(6)
    responses = {0: "a", 1: "a", 2: "a", 3: "b", 4: "b", 5: "b"}
    clusters = local_clusters(responses, topo)
    as_sets = {(c.hashtag, c.nodes) for c in clusters}
    assert as_sets == {("a", frozenset({0, 1, 2})), ("b", frozenset({3, 4, 5}))}


def test_local_clusters_complete_consensus():
    topo = build_complete(8)
    clusters = local_clusters({i: "same" for i in range(8)}, topo)
    assert len(clusters) == 1 and clusters[0].size == 8


def test_local_clusters_alternating_ring_uses_offset_two():
    # Offsets +-2 connect same-label nodes across the alternation.
    topo = build_ring(6)
    responses = {i: ("a" if i % 2 == 0 else "b") for i in range(6)}
    clusters = local_clusters(responses, topo)
    as_sets = {(c.hashtag, c.nodes) for c in clusters}
    assert as_sets == {("a", frozenset({0, 2, 4})), ("b", frozenset({1, 3, 5}))}


def test_local_clusters_partition_and_silence_singletons():
    topo = build_ring(8)
    responses = {i: NON_RESPONSE if i < 3 else "x" for i in range(8)}
    clusters = local_clusters(responses, topo)
    assert sum(c.size for c in clusters) == 8
    all_nodes = set()
    for c in clusters:
        assert not (c.nodes & all_nodes)
        all_nodes |= c.nodes
    silent = [c for c in clusters if c.hashtag == NON_RESPONSE]
    assert all(c.size == 1 for c in silent) and len(silent) == 3


@given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=10, max_size=10))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_cluster_partition_property(labels):
    topo = build_ring(10)
    clusters = local_clusters(dict(enumerate(labels)), topo)
    assert sorted(n for c in clusters for n in c.nodes) == list(range(10))


def _run_log(n=20, trials=40, seed=5, structure=StructureKind.SPATIAL_RING):
    cfg = RunConfig(run_id="m", n=n, structure=structure, trials=trials, seed=seed)
    return simulate_run(cfg, make_population(n, POOL, seed))


def test_metric_series_shape_and_ranges():
    log = _run_log()
    s = metric_series(log)
    assert len(s.values) == 40
    for tm in s.values:
        assert 0.0 < tm.dominance <= 1.0
        assert tm.entropy >= 0.0
        assert 0.0 <= tm.coordination_rate <= 1.0


def test_colormap_grid_examples():
    log = _run_log()
    grid = colormap_grid(log)
    assert len(grid.cells) == 20 and len(grid.cells[0]) == 40
    assert len(grid.ids) == 20 and len(grid.ids[0]) == 40
    flat = {c for row in grid.cells for c in row}
    assert all(len(c) <= 5 for c in flat)
    # Cells are the first five letters of the normalized response.
    resp = trial_responses(log.trial_records(1))
    assert grid.cells[0][0] == resp[0][:5]


def test_colormap_non_response_sentinel():
    from hashlab.engine import RunState, run_trial
    from hashlab.topology import Matching

    cfg = RunConfig(run_id="c", n=2, structure=StructureKind.HOMOGENEOUS_COMPLETE,
                    trials=1, seed=1)
    state = RunState.start(cfg)
    run_trial(state, {0: "nucleardisaster"}, Matching(1, ((0, 1),)))
    grid = colormap_grid(state.log)
    assert grid.cells[0][0] == "nucle"
    assert grid.cells[1][0] == COLORMAP_BLANK
    assert grid.ids[1][0] == -1


def test_final_responses_and_distribution_consistency():
    log = _run_log(n=10, trials=12)
    finals = final_responses(log)
    assert set(finals) == set(range(10))
    dist = distribution(log.trial_records(12))
    assert dist.total == 10
