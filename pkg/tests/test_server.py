"""Live-transport integration: real WebSockets on an ephemeral port."""

import asyncio
import json
import urllib.request

import pytest
import websockets

from hashlab.agents import CorpusSampler, SeedPool, init_agent, make_population
from hashlab.bots import BotBrain, run_bot
from hashlab.engine import NON_RESPONSE, RunConfig, derive_rng, simulate_run
from hashlab.metrics import metric_series
from hashlab.protocol import MessageKind, SessionMessage
from hashlab.runlog import load_log
from hashlab.server import DuplicateRunError, SessionHub, run_server
from hashlab.topology import StructureKind

POOL = SeedPool.uniform(
    ["earthquake", "tsunami", "setsuden", "meltdown", "fukushima", "evacuation"]
)
TEXTS = ("tweet one", "tweet two", "tweet three")
NARRATIVE = "narrative shown to participants"


def _sampler():
    return CorpusSampler(TEXTS, POOL)


def _bots(cfg, n):
    return [
        BotBrain(
            run_id=cfg.run_id,
            agent=init_agent(i, POOL, derive_rng(cfg.seed, "init", i)),
            sampler=_sampler(),
            rng=derive_rng(cfg.seed, "agent", i),
            doc_seed=cfg.seed,
        )
        for i in range(n)
    ]


async def _serve(hub):
    ready = asyncio.get_running_loop().create_future()
    task = asyncio.create_task(run_server(hub, "127.0.0.1", 0, ready))
    port = await ready
    return task, port


async def _stop(task):
    task.cancel()
    try:
        await task
    except asyncio.CancelledError:
        pass


def test_full_bot_run_matches_simulation(tmp_path):
    """20 live bot clients reproduce the engine's simulated run exactly."""
    cfg = RunConfig(
        run_id="live", n=20, structure=StructureKind.SPATIAL_RING, trials=40, seed=424
    )
    log_path = tmp_path / "live.ndjson"

    async def scenario():
        hub = SessionHub()
        hub.open_run(cfg, NARRATIVE, log_path=log_path)
        task, port = await _serve(hub)
        uri = f"ws://127.0.0.1:{port}/ws/live"
        brains = await asyncio.wait_for(
            asyncio.gather(*(run_bot(uri, b) for b in _bots(cfg, 20))), timeout=60
        )
        await _stop(task)
        return brains

    brains = asyncio.run(scenario())
    assert all(b.error is None for b in brains)
    assert all(b.final_points is not None for b in brains)
    assert all(len(b.reveals) == 40 for b in brains)

    # The persisted log passes schema validation and replays.
    live = load_log(log_path)
    assert live.config == cfg
    assert len(live.trials) == 400 and len(live.documents) == 40

    # Same seeds, same agents: the simulated engine run is the oracle.
    sim = simulate_run(cfg, make_population(20, POOL, cfg.seed), _sampler())
    view = lambda recs: [
        (r.trial, r.node_a, r.node_b, r.norm_a, r.norm_b, r.matched,
         r.cum_points_a, r.cum_points_b)
        for r in recs
    ]
    assert view(live.trials) == view(sim.trials)
    assert live.documents == sim.documents
    assert metric_series(live).values == metric_series(sim).values

    points = {i: b.final_points for i, b in enumerate(brains)}
    assert points == sim.final_points()


def test_health_endpoint_and_duplicate_run():
    cfg = RunConfig(
        run_id="h", n=2, structure=StructureKind.HOMOGENEOUS_COMPLETE, trials=2, seed=1
    )

    async def scenario():
        hub = SessionHub()
        hub.open_run(cfg, NARRATIVE)
        with pytest.raises(DuplicateRunError):
            hub.open_run(cfg, NARRATIVE)
        task, port = await _serve(hub)
        health = json.loads(
            await asyncio.to_thread(
                lambda: urllib.request.urlopen(
                    f"http://127.0.0.1:{port}/health", timeout=5
                ).read()
            )
        )
        await _stop(task)
        return health

    health = asyncio.run(scenario())
    assert health["runs"]["h"]["phase"] == "lobby"
    assert health["runs"]["h"]["n"] == 2


def test_unknown_run_gets_error():
    async def scenario():
        hub = SessionHub()
        task, port = await _serve(hub)
        async with websockets.connect(f"ws://127.0.0.1:{port}/ws/nope") as ws:
            raw = await asyncio.wait_for(ws.recv(), timeout=5)
        await _stop(task)
        return SessionMessage.from_wire(json.loads(raw))

    msg = asyncio.run(scenario())
    assert msg.kind is MessageKind.ERROR
    assert msg.payload["code"] == "unknown_run"


def test_disconnected_player_becomes_non_responses(tmp_path):
    """A client that vanishes mid-run misses deadlines; the run completes."""
    cfg = RunConfig(
        run_id="flaky", n=2, structure=StructureKind.HOMOGENEOUS_COMPLETE,
        trials=2, seed=3, response_deadline=0.3,
    )
    log_path = tmp_path / "flaky.ndjson"

    async def flaky_client(uri):
        async with websockets.connect(uri) as ws:
            await ws.send(json.dumps(
                SessionMessage(kind=MessageKind.JOIN, run_id="flaky").to_wire()
            ))
            # Wait for the narrative, submit the pre doc, then vanish.
            async for raw in ws:
                msg = SessionMessage.from_wire(json.loads(raw))
                if msg.kind is MessageKind.NARRATIVE_SHOW:
                    await ws.send(json.dumps(SessionMessage(
                        kind=MessageKind.PRE_DOC_SUBMIT, run_id="flaky",
                        payload={"tweet": "here then gone",
                                 "hashtags": [f"t{i}" for i in range(10)]},
                    ).to_wire()))
                    return

    async def scenario():
        hub = SessionHub()
        hub.open_run(cfg, NARRATIVE, log_path=log_path, doc_deadline=0.4)
        task, port = await _serve(hub)
        uri = f"ws://127.0.0.1:{port}/ws/flaky"
        [bot] = _bots(cfg, 1)
        results = await asyncio.wait_for(
            asyncio.gather(run_bot(uri, bot), flaky_client(uri)), timeout=30
        )
        await _stop(task)
        return results[0]

    bot = asyncio.run(scenario())
    assert bot.error is None and bot.final_points == 0
    live = load_log(log_path)
    assert len(live.trials) == 2
    flaky_node = 1 - bot.node
    for rec in live.trials:
        norm = rec.norm_a if rec.node_a == flaky_node else rec.norm_b
        assert norm == NON_RESPONSE
        assert not rec.matched
    # The bot saw its partner's silence on the reveal page.
    assert all(r["partner"] == "" and not r["matched"] for r in bot.reveals)


def test_lobby_timeout_aborts_live():
    cfg = RunConfig(
        run_id="slow", n=2, structure=StructureKind.HOMOGENEOUS_COMPLETE,
        trials=2, seed=4,
    )

    async def scenario():
        hub = SessionHub()
        hub.open_run(cfg, NARRATIVE, lobby_timeout=0.3)
        task, port = await _serve(hub)
        [bot] = _bots(cfg, 1)
        brain = await asyncio.wait_for(
            run_bot(f"ws://127.0.0.1:{port}/ws/slow", bot), timeout=30
        )
        await _stop(task)
        return brain

    brain = asyncio.run(scenario())
    assert brain.error is not None
    assert brain.error.payload["code"] == "aborted"
