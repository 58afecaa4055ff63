"""Bot clients: agent-backed players speaking the live wire protocol.

The decision logic is a pure message-in/messages-out brain so it can be
driven by any transport; `run_bot` wires a brain to a WebSocket. Bots make
mixed human/bot runs and full-protocol integration tests possible with no
UI involved.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from websockets.asyncio.client import connect

from .agents import Agent, CorpusSampler, choose_response, update
from .engine import NON_RESPONSE, Phase, derive_rng, normalize_hashtag
from .protocol import MessageKind, SessionMessage


@dataclass
class BotBrain:
    """Pure protocol logic for one simulated participant.

    With doc_seed set, documents draw from the same per-(phase, node)
    streams the offline engine uses, so a bot-played run reproduces a
    simulated one record for record.
    """

    run_id: str
    agent: Agent
    sampler: CorpusSampler
    rng: random.Random
    doc_seed: int | None = None
    node: int | None = None
    token: str | None = None
    final_points: int | None = None
    error: SessionMessage | None = None
    reveals: list[dict] = field(default_factory=list)

    def join(self) -> SessionMessage:
        payload = {"token": self.token} if self.token else {}
        return SessionMessage(kind=MessageKind.JOIN, run_id=self.run_id, payload=payload)

    def handle(self, msg: SessionMessage) -> list[SessionMessage]:
        if msg.kind is MessageKind.ASSIGNED:
            self.node = int(msg.payload["node"])
            self.token = msg.payload["token"]
            return []
        if msg.kind is MessageKind.NARRATIVE_SHOW:
            phase = Phase(msg.payload["phase"])
            doc_rng = (
                derive_rng(self.doc_seed, "doc", phase.value, self.node)
                if self.doc_seed is not None
                else self.rng
            )
            tweet, hashtags = self.sampler.sample(self.node or 0, phase, doc_rng)
            kind = (
                MessageKind.PRE_DOC_SUBMIT
                if phase is Phase.PRE
                else MessageKind.POST_DOC_SUBMIT
            )
            return [
                SessionMessage(
                    kind=kind,
                    run_id=self.run_id,
                    node=self.node,
                    payload={"tweet": tweet, "hashtags": list(hashtags)},
                )
            ]
        if msg.kind is MessageKind.TRIAL_PROMPT:
            tag = choose_response(self.agent, self.rng)
            return [
                SessionMessage(
                    kind=MessageKind.HASHTAG_SUBMIT,
                    run_id=self.run_id,
                    node=self.node,
                    trial=msg.trial,
                    payload={"hashtag": "#" + tag},
                )
            ]
        if msg.kind is MessageKind.TRIAL_REVEAL:
            self.reveals.append(dict(msg.payload))
            own = normalize_hashtag(msg.payload["own"])
            partner = normalize_hashtag(msg.payload["partner"])
            if own != NON_RESPONSE:
                update(self.agent, own, partner, bool(msg.payload["matched"]))
            return []
        if msg.kind is MessageKind.RUN_COMPLETE:
            self.final_points = int(msg.payload["points"][str(self.node)])
            return []
        if msg.kind is MessageKind.ERROR:
            self.error = msg
            return []
        return []

    @property
    def done(self) -> bool:
        return self.final_points is not None or self.error is not None


async def run_bot(uri: str, brain: BotBrain) -> BotBrain:
    """Play one full run over a WebSocket; returns the brain when done."""
    async with connect(uri) as ws:
        await ws.send(json.dumps(brain.join().to_wire()))
        async for raw in ws:
            msg = SessionMessage.from_wire(json.loads(raw))
            for out in brain.handle(msg):
                await ws.send(json.dumps(out.to_wire()))
            if brain.done:
                break
    return brain
