"""Live session service over WebSockets.

One JSON message per text frame, schema in PROTOCOL.md. All mutations of a
run's state go through its lock, so the pure state machine sees a single
serialized message stream per run; separate runs are fully independent.
A plain HTTP GET /health reports every run's phase.

Live logs are persisted append-only while the run progresses: after each
handled message the hub flushes any newly committed records to disk.
"""

from __future__ import annotations

import asyncio
import http
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from websockets.asyncio.server import ServerConnection, serve

from .engine import RunConfig
from .protocol import (
    MessageKind,
    Outbound,
    SessionMessage,
    SessionPhase,
    SessionState,
    advance_clock,
    handle_message,
    open_run,
)
from .runlog import LogWriter

log = logging.getLogger(__name__)

TICK_SECONDS = 0.2


class DuplicateRunError(ValueError):
    """A run id that is already open in this hub."""


@dataclass
class _Run:
    state: SessionState
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    connections: dict[int, Callable] = field(default_factory=dict)
    writer: LogWriter | None = None
    trials_persisted: int = 0
    docs_persisted: int = 0
    finished: asyncio.Event = field(default_factory=asyncio.Event)

    def persist_new_records(self) -> None:
        if self.writer is None:
            return
        run_log = self.state.run.log
        for rec in run_log.trials[self.trials_persisted :]:
            self.writer.trial(rec)
        self.trials_persisted = len(run_log.trials)
        for doc in run_log.documents[self.docs_persisted :]:
            self.writer.document(doc)
        self.docs_persisted = len(run_log.documents)


class SessionHub:
    """Owns every open run; transport-agnostic apart from message sinks."""

    def __init__(self, clock: Callable[[], float] = time.monotonic) -> None:
        self._runs: dict[str, _Run] = {}
        self._clock = clock

    def open_run(
        self,
        config: RunConfig,
        narrative: str,
        log_path: str | Path | None = None,
        lobby_timeout: float = 600.0,
        doc_deadline: float = 600.0,
    ) -> SessionState:
        if config.run_id in self._runs:
            raise DuplicateRunError(f"run {config.run_id!r} is already open")
        state = open_run(
            config,
            narrative,
            now=self._clock(),
            lobby_timeout=lobby_timeout,
            doc_deadline=doc_deadline,
        )
        run = _Run(state=state)
        if log_path is not None:
            run.writer = LogWriter(log_path, config, state.run.topology)
        self._runs[config.run_id] = run
        return state

    def run_ids(self) -> list[str]:
        return sorted(self._runs)

    def get(self, run_id: str) -> _Run | None:
        return self._runs.get(run_id)

    def health(self) -> dict:
        return {
            "runs": {
                run_id: {
                    "phase": run.state.phase.value,
                    "trial": run.state.trial,
                    "joined": run.state.joined,
                    "n": run.state.config.n,
                }
                for run_id, run in self._runs.items()
            }
        }

    async def handle(
        self, run: _Run, sender_node: int | None, msg: SessionMessage, reply
    ) -> int | None:
        """Apply a client message; returns the node bound to the connection."""
        async with run.lock:
            outbound = handle_message(run.state, msg, self._clock(), sender_node)
            bound = await self._dispatch(run, outbound, reply)
            run.persist_new_records()
            self._check_finished(run)
        return bound

    async def tick(self, run: _Run) -> None:
        async with run.lock:
            outbound = advance_clock(run.state, self._clock())
            if outbound:
                await self._dispatch(run, outbound, None)
                run.persist_new_records()
            self._check_finished(run)

    def _check_finished(self, run: _Run) -> None:
        if run.state.phase in (SessionPhase.DONE, SessionPhase.ABORTED):
            if run.writer is not None:
                run.writer.close()
                run.writer = None
            run.finished.set()

    async def _dispatch(self, run: _Run, outbound: list[Outbound], reply) -> int | None:
        bound: int | None = None
        for dest, msg in outbound:
            if dest is None:
                if msg.kind is MessageKind.ASSIGNED:
                    bound = int(msg.payload["node"])
                    if reply is not None:
                        run.connections[bound] = reply
                if reply is not None:
                    await reply(msg.to_wire())
            else:
                sink = run.connections.get(dest)
                if sink is not None:
                    try:
                        await sink(msg.to_wire())
                    except Exception:  # disconnected client: drop, it may rejoin
                        run.connections.pop(dest, None)
        return bound

    async def ticker(self, stop: asyncio.Event) -> None:
        while not stop.is_set():
            for run in list(self._runs.values()):
                if not run.finished.is_set():
                    await self.tick(run)
            try:
                await asyncio.wait_for(stop.wait(), timeout=TICK_SECONDS)
            except asyncio.TimeoutError:
                pass


def _ws_path_run_id(path: str) -> str | None:
    parts = [p for p in path.split("?")[0].split("/") if p]
    if len(parts) == 2 and parts[0] == "ws":
        return parts[1]
    return None


async def run_server(
    hub: SessionHub, host: str, port: int, ready: asyncio.Future | None = None
) -> None:
    """Serve until cancelled; `ready` resolves to the bound port."""

    def process_request(connection: ServerConnection, request):
        if request.path.split("?")[0] == "/health":
            body = json.dumps(hub.health()).encode()
            return connection.respond(http.HTTPStatus.OK, body.decode() + "\n")
        if _ws_path_run_id(request.path) is None:
            return connection.respond(http.HTTPStatus.NOT_FOUND, "unknown path\n")
        return None

    async def handler(websocket: ServerConnection) -> None:
        run_id = _ws_path_run_id(websocket.request.path)
        run = hub.get(run_id) if run_id else None
        if run is None:
            await websocket.send(
                json.dumps(
                    SessionMessage(
                        kind=MessageKind.ERROR,
                        run_id=run_id or "",
                        payload={"code": "unknown_run", "message": f"no run {run_id!r}"},
                    ).to_wire()
                )
            )
            await websocket.close()
            return

        async def reply(obj: dict) -> None:
            await websocket.send(json.dumps(obj))

        node: int | None = None
        try:
            async for raw in websocket:
                try:
                    msg = SessionMessage.from_wire(json.loads(raw))
                except (ValueError, TypeError) as exc:
                    await reply(
                        SessionMessage(
                            kind=MessageKind.ERROR,
                            run_id=run.state.config.run_id,
                            payload={"code": "bad_message", "message": str(exc)},
                        ).to_wire()
                    )
                    continue
                bound = await hub.handle(run, node, msg, reply)
                if bound is not None:
                    node = bound
        finally:
            if node is not None and run.connections.get(node) is reply:
                del run.connections[node]

    stop = asyncio.Event()
    async with serve(handler, host, port, process_request=process_request) as server:
        if ready is not None:
            bound_port = server.sockets[0].getsockname()[1] if server.sockets else port
            ready.set_result(bound_port)
        ticker = asyncio.create_task(hub.ticker(stop))
        try:
            await asyncio.Future()  # run until cancelled
        finally:
            stop.set()
            await ticker
