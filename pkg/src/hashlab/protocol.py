"""Pure session state machine for live runs.

The machine is a deterministic function of (state, message, clock): handlers
validate first, then mutate the passed state and return the outbound
messages. Transports own delivery; timers call `advance_clock`. Scoring and
logging reuse the run engine, so live logs replay identically to simulated
ones.

Wire schema (one JSON object per frame, key order fixed):
    {"kind": ..., "run_id": ..., "node": ..., "trial": ..., "payload": {...}}
See PROTOCOL.md for the payload of every kind.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .engine import (
    DOC_HASHTAG_COUNT,
    TWEET_WORD_LIMIT,
    DocumentRecord,
    Phase,
    RunConfig,
    RunState,
    run_trial,
)
from .topology import Matching, sample_matching

DEFAULT_LOBBY_TIMEOUT = 600.0
DEFAULT_DOC_DEADLINE = 600.0


class MessageKind(str, Enum):
    JOIN = "Join"
    ASSIGNED = "Assigned"
    NARRATIVE_SHOW = "NarrativeShow"
    PRE_DOC_SUBMIT = "PreDocSubmit"
    TRIAL_PROMPT = "TrialPrompt"
    HASHTAG_SUBMIT = "HashtagSubmit"
    TRIAL_REVEAL = "TrialReveal"
    POST_DOC_SUBMIT = "PostDocSubmit"
    RUN_COMPLETE = "RunComplete"
    ERROR = "Error"


CLIENT_KINDS = frozenset(
    {
        MessageKind.JOIN,
        MessageKind.PRE_DOC_SUBMIT,
        MessageKind.HASHTAG_SUBMIT,
        MessageKind.POST_DOC_SUBMIT,
    }
)


class SessionPhase(str, Enum):
    LOBBY = "lobby"
    PRE = "pre"
    TRIAL = "trial"
    POST = "post"
    DONE = "done"
    ABORTED = "aborted"


@dataclass(frozen=True)
class SessionMessage:
    kind: MessageKind
    run_id: str
    node: int | None = None
    trial: int | None = None
    payload: Mapping = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {
            "kind": self.kind.value,
            "run_id": self.run_id,
            "node": self.node,
            "trial": self.trial,
            "payload": dict(self.payload),
        }

    @classmethod
    def from_wire(cls, obj: Mapping) -> "SessionMessage":
        try:
            kind = MessageKind(obj["kind"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"bad message kind in {obj!r}") from exc
        return cls(
            kind=kind,
            run_id=str(obj.get("run_id", "")),
            node=obj.get("node"),
            trial=obj.get("trial"),
            payload=obj.get("payload") or {},
        )


# Outbound destination: a node id, or None for "reply to the sender's
# connection" (used before a connection is bound to a node).
Outbound = tuple[int | None, SessionMessage]


@dataclass
class SessionState:
    config: RunConfig
    run: RunState
    narrative: str
    phase: SessionPhase = SessionPhase.LOBBY
    trial: int = 0
    tokens: dict[int, str] = field(default_factory=dict)
    pending: dict[int, str] = field(default_factory=dict)
    docs_pending: set[int] = field(default_factory=set)
    matching: Matching | None = None
    deadline: float | None = None
    lobby_timeout: float = DEFAULT_LOBBY_TIMEOUT
    doc_deadline: float = DEFAULT_DOC_DEADLINE
    opened_at: float = 0.0

    @property
    def joined(self) -> int:
        return len(self.tokens)


def open_run(
    config: RunConfig,
    narrative: str,
    now: float,
    lobby_timeout: float = DEFAULT_LOBBY_TIMEOUT,
    doc_deadline: float = DEFAULT_DOC_DEADLINE,
) -> SessionState:
    """A lobby accepting up to config.n clients; the run starts when full."""
    return SessionState(
        config=config,
        run=RunState.start(config),
        narrative=narrative,
        lobby_timeout=lobby_timeout,
        doc_deadline=doc_deadline,
        opened_at=now,
        deadline=now + lobby_timeout,
    )


def node_token(config: RunConfig, node: int) -> str:
    """Deterministic per-run node capability token."""
    raw = f"{config.run_id}:{config.seed}:{node}".encode()
    return hashlib.sha256(raw).hexdigest()[:16]


def _msg(
    state: SessionState,
    kind: MessageKind,
    node: int | None = None,
    trial: int | None = None,
    **payload,
) -> SessionMessage:
    return SessionMessage(
        kind=kind, run_id=state.config.run_id, node=node, trial=trial, payload=payload
    )


def _error(state: SessionState, node: int | None, code: str, message: str) -> Outbound:
    return (node, _msg(state, MessageKind.ERROR, node=node, code=code, message=message))


def _broadcast(state: SessionState, make) -> list[Outbound]:
    return [(node, make(node)) for node in sorted(state.tokens)]


def _narrative_show(state: SessionState, phase: Phase, now: float):
    def make(node: int) -> SessionMessage:
        return _msg(
            state,
            MessageKind.NARRATIVE_SHOW,
            node=node,
            phase=phase.value,
            narrative=state.narrative,
            word_limit=TWEET_WORD_LIMIT,
            hashtag_count=DOC_HASHTAG_COUNT,
            deadline_s=max(0.0, (state.deadline or now) - now),
        )

    return make


def _start_doc_block(state: SessionState, phase: SessionPhase, now: float) -> list[Outbound]:
    state.phase = phase
    state.docs_pending = set(range(state.config.n))
    state.deadline = now + state.doc_deadline
    doc_phase = Phase.PRE if phase is SessionPhase.PRE else Phase.POST
    return _broadcast(state, _narrative_show(state, doc_phase, now))


def _start_trial(state: SessionState, trial: int, now: float) -> list[Outbound]:
    state.phase = SessionPhase.TRIAL
    state.trial = trial
    state.pending = {}
    state.matching = sample_matching(
        state.run.topology, trial, state.run.matching_rng(trial)
    )
    state.deadline = now + state.config.response_deadline

    def make(node: int) -> SessionMessage:
        return _msg(
            state,
            MessageKind.TRIAL_PROMPT,
            node=node,
            trial=trial,
            deadline_s=state.config.response_deadline,
        )

    return _broadcast(state, make)


def _reveal(state: SessionState, now: float) -> list[Outbound]:
    """Score the current trial and fan out per-node feedback pages."""
    assert state.matching is not None
    records = run_trial(state.run, state.pending, state.matching)
    out: list[Outbound] = []
    for rec in records:
        for node, own, partner, cum in (
            (rec.node_a, rec.resp_a, rec.resp_b, rec.cum_points_a),
            (rec.node_b, rec.resp_b, rec.resp_a, rec.cum_points_b),
        ):
            out.append(
                (
                    node,
                    _msg(
                        state,
                        MessageKind.TRIAL_REVEAL,
                        node=node,
                        trial=rec.trial,
                        own=own,
                        partner=partner,
                        matched=rec.matched,
                        point=1 if rec.matched else 0,
                        cumulative=cum,
                    ),
                )
            )
    out.sort(key=lambda o: o[0])
    if state.trial < state.config.trials:
        out.extend(_start_trial(state, state.trial + 1, now))
    else:
        out.extend(_start_doc_block(state, SessionPhase.POST, now))
    return out


def _complete(state: SessionState) -> list[Outbound]:
    state.phase = SessionPhase.DONE
    state.deadline = None
    points = {str(node): pts for node, pts in enumerate(state.run.points)}

    def make(node: int) -> SessionMessage:
        return _msg(
            state,
            MessageKind.RUN_COMPLETE,
            node=node,
            points=points,
            trials=state.config.trials,
        )

    return _broadcast(state, make)


def _validate_document(payload: Mapping) -> str | None:
    tweet = payload.get("tweet")
    hashtags = payload.get("hashtags")
    if not isinstance(tweet, str) or not isinstance(hashtags, list):
        return "document needs a tweet string and a hashtags list"
    if len(tweet.split()) > TWEET_WORD_LIMIT:
        return f"tweet exceeds the {TWEET_WORD_LIMIT} word limit"
    if len(hashtags) != DOC_HASHTAG_COUNT:
        return f"exactly {DOC_HASHTAG_COUNT} hashtags are required"
    if any(not isinstance(h, str) or not h.strip() for h in hashtags):
        return "hashtags must be non-empty strings"
    return None


def _context_for(state: SessionState, node: int, now: float) -> list[Outbound]:
    """What a (re)joining node needs to resume the current phase."""
    if state.phase is SessionPhase.PRE and node in state.docs_pending:
        return [(node, _narrative_show(state, Phase.PRE, now)(node))]
    if state.phase is SessionPhase.POST and node in state.docs_pending:
        return [(node, _narrative_show(state, Phase.POST, now)(node))]
    if state.phase is SessionPhase.TRIAL and node not in state.pending:
        return [
            (
                node,
                _msg(
                    state,
                    MessageKind.TRIAL_PROMPT,
                    node=node,
                    trial=state.trial,
                    deadline_s=max(0.0, (state.deadline or now) - now),
                ),
            )
        ]
    if state.phase is SessionPhase.DONE:
        points = {str(n): pts for n, pts in enumerate(state.run.points)}
        return [
            (
                node,
                _msg(
                    state,
                    MessageKind.RUN_COMPLETE,
                    node=node,
                    points=points,
                    trials=state.config.trials,
                ),
            )
        ]
    return []


def _assigned(state: SessionState, node: int) -> SessionMessage:
    return SessionMessage(
        kind=MessageKind.ASSIGNED,
        run_id=state.config.run_id,
        node=node,
        payload={
            "node": node,
            "token": state.tokens[node],
            "n": state.config.n,
            "structure": state.config.structure.value,
            "trials": state.config.trials,
            "narrative_id": state.config.narrative_id,
        },
    )


def _handle_join(state: SessionState, msg: SessionMessage, now: float) -> list[Outbound]:
    token = msg.payload.get("token")
    if token:
        for node, known in state.tokens.items():
            if known == token:
                # Rejoin keeps the node id; missed trials stay non-responses.
                return [(None, _assigned(state, node)), *_context_for(state, node, now)]
        return [_error(state, None, "bad_token", "unknown rejoin token")]
    if state.phase is not SessionPhase.LOBBY:
        return [_error(state, None, "run_started", "run already started; rejoin needs a token")]
    if state.joined >= state.config.n:
        return [_error(state, None, "run_full", f"run already has {state.config.n} players")]
    node = state.joined
    state.tokens[node] = node_token(state.config, node)
    out: list[Outbound] = [(None, _assigned(state, node))]
    if state.joined == state.config.n:
        out.extend(_start_doc_block(state, SessionPhase.PRE, now))
    return out


def _handle_doc_submit(
    state: SessionState, msg: SessionMessage, sender: int, now: float
) -> list[Outbound]:
    expected = (
        MessageKind.PRE_DOC_SUBMIT
        if state.phase is SessionPhase.PRE
        else MessageKind.POST_DOC_SUBMIT
    )
    if state.phase not in (SessionPhase.PRE, SessionPhase.POST) or msg.kind is not expected:
        return [_error(state, sender, "out_of_phase", f"{msg.kind.value} not legal in phase {state.phase.value}")]
    if sender not in state.docs_pending:
        return [_error(state, sender, "duplicate", "document already submitted for this phase")]
    problem = _validate_document(msg.payload)
    if problem:
        return [_error(state, sender, "validation", problem)]
    doc_phase = Phase.PRE if state.phase is SessionPhase.PRE else Phase.POST
    state.run.log.documents.append(
        DocumentRecord(
            node=sender,
            phase=doc_phase,
            tweet=msg.payload["tweet"],
            hashtags=tuple(msg.payload["hashtags"]),
        )
    )
    state.docs_pending.discard(sender)
    out: list[Outbound] = [(sender, _msg(state, msg.kind, node=sender, ok=True))]
    if not state.docs_pending:
        if state.phase is SessionPhase.PRE:
            out.extend(_start_trial(state, 1, now))
        else:
            out.extend(_complete(state))
    return out


def _handle_hashtag(
    state: SessionState, msg: SessionMessage, sender: int, now: float
) -> list[Outbound]:
    if state.phase is not SessionPhase.TRIAL:
        return [_error(state, sender, "out_of_phase", f"no trial running in phase {state.phase.value}")]
    if msg.trial != state.trial:
        return [_error(state, sender, "out_of_phase", f"trial {msg.trial} is not the current trial {state.trial}")]
    if sender in state.pending:
        return [_error(state, sender, "duplicate", "hashtag already submitted for this trial")]
    hashtag = msg.payload.get("hashtag")
    if not isinstance(hashtag, str):
        return [_error(state, sender, "validation", "payload needs a hashtag string")]
    state.pending[sender] = hashtag
    out: list[Outbound] = [
        (sender, _msg(state, MessageKind.HASHTAG_SUBMIT, node=sender, trial=state.trial, ok=True))
    ]
    if len(state.pending) == state.config.n:
        out.extend(_reveal(state, now))
    return out


def handle_message(
    state: SessionState, msg: SessionMessage, now: float, sender: int | None
) -> list[Outbound]:
    """Apply one client message; returns addressed outbound messages.

    `sender` is the node the transport has bound to the connection (None
    until a Join is answered with Assigned). Out-of-phase or malformed
    messages produce an Error reply and leave the state unchanged.
    """
    if msg.kind not in CLIENT_KINDS:
        return [_error(state, sender, "bad_message", f"clients may not send {msg.kind.value}")]
    if state.phase is SessionPhase.ABORTED:
        return [_error(state, sender, "aborted", "run was aborted")]
    if msg.kind is MessageKind.JOIN:
        return _handle_join(state, msg, now)
    if sender is None:
        return [_error(state, None, "not_joined", "join before sending anything else")]
    if msg.node is not None and msg.node != sender:
        return [_error(state, sender, "bad_message", "node field does not match the connection")]
    if msg.kind is MessageKind.HASHTAG_SUBMIT:
        return _handle_hashtag(state, msg, sender, now)
    return _handle_doc_submit(state, msg, sender, now)


def advance_clock(state: SessionState, now: float) -> list[Outbound]:
    """Fire deadline transitions; missing inputs become non-responses."""
    if state.deadline is None or now < state.deadline:
        return []
    if state.phase is SessionPhase.LOBBY:
        state.phase = SessionPhase.ABORTED
        state.deadline = None
        return _broadcast(
            state,
            lambda node: _msg(
                state,
                MessageKind.ERROR,
                node=node,
                code="aborted",
                message=f"lobby timed out with {state.joined} of {state.config.n} players",
            ),
        )
    if state.phase is SessionPhase.TRIAL:
        return _reveal(state, now)
    if state.phase is SessionPhase.PRE:
        # Whoever missed the block simply has no document on record.
        state.docs_pending.clear()
        return _start_trial(state, 1, now)
    if state.phase is SessionPhase.POST:
        state.docs_pending.clear()
        return _complete(state)
    state.deadline = None
    return []
