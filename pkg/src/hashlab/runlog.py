"""Line-delimited, schema-versioned run-log persistence.

One JSON object per line, keys in a fixed order: schema_version, run_id,
record_type, then the type-specific fields. The first record of a log is
always the `meta` record carrying the run config and the topology edge
list. Writes are append-only and flushed per line so a crashed live run
keeps every committed record.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import IO

from .engine import DocumentRecord, Phase, RunConfig, RunLog, TrialRecord
from .topology import StructureKind, from_edge_record

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)


class LogLoadError(ValueError):
    """A run log that cannot be parsed; the message names the byte offset."""


def _meta_record(config: RunConfig, topology) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": config.run_id,
        "record_type": "meta",
        "n": config.n,
        "structure": config.structure.value,
        "trials": config.trials,
        "seed": config.seed,
        "response_deadline": config.response_deadline,
        "narrative_id": config.narrative_id,
        "topology": topology.edge_record(),
    }


def _trial_record(run_id: str, rec: TrialRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": run_id,
        "record_type": "trial",
        "trial": rec.trial,
        "node_a": rec.node_a,
        "node_b": rec.node_b,
        "resp_a": rec.resp_a,
        "resp_b": rec.resp_b,
        "norm_a": rec.norm_a,
        "norm_b": rec.norm_b,
        "matched": rec.matched,
        "cum_points_a": rec.cum_points_a,
        "cum_points_b": rec.cum_points_b,
    }


def _document_record(run_id: str, rec: DocumentRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": run_id,
        "record_type": "document",
        "node": rec.node,
        "phase": rec.phase.value,
        "tweet": rec.tweet,
        "hashtags": list(rec.hashtags),
    }


class LogWriter:
    """Append-only writer; flushes after every record."""

    def __init__(self, path: str | Path, config: RunConfig, topology) -> None:
        self.path = Path(path)
        self.run_id = config.run_id
        self._fh: IO[str] = open(self.path, "w", encoding="utf-8")
        self._write(_meta_record(config, topology))

    def _write(self, obj: dict) -> None:
        self._fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
        self._fh.flush()

    def trial(self, rec: TrialRecord) -> None:
        self._write(_trial_record(self.run_id, rec))

    def document(self, rec: DocumentRecord) -> None:
        self._write(_document_record(self.run_id, rec))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "LogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_log(run_log: RunLog, path: str | Path) -> None:
    """Persist a completed in-memory run log."""
    if run_log.config is None or run_log.topology is None:
        raise ValueError("cannot persist a run log without config and topology")
    with LogWriter(path, run_log.config, run_log.topology) as w:
        for rec in run_log.trials:
            w.trial(rec)
        for doc in run_log.documents:
            w.document(doc)


def _parse_meta(obj: dict) -> tuple[RunConfig, object]:
    config = RunConfig(
        run_id=obj["run_id"],
        n=int(obj["n"]),
        structure=StructureKind(obj["structure"]),
        trials=int(obj["trials"]),
        seed=int(obj["seed"]),
        response_deadline=float(obj["response_deadline"]),
        narrative_id=obj["narrative_id"],
    )
    return config, from_edge_record(obj["topology"])


def load_log(path: str | Path) -> RunLog:
    """Read a run log back; the round trip with write_log is lossless.

    Raises LogLoadError naming the byte offset of the first bad line.
    An empty file loads as an empty RunLog with a warning.
    """
    path = Path(path)
    data = path.read_bytes()
    if not data.strip():
        log.warning("run log %s is empty", path)
        return RunLog(config=None, topology=None)

    run_log: RunLog | None = None
    offset = 0
    for line in data.splitlines(keepends=True):
        stripped = line.strip()
        if stripped:
            try:
                obj = json.loads(stripped.decode("utf-8"))
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
            except (ValueError, UnicodeDecodeError) as exc:
                raise LogLoadError(
                    f"{path}: bad record at byte offset {offset}: {exc}"
                ) from exc
            version = obj.get("schema_version")
            if version != SCHEMA_VERSION:
                raise LogLoadError(
                    f"{path}: schema version {version!r} != {SCHEMA_VERSION} "
                    f"at byte offset {offset}"
                )
            kind = obj.get("record_type")
            if run_log is None:
                if kind != "meta":
                    raise LogLoadError(
                        f"{path}: first record must be meta, got {kind!r} "
                        f"at byte offset {offset}"
                    )
                config, topo = _parse_meta(obj)
                run_log = RunLog(config=config, topology=topo)
            elif kind == "trial":
                run_log.trials.append(
                    TrialRecord(
                        trial=int(obj["trial"]),
                        node_a=int(obj["node_a"]),
                        node_b=int(obj["node_b"]),
                        resp_a=obj["resp_a"],
                        resp_b=obj["resp_b"],
                        norm_a=obj["norm_a"],
                        norm_b=obj["norm_b"],
                        matched=bool(obj["matched"]),
                        cum_points_a=int(obj["cum_points_a"]),
                        cum_points_b=int(obj["cum_points_b"]),
                    )
                )
            elif kind == "document":
                run_log.documents.append(
                    DocumentRecord(
                        node=int(obj["node"]),
                        phase=Phase(obj["phase"]),
                        tweet=obj["tweet"],
                        hashtags=tuple(obj["hashtags"]),
                    )
                )
            elif kind == "meta":
                raise LogLoadError(
                    f"{path}: duplicate meta record at byte offset {offset}"
                )
            else:
                raise LogLoadError(
                    f"{path}: unknown record_type {kind!r} at byte offset {offset}"
                )
        offset += len(line)
    assert run_log is not None
    return run_log
