"""Rule-based causal-claim extraction and directed topic matrices.

A fixed trigger lexicon marks explicitly stated causal relations; the
clause fragments on either side of a trigger become the cause and effect
spans (sides swap for "because of" / "due to" phrasing). Spans map to
topics by keyword hits against a fixed topic lexicon, and documents
aggregate into directed topic-by-topic count matrices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

NON_TOPIC = "non-topic"

# Cause precedes the trigger in text unless the trigger is reversing.
FORWARD_TRIGGERS = (
    "caused",
    "causes",
    "triggered",
    "led to",
    "leads to",
    "resulted in",
    "results in",
)
REVERSED_TRIGGERS = ("because of", "due to")

# Clause boundary: sentence-internal punctuation or the text edge.
_BOUNDARY = re.compile(r"[.!?;:,()\n]")
_SPAN_TRIM = " \t\r\n.!?;:,()\"'"


class LexiconError(ValueError):
    """A topic or trigger lexicon that violates its invariants."""


class MatrixShapeError(ValueError):
    """Topic matrices whose index sets do not line up."""


@dataclass(frozen=True)
class CausalClaim:
    cause_span: str
    trigger: str
    effect_span: str
    cause_topic: str = NON_TOPIC
    effect_topic: str = NON_TOPIC


@dataclass(frozen=True)
class TriggerLexicon:
    forward: tuple[str, ...] = FORWARD_TRIGGERS
    reversed: tuple[str, ...] = REVERSED_TRIGGERS

    def __post_init__(self) -> None:
        if not self.forward and not self.reversed:
            raise LexiconError("trigger lexicon is empty")
        for phrase in (*self.forward, *self.reversed):
            if not phrase or phrase != phrase.lower():
                raise LexiconError(f"bad trigger phrase {phrase!r}")

    def pattern(self) -> re.Pattern[str]:
        phrases = sorted((*self.forward, *self.reversed), key=len, reverse=True)
        alternation = "|".join(re.escape(p) for p in phrases)
        return re.compile(rf"\b(?:{alternation})\b", re.IGNORECASE)

    @classmethod
    def load(cls, path: str | Path) -> "TriggerLexicon":
        """One trigger per line; a line "phrase, reversed" swaps the spans."""
        forward: list[str] = []
        rev: list[str] = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip().lower()
            if not line or line.startswith("#"):
                continue
            if line.endswith(", reversed"):
                rev.append(line[: -len(", reversed")].strip())
            else:
                forward.append(line)
        return cls(tuple(forward), tuple(rev))


DEFAULT_TRIGGERS = TriggerLexicon()


@dataclass(frozen=True)
class TopicLexicon:
    """Ordered (topic id, keyword set) pairs; ids are unique, keywords lowercase."""

    topics: tuple[tuple[str, frozenset[str]], ...]

    def __post_init__(self) -> None:
        ids = [tid for tid, _ in self.topics]
        if len(set(ids)) != len(ids):
            raise LexiconError(f"duplicate topic ids in {ids}")
        for tid, keywords in self.topics:
            if not keywords:
                raise LexiconError(f"topic {tid!r} has no keywords")
            if any(k != k.lower() or not k for k in keywords):
                raise LexiconError(f"topic {tid!r} keywords must be lowercase")

    def ids(self) -> tuple[str, ...]:
        return tuple(tid for tid, _ in self.topics)

    @classmethod
    def load(cls, path: str | Path) -> "TopicLexicon":
        """Lines of `topic-id: keyword, keyword, ...`."""
        topics = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tid, _, rest = line.partition(":")
            keywords = frozenset(k.strip().lower() for k in rest.split(",") if k.strip())
            topics.append((tid.strip(), keywords))
        return cls(tuple(topics))

    @classmethod
    def default(cls) -> "TopicLexicon":
        with resources.as_file(resources.files("hashlab.data") / "topics.txt") as p:
            return cls.load(p)


def _fragment(text: str, start: int, end: int) -> str:
    """The clause fragment of text[start:end] nearest the trigger."""
    return text[start:end].strip(_SPAN_TRIM)


def extract_claims(
    doc: str, triggers: TriggerLexicon = DEFAULT_TRIGGERS
) -> list[CausalClaim]:
    """All (cause, trigger, effect) triples explicitly stated in a document.

    For each trigger occurrence the nearest clause fragment to its left and
    right become the spans; claims with an empty span are dropped.
    """
    reversed_set = set(triggers.reversed)
    claims: list[CausalClaim] = []
    for match in triggers.pattern().finditer(doc):
        left_edge = 0
        for boundary in _BOUNDARY.finditer(doc, 0, match.start()):
            left_edge = boundary.end()
        right = _BOUNDARY.search(doc, match.end())
        right_edge = right.start() if right else len(doc)
        left_span = _fragment(doc, left_edge, match.start())
        right_span = _fragment(doc, match.end(), right_edge)
        if not left_span or not right_span:
            continue
        trigger = match.group(0).lower()
        if trigger in reversed_set:
            claims.append(CausalClaim(right_span, trigger, left_span))
        else:
            claims.append(CausalClaim(left_span, trigger, right_span))
    return claims


def assign_topic(span: str, lexicon: TopicLexicon) -> str:
    """Topic with the most keyword hits in the span; ties break to the
    lexicographically first id; zero hits map to NON_TOPIC."""
    text = span.lower()
    best_topic = NON_TOPIC
    best_hits = 0
    for tid, keywords in sorted(lexicon.topics):
        hits = sum(_count_hits(text, kw) for kw in keywords)
        if hits > best_hits:
            best_topic, best_hits = tid, hits
    return best_topic


def _count_hits(text: str, keyword: str) -> int:
    return len(re.findall(rf"\b{re.escape(keyword)}\b", text))


def annotate(claims: Iterable[CausalClaim], lexicon: TopicLexicon) -> list[CausalClaim]:
    return [
        replace(
            c,
            cause_topic=assign_topic(c.cause_span, lexicon),
            effect_topic=assign_topic(c.effect_span, lexicon),
        )
        for c in claims
    ]


@dataclass(frozen=True)
class TopicMatrix:
    """Directed topic-by-topic matrix; cell (i, j) reads "topic i caused j"."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.labels), len(self.labels)):
            raise MatrixShapeError(
                f"matrix is {values.shape}, labels give {len(self.labels)}"
            )
        object.__setattr__(self, "values", values)

    def cell(self, cause: str, effect: str) -> float:
        return float(self.values[self.labels.index(cause), self.labels.index(effect)])

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("cause\\effect\t" + "\t".join(self.labels) + "\n")
            for label, row in zip(self.labels, self.values):
                fh.write(label + "\t" + "\t".join(f"{v:.10g}" for v in row) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "TopicMatrix":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        labels = tuple(lines[0].split("\t")[1:])
        values = np.array(
            [[float(v) for v in line.split("\t")[1:]] for line in lines[1:]]
        )
        return cls(labels, values)


def matrix_labels(lexicon: TopicLexicon) -> tuple[str, ...]:
    return (*lexicon.ids(), NON_TOPIC)


def claim_matrix(
    corpus: Iterable[str],
    triggers: TriggerLexicon = DEFAULT_TRIGGERS,
    lexicon: TopicLexicon | None = None,
) -> TopicMatrix:
    """Directed document counts: a document adds at most 1 to any cell,
    however often it repeats the same topic pair."""
    lexicon = lexicon or TopicLexicon.default()
    labels = matrix_labels(lexicon)
    index = {label: i for i, label in enumerate(labels)}
    values = np.zeros((len(labels), len(labels)))
    for doc in corpus:
        pairs = {
            (c.cause_topic, c.effect_topic)
            for c in annotate(extract_claims(doc, triggers), lexicon)
        }
        for cause, effect in pairs:
            values[index[cause], index[effect]] += 1
    return TopicMatrix(labels, values)


def diff_matrix(post: TopicMatrix, pre: TopicMatrix, group_count: int) -> TopicMatrix:
    """Cellwise (post - pre) / group_count; the per-condition average shift."""
    if post.labels != pre.labels:
        raise MatrixShapeError(
            f"label mismatch: {post.labels[:3]}... vs {pre.labels[:3]}..."
        )
    if group_count < 1:
        raise MatrixShapeError(f"group_count must be >= 1, got {group_count}")
    return TopicMatrix(post.labels, (post.values - pre.values) / group_count)


def claim_counts(
    corpus: Iterable[str], triggers: TriggerLexicon = DEFAULT_TRIGGERS
) -> list[int]:
    """Per-document causal-claim counts; the hurdle-model response."""
    return [len(extract_claims(doc, triggers)) for doc in corpus]
