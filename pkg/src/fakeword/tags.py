"""Marker-token transcript codec for word-level REAL/FAKE labels.

A tagged transcript is plain text in which every fake word is wrapped by a
start marker and an end marker, e.g. ``!!!!!!word~~~``. Decoding recovers
per-word labels from such text; encoding produces the canonical form in
which each fake word is wrapped individually. Markers may be attached to a
word (``!!!!!!leben~~~``) or stand alone as tokens, and one marker pair may
span several words, in which case all of them are fake.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

DEFAULT_TOF_MARKER = "!!!!!!"
DEFAULT_EOF_MARKER = "~~~"


class Label(enum.Enum):
    REAL = "real"
    FAKE = "fake"


class UnbalancedMarkersError(ValueError):
    """Strict decoding found an unmatched start or end marker."""


class NestedMarkersError(ValueError):
    """Strict decoding found a start marker inside an open span."""


class InvalidWordError(ValueError):
    """Word text cannot be encoded because it contains a marker."""


@dataclass(frozen=True)
class MarkerConfig:
    """Start/end marker strings plus the recovery mode for malformed text.

    With ``lenient=True`` decoding never raises: an unmatched start marker
    labels everything through the end of the text and stray end markers are
    ignored. Use it for model output, which may be malformed; keep strict
    mode for ground-truth references.
    """

    tof_marker: str = DEFAULT_TOF_MARKER
    eof_marker: str = DEFAULT_EOF_MARKER
    lenient: bool = False

    def __post_init__(self) -> None:
        for name, marker in (("tof_marker", self.tof_marker),
                             ("eof_marker", self.eof_marker)):
            if not marker:
                raise ValueError(f"{name} must be non-empty")
            if any(ch.isspace() for ch in marker):
                raise ValueError(f"{name} must not contain whitespace")
        if self.tof_marker == self.eof_marker:
            raise ValueError("start and end markers must differ")


@dataclass(frozen=True)
class LabeledWord:
    text: str
    label: Label

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("word text must be non-empty")
        if any(ch.isspace() for ch in self.text):
            raise ValueError(f"word text must not contain whitespace: {self.text!r}")


@dataclass(frozen=True)
class TaggedTranscript:
    """Ordered words, each carrying a REAL or FAKE label."""

    words: tuple[LabeledWord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))

    def __len__(self) -> int:
        return len(self.words)

    def texts(self) -> list[str]:
        return [w.text for w in self.words]

    def labels(self) -> list[Label]:
        return [w.label for w in self.words]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Label]]) -> "TaggedTranscript":
        return cls(tuple(LabeledWord(t, l) for t, l in pairs))


def _marker_events(token: str, cfg: MarkerConfig) -> Iterator[tuple[str, str]]:
    """Split one whitespace token into ("tof"|"eof"|"text", piece) events.

    Scans for the leftmost marker occurrence; if both markers match at the
    same position the longer one wins, so overlapping marker strings stay
    unambiguous.
    """
    markers = sorted((cfg.tof_marker, cfg.eof_marker), key=len, reverse=True)
    kinds = {cfg.tof_marker: "tof", cfg.eof_marker: "eof"}
    pos = 0
    while pos < len(token):
        hits = [(token.find(m, pos), m) for m in markers]
        hits = [(i, m) for i, m in hits if i >= 0]
        if not hits:
            yield "text", token[pos:]
            return
        i, marker = min(hits, key=lambda h: (h[0], -len(h[1])))
        if i > pos:
            yield "text", token[pos:i]
        yield kinds[marker], marker
        pos = i + len(marker)


def decode(text: str, cfg: MarkerConfig | None = None) -> TaggedTranscript:
    """Parse tagged text into labeled words.

    Words are whitespace-separated; every word lying between a start marker
    and its matching end marker is FAKE, all others REAL. Markers are
    stripped from the word text. In strict mode (``cfg.lenient=False``)
    unbalanced or nested markers raise.
    """
    cfg = cfg or MarkerConfig()
    words: list[LabeledWord] = []
    in_fake = False
    for token in text.split():
        pieces: list[str] = []
        fake = False
        for kind, piece in _marker_events(token, cfg):
            if kind == "tof":
                if in_fake and not cfg.lenient:
                    raise NestedMarkersError(f"nested start marker in {token!r}")
                in_fake = True
            elif kind == "eof":
                if not in_fake and not cfg.lenient:
                    raise UnbalancedMarkersError(f"end marker without start in {token!r}")
                in_fake = False
            else:
                pieces.append(piece)
                fake = fake or in_fake
        word = "".join(pieces)
        # joining pieces can re-create a marker (e.g. an end marker splitting a
        # start marker in half); strip until clean so decoded words never
        # carry markers
        while cfg.tof_marker in word or cfg.eof_marker in word:
            word = strip_markers(word, cfg)
        if word:
            words.append(LabeledWord(word, Label.FAKE if fake else Label.REAL))
    if in_fake and not cfg.lenient:
        raise UnbalancedMarkersError("start marker never closed")
    return TaggedTranscript(tuple(words))


def encode(transcript: TaggedTranscript, cfg: MarkerConfig | None = None) -> str:
    """Render a transcript as tagged text, wrapping each FAKE word individually."""
    cfg = cfg or MarkerConfig()
    parts = []
    for word in transcript.words:
        if cfg.tof_marker in word.text or cfg.eof_marker in word.text:
            raise InvalidWordError(f"word contains a marker substring: {word.text!r}")
        if word.label is Label.FAKE:
            parts.append(cfg.tof_marker + word.text + cfg.eof_marker)
        else:
            parts.append(word.text)
    return " ".join(parts)


def strip_markers(text: str, cfg: MarkerConfig | None = None) -> str:
    """Remove every marker occurrence, leaving the remaining text untouched.

    Pure substring removal (longer marker first); juxtapositions created by
    a removal are not re-scanned.
    """
    cfg = cfg or MarkerConfig()
    first, second = sorted((cfg.tof_marker, cfg.eof_marker), key=len, reverse=True)
    return text.replace(first, "").replace(second, "")


def read_tagged_file(path: str | Path) -> dict[str, str]:
    """Read ``<utt_id>\\t<tagged text>`` lines into an ordered id -> text map."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fin:
        for lineno, line in enumerate(fin, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            utt_id, sep, tagged = line.partition("\t")
            if not sep or not utt_id:
                raise ValueError(f"{path}:{lineno}: expected '<utt_id>\\t<text>'")
            if utt_id in out:
                raise ValueError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
            out[utt_id] = tagged
    return out


def write_tagged_file(path: str | Path, items: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fout:
        for utt_id, tagged in items.items():
            if "\t" in utt_id or "\n" in utt_id:
                raise ValueError(f"utterance id may not contain tab/newline: {utt_id!r}")
            fout.write(f"{utt_id}\t{tagged}\n")
