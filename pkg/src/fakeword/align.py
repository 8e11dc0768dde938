"""Word-sequence normalization, minimum-edit alignment, and word error rate."""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .tags import LabeledWord, TaggedTranscript

MAX_WORDS = 10_000

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class EmptyReferenceError(ValueError):
    """WER is undefined for an empty reference."""


class InputTooLargeError(ValueError):
    """Alignment inputs above MAX_WORDS words are rejected (O(n*m) memory)."""


class EditOp(Enum):
    HIT = "hit"
    SUB = "sub"
    INS = "ins"
    DEL = "del"


@dataclass(frozen=True)
class NormalizationPolicy:
    """Per-word text normalization applied before alignment. Idempotent."""

    lowercase: bool = True
    strip_punctuation: bool = False
    collapse_whitespace: bool = True


@dataclass(frozen=True)
class AlignmentStep:
    op: EditOp
    ref_index: int | None = None
    hyp_index: int | None = None

    def __post_init__(self) -> None:
        need_ref = self.op in (EditOp.HIT, EditOp.SUB, EditOp.DEL)
        need_hyp = self.op in (EditOp.HIT, EditOp.SUB, EditOp.INS)
        if (self.ref_index is not None) != need_ref or (self.hyp_index is not None) != need_hyp:
            raise ValueError(f"{self.op} carries wrong index set")


@dataclass(frozen=True)
class Alignment:
    steps: tuple[AlignmentStep, ...]
    hits: int
    subs: int
    ins: int
    dels: int

    def __post_init__(self) -> None:
        counted = {op: sum(1 for s in self.steps if s.op is op) for op in EditOp}
        expected = (counted[EditOp.HIT], counted[EditOp.SUB],
                    counted[EditOp.INS], counted[EditOp.DEL])
        if expected != (self.hits, self.subs, self.ins, self.dels):
            raise ValueError("counts inconsistent with steps")

    @classmethod
    def from_steps(cls, steps: Sequence[AlignmentStep]) -> "Alignment":
        steps = tuple(steps)
        return cls(steps,
                   hits=sum(1 for s in steps if s.op is EditOp.HIT),
                   subs=sum(1 for s in steps if s.op is EditOp.SUB),
                   ins=sum(1 for s in steps if s.op is EditOp.INS),
                   dels=sum(1 for s in steps if s.op is EditOp.DEL))

    @property
    def errors(self) -> int:
        return self.subs + self.ins + self.dels


def normalize(words: Sequence[str], policy: NormalizationPolicy | None = None) -> list[str]:
    """Apply the policy per word; words that normalize to nothing are dropped."""
    policy = policy or NormalizationPolicy()
    out: list[str] = []
    for word in words:
        if policy.lowercase:
            word = word.lower()
        if policy.strip_punctuation:
            word = word.translate(_PUNCT_TABLE)
        if policy.collapse_whitespace:
            out.extend(word.split())
        elif word:
            out.append(word)
    return out


def normalize_transcript(
    transcript: TaggedTranscript, policy: NormalizationPolicy | None = None
) -> tuple[TaggedTranscript, list[int]]:
    """Normalize a tagged transcript, keeping labels attached to surviving words.

    Returns the normalized transcript plus, per surviving word, the index of
    the original word it came from (words split by whitespace collapse share
    their source index).
    """
    words: list[LabeledWord] = []
    mapping: list[int] = []
    for i, word in enumerate(transcript.words):
        for text in normalize([word.text], policy):
            words.append(LabeledWord(text, word.label))
            mapping.append(i)
    return TaggedTranscript(tuple(words)), mapping


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
    """Minimum-edit alignment of two word sequences under unit costs.

    Ties are broken deterministically: walking the optimal paths from the
    start of both sequences, HIT is preferred over SUB over DEL over INS at
    every step. Equal words always align as HIT (this never costs extra for
    unit-cost edit distance).
    """
    n, m = len(ref), len(hyp)
    if n > MAX_WORDS or m > MAX_WORDS:
        raise InputTooLargeError(f"alignment limited to {MAX_WORDS} words per side")

    vocab: dict[str, int] = {}
    ref_ids = np.fromiter((vocab.setdefault(w, len(vocab)) for w in ref), dtype=np.int32, count=n)
    hyp_ids = np.fromiter((vocab.setdefault(w, len(vocab)) for w in hyp), dtype=np.int32, count=m)

    # suffix[i, j] = edit distance between ref[i:] and hyp[j:]
    suffix = np.zeros((n + 1, m + 1), dtype=np.uint16)
    suffix[n, :] = np.arange(m, -1, -1, dtype=np.uint16)
    suffix[:, m] = np.arange(n, -1, -1, dtype=np.uint16)
    cols = np.arange(m, dtype=np.uint16)
    for i in range(n - 1, -1, -1):
        below = suffix[i + 1]
        diag = below[1:] + (hyp_ids != ref_ids[i])
        best = np.minimum(diag, below[:m] + 1)
        # resolve the right-to-left dependency d[j] = min(best[j], d[j+1] + 1)
        shifted = np.minimum.accumulate((best + cols)[::-1])[::-1]
        suffix[i, :m] = np.minimum(best, shifted - cols)

    steps: list[AlignmentStep] = []
    i = j = 0
    while i < n or j < m:
        here = suffix[i, j]
        if i < n and j < m and ref_ids[i] == hyp_ids[j] and here == suffix[i + 1, j + 1]:
            steps.append(AlignmentStep(EditOp.HIT, i, j))
            i, j = i + 1, j + 1
        elif i < n and j < m and here == suffix[i + 1, j + 1] + 1:
            steps.append(AlignmentStep(EditOp.SUB, i, j))
            i, j = i + 1, j + 1
        elif i < n and here == suffix[i + 1, j] + 1:
            steps.append(AlignmentStep(EditOp.DEL, ref_index=i))
            i += 1
        else:
            steps.append(AlignmentStep(EditOp.INS, hyp_index=j))
            j += 1
    return Alignment.from_steps(steps)


def wer(alignment: Alignment, ref_len: int) -> float:
    """(subs + ins + dels) / ref_len. May exceed 1 when insertions dominate."""
    if ref_len <= 0:
        raise EmptyReferenceError("reference must contain at least one word")
    return alignment.errors / ref_len


def transcript_wer(
    ref: TaggedTranscript, hyp: TaggedTranscript, policy: NormalizationPolicy | None = None
) -> float:
    """Convenience wrapper: normalize both sides, align, return WER."""
    ref_words = normalize(ref.texts(), policy)
    hyp_words = normalize(hyp.texts(), policy)
    return wer(align_words(ref_words, hyp_words), len(ref_words))
