"""Word-level synthetic-word detection scoring.

Labels propagate from tagged transcripts through the word alignment: a fake
reference word whose aligned hypothesis word is labeled real is a false
acceptance, a real reference word flagged fake is a false rejection, and
label correctness is judged independently of whether the word text was
recognized correctly. Frame-level helpers convert word spans to fixed-hop
frame labels and pool per-frame probabilities back into word decisions.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .align import Alignment, EditOp
from .tags import Label, TaggedTranscript

DEFAULT_FRAME_HOP_S = 0.016
DEFAULT_BUCKET_EDGES = tuple(round(0.1 * i, 10) for i in range(11))

_EPS = 1e-9


class AlignmentMismatchError(ValueError):
    """Alignment does not cover the given transcripts."""


class EmptyClassError(ValueError):
    """Rate undefined: the class denominator is zero."""


class NonMonotoneEdgesError(ValueError):
    pass


class MissingGroupKeyError(ValueError):
    pass


class OverlappingSpansError(ValueError):
    pass


class NoFramesInSpanError(ValueError):
    """No frame midpoint falls inside the span."""


@dataclass(frozen=True)
class WordSpan:
    """A word's time extent plus its label and origin metadata."""

    start_s: float
    end_s: float
    label: Label = Label.REAL
    text: str = ""
    language: str | None = None

    def __post_init__(self) -> None:
        if self.start_s < 0:
            raise ValueError("span start must be >= 0")
        if not self.end_s > self.start_s:
            raise ValueError(f"span end must exceed start: [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class FrameScore:
    p_real: float
    p_fake: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_real <= 1.0 and 0.0 <= self.p_fake <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(self.p_real + self.p_fake - 1.0) > 1e-6:
            raise ValueError("p_real + p_fake must sum to 1")


@dataclass(frozen=True)
class DetectionCounts:
    fake_total: int = 0
    fake_missed: int = 0
    real_total: int = 0
    real_flagged: int = 0
    hyp_insertions_flagged: int = 0

    def __post_init__(self) -> None:
        if min(self.fake_total, self.fake_missed, self.real_total,
               self.real_flagged, self.hyp_insertions_flagged) < 0:
            raise ValueError("counts must be non-negative")
        if self.fake_missed > self.fake_total or self.real_flagged > self.real_total:
            raise ValueError("error counts cannot exceed class totals")

    def __add__(self, other: "DetectionCounts") -> "DetectionCounts":
        return DetectionCounts(
            self.fake_total + other.fake_total,
            self.fake_missed + other.fake_missed,
            self.real_total + other.real_total,
            self.real_flagged + other.real_flagged,
            self.hyp_insertions_flagged + other.hyp_insertions_flagged,
        )


@dataclass(frozen=True)
class WordResult:
    """Outcome for one reference word: its label and whether it was misclassified."""

    ref_index: int
    label: Label
    error: bool
    span: WordSpan | None = None

    @property
    def duration_s(self) -> float:
        if self.span is None:
            raise ValueError("word result carries no span")
        return self.span.duration_s


@dataclass(frozen=True)
class DetectionReport:
    counts: DetectionCounts
    far: float | None
    frr: float | None
    wer: float | None
    by_bucket: dict[int, DetectionCounts] | None = None
    by_group: dict[str, DetectionCounts] | None = None


def word_outcomes(
    ref: TaggedTranscript,
    hyp: TaggedTranscript,
    alignment: Alignment,
    spans: Sequence[WordSpan] | None = None,
) -> tuple[list[WordResult], int]:
    """Walk an alignment and classify every reference word.

    HIT/SUB steps compare labels directly. A deleted fake reference word is
    a miss (no fake flag was produced for it); a deleted real word is not an
    error. Inserted hypothesis words labeled fake are tallied separately and
    never enter FAR/FRR. Returns (per-reference-word outcomes in reference
    order, flagged-insertion count).
    """
    counted = alignment.hits + alignment.subs
    if counted + alignment.dels != len(ref.words) or counted + alignment.ins != len(hyp.words):
        raise AlignmentMismatchError("alignment does not cover the transcripts")
    if spans is not None and len(spans) != len(ref.words):
        raise AlignmentMismatchError("need exactly one span per reference word")

    results: list[WordResult] = []
    insertions_flagged = 0
    for step in alignment.steps:
        if step.op in (EditOp.HIT, EditOp.SUB):
            if step.ref_index >= len(ref.words) or step.hyp_index >= len(hyp.words):
                raise AlignmentMismatchError("alignment index out of range")
            ref_label = ref.words[step.ref_index].label
            hyp_label = hyp.words[step.hyp_index].label
            error = ref_label is not hyp_label
        elif step.op is EditOp.DEL:
            if step.ref_index >= len(ref.words):
                raise AlignmentMismatchError("alignment index out of range")
            ref_label = ref.words[step.ref_index].label
            error = ref_label is Label.FAKE
        else:
            if step.hyp_index >= len(hyp.words):
                raise AlignmentMismatchError("alignment index out of range")
            if hyp.words[step.hyp_index].label is Label.FAKE:
                insertions_flagged += 1
            continue
        span = spans[step.ref_index] if spans is not None else None
        results.append(WordResult(step.ref_index, ref_label, error, span))
    return results, insertions_flagged


def counts_from_results(results: Iterable[WordResult], insertions_flagged: int = 0) -> DetectionCounts:
    fake_total = fake_missed = real_total = real_flagged = 0
    for r in results:
        if r.label is Label.FAKE:
            fake_total += 1
            fake_missed += r.error
        else:
            real_total += 1
            real_flagged += r.error
    return DetectionCounts(fake_total, fake_missed, real_total, real_flagged, insertions_flagged)


def score_detection(
    ref: TaggedTranscript, hyp: TaggedTranscript, alignment: Alignment
) -> DetectionCounts:
    """Detection counts for one utterance given its word alignment."""
    results, insertions_flagged = word_outcomes(ref, hyp, alignment)
    return counts_from_results(results, insertions_flagged)


def far(counts: DetectionCounts) -> float:
    """Fraction of fake reference words classified as real."""
    if counts.fake_total == 0:
        raise EmptyClassError("no fake reference words: FAR undefined")
    return counts.fake_missed / counts.fake_total


def frr(counts: DetectionCounts) -> float:
    """Fraction of real reference words classified as fake."""
    if counts.real_total == 0:
        raise EmptyClassError("no real reference words: FRR undefined")
    return counts.real_flagged / counts.real_total


def _rate_or_none(fn: Callable[[DetectionCounts], float], counts: DetectionCounts) -> float | None:
    try:
        return fn(counts)
    except EmptyClassError:
        return None


def bucket_by_duration(
    results: Iterable[WordResult], edges: Sequence[float] = DEFAULT_BUCKET_EDGES
) -> dict[int, DetectionCounts]:
    """Partition per-word outcomes by word duration.

    Bucket i covers [edges[i], edges[i+1]); the last bucket is open-ended.
    Durations below edges[0] are clamped into bucket 0 so the partition
    always covers every word. Only occupied buckets appear in the result.
    """
    edges = list(edges)
    if not edges or any(b <= a for a, b in zip(edges, edges[1:])):
        raise NonMonotoneEdgesError("edges must be strictly ascending and non-empty")
    grouped: dict[int, list[WordResult]] = {}
    for r in results:
        idx = min(max(bisect_right(edges, r.duration_s) - 1, 0), len(edges) - 1)
        grouped.setdefault(idx, []).append(r)
    return {idx: counts_from_results(rs) for idx, rs in sorted(grouped.items())}


def bucket_label(edges: Sequence[float], index: int) -> str:
    if index + 1 < len(edges):
        return f"{edges[index]:.3f}-{edges[index + 1]:.3f}"
    return f">={edges[index]:.3f}"


def group_counts(
    results: Iterable[WordResult], key: Callable[[WordResult], str | None]
) -> dict[str, DetectionCounts]:
    """Partition per-word outcomes by an arbitrary group key (e.g. language)."""
    grouped: dict[str, list[WordResult]] = {}
    for r in results:
        value = key(r)
        if value is None:
            raise MissingGroupKeyError(f"no group key for reference word {r.ref_index}")
        grouped.setdefault(value, []).append(r)
    return {k: counts_from_results(rs) for k, rs in sorted(grouped.items())}


def build_report(
    counts: DetectionCounts,
    wer: float | None = None,
    by_bucket: dict[int, DetectionCounts] | None = None,
    by_group: dict[str, DetectionCounts] | None = None,
) -> DetectionReport:
    """Assemble a report; rates whose class is empty are left undefined (None)."""
    return DetectionReport(
        counts=counts,
        far=_rate_or_none(far, counts),
        frr=_rate_or_none(frr, counts),
        wer=wer,
        by_bucket=by_bucket,
        by_group=by_group,
    )


def _check_spans(spans: Sequence[WordSpan], total_dur_s: float) -> list[WordSpan]:
    ordered = sorted(spans, key=lambda s: s.start_s)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start_s < prev.end_s - _EPS:
            raise OverlappingSpansError(
                f"spans overlap: [{prev.start_s}, {prev.end_s}) and [{cur.start_s}, {cur.end_s})")
    if ordered and ordered[-1].end_s > total_dur_s + _EPS:
        raise ValueError("span extends past the total duration")
    return ordered


def frame_labels(
    spans: Sequence[WordSpan], total_dur_s: float, hop_s: float = DEFAULT_FRAME_HOP_S
) -> list[Label]:
    """One label per fixed-hop frame covering [0, total_dur_s).

    Frame k covers [k*hop, (k+1)*hop) and is FAKE iff at least half of that
    interval overlaps fake spans; everything outside any span counts as real.
    """
    if hop_s <= 0:
        raise ValueError("hop must be positive")
    ordered = _check_spans(spans, total_dur_s)
    n_frames = max(int(math.ceil(total_dur_s / hop_s - _EPS)), 0)
    fake_overlap = [0.0] * n_frames
    for span in ordered:
        if span.label is not Label.FAKE:
            continue
        k_lo = max(int(span.start_s / hop_s), 0)
        k_hi = min(int(math.ceil(span.end_s / hop_s)), n_frames)
        for k in range(k_lo, k_hi):
            lo = max(span.start_s, k * hop_s)
            hi = min(span.end_s, (k + 1) * hop_s)
            if hi > lo:
                fake_overlap[k] += hi - lo
    half = 0.5 * hop_s
    return [Label.FAKE if overlap >= half - _EPS * hop_s else Label.REAL
            for overlap in fake_overlap]


def pool_frame_scores(
    scores: Sequence[FrameScore], span: WordSpan, hop_s: float = DEFAULT_FRAME_HOP_S
) -> Label:
    """Average frame probabilities over a word span and take a hard decision.

    A frame belongs to the span when its midpoint does. The word is REAL only
    if the mean real probability strictly exceeds the mean fake probability;
    ties resolve to FAKE.
    """
    if hop_s <= 0:
        raise ValueError("hop must be positive")
    k_lo = max(int(math.floor(span.start_s / hop_s - 0.5)), 0)
    k_hi = min(int(math.ceil(span.end_s / hop_s)), len(scores))
    picked = [scores[k] for k in range(k_lo, k_hi)
              if span.start_s <= (k + 0.5) * hop_s < span.end_s]
    if not picked:
        raise NoFramesInSpanError(
            f"no frame midpoint inside [{span.start_s}, {span.end_s}) at hop {hop_s}")
    mean_real = sum(s.p_real for s in picked) / len(picked)
    mean_fake = sum(s.p_fake for s in picked) / len(picked)
    return Label.REAL if mean_real > mean_fake else Label.FAKE


def decisions_from_frames(
    scores: Sequence[FrameScore], spans: Sequence[WordSpan], hop_s: float = DEFAULT_FRAME_HOP_S
) -> tuple[list[Label], int]:
    """Pool a frame-score track into one decision per span.

    Spans too short to contain a frame midpoint default to REAL (the detector
    produced no evidence); their count is returned for reporting.
    """
    labels: list[Label] = []
    unscored = 0
    for span in spans:
        try:
            labels.append(pool_frame_scores(scores, span, hop_s))
        except NoFramesInSpanError:
            labels.append(Label.REAL)
            unscored += 1
    return labels, unscored


def read_frame_scores(path: str | Path) -> dict[str, list[FrameScore]]:
    """Read a `utt_id,frame_index,p_real,p_fake` CSV into per-utterance tracks.

    Frame indices must form a contiguous 0..n-1 range within each utterance.
    """
    per_utt: dict[str, dict[int, FrameScore]] = {}
    with open(path, newline="", encoding="utf-8") as fin:
        reader = csv.reader(fin)
        header = next(reader, None)
        if header != ["utt_id", "frame_index", "p_real", "p_fake"]:
            raise ValueError(f"{path}: expected header utt_id,frame_index,p_real,p_fake")
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: malformed row {row!r}")
            utt_id, idx_s, p_real_s, p_fake_s = row
            frames = per_utt.setdefault(utt_id, {})
            idx = int(idx_s)
            if idx in frames:
                raise ValueError(f"{path}: duplicate frame {idx} for {utt_id!r}")
            frames[idx] = FrameScore(float(p_real_s), float(p_fake_s))
    out: dict[str, list[FrameScore]] = {}
    for utt_id, frames in per_utt.items():
        if sorted(frames) != list(range(len(frames))):
            raise ValueError(f"{path}: non-contiguous frame indices for {utt_id!r}")
        out[utt_id] = [frames[k] for k in range(len(frames))]
    return out


def _pct(rate: float | None) -> str:
    return f"{100.0 * rate:.2f}" if rate is not None else "n/a"


def _counts_row(scope: str, counts: DetectionCounts, wer: float | None) -> list[str]:
    return [
        scope,
        _pct(wer),
        _pct(_rate_or_none(far, counts)),
        _pct(_rate_or_none(frr, counts)),
        f"{counts.fake_missed}/{counts.fake_total}",
        f"{counts.real_flagged}/{counts.real_total}",
        str(counts.hyp_insertions_flagged),
    ]


def format_report(report: DetectionReport, bucket_edges: Sequence[float] | None = None) -> str:
    """Plain-text table: WER/FAR/FRR percentages with raw counts per scope."""
    rows = [["scope", "wer%", "far%", "frr%", "fake miss/total", "real flag/total", "ins flagged"]]
    rows.append(_counts_row("all", report.counts, report.wer))
    if report.by_group:
        for group, counts in report.by_group.items():
            rows.append(_counts_row(group, counts, None))
    if report.by_bucket:
        edges = list(bucket_edges) if bucket_edges is not None else list(DEFAULT_BUCKET_EDGES)
        for idx, counts in report.by_bucket.items():
            rows.append(_counts_row(f"dur {bucket_label(edges, idx)}s", counts, None))
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


_CSV_FIELDS = ["wer_pct", "far_pct", "frr_pct", "fake_total", "fake_missed",
               "real_total", "real_flagged", "hyp_insertions_flagged"]


def _csv_values(counts: DetectionCounts, wer: float | None) -> list[object]:
    far_v = _rate_or_none(far, counts)
    frr_v = _rate_or_none(frr, counts)
    return [
        "" if wer is None else round(100.0 * wer, 6),
        "" if far_v is None else round(100.0 * far_v, 6),
        "" if frr_v is None else round(100.0 * frr_v, 6),
        counts.fake_total, counts.fake_missed,
        counts.real_total, counts.real_flagged, counts.hyp_insertions_flagged,
    ]


def write_report_csv(path: str | Path, report: DetectionReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fout:
        writer = csv.writer(fout)
        writer.writerow(["scope"] + _CSV_FIELDS)
        writer.writerow(["all"] + _csv_values(report.counts, report.wer))


def write_group_csv(path: str | Path, by_group: Mapping[str, DetectionCounts]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fout:
        writer = csv.writer(fout)
        writer.writerow(["group"] + _CSV_FIELDS)
        for group, counts in by_group.items():
            writer.writerow([group] + _csv_values(counts, None))


def write_bucket_csv(
    path: str | Path, by_bucket: Mapping[int, DetectionCounts], edges: Sequence[float]
) -> None:
    edges = list(edges)
    with open(path, "w", newline="", encoding="utf-8") as fout:
        writer = csv.writer(fout)
        writer.writerow(["bucket", "min_duration_s", "max_duration_s"] + _CSV_FIELDS)
        for idx, counts in by_bucket.items():
            hi = edges[idx + 1] if idx + 1 < len(edges) else "inf"
            writer.writerow([idx, edges[idx], hi] + _csv_values(counts, None))
