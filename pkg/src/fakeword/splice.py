"""Replace word-aligned waveform segments using overlap-add crossfades.

The crossfades sit just inside the replaced span: over the first fade
samples the original content fades out while the replacement fades in, and
the roles swap over the last fade samples. Samples outside the spans are
passed through untouched, so replacing a span with its own samples
reproduces the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .audio import SampleRateMismatchError, Waveform
from .metrics import WordSpan

DEFAULT_FADE_S = 0.010


class OverlappingOpsError(ValueError):
    pass


class SpanOutOfRangeError(ValueError):
    pass


@dataclass(frozen=True)
class SpliceOp:
    span: WordSpan
    replacement: Waveform


@dataclass(frozen=True)
class SpliceResult:
    waveform: Waveform
    clipped_samples: int


def crossfade_window(fade_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Complementary linear ramps with fade_out[k] + fade_in[k] == 1 exactly.

    The ramps avoid the 0 and 1 endpoints ((k+1)/(n+1) spacing) so the pure
    samples sit just outside the fade region.
    """
    if fade_len < 0:
        raise ValueError("fade length must be >= 0")
    fade_in = np.arange(1, fade_len + 1, dtype=np.float64) / (fade_len + 1)
    return 1.0 - fade_in, fade_in


def overlap_add_replace(
    src: Waveform, ops: Sequence[SpliceOp], fade_s: float = DEFAULT_FADE_S
) -> SpliceResult:
    """Splice replacement segments into ``src`` with linear crossfades.

    Replacement lengths may differ from their span by at most the fade
    length; larger mismatches are truncated or zero-padded at the tail to
    that bound. Fades shrink automatically when a span or replacement is too
    short to host them (at most half of either). The output is clamped to
    [-1, 1] and the number of clamped samples reported.
    """
    if fade_s < 0:
        raise ValueError("fade must be >= 0")
    sr = src.sample_rate_hz
    fade_len = int(round(fade_s * sr))

    bounds = []
    for op in ops:
        if op.replacement.sample_rate_hz != sr:
            raise SampleRateMismatchError(
                f"replacement at {op.replacement.sample_rate_hz} Hz, source at {sr} Hz")
        start = src.second_to_sample(op.span.start_s)
        end = src.second_to_sample(op.span.end_s)
        if start < 0 or end > len(src) or end <= start:
            raise SpanOutOfRangeError(
                f"span [{op.span.start_s}, {op.span.end_s}]s outside source of "
                f"{src.duration_s:.3f}s")
        bounds.append((start, end, op))
    bounds.sort(key=lambda b: b[0])
    for (_, prev_end, _), (cur_start, _, _) in zip(bounds, bounds[1:]):
        if cur_start < prev_end:
            raise OverlappingOpsError("splice spans overlap")

    source = src.samples
    pieces: list[np.ndarray] = []
    cursor = 0
    for start, end, op in bounds:
        pieces.append(source[cursor:start])
        span_len = end - start
        rep = op.replacement.samples.astype(np.float64)
        lo = max(span_len - fade_len, 1)
        hi = span_len + fade_len
        if len(rep) > hi:
            rep = rep[:hi]
        elif len(rep) < lo:
            rep = np.concatenate([rep, np.zeros(lo - len(rep))])
        fade = min(fade_len, span_len // 2, len(rep) // 2)
        if fade > 0:
            fade_out, fade_in = crossfade_window(fade)
            head = source[start:start + fade].astype(np.float64)
            tail = source[end - fade:end].astype(np.float64)
            rep[:fade] = head * fade_out + rep[:fade] * fade_in
            rep[-fade:] = rep[-fade:] * fade_out + tail * fade_in
        pieces.append(rep.astype(np.float32))
        cursor = end
    pieces.append(source[cursor:])

    out = np.concatenate(pieces) if pieces else source[:0]
    clipped = int(np.count_nonzero((out < -1.0) | (out > 1.0)))
    if clipped:
        out = np.clip(out, -1.0, 1.0)
    return SpliceResult(Waveform(out, sr), clipped)
