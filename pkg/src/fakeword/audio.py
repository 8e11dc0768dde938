"""Mono waveform container and RIFF/WAVE file I/O (16-bit PCM or 32-bit float)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

DEFAULT_SAMPLE_RATE = 16_000


class SampleRateMismatchError(ValueError):
    pass


class UnsupportedWavFormatError(ValueError):
    """Only mono 16-bit PCM and 32-bit float WAV files are handled."""


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono float32 sample buffer.

    Amplitudes are expected to stay in [-1, 1]. Finiteness is enforced here;
    the range is enforced where it matters (file output and splicing clamp
    out-of-range samples and count them).
    """

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise ValueError("waveform must be one-dimensional (mono)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains NaN or Inf")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def second_to_sample(self, t_s: float) -> int:
        return int(round(t_s * self.sample_rate_hz))


def read_wav(path: str | Path, expected_rate: int | None = None) -> Waveform:
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise UnsupportedWavFormatError(f"{path}: mono audio required")
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        samples = data
    else:
        raise UnsupportedWavFormatError(f"{path}: unsupported sample format {data.dtype}")
    if expected_rate is not None and rate != expected_rate:
        raise SampleRateMismatchError(f"{path}: {rate} Hz, expected {expected_rate} Hz")
    return Waveform(samples, rate)


def write_wav(path: str | Path, waveform: Waveform, pcm16: bool = False) -> None:
    """Write float32 by default (lossless for Waveform); pcm16 clamps and quantizes."""
    if pcm16:
        clipped = np.clip(waveform.samples, -1.0, 1.0)
        data = np.round(clipped * 32767.0).astype(np.int16)
    else:
        data = waveform.samples
    wavfile.write(path, waveform.sample_rate_hz, data)
