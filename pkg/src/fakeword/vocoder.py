"""Signal-processing copy-synthesis: STFT analysis, Griffin-Lim phase
reconstruction, and waveform resynthesis.

Analysis is centered with reflection padding; synthesis uses weighted
overlap-add with window-squared normalization (the least-squares inverse),
which makes the classic Griffin-Lim distance non-increasing over iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import DEFAULT_SAMPLE_RATE, Waveform


class TooShortError(ValueError):
    """Waveform shorter than one analysis window."""


class InconsistentShapeError(ValueError):
    pass


@dataclass(frozen=True)
class StftConfig:
    """Analysis geometry: power-of-two FFT size, hop of at most n_fft/2,
    periodic Hann window."""

    n_fft: int = 1024
    hop: int = 256

    def __post_init__(self) -> None:
        if self.n_fft < 16 or self.n_fft & (self.n_fft - 1):
            raise ValueError("n_fft must be a power of two >= 16")
        if not 1 <= self.hop <= self.n_fft // 2:
            raise ValueError("hop must satisfy 1 <= hop <= n_fft/2")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def pad(self) -> int:
        return self.n_fft // 2

    def n_frames(self, n_samples: int) -> int:
        return -(-n_samples // self.hop)

    def window(self) -> np.ndarray:
        return _hann_periodic(self.n_fft)


@lru_cache(maxsize=8)
def _hann_periodic(n_fft: int) -> np.ndarray:
    k = np.arange(n_fft)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n_fft))


@dataclass(frozen=True)
class Spectrogram:
    """Frame-major non-negative magnitude matrix plus its analysis geometry."""

    frames: np.ndarray
    config: StftConfig

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.config.n_bins:
            raise InconsistentShapeError(
                f"expected (n_frames, {self.config.n_bins}), got {frames.shape}")
        if not np.all(np.isfinite(frames)) or np.any(frames < 0):
            raise ValueError("magnitudes must be finite and non-negative")
        object.__setattr__(self, "frames", frames)


def _analysis(padded: np.ndarray, cfg: StftConfig, n_frames: int) -> np.ndarray:
    """Windowed frames of an already-padded signal -> (n_frames, n_bins)."""
    windows = np.lib.stride_tricks.sliding_window_view(padded, cfg.n_fft)[::cfg.hop]
    return np.fft.rfft(windows[:n_frames] * cfg.window(), axis=1)


def _synthesis(spec: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Least-squares inverse of _analysis, back onto the padded domain."""
    n_frames = spec.shape[0]
    window = cfg.window()
    frames = np.fft.irfft(spec, cfg.n_fft, axis=1) * window
    total = (n_frames - 1) * cfg.hop + cfg.n_fft
    signal = np.zeros(total)
    weight = np.zeros(total)
    wsq = window * window
    for t in range(n_frames):
        lo = t * cfg.hop
        signal[lo:lo + cfg.n_fft] += frames[t]
        weight[lo:lo + cfg.n_fft] += wsq
    safe = weight > 1e-11
    signal[safe] /= weight[safe]
    signal[~safe] = 0.0
    return signal


def stft(waveform: Waveform, cfg: StftConfig | None = None) -> np.ndarray:
    """Complex spectrogram (n_frames, n_bins), centered, reflection-padded.

    n_frames = ceil(len / hop); frame t is centered on sample t*hop.
    """
    cfg = cfg or StftConfig()
    x = waveform.samples.astype(np.float64)
    if len(x) < cfg.n_fft:
        raise TooShortError(f"need at least {cfg.n_fft} samples, got {len(x)}")
    padded = np.pad(x, cfg.pad, mode="reflect")
    return _analysis(padded, cfg, cfg.n_frames(len(x)))


def istft(
    spec: np.ndarray,
    cfg: StftConfig | None = None,
    length: int | None = None,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
) -> Waveform:
    """Weighted overlap-add synthesis with window-squared normalization.

    Defaults to n_frames*hop output samples; pass ``length`` to recover the
    exact analysis length.
    """
    cfg = cfg or StftConfig()
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.n_bins:
        raise InconsistentShapeError(f"expected (n_frames, {cfg.n_bins}), got {spec.shape}")
    full = _synthesis(spec, cfg)
    target = spec.shape[0] * cfg.hop if length is None else length
    out = full[cfg.pad:cfg.pad + target]
    if len(out) < target:
        out = np.concatenate([out, np.zeros(target - len(out))])
    return Waveform(out.astype(np.float32), sample_rate_hz)


def spectral_convergence(candidate_mag: np.ndarray, target_mag: np.ndarray) -> float:
    """Normalized Frobenius distance between two magnitude spectrograms."""
    target_norm = float(np.linalg.norm(target_mag))
    if target_norm == 0.0:
        return 0.0 if float(np.linalg.norm(candidate_mag)) == 0.0 else float("inf")
    return float(np.linalg.norm(np.asarray(candidate_mag) - np.asarray(target_mag)) / target_norm)


def griffin_lim(
    mag: Spectrogram,
    iters: int = 60,
    seed: int | None = None,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
    callback=None,
) -> Waveform:
    """Iterative phase reconstruction from a magnitude spectrogram.

    Alternates signal projection (least-squares synthesis) and magnitude
    projection. Phase starts at zero, or uniformly random when ``seed`` is
    given. ``callback(iteration, distance)`` receives the spectral
    convergence after each signal projection; the sequence is non-increasing.
    Output length is n_frames*hop samples.
    """
    if iters < 1:
        raise ValueError("need at least one iteration")
    cfg = mag.config
    target = mag.frames
    if seed is None:
        spec = target.astype(np.complex128)
    else:
        rng = np.random.default_rng(seed)
        spec = target * np.exp(2j * np.pi * rng.random(target.shape))
    signal = np.zeros(0)
    for iteration in range(1, iters + 1):
        signal = _synthesis(spec, cfg)
        estimate = _analysis(signal, cfg, target.shape[0])
        if callback is not None:
            callback(iteration, spectral_convergence(np.abs(estimate), target))
        magnitude = np.abs(estimate)
        phase = np.ones_like(estimate)
        safe = magnitude > 1e-16
        phase[safe] = estimate[safe] / magnitude[safe]
        spec = target * phase
    out = signal[cfg.pad:cfg.pad + target.shape[0] * cfg.hop]
    return Waveform(out.astype(np.float32), sample_rate_hz)


def copy_synth(
    waveform: Waveform,
    cfg: StftConfig | None = None,
    iters: int = 60,
    seed: int | None = None,
    use_mel: bool = False,
    n_mels: int = 80,
) -> Waveform:
    """Analysis-resynthesis through the magnitude spectrogram and Griffin-Lim.

    Content is preserved while the phase is re-estimated, which imprints the
    reconstruction artifacts. With ``use_mel`` the magnitudes pass through an
    n_mels-band mel compression and its pseudo-inverse first (lossier).
    Output is trimmed to the input length and peak-normalized to the input
    peak. Deterministic for fixed arguments.
    """
    cfg = cfg or StftConfig()
    mag = np.abs(stft(waveform, cfg))
    if use_mel:
        fb = mel_filterbank(waveform.sample_rate_hz, cfg.n_fft, n_mels)
        mel = mag @ fb.T
        mag = np.clip(mel @ np.linalg.pinv(fb).T, 0.0, None)
    out = griffin_lim(Spectrogram(mag, cfg), iters=iters, seed=seed,
                      sample_rate_hz=waveform.sample_rate_hz)
    samples = out.samples[:len(waveform)].astype(np.float64)
    if len(samples) < len(waveform):
        samples = np.concatenate([samples, np.zeros(len(waveform) - len(samples))])
    in_peak = float(np.max(np.abs(waveform.samples))) if len(waveform) else 0.0
    out_peak = float(np.max(np.abs(samples))) if len(samples) else 0.0
    if in_peak > 0.0 and out_peak > 0.0:
        samples *= in_peak / out_peak
    return Waveform(samples.astype(np.float32), waveform.sample_rate_hz)


def mel_filterbank(
    sample_rate_hz: int, n_fft: int, n_mels: int, fmin: float = 0.0, fmax: float | None = None
) -> np.ndarray:
    """Triangular mel filterbank (n_mels, n_fft//2+1), HTK mel scale."""
    if fmax is None:
        fmax = sample_rate_hz / 2.0

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    fft_freqs = np.arange(n_bins) * sample_rate_hz / n_fft
    mel_pts = from_mel(np.linspace(to_mel(fmin), to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for i in range(n_mels):
        left, center, right = mel_pts[i], mel_pts[i + 1], mel_pts[i + 2]
        up = (fft_freqs - left) / max(center - left, 1e-12)
        down = (right - fft_freqs) / max(right - center, 1e-12)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb
