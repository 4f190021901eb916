"""Short-time Fourier analysis and weighted overlap-add synthesis.

Analysis uses a periodic Hamming window and a one-sided spectrum.  Synthesis
applies the same window and divides by the accumulated squared window, so the
analysis/synthesis pair reconstructs any real signal exactly (up to float
round-off) wherever the squared-window sum is bounded away from zero, which
for a Hamming window is everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StftConfig",
    "ComplexSpectrogram",
    "hamming_window",
    "frame_count",
    "stft",
    "istft",
]

# Floor for the squared-window normalization in overlap-add synthesis.
WOLA_FLOOR = 1e-10


class SignalTooShortError(ValueError):
    """Input shorter than one analysis window."""


def hamming_window(length: int) -> np.ndarray:
    """Periodic Hamming window of the given length."""
    k = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / length)


@dataclass(frozen=True)
class StftConfig:
    """Analysis configuration: window length and hop, both in samples.

    The window itself is fixed to periodic Hamming.
    """

    window_len: int
    hop: int

    def __post_init__(self):
        if self.window_len <= 0 or self.window_len % 2 != 0:
            raise ValueError(f"window_len must be positive and even, got {self.window_len}")
        if not 0 < self.hop <= self.window_len:
            raise ValueError(f"hop must satisfy 0 < hop <= window_len, got {self.hop}")

    @classmethod
    def from_milliseconds(cls, window_ms: float, hop_ms: float, sample_rate: int) -> "StftConfig":
        """Convert millisecond lengths at a sample rate, rounding each to the
        nearest even sample count."""

        def even_samples(ms: float) -> int:
            return max(2, int(round(ms * sample_rate / 2000.0)) * 2)

        return cls(window_len=even_samples(window_ms), hop=even_samples(hop_ms))

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    @property
    def window(self) -> np.ndarray:
        return hamming_window(self.window_len)


@dataclass
class ComplexSpectrogram:
    """One-sided complex spectrogram: (n_bins, n_frames) with its config."""

    values: np.ndarray
    config: StftConfig = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim != 2:
            raise ValueError(f"spectrogram must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] != self.config.n_bins:
            raise ValueError(
                f"bin count {self.values.shape[0]} does not match "
                f"window_len {self.config.window_len}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrogram contains non-finite values")

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def frame_count(n_samples: int, config: StftConfig) -> int:
    """Number of analysis frames for a signal of the given length."""
    if n_samples < config.window_len:
        raise SignalTooShortError(
            f"signal of {n_samples} samples is shorter than the "
            f"{config.window_len}-sample analysis window"
        )
    return math.ceil((n_samples - config.window_len) / config.hop) + 1


def stft(samples: np.ndarray, config: StftConfig) -> ComplexSpectrogram:
    """Forward transform of a single-channel signal.

    Frame ``j`` covers samples ``[j*hop, j*hop + window_len)``; the final
    frame is zero-padded past the end of the signal.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a single-channel 1-D signal, got shape {x.shape}")
    n_frames = frame_count(x.shape[0], config)
    total = (n_frames - 1) * config.hop + config.window_len
    padded = np.zeros(total)
    padded[: x.shape[0]] = x
    idx = config.hop * np.arange(n_frames)[:, None] + np.arange(config.window_len)[None, :]
    frames = padded[idx] * config.window[None, :]
    return ComplexSpectrogram(np.fft.rfft(frames, axis=1).T, config)


def istft(spec: ComplexSpectrogram, out_length: int) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`.

    Args:
        spec: one-sided spectrogram consistent with its config.
        out_length: number of samples to return; must not exceed the span
            covered by the frames.

    Returns:
        Real signal of ``out_length`` samples.
    """
    config = spec.config
    n_frames = spec.n_frames
    total = (n_frames - 1) * config.hop + config.window_len
    if not 0 < out_length <= total:
        raise ValueError(
            f"out_length {out_length} outside the {total}-sample span of the spectrogram"
        )
    frames = np.fft.irfft(spec.values.T, n=config.window_len, axis=1)
    window = config.window
    acc = np.zeros(total)
    norm = np.zeros(total)
    for j in range(n_frames):
        start = j * config.hop
        acc[start : start + config.window_len] += frames[j] * window
        norm[start : start + config.window_len] += window**2
    return (acc / np.maximum(norm, WOLA_FLOOR))[:out_length]
