"""Multichannel WAV input/output and determined mixture synthesis.

WAV support covers exactly the two encodings used throughout: 16-bit PCM and
32-bit IEEE float, little-endian, interleaved.  The reader and writer are
self-contained so that malformed files map onto a precise error taxonomy
(unreadable vs. unsupported encoding) instead of whatever a general-purpose
parser happens to raise.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MultichannelSignal",
    "MixingSpec",
    "UnreadableFileError",
    "UnsupportedEncodingError",
    "ClippingWarning",
    "read_wav",
    "write_wav",
    "simulate_mixture",
    "load_mixing_spec",
]

PCM16_SCALE = 32768.0

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3


class UnreadableFileError(Exception):
    """File is missing, truncated, or not a RIFF/WAVE container."""


class UnsupportedEncodingError(Exception):
    """Valid WAV container with an encoding outside PCM16 / float32."""


class ClippingWarning(UserWarning):
    """Samples outside [-1, 1] were saturated on write."""


@dataclass
class MultichannelSignal:
    """Time-domain signal: (channels, samples) float amplitudes at a rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be (channels, length), got {self.samples.shape}")
        if self.samples.shape[0] < 1:
            raise ValueError("at least one channel required")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]


@dataclass
class MixingSpec:
    """Instantaneous gain matrix or bank of impulse responses, M x N.

    Exactly one of ``gains`` (M, N) and ``impulse_responses`` (M, N, taps) is
    set.  Entries are real: a time-domain mixture must stay real-valued.
    """

    gains: np.ndarray | None = None
    impulse_responses: np.ndarray | None = None

    def __post_init__(self):
        if (self.gains is None) == (self.impulse_responses is None):
            raise ValueError("specify exactly one of gains / impulse_responses")
        if self.gains is not None:
            self.gains = self._real_array(self.gains, 2, "gains")
            rows = self.gains
        else:
            self.impulse_responses = self._real_array(
                self.impulse_responses, 3, "impulse_responses"
            )
            rows = self.impulse_responses.reshape(self.impulse_responses.shape[0], -1)
        if not np.all(np.any(rows != 0.0, axis=1)):
            raise ValueError("every output channel needs at least one nonzero entry")

    @staticmethod
    def _real_array(values, ndim: int, name: str) -> np.ndarray:
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            if np.any(arr.imag != 0.0):
                raise ValueError(f"{name} must be real for time-domain mixing")
            arr = arr.real
        arr = arr.astype(np.float64)
        if arr.ndim != ndim:
            raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
        return arr

    @classmethod
    def instantaneous(cls, gains) -> "MixingSpec":
        return cls(gains=gains)

    @classmethod
    def convolutive(cls, impulse_responses) -> "MixingSpec":
        return cls(impulse_responses=impulse_responses)

    @property
    def n_channels(self) -> int:
        arr = self.gains if self.gains is not None else self.impulse_responses
        return arr.shape[0]

    @property
    def n_sources(self) -> int:
        arr = self.gains if self.gains is not None else self.impulse_responses
        return arr.shape[1]

    def describe(self) -> dict:
        """JSON-ready description, mirroring the on-disk spec format."""
        if self.gains is not None:
            return {"type": "gain", "rows": self.gains.tolist()}
        return {"type": "rir", "rows": self.impulse_responses.tolist()}


def read_wav(path) -> MultichannelSignal:
    """Read a PCM16 or float32 WAV file.

    PCM amplitudes are scaled by 1/32768 so both encodings land in [-1, 1].

    Raises:
        UnreadableFileError: missing file, truncated header or payload, or
            not a RIFF/WAVE container.
        UnsupportedEncodingError: any sample format other than 16-bit PCM or
            32-bit IEEE float.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as err:
        raise UnreadableFileError(f"cannot read {path}: {err}") from err
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnreadableFileError(f"{path} is not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_len,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_len]
        if chunk_id == b"fmt ":
            if chunk_len < 16 or len(body) < 16:
                raise UnreadableFileError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_len:
                raise UnreadableFileError(f"{path}: truncated data chunk")
            payload = body
        pos += 8 + chunk_len + (chunk_len & 1)

    if fmt is None or payload is None:
        raise UnreadableFileError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if channels < 1:
        raise UnreadableFileError(f"{path}: channel count {channels}")

    if audio_format == _FMT_PCM and bits == 16:
        dtype, scale = "<i2", 1.0 / PCM16_SCALE
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        dtype, scale = "<f4", 1.0
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {audio_format} with {bits} bits is not "
            "PCM16 or IEEE float32"
        )

    frame_bytes = channels * (bits // 8)
    n_frames = len(payload) // frame_bytes
    if n_frames < 1:
        raise UnreadableFileError(f"{path}: empty data chunk")
    flat = np.frombuffer(payload[: n_frames * frame_bytes], dtype=dtype)
    samples = flat.reshape(n_frames, channels).T.astype(np.float64) * scale
    return MultichannelSignal(samples, sample_rate)


def write_wav(path, signal: MultichannelSignal, encoding: str = "float32") -> int:
    """Write a WAV file; amplitudes beyond [-1, 1] saturate.

    Args:
        encoding: "pcm16" or "float32".

    Returns:
        The number of saturated samples (also reported via
        :class:`ClippingWarning` when nonzero).
    """
    if encoding not in ("pcm16", "float32"):
        raise ValueError(f"unknown encoding {encoding!r}")
    samples = signal.samples
    if not np.all(np.isfinite(samples)):
        raise ValueError("cannot write non-finite amplitudes")
    clipped_count = int(np.count_nonzero(np.abs(samples) > 1.0))
    if clipped_count:
        warnings.warn(f"{clipped_count} samples clipped to [-1, 1]", ClippingWarning)
    clipped = np.clip(samples, -1.0, 1.0)

    if encoding == "pcm16":
        ints = np.clip(np.round(clipped * PCM16_SCALE), -32768, 32767)
        payload = ints.astype("<i2").T.tobytes()
        fmt_tag, bits = _FMT_PCM, 16
    else:
        payload = clipped.astype("<f4").T.tobytes()
        fmt_tag, bits = _FMT_IEEE_FLOAT, 32

    channels = signal.channels
    block_align = channels * bits // 8
    byte_rate = signal.sample_rate * block_align
    fmt_chunk = struct.pack(
        "<HHIIHH", fmt_tag, channels, signal.sample_rate, byte_rate, block_align, bits
    )
    if fmt_tag == _FMT_IEEE_FLOAT:
        fmt_chunk += struct.pack("<H", 0)  # cbSize
        fact = b"fact" + struct.pack("<II", 4, signal.length)
    else:
        fact = b""
    chunks = b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    chunks += fact
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    blob = b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks
    Path(path).write_bytes(blob)
    return clipped_count


def simulate_mixture(sources, spec: MixingSpec) -> MultichannelSignal:
    """Mix single-channel sources into a determined multichannel observation.

    Instantaneous case: channel m = sum_n gains[m, n] * source_n.
    Convolutive case: channel m = sum_n (rir[m, n] * source_n), with the
    convolution trimmed to the source length so the mixture stays aligned
    with the references.
    """
    if len(sources) != spec.n_sources:
        raise ValueError(f"{len(sources)} sources for an {spec.n_sources}-source spec")
    rates = {s.sample_rate for s in sources}
    if len(rates) != 1:
        raise ValueError(f"sources disagree on sample rate: {sorted(rates)}")
    lengths = {s.length for s in sources}
    if len(lengths) != 1:
        raise ValueError(f"sources disagree on length: {sorted(lengths)}")
    for s in sources:
        if s.channels != 1:
            raise ValueError("each source must be single-channel")
    length = lengths.pop()
    stacked = np.vstack([s.samples[0] for s in sources])

    if spec.gains is not None:
        mixed = spec.gains @ stacked
    else:
        rirs = spec.impulse_responses
        mixed = np.zeros((spec.n_channels, length))
        for m in range(spec.n_channels):
            for n in range(spec.n_sources):
                mixed[m] += np.convolve(stacked[n], rirs[m, n])[:length]
    return MultichannelSignal(mixed, rates.pop())


def load_mixing_spec(path) -> MixingSpec:
    """Parse the on-disk mixing description: {"type": "gain"|"rir", "rows": ...}.

    ``rows`` is an M x N matrix for "gain" and an M x N x taps array for "rir".
    """
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as err:
        raise UnreadableFileError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: invalid mixing spec: {err}") from err
    if not isinstance(doc, dict) or "type" not in doc or "rows" not in doc:
        raise ValueError(f"{path}: mixing spec needs 'type' and 'rows'")
    kind = doc["type"]
    rows = np.asarray(doc["rows"], dtype=np.float64)
    if kind == "gain":
        return MixingSpec.instantaneous(rows)
    if kind == "rir":
        return MixingSpec.convolutive(rows)
    raise ValueError(f"{path}: unknown mixing type {kind!r}")
