"""Fully connected variance-estimation networks and their weight container.

The on-disk container ("IDLM1", little-endian, no padding) is the exchange
format between the training side and this package:

    magic  "IDLM1\\0"                       6 bytes
    u32    layer_count
    u32    freq_bins (I)
    u32    context (c)
    f32    delta2
    per layer:
        u32 rows, u32 cols
        rows*cols f32 weights, row-major
        rows f32 biases

Weights are stored in float32 and promoted to float64 for inference, so a
load/save round trip is bit-exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MlpNetwork",
    "ContextVector",
    "WeightFormatError",
    "BadMagicError",
    "DimensionChainError",
    "TruncatedPayloadError",
    "assemble_context",
    "forward",
    "load_network",
    "save_network",
    "payload_checksum",
]

MAGIC = b"IDLM1\x00"


class WeightFormatError(Exception):
    """Base class for malformed weight containers."""


class BadMagicError(WeightFormatError):
    """File does not start with the IDLM1 magic."""


class DimensionChainError(WeightFormatError):
    """Adjacent layer dimensions do not chain, or ends disagree with meta."""


class TruncatedPayloadError(WeightFormatError):
    """File ends before the declared payload does."""


@dataclass
class MlpNetwork:
    """Rectified-linear MLP estimating per-frame source magnitudes.

    ``layers`` is an ordered list of (weights, bias) with weights shaped
    (out, in).  Every layer output, including the last, passes through ReLU,
    so the network output is nonnegative by construction.
    """

    layers: list[tuple[np.ndarray, np.ndarray]]
    freq_bins: int
    context: int
    delta2: float

    def __post_init__(self):
        if not self.layers:
            raise DimensionChainError("network needs at least one layer")
        if self.freq_bins < 1 or self.context < 0 or self.delta2 < 0:
            raise ValueError("invalid network metadata")
        norm = []
        for weights, bias in self.layers:
            weights = np.asarray(weights, dtype=np.float64)
            bias = np.asarray(bias, dtype=np.float64)
            if weights.ndim != 2 or bias.shape != (weights.shape[0],):
                raise DimensionChainError(
                    f"layer shapes {weights.shape} / {bias.shape} are not (out, in) / (out,)"
                )
            norm.append((weights, bias))
        self.layers = norm
        dims = self.layer_dims
        if dims[0] != self.input_dim:
            raise DimensionChainError(
                f"first layer expects {dims[0]} inputs, meta implies {self.input_dim}"
            )
        if dims[-1] != self.freq_bins:
            raise DimensionChainError(
                f"last layer emits {dims[-1]} values, meta implies {self.freq_bins}"
            )
        for k in range(len(self.layers) - 1):
            if self.layers[k][0].shape[0] != self.layers[k + 1][0].shape[1]:
                raise DimensionChainError(
                    f"layer {k} emits {self.layers[k][0].shape[0]} values but "
                    f"layer {k + 1} expects {self.layers[k + 1][0].shape[1]}"
                )

    @property
    def input_dim(self) -> int:
        return self.freq_bins * (2 * self.context + 1)

    @property
    def layer_dims(self) -> list[int]:
        """Dimension chain: input size followed by each layer's output size."""
        return [self.layers[0][0].shape[1]] + [w.shape[0] for w, _ in self.layers]


@dataclass
class ContextVector:
    """Normalized network input assembled around one spectrogram frame."""

    values: np.ndarray
    frame: int
    normalizer: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0.0):
            raise ValueError("context entries must be nonnegative")
        if self.normalizer < 0.0:
            raise ValueError("normalizer must be nonnegative")


def assemble_context(
    magnitudes: np.ndarray, frame: int, context: int, delta2: float
) -> ContextVector:
    """Stack frames at stride-2 offsets -2c..+2c around ``frame`` and normalize.

    Out-of-range offsets contribute zero vectors.  The concatenated vector is
    divided by (its 2-norm + delta2); the divisor is recorded so the network
    output can be rescaled back to the physical magnitude scale.
    """
    mag = np.asarray(magnitudes, dtype=np.float64)
    if mag.ndim != 2:
        raise ValueError(f"magnitudes must be (bins, frames), got {mag.shape}")
    n_bins, n_frames = mag.shape
    if not 0 <= frame < n_frames:
        raise ValueError(f"frame {frame} outside [0, {n_frames})")
    parts = []
    for offset in range(-2 * context, 2 * context + 1, 2):
        j = frame + offset
        if 0 <= j < n_frames:
            parts.append(mag[:, j])
        else:
            parts.append(np.zeros(n_bins))
    stacked = np.concatenate(parts)
    normalizer = float(np.linalg.norm(stacked)) + float(delta2)
    if normalizer > 0.0:
        stacked = stacked / normalizer
    return ContextVector(stacked, frame, normalizer)


def forward(net: MlpNetwork, context: ContextVector) -> np.ndarray:
    """Evaluate the network on one context vector.

    Applies ReLU after every layer and multiplies the output by the recorded
    normalizer, undoing the input scaling.
    """
    v = context.values
    if v.shape != (net.input_dim,):
        raise ValueError(f"input of length {v.shape[0]}, network expects {net.input_dim}")
    for weights, bias in net.layers:
        v = np.maximum(weights @ v + bias, 0.0)
    return v * context.normalizer


def save_network(net: MlpNetwork, path) -> None:
    """Serialize to the IDLM1 container (weights quantized to float32)."""
    buf = bytearray(MAGIC)
    buf += struct.pack("<IIIf", len(net.layers), net.freq_bins, net.context, net.delta2)
    for weights, bias in net.layers:
        rows, cols = weights.shape
        buf += struct.pack("<II", rows, cols)
        buf += weights.astype("<f4").tobytes(order="C")
        buf += bias.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_network(path) -> MlpNetwork:
    """Parse an IDLM1 container and validate the layer-dimension chain."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path} does not carry the IDLM1 magic")
    pos = len(MAGIC)

    def take(count: int) -> bytes:
        nonlocal pos
        if pos + count > len(data):
            raise TruncatedPayloadError(
                f"{path}: truncated payload, needed {count} bytes at offset {pos}"
            )
        chunk = data[pos : pos + count]
        pos += count
        return chunk

    layer_count, freq_bins, context, delta2 = struct.unpack("<IIIf", take(16))
    if layer_count == 0:
        raise DimensionChainError(f"{path}: zero layers")
    layers = []
    for _ in range(layer_count):
        rows, cols = struct.unpack("<II", take(8))
        if rows == 0 or cols == 0:
            raise DimensionChainError(f"{path}: empty layer {rows}x{cols}")
        weights = np.frombuffer(take(4 * rows * cols), dtype="<f4")
        bias = np.frombuffer(take(4 * rows), dtype="<f4")
        layers.append((weights.astype(np.float64).reshape(rows, cols), bias.astype(np.float64)))
    if pos != len(data):
        raise WeightFormatError(f"{path}: {len(data) - pos} trailing bytes after payload")
    return MlpNetwork(layers, freq_bins=freq_bins, context=context, delta2=float(delta2))


def payload_checksum(path) -> str:
    """CRC32 (hex) of everything after the magic; platform-independent."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path} does not carry the IDLM1 magic")
    return f"{zlib.crc32(data[len(MAGIC):]) & 0xFFFFFFFF:08x}"
