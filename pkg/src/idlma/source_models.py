"""Pluggable source-spectrogram models producing the variance matrix.

A source model maps the current estimate of one source's complex spectrogram
to a nonnegative (bins, frames) magnitude matrix; :func:`estimate_variance`
floors that output elementwise and the result drives the demixing updates.
Three models ship here: an oracle backed by a reference spectrogram, a
low-rank NMF model with multiplicative updates (the blind baseline), and a
pretrained fully connected network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .network import MlpNetwork, assemble_context, forward
from .stft import ComplexSpectrogram

__all__ = [
    "FloorPolicy",
    "SourceModel",
    "OracleModel",
    "NmfFactors",
    "NmfModel",
    "DnnModel",
    "UnsupportedDomainError",
    "estimate_variance",
    "random_nmf_factors",
    "nmf_model_update",
]

# Factor floor keeping NMF parameters strictly positive.
NMF_FLOOR = 1e-12

# Absolute guard under the relative floor rule, so sigma stays positive even
# for an all-zero model output.
FLOOR_GUARD = 1e-12


class UnsupportedDomainError(ValueError):
    """NMF update requested for a domain power it is not derived for."""


@dataclass(frozen=True)
class FloorPolicy:
    """Lower clamp for the variance matrix.

    mode "fixed": clamp at ``value``.
    mode "relative": clamp at ``value`` times the mean of the model's
    pre-floor output (0.1 is the conventional coefficient).
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("fixed", "relative"):
            raise ValueError(f"unknown floor mode {self.mode!r}")
        if self.value < 0.0:
            raise ValueError(f"floor value must be nonnegative, got {self.value}")

    @classmethod
    def fixed(cls, value: float) -> "FloorPolicy":
        return cls("fixed", value)

    @classmethod
    def relative(cls, coefficient: float = 0.1) -> "FloorPolicy":
        return cls("relative", coefficient)

    def floor_value(self, pre_floor: np.ndarray) -> float:
        if self.mode == "fixed":
            eps = self.value
        else:
            eps = self.value * float(np.mean(pre_floor))
        return max(eps, FLOOR_GUARD)

    def apply(self, pre_floor: np.ndarray) -> np.ndarray:
        return np.maximum(pre_floor, self.floor_value(pre_floor))


class SourceModel(Protocol):
    """Anything that turns a source estimate into pre-floor magnitudes."""

    def infer(self, estimate: ComplexSpectrogram) -> np.ndarray: ...


def estimate_variance(
    model: SourceModel, estimate: ComplexSpectrogram, floor: FloorPolicy
) -> np.ndarray:
    """Run a source model and floor its output elementwise.

    Returns the (bins, frames) variance matrix in the amplitude domain; the
    cost functions square it on use.
    """
    pre = np.asarray(model.infer(estimate), dtype=np.float64)
    if pre.shape != estimate.values.shape:
        raise ValueError(
            f"model produced shape {pre.shape} for a spectrogram of "
            f"shape {estimate.values.shape}"
        )
    if not np.all(np.isfinite(pre)) or np.any(pre < 0.0):
        raise ValueError("model output must be finite and nonnegative")
    return floor.apply(pre)


@dataclass
class OracleModel:
    """Ideal variances: the magnitude of a known reference spectrogram."""

    reference: ComplexSpectrogram

    def infer(self, estimate: ComplexSpectrogram) -> np.ndarray:
        if self.reference.values.shape != estimate.values.shape:
            raise ValueError(
                f"reference shape {self.reference.values.shape} does not match "
                f"estimate shape {estimate.values.shape}"
            )
        return np.abs(self.reference.values)


@dataclass
class NmfFactors:
    """Nonnegative low-rank factors: sigma^p = basis @ activation.

    basis is (bins, K), activation is (K, frames); the domain power p is 1
    or 2.  Entries stay strictly positive (floored at 1e-12).
    """

    basis: np.ndarray
    activation: np.ndarray
    domain_power: int = 2

    def __post_init__(self):
        self.basis = np.maximum(np.asarray(self.basis, dtype=np.float64), NMF_FLOOR)
        self.activation = np.maximum(np.asarray(self.activation, dtype=np.float64), NMF_FLOOR)
        if self.basis.ndim != 2 or self.activation.ndim != 2:
            raise ValueError("factors must be 2-D")
        if self.basis.shape[1] != self.activation.shape[0]:
            raise ValueError(
                f"basis {self.basis.shape} and activation {self.activation.shape} "
                "disagree on the basis count"
            )
        if self.domain_power not in (1, 2):
            raise UnsupportedDomainError(f"domain power must be 1 or 2, got {self.domain_power}")

    @property
    def n_basis(self) -> int:
        return self.basis.shape[1]

    def low_rank_model(self) -> np.ndarray:
        """sigma^p, reconstructed from the factors."""
        return self.basis @ self.activation


def random_nmf_factors(
    n_bins: int, n_frames: int, n_basis: int, rng: np.random.Generator, domain_power: int = 2
) -> NmfFactors:
    """Uniform (0, 1] initialization, reproducible from the caller's rng."""
    return NmfFactors(
        basis=1.0 - rng.random((n_bins, n_basis)),
        activation=1.0 - rng.random((n_basis, n_frames)),
        domain_power=domain_power,
    )


def nmf_model_update(factors: NmfFactors, estimate: ComplexSpectrogram) -> NmfFactors:
    """One multiplicative-update pass fitting sigma^2 = TV to |Y|^2.

    Basis then activation, each followed by a model recomputation; only the
    Gaussian (domain power 2) parameterization is supported.  Each update
    multiplies by sqrt(sum_j |y|^2 v sigma^-4 / sum_j v sigma^-2) and the
    symmetric expression for the activations, which never increases the
    Itakura-Saito divergence between |Y|^2 and TV.
    """
    if factors.domain_power != 2:
        raise UnsupportedDomainError(
            f"multiplicative updates require domain power 2, got {factors.domain_power}"
        )
    power = np.abs(estimate.values) ** 2
    if power.shape != (factors.basis.shape[0], factors.activation.shape[1]):
        raise ValueError(
            f"spectrogram shape {power.shape} does not match factors "
            f"({factors.basis.shape[0]}, {factors.activation.shape[1]})"
        )
    basis = factors.basis.copy()
    activation = factors.activation.copy()

    model = basis @ activation
    basis *= np.sqrt(
        ((power / model**2) @ activation.T) / ((1.0 / model) @ activation.T)
    )
    basis = np.maximum(basis, NMF_FLOOR)
    model = basis @ activation
    activation *= np.sqrt(
        (basis.T @ (power / model**2)) / (basis.T @ (1.0 / model))
    )
    activation = np.maximum(activation, NMF_FLOOR)
    return NmfFactors(basis, activation, factors.domain_power)


@dataclass
class NmfModel:
    """Low-rank source model; ``update`` advances the factors by one pass."""

    factors: NmfFactors

    def infer(self, estimate: ComplexSpectrogram) -> np.ndarray:
        model = self.factors.low_rank_model()
        if model.shape != estimate.values.shape:
            raise ValueError(
                f"factors model shape {model.shape} does not match "
                f"estimate shape {estimate.values.shape}"
            )
        return model ** (1.0 / self.factors.domain_power)

    def update(self, estimate: ComplexSpectrogram) -> None:
        self.factors = nmf_model_update(self.factors, estimate)


@dataclass
class DnnModel:
    """Network-backed model: per-frame context vectors through the MLP."""

    network: MlpNetwork

    def infer(self, estimate: ComplexSpectrogram) -> np.ndarray:
        mag = np.abs(estimate.values)
        if mag.shape[0] != self.network.freq_bins:
            raise ValueError(
                f"network expects {self.network.freq_bins} bins, "
                f"spectrogram has {mag.shape[0]}"
            )
        out = np.empty_like(mag)
        for j in range(mag.shape[1]):
            ctx = assemble_context(mag, j, self.network.context, self.network.delta2)
            out[:, j] = forward(self.network, ctx)
        return out
