"""Determined multichannel audio source separation.

Blind estimation of per-frequency demixing matrices under complex Gaussian
or complex Student's-t source models, with the source spectrogram variances
supplied by pluggable models: an oracle, a low-rank NMF baseline, or a
pretrained fully connected network.  Ships with mixture simulation, WAV I/O,
STFT analysis/synthesis, SI-SDR evaluation, and a CLI.
"""

from .linalg import SingularMatrixError, hermitian_quadratic, log_abs_det, solve
from .metrics import EvalReport, evaluate, si_sdr
from .network import (
    ContextVector,
    MlpNetwork,
    assemble_context,
    forward,
    load_network,
    save_network,
)
from .separation import (
    GAUSS,
    IdlmaConfig,
    IlrmaConfig,
    SeparationResult,
    SeparationState,
    TraceRecord,
    back_project,
    cost,
    cost_gauss,
    cost_t,
    initial_state,
    ip_sweep,
    ip_update,
    run_idlma,
    run_ilrma,
    weighted_covariance,
)
from .signal_io import (
    MixingSpec,
    MultichannelSignal,
    read_wav,
    simulate_mixture,
    write_wav,
)
from .source_models import (
    DnnModel,
    FloorPolicy,
    NmfFactors,
    NmfModel,
    OracleModel,
    estimate_variance,
    nmf_model_update,
    random_nmf_factors,
)
from .stft import ComplexSpectrogram, StftConfig, istft, stft

__version__ = "0.1.0"

__all__ = [
    "GAUSS",
    "ComplexSpectrogram",
    "ContextVector",
    "DnnModel",
    "EvalReport",
    "FloorPolicy",
    "IdlmaConfig",
    "IlrmaConfig",
    "MixingSpec",
    "MlpNetwork",
    "MultichannelSignal",
    "NmfFactors",
    "NmfModel",
    "OracleModel",
    "SeparationResult",
    "SeparationState",
    "SingularMatrixError",
    "StftConfig",
    "TraceRecord",
    "assemble_context",
    "back_project",
    "cost",
    "cost_gauss",
    "cost_t",
    "estimate_variance",
    "evaluate",
    "forward",
    "hermitian_quadratic",
    "initial_state",
    "ip_sweep",
    "ip_update",
    "istft",
    "load_network",
    "log_abs_det",
    "nmf_model_update",
    "random_nmf_factors",
    "read_wav",
    "run_idlma",
    "run_ilrma",
    "save_network",
    "si_sdr",
    "simulate_mixture",
    "solve",
    "stft",
    "weighted_covariance",
    "write_wav",
]
