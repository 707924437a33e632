"""Training-free, language-queried audio source separation.

Separation works by optimizing a sigmoid-parameterized magnitude mask so
the masked mixture's mel spectrogram matches reference mels for the
query, then resynthesizing with the mixture's own phase. References can
come from a file, from the true target (oracle, for testing), or from an
external generator process.
"""

from .audio_io import load_waveform, save_waveform
from .dsp import (
    ComplexSpectrogram,
    MagnitudeSpectrogram,
    MelConfig,
    MelFilterbank,
    MelSpectrogram,
    PhaseSpectrogram,
    StftConfig,
    Waveform,
    apply_mel,
    build_mel_filterbank,
    istft,
    magphase,
    pad_and_normalize,
    stft,
)
from .errors import (
    ConfigError,
    ContractError,
    CorruptionError,
    DgmoError,
    FormatError,
    OptimizationError,
    VersionError,
)
from .masking import (
    Mask,
    OptimizerConfig,
    ReferenceSet,
    SeparationResult,
    apply_mask_reconstruct,
    dgmo_grad,
    dgmo_loss,
    init_mask,
    optimize_mask,
)
from .metrics import evaluate, sdr, sdri, si_sdr, strip_padding
from .mixkit import MixtureSpec, clip_normalize, mix_at_snr, synth_source
from .providers import ExecRefProvider, FileRefProvider, OracleRefProvider
from .refio import oracle_refs, read_mask, read_refset, write_mask, write_refset

__version__ = "0.1.0"

__all__ = [
    "ComplexSpectrogram",
    "ConfigError",
    "ContractError",
    "CorruptionError",
    "DgmoError",
    "ExecRefProvider",
    "FileRefProvider",
    "FormatError",
    "MagnitudeSpectrogram",
    "Mask",
    "MelConfig",
    "MelFilterbank",
    "MelSpectrogram",
    "MixtureSpec",
    "OptimizationError",
    "OptimizerConfig",
    "OracleRefProvider",
    "PhaseSpectrogram",
    "ReferenceSet",
    "SeparationResult",
    "StftConfig",
    "VersionError",
    "Waveform",
    "apply_mask_reconstruct",
    "apply_mel",
    "build_mel_filterbank",
    "clip_normalize",
    "dgmo_grad",
    "dgmo_loss",
    "evaluate",
    "init_mask",
    "istft",
    "load_waveform",
    "magphase",
    "mix_at_snr",
    "optimize_mask",
    "oracle_refs",
    "pad_and_normalize",
    "read_mask",
    "read_refset",
    "save_waveform",
    "sdr",
    "sdri",
    "si_sdr",
    "stft",
    "strip_padding",
    "synth_source",
    "write_mask",
    "write_refset",
]
