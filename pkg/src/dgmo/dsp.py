"""Deterministic signal-processing kernel.

Waveform containers, STFT/iSTFT with exact phase-preserving inversion,
and triangular mel filterbanks. Everything here is a pure function of its
inputs; filterbanks are immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_DURATION_S = 10.24

_MEL_SCALES = ("htk", "slaney")
_FILTER_NORMS = ("none", "slaney_area")
_LOSS_DOMAINS = ("linear", "log")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class Waveform:
    """Mono PCM signal.

    Attributes:
        samples: 1-D float array, nominal range [-1, 1].
        sample_rate: sampling frequency in Hz.
        gain_applied: cumulative scale factor recorded by normalization
            steps (1.0 if none). Dividing samples by this recovers the
            original recording level.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE
    gain_applied: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ConfigError(f"waveform must be mono 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.gain_applied <= 0:
            raise ConfigError(f"gain_applied must be positive, got {self.gain_applied}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ConfigError("waveform contains NaN or Inf samples")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis framing parameters.

    The window (length ``win_length``) is zero-padded symmetrically to
    ``fft_size`` before transforming. With ``center=True`` the signal is
    reflect-padded by ``fft_size // 2`` so frame ``f`` is centered on
    sample ``f * hop_length`` and the frame count is
    ``1 + len(x) // hop_length``.
    """

    fft_size: int = 2048
    win_length: int = 1024
    hop_length: int = 160
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.window != "hann":
            raise ConfigError(f"unsupported window {self.window!r} (only 'hann')")
        if self.win_length > self.fft_size:
            raise ConfigError(
                f"win_length {self.win_length} exceeds fft_size {self.fft_size}"
            )
        if not (0 < self.hop_length <= self.win_length):
            raise ConfigError(
                f"hop_length {self.hop_length} must be in (0, win_length={self.win_length}]"
            )

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if not self.center:
            return 1 + max(0, n_samples - self.fft_size) // self.hop_length
        return 1 + n_samples // self.hop_length


@dataclass
class ComplexSpectrogram:
    values: np.ndarray  # (n_bins, n_frames) complex
    config: StftConfig

    def __post_init__(self):
        if self.values.shape[0] != self.config.n_bins:
            raise ContractError(
                f"expected {self.config.n_bins} bins, got {self.values.shape[0]}"
            )


@dataclass
class MagnitudeSpectrogram:
    values: np.ndarray  # (n_bins, n_frames), non-negative
    config: StftConfig

    def __post_init__(self):
        if self.values.shape[0] != self.config.n_bins:
            raise ContractError(
                f"expected {self.config.n_bins} bins, got {self.values.shape[0]}"
            )
        if self.values.size and self.values.min() < 0:
            raise ConfigError("magnitude spectrogram has negative values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class PhaseSpectrogram:
    values: np.ndarray  # (n_bins, n_frames), radians in [-pi, pi]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class MelConfig:
    """Mel filterbank and loss-domain parameters.

    ``f_max=None`` resolves to the Nyquist frequency when the filterbank
    is built. ``loss_domain`` selects whether mel comparisons happen on
    linear magnitudes or on ``ln(max(value, log_floor))``.
    """

    n_mels: int = 256
    f_min: float = 0.0
    f_max: float | None = None
    mel_scale: str = "htk"
    filter_norm: str = "none"
    loss_domain: str = "log"
    log_floor: float = 1e-5

    def __post_init__(self):
        if self.n_mels < 1:
            raise ConfigError(f"n_mels must be >= 1, got {self.n_mels}")
        if self.f_min < 0:
            raise ConfigError(f"f_min must be >= 0, got {self.f_min}")
        if self.f_max is not None and self.f_max <= self.f_min:
            raise ConfigError(f"f_max {self.f_max} must exceed f_min {self.f_min}")
        if self.mel_scale not in _MEL_SCALES:
            raise ConfigError(f"mel_scale must be one of {_MEL_SCALES}")
        if self.filter_norm not in _FILTER_NORMS:
            raise ConfigError(f"filter_norm must be one of {_FILTER_NORMS}")
        if self.loss_domain not in _LOSS_DOMAINS:
            raise ConfigError(f"loss_domain must be one of {_LOSS_DOMAINS}")
        if self.log_floor <= 0:
            raise ConfigError(f"log_floor must be positive, got {self.log_floor}")

    def resolved(self, sample_rate: int) -> "MelConfig":
        """Return a copy with f_max pinned to a concrete frequency."""
        if self.f_max is not None:
            return self
        return replace(self, f_max=sample_rate / 2.0)


@dataclass
class MelFilterbank:
    """Triangular mel filters mapped onto FFT bins.

    ``weights`` has shape (n_mels, n_bins). The configs it was built from
    are kept so consumers can detect mismatched processing chains.
    """

    weights: np.ndarray
    mel_config: MelConfig
    stft_config: StftConfig
    sample_rate: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (n_mels, n_frames)
    domain: str  # "linear" or "log"
    config: MelConfig

    def __post_init__(self):
        if self.domain not in _LOSS_DOMAINS:
            raise ConfigError(f"domain must be one of {_LOSS_DOMAINS}")


# ---------------------------------------------------------------------------
# Padding / normalization
# ---------------------------------------------------------------------------


def pad_and_normalize(
    w: Waveform,
    duration_s: float = DEFAULT_DURATION_S,
    peak: float | None = 1.0,
) -> Waveform:
    """Fit a waveform to a fixed duration and peak level.

    Shorter input is zero-padded symmetrically (content centered); longer
    input is truncated from the end. If ``peak`` is given and the signal
    is not silent, samples are rescaled so ``max |s| == peak`` and the
    scale factor is folded into ``gain_applied``. ``peak=None`` pads
    without touching the level. All-zero input passes through unscaled.

    Idempotent: applying twice yields the same samples and total gain.
    """
    if w.samples.size == 0:
        raise ConfigError("cannot pad an empty waveform")
    target_len = round(duration_s * w.sample_rate)
    n = w.samples.size
    if n >= target_len:
        samples = w.samples[:target_len].copy()
    else:
        lead = (target_len - n) // 2
        samples = np.zeros(target_len)
        samples[lead : lead + n] = w.samples
    scale = 1.0
    if peak is not None:
        current = np.max(np.abs(samples)) if samples.size else 0.0
        if current > 0:
            scale = peak / current
            samples *= scale
    return Waveform(samples, w.sample_rate, w.gain_applied * scale)


def padding_offset(original_len: int, padded_len: int) -> int:
    """Index where the original content starts inside the padded signal."""
    if original_len >= padded_len:
        return 0
    return (padded_len - original_len) // 2


# ---------------------------------------------------------------------------
# STFT / iSTFT
# ---------------------------------------------------------------------------


def _hann_periodic(length: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(length) / length))


def _padded_window(cfg: StftConfig) -> np.ndarray:
    win = _hann_periodic(cfg.win_length)
    lead = (cfg.fft_size - cfg.win_length) // 2
    out = np.zeros(cfg.fft_size)
    out[lead : lead + cfg.win_length] = win
    return out


def stft(w: Waveform, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    """Short-time Fourier transform.

    Reflect padding is used for centering; inputs shorter than half the
    FFT fall back to zero padding (reflection is undefined there).
    """
    cfg = cfg or StftConfig()
    x = w.samples
    if x.size < 1:
        raise ConfigError("stft requires at least one sample")
    if cfg.center:
        pad = cfg.fft_size // 2
        mode = "reflect" if x.size > pad else "constant"
        x = np.pad(x, pad, mode=mode)
    n_frames = cfg.n_frames(w.samples.size)
    window = _padded_window(cfg)
    starts = np.arange(n_frames) * cfg.hop_length
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.fft_size)[starts]
    spec = np.fft.rfft(frames * window, axis=1).T
    return ComplexSpectrogram(np.ascontiguousarray(spec), cfg)


def magphase(c: ComplexSpectrogram) -> tuple[MagnitudeSpectrogram, PhaseSpectrogram]:
    """Split a complex spectrogram into magnitude and phase.

    Phase of a zero bin is defined as 0 (np.angle already does this).
    """
    mag = np.abs(c.values)
    phase = np.angle(c.values)
    return MagnitudeSpectrogram(mag, c.config), PhaseSpectrogram(phase)


def recombine(mag: MagnitudeSpectrogram, phase: PhaseSpectrogram) -> ComplexSpectrogram:
    if mag.shape != phase.shape:
        raise ContractError(f"magnitude {mag.shape} vs phase {phase.shape} shape mismatch")
    return ComplexSpectrogram(mag.values * np.exp(1j * phase.values), mag.config)


def istft(
    mag: MagnitudeSpectrogram,
    phase: PhaseSpectrogram,
    cfg: StftConfig | None = None,
    out_len: int | None = None,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> Waveform:
    """Inverse STFT by overlap-add with window-square normalization.

    Exact inversion requires the squared analysis windows to overlap-add
    to a strictly positive envelope (true for hann with hop <= win/2);
    violations raise a configuration error.
    """
    cfg = cfg or mag.config
    if mag.shape != phase.shape:
        raise ContractError(f"magnitude {mag.shape} vs phase {phase.shape} shape mismatch")
    if mag.values.shape[0] != cfg.n_bins:
        raise ContractError(f"spectrogram has {mag.values.shape[0]} bins, config expects {cfg.n_bins}")
    spec = mag.values * np.exp(1j * phase.values)
    n_frames = spec.shape[1]
    window = _padded_window(cfg)
    wsq = window * window
    frames = np.fft.irfft(spec.T, n=cfg.fft_size, axis=1) * window

    total = cfg.fft_size + (n_frames - 1) * cfg.hop_length
    out = np.zeros(total)
    norm = np.zeros(total)
    for f in range(n_frames):
        s = f * cfg.hop_length
        out[s : s + cfg.fft_size] += frames[f]
        norm[s : s + cfg.fft_size] += wsq

    pad = cfg.fft_size // 2 if cfg.center else 0
    natural_len = (n_frames - 1) * cfg.hop_length if cfg.center else total
    if out_len is None:
        out_len = natural_len
    covered = norm[pad : pad + natural_len]
    if covered.size and covered.min() <= 1e-10:
        raise ConfigError(
            f"window/hop pair (win={cfg.win_length}, hop={cfg.hop_length}) is not invertible"
        )
    ok = norm > 1e-10
    out[ok] /= norm[ok]
    out = out[pad : pad + out_len]
    if out.size < out_len:
        out = np.concatenate([out, np.zeros(out_len - out.size)])
    return Waveform(out, sample_rate)


# ---------------------------------------------------------------------------
# Mel scale and filterbank
# ---------------------------------------------------------------------------

_SLANEY_MIN_LOG_HZ = 1000.0
_SLANEY_MIN_LOG_MEL = 15.0
_SLANEY_LINEAR_STEP = 200.0 / 3.0
_SLANEY_LOG_STEP = np.log(6.4) / 27.0


def hz_to_mel(freq_hz, scale: str = "htk"):
    """Hz -> mel. HTK: m = 2595 log10(1 + f/700). Slaney: linear below 1 kHz."""
    f = np.asarray(freq_hz, dtype=np.float64)
    if scale == "htk":
        return 2595.0 * np.log10(1.0 + f / 700.0)
    mel = f / _SLANEY_LINEAR_STEP
    above = f >= _SLANEY_MIN_LOG_HZ
    safe = np.where(above, f, _SLANEY_MIN_LOG_HZ)
    return np.where(
        above, _SLANEY_MIN_LOG_MEL + np.log(safe / _SLANEY_MIN_LOG_HZ) / _SLANEY_LOG_STEP, mel
    )


def mel_to_hz(mel, scale: str = "htk"):
    m = np.asarray(mel, dtype=np.float64)
    if scale == "htk":
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    f = m * _SLANEY_LINEAR_STEP
    above = m >= _SLANEY_MIN_LOG_MEL
    return np.where(
        above, _SLANEY_MIN_LOG_HZ * np.exp(_SLANEY_LOG_STEP * (m - _SLANEY_MIN_LOG_MEL)), f
    )


def build_mel_filterbank(
    mcfg: MelConfig,
    scfg: StftConfig,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> MelFilterbank:
    """Construct triangular mel filters over the FFT bin grid.

    Filter centers are uniformly spaced on the configured mel scale
    between f_min and f_max. ``filter_norm="slaney_area"`` scales each
    triangle to unit area (2 / bandwidth); ``"none"`` keeps unit peaks.
    """
    mcfg = mcfg.resolved(sample_rate)
    nyquist = sample_rate / 2.0
    if mcfg.f_max > nyquist + 1e-9:
        raise ConfigError(f"f_max {mcfg.f_max} exceeds Nyquist {nyquist}")

    edges_mel = np.linspace(
        hz_to_mel(mcfg.f_min, mcfg.mel_scale),
        hz_to_mel(mcfg.f_max, mcfg.mel_scale),
        mcfg.n_mels + 2,
    )
    edges_hz = mel_to_hz(edges_mel, mcfg.mel_scale)
    bin_freqs = np.arange(scfg.n_bins) * sample_rate / scfg.fft_size

    lower = edges_hz[:-2, None]
    center = edges_hz[1:-1, None]
    upper = edges_hz[2:, None]
    rising = (bin_freqs[None, :] - lower) / np.maximum(center - lower, 1e-12)
    falling = (upper - bin_freqs[None, :]) / np.maximum(upper - center, 1e-12)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    if mcfg.filter_norm == "slaney_area":
        weights *= (2.0 / (edges_hz[2:] - edges_hz[:-2]))[:, None]

    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if empty.size:
        raise ConfigError(
            f"{empty.size} mel filters cover no FFT bin (first: {empty[0]}); "
            "reduce n_mels or widen the frequency range"
        )
    return MelFilterbank(weights, mcfg, scfg, sample_rate)


def apply_mel(
    mag: MagnitudeSpectrogram | np.ndarray,
    fb: MelFilterbank,
    domain: str = "linear",
) -> MelSpectrogram:
    """Project a magnitude spectrogram through a filterbank.

    Linear domain is an exact matrix product (and therefore exactly
    linear in its input); log domain applies ln(max(value, log_floor)).
    """
    values = mag.values if isinstance(mag, MagnitudeSpectrogram) else np.asarray(mag)
    if isinstance(mag, MagnitudeSpectrogram) and mag.config != fb.stft_config:
        raise ContractError("magnitude spectrogram and filterbank use different STFT configs")
    if values.shape[0] != fb.weights.shape[1]:
        raise ContractError(
            f"spectrogram has {values.shape[0]} bins, filterbank expects {fb.weights.shape[1]}"
        )
    lin = fb.weights @ values
    if domain == "linear":
        return MelSpectrogram(lin, "linear", fb.mel_config)
    if domain == "log":
        return MelSpectrogram(np.log(np.maximum(lin, fb.mel_config.log_floor)), "log", fb.mel_config)
    raise ConfigError(f"unknown mel domain {domain!r}")
