"""Reference-guided spectrogram mask optimization.

The separator never trains a model. It keeps the mixture's phase and fits
a per-bin soft mask so the mel projection of the masked magnitude matches
a set of reference mel spectrograms for the query. Masks are
parameterized by logits through a sigmoid, which keeps every value
strictly inside (0, 1) without projection steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dsp import (
    MagnitudeSpectrogram,
    MelConfig,
    MelFilterbank,
    PhaseSpectrogram,
    StftConfig,
    Waveform,
    istft,
)
from .errors import ConfigError, ContractError, OptimizationError

_METHODS = ("adam", "gd")
_INITS = {"half": 0.0, "ones": 6.0}

# Beyond this logit magnitude float64 sigmoid saturates to exactly 0 or 1,
# which would break the open-interval mask guarantee.
LOGIT_LIMIT = 30.0


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass
class Mask:
    """Sigmoid-parameterized soft mask over (n_bins, n_frames)."""

    logits: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise ConfigError(f"mask logits must be 2-D, got shape {self.logits.shape}")
        if not np.all(np.isfinite(self.logits)):
            raise ConfigError("mask logits contain NaN or Inf")

    def values(self) -> np.ndarray:
        return sigmoid(self.logits)

    @property
    def shape(self) -> tuple[int, int]:
        return self.logits.shape


@dataclass
class ReferenceSet:
    """Stack of reference mel spectrograms for one query.

    Attributes:
        mels: array of shape (count, n_mels, n_frames).
        domain: "linear" or "log"; loss comparisons happen here.
        mel_config / stft_config / sample_rate: the processing chain the
            references were computed with. The optimizer refuses sets
            whose chain differs from the mixture's.
        provenance: free-form record of where the set came from (query,
            backend_id, noising_ratio, ddim_steps, created_by).
    """

    mels: np.ndarray
    domain: str
    mel_config: MelConfig
    stft_config: StftConfig
    sample_rate: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mels = np.asarray(self.mels, dtype=np.float64)
        if self.mels.ndim != 3 or self.mels.shape[0] < 1:
            raise ConfigError(
                f"reference mels must be (count, n_mels, n_frames) with count >= 1, "
                f"got shape {self.mels.shape}"
            )
        if self.domain not in ("linear", "log"):
            raise ConfigError(f"reference domain must be linear or log, got {self.domain!r}")
        if not np.all(np.isfinite(self.mels)):
            raise ConfigError("reference mels contain NaN or Inf")

    @property
    def count(self) -> int:
        return self.mels.shape[0]

    @property
    def mean_mel(self) -> np.ndarray:
        return self.mels.mean(axis=0)


# provider(estimate, iteration) -> ReferenceSet. The first round gets
# estimate=None; later rounds receive the current reconstruction so the
# provider can condition on it. Non-conditioning providers simply return
# the same set again.
ReferenceProvider = Callable[[Optional[Waveform], int], ReferenceSet]


@dataclass(frozen=True)
class OptimizerConfig:
    """Mask fitting schedule.

    ``iterations`` counts provider rounds; each runs
    ``epochs_per_iteration`` gradient steps. Mask and optimizer state
    carry over between rounds, so two rounds over identical references
    behave like one round twice as long.

    ``loss_domain=None`` follows whatever domain the references declare;
    a concrete value that disagrees with the references is a contract
    error, not a silent recompute.
    """

    learning_rate: float = 0.1
    epochs_per_iteration: int = 300
    iterations: int = 2
    n_refs: int = 4
    loss_domain: str | None = None
    mask_init: str = "half"
    seed: int = 0
    method: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    # Small enough that rescaling mixture and references together leaves
    # the adaptive trajectory unchanged to within test tolerance.
    eps: float = 1e-12

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs_per_iteration < 1:
            raise ConfigError(f"epochs_per_iteration must be >= 1, got {self.epochs_per_iteration}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.n_refs < 1:
            raise ConfigError(f"n_refs must be >= 1, got {self.n_refs}")
        if self.loss_domain not in (None, "linear", "log"):
            raise ConfigError(f"loss_domain must be linear, log, or None, got {self.loss_domain!r}")
        if self.mask_init not in _INITS:
            raise ConfigError(f"mask_init must be one of {tuple(_INITS)}, got {self.mask_init!r}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")


@dataclass
class SeparationResult:
    """Outcome of one mask optimization run."""

    waveform: Waveform
    final_mask: Mask
    loss_trace: list[list[float]]  # one sequence per provider round
    config: OptimizerConfig

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1][-1]

    @property
    def initial_loss(self) -> float:
        return self.loss_trace[0][0]

    def trace_rows(self) -> list[tuple[int, int, float]]:
        """Flatten the loss trace to (epoch, iteration, loss) rows."""
        rows = []
        for it, losses in enumerate(self.loss_trace, start=1):
            for epoch, loss in enumerate(losses):
                rows.append((epoch, it, loss))
        return rows


# ---------------------------------------------------------------------------
# Mask math
# ---------------------------------------------------------------------------


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_mask(shape: tuple[int, int], init: str = "half") -> Mask:
    """Uniform starting mask: "half" -> values 0.5, "ones" -> ~0.9975."""
    if init not in _INITS:
        raise ConfigError(f"init must be one of {tuple(_INITS)}, got {init!r}")
    if len(shape) != 2 or shape[0] < 1 or shape[1] < 1:
        raise ConfigError(f"mask shape must be two positive dims, got {shape}")
    return Mask(np.full(shape, _INITS[init]))


def dgmo_loss(
    m: Mask,
    x_spec: MagnitudeSpectrogram,
    refs: ReferenceSet,
    fb: MelFilterbank,
) -> float:
    """Mean over references of the mean squared mel mismatch.

    For references {r_i}: (1/n) sum_i mean((mel(x * sigmoid(z)) - r_i)^2),
    where the inner mean runs over all mel cells and the projection uses
    the reference set's domain.
    """
    _check_alignment(m, x_spec, refs, fb)
    mel = _project_mel(x_spec.values * m.values(), fb, refs.domain)
    diff = mel[None, :, :] - refs.mels
    return float(np.mean(diff * diff))


def dgmo_grad(
    m: Mask,
    x_spec: MagnitudeSpectrogram,
    refs: ReferenceSet,
    fb: MelFilterbank,
) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient with respect to the mask logits.

    The per-reference squared errors are quadratic around the same mel
    projection, so the gradient only needs the mean reference. In the
    log domain, cells clipped at the floor contribute zero gradient.
    """
    _check_alignment(m, x_spec, refs, fb)
    values = m.values()
    masked = x_spec.values * values
    lin = fb.weights @ masked
    cells = lin.size

    if refs.domain == "linear":
        mel = lin
        d_mel = (2.0 / cells) * (mel - refs.mean_mel)
        d_lin = d_mel
    else:
        floor = fb.mel_config.log_floor
        clipped = lin <= floor
        mel = np.log(np.maximum(lin, floor))
        d_mel = (2.0 / cells) * (mel - refs.mean_mel)
        d_lin = np.where(clipped, 0.0, d_mel / np.maximum(lin, floor))

    diff = mel[None, :, :] - refs.mels
    loss = float(np.mean(diff * diff))
    d_masked = fb.weights.T @ d_lin
    d_logits = d_masked * x_spec.values * values * (1.0 - values)
    return loss, d_logits


def _project_mel(masked: np.ndarray, fb: MelFilterbank, domain: str) -> np.ndarray:
    lin = fb.weights @ masked
    if domain == "linear":
        return lin
    return np.log(np.maximum(lin, fb.mel_config.log_floor))


def _check_alignment(
    m: Mask,
    x_spec: MagnitudeSpectrogram,
    refs: ReferenceSet,
    fb: MelFilterbank,
) -> None:
    if m.shape != x_spec.shape:
        raise ContractError(f"mask {m.shape} vs spectrogram {x_spec.shape} shape mismatch")
    if refs.mel_config != fb.mel_config or refs.stft_config != fb.stft_config:
        raise ContractError(
            "reference set was produced with a different mel/STFT configuration "
            "than the filterbank; regenerate references instead of mixing chains"
        )
    if refs.sample_rate != fb.sample_rate:
        raise ContractError(
            f"reference sample rate {refs.sample_rate} != filterbank {fb.sample_rate}"
        )
    if refs.mels.shape[1] != fb.n_mels:
        raise ContractError(
            f"references carry {refs.mels.shape[1]} mel bands, filterbank has {fb.n_mels}"
        )
    if refs.mels.shape[2] != x_spec.shape[1]:
        raise ContractError(
            f"references span {refs.mels.shape[2]} frames, mixture has {x_spec.shape[1]}"
        )


# ---------------------------------------------------------------------------
# Optimization loop
# ---------------------------------------------------------------------------


class _AdamState:
    def __init__(self, shape: tuple[int, int]):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, grad: np.ndarray, cfg: OptimizerConfig) -> np.ndarray:
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.beta1**self.t)
        root_v = np.sqrt(self.v / (1.0 - cfg.beta2**self.t))
        # eps is relative to the largest gradient scale seen, so rescaling
        # the whole problem by a constant rescales the guard with it and the
        # update direction is unchanged
        guard = cfg.eps * float(root_v.max())
        if guard == 0.0:
            return np.zeros_like(grad)
        return cfg.learning_rate * m_hat / (root_v + guard)


def optimize_mask(
    x_spec: MagnitudeSpectrogram,
    x_phase: PhaseSpectrogram,
    refs_provider: ReferenceProvider,
    cfg: OptimizerConfig | None = None,
    fb: MelFilterbank | None = None,
    out_len: int | None = None,
    sample_rate: int | None = None,
    gain_applied: float = 1.0,
) -> SeparationResult:
    """Fit a mask to provider references and reconstruct the estimate.

    Each provider round fetches references (rounds after the first see
    the current reconstruction), then runs ``cfg.epochs_per_iteration``
    gradient steps. Logits are clamped to +/-LOGIT_LIMIT after every
    step; mask and optimizer state persist across rounds. Each round's
    trace holds the loss before every step plus the loss after the last.

    ``fb`` may be omitted when the provider's reference sets carry their
    own configs; it is then built from the first set's header.
    """
    cfg = cfg or OptimizerConfig()
    mask = init_mask(x_spec.shape, cfg.mask_init)
    adam = _AdamState(x_spec.shape) if cfg.method == "adam" else None
    trace: list[list[float]] = []
    estimate: Waveform | None = None

    for iteration in range(1, cfg.iterations + 1):
        try:
            refs = refs_provider(estimate, iteration)
        except Exception as exc:
            raise OptimizationError(f"reference provider failed at round {iteration}: {exc}") from exc
        if cfg.loss_domain is not None and refs.domain != cfg.loss_domain:
            raise ContractError(
                f"configured loss_domain {cfg.loss_domain!r} but references are {refs.domain!r}"
            )
        if fb is None:
            from .dsp import build_mel_filterbank

            fb = build_mel_filterbank(refs.mel_config, refs.stft_config, refs.sample_rate)
        sr = sample_rate if sample_rate is not None else fb.sample_rate

        losses: list[float] = []
        for epoch in range(cfg.epochs_per_iteration):
            loss, grad = dgmo_grad(mask, x_spec, refs, fb)
            if not np.isfinite(loss):
                raise OptimizationError(f"loss diverged at round {iteration}, epoch {epoch}")
            losses.append(loss)
            if adam is not None:
                update = adam.step(grad, cfg)
            else:
                update = cfg.learning_rate * grad
            mask.logits = np.clip(mask.logits - update, -LOGIT_LIMIT, LOGIT_LIMIT)
        losses.append(dgmo_loss(mask, x_spec, refs, fb))
        trace.append(losses)
        estimate = apply_mask_reconstruct(
            x_spec,
            x_phase,
            mask,
            out_len=out_len,
            sample_rate=sr,
            gain_applied=gain_applied,
        )

    assert estimate is not None
    return SeparationResult(estimate, mask, trace, cfg)


def apply_mask_reconstruct(
    x_spec: MagnitudeSpectrogram,
    x_phase: PhaseSpectrogram,
    m: Mask,
    cfg: StftConfig | None = None,
    out_len: int | None = None,
    sample_rate: int = 16000,
    gain_applied: float = 1.0,
) -> Waveform:
    """Masked magnitude + mixture phase -> time domain.

    Divides the result by ``gain_applied`` so the estimate comes back at
    the level the mixture had before normalization. Pass the gain that
    normalization added on top of the level you want restored (for a
    mixture loaded from disk that is simply the processed waveform's
    gain_applied), not a gain composed across earlier mixing steps.
    """
    if m.shape != x_spec.shape:
        raise ContractError(f"mask {m.shape} vs spectrogram {x_spec.shape} shape mismatch")
    masked = MagnitudeSpectrogram(x_spec.values * m.values(), x_spec.config)
    w = istft(masked, x_phase, cfg or x_spec.config, out_len=out_len, sample_rate=sample_rate)
    if gain_applied != 1.0:
        w.samples = w.samples / gain_applied
    return w
