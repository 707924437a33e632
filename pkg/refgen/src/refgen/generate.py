"""Reference generation: mixture in, reference mel stack out.

The pipeline encodes the mixture to a log-mel latent, carries it to a
partial noise level (DDIM inversion under null conditioning, or drawn
forward-process noise in random_noise mode), then samples back down
under the query prior. Each reference restarts sampling from a lightly
perturbed endpoint so the set has spread; reference 0 is always the
unperturbed traversal. Output is a refset file whose header states the
true analysis parameters, so a consumer can reproduce the mel transform
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ddim, dgm1, dsp
from .backbones import get_backbone
from .errors import ConfigError, GenerationError
from .schedule import DiffusionSchedule

# endpoint perturbation for references past the first, in units of the
# noise floor sqrt(1 - abar) already present at the endpoint
DIVERSITY_SCALE = 0.05

# log-mel headroom added to every emitted reference. A mask fit can only
# attenuate, so reference cells that undershoot the analyzed level cost
# energy while overshoot is clamped away for free; the margin keeps the
# undershoot tail (diversity noise included) above the analyzed level at
# any traversal depth.
REF_LEVEL_MARGIN = 0.4

# cells this close to the log floor are emitted at the floor itself:
# they are silence up to traversal residue, and a consumer's floored
# loss then treats them identically however deep the traversal ran
FLOOR_SNAP = 1.0

MODES = ("ddim_inversion", "random_noise")


@dataclass(frozen=True)
class RefGenRequest:
    mixture_path: str
    query: str
    n_refs: int = 4
    noising_ratio: float = 0.7
    ddim_steps: int = 25
    mode: str = "ddim_inversion"
    seed: int = 0
    backbone: str = "spectral-prior-v1"

    def __post_init__(self):
        if self.n_refs < 1:
            raise ConfigError(f"n_refs must be >= 1, got {self.n_refs}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


def _emit_mel(backbone, z_hat: np.ndarray) -> np.ndarray:
    """Decoded log-mel in emission form: margin up, near-silence snapped."""
    logmel = backbone.decode_log_mel(z_hat)
    floor = np.log(backbone.log_floor)
    return np.where(logmel <= floor + FLOOR_SNAP, floor, logmel + REF_LEVEL_MARGIN)


def _endpoint(
    z0: np.ndarray, schedule: DiffusionSchedule, backbone, seed: int, mode: str
) -> tuple[np.ndarray, float]:
    """Latent at the partial-noise level, plus that level's abar."""
    n = schedule.prefix_len()
    abar_end = schedule.abar(schedule.grid()[n - 1]) if n > 0 else 1.0
    if mode == "ddim_inversion":
        return ddim.ddim_invert(z0, schedule, backbone), abar_end
    rng = np.random.default_rng(seed)
    return ddim.noise_latent(z0, abar_end, rng), abar_end


def _load_normalized(path) -> tuple[np.ndarray, float]:
    """Mixture at unit peak, plus the peak that was divided out.

    Mask optimizers analyze their input after peak normalization, so
    reference levels must be expressed at that scale too. Handing in an
    already-normalized mixture makes this a no-op.
    """
    samples = dsp.load_wav(path)
    if samples.size == 0:
        raise GenerationError(f"{path}: empty mixture")
    peak = float(np.max(np.abs(samples)))
    if peak > 0.0:
        samples = samples / peak
    return samples, peak


def generate_references(request: RefGenRequest, out_path) -> dict:
    """Run the traversal for each reference and write the refset.

    Returns the written header. Any non-finite latent fails the whole
    request; a partial reference set is never written.
    """
    backbone = get_backbone(request.backbone)
    samples, _ = _load_normalized(request.mixture_path)
    z0 = backbone.encode(samples)
    schedule = DiffusionSchedule(
        ddim_steps=request.ddim_steps, noising_ratio=request.noising_ratio
    )
    z_end, abar_end = _endpoint(z0, schedule, backbone, request.seed, request.mode)
    prior = backbone.prior(request.query, z0)

    spread = DIVERSITY_SCALE * np.sqrt(max(0.0, 1.0 - abar_end))
    refs = []
    for i in range(request.n_refs):
        z_start = z_end
        if i > 0 and spread > 0.0:
            rng = np.random.default_rng((request.seed, i))
            z_start = z_end + spread * rng.standard_normal(z_end.shape)
        z_hat = ddim.ddim_sample(z_start, schedule, backbone, prior)
        if not np.all(np.isfinite(z_hat)):
            raise GenerationError(f"reference {i}: traversal produced non-finite values")
        refs.append(_emit_mel(backbone, z_hat))

    mels = np.stack(refs).astype(np.float32)
    header = dgm1.refset_header(
        shape=mels.shape[1:],
        count=mels.shape[0],
        domain="log",
        sample_rate=backbone.sample_rate,
        mel_config={
            "n_mels": backbone.n_mels,
            "f_min": 0.0,
            "f_max": backbone.sample_rate / 2.0,
            "mel_scale": "htk",
            "filter_norm": "none",
            "loss_domain": "log",
            "log_floor": backbone.log_floor,
        },
        stft_config={
            "fft_size": backbone.fft_size,
            "win_length": backbone.win_length,
            "hop_length": backbone.hop_length,
            "window": "hann",
            "center": True,
        },
        provenance={
            "created_by": "refgen",
            "backbone_id": backbone.backbone_id,
            "mode": request.mode,
            "query": request.query,
            "noising_ratio": request.noising_ratio,
            "ddim_steps": request.ddim_steps,
            "seed": request.seed,
            "guidance_scale": backbone.guidance_scale,
        },
    )
    dgm1.write_refset(out_path, mels, header)
    return header


def baseline_generate_audio(request: RefGenRequest, out_path) -> np.ndarray:
    """Vocode the first reference straight to a waveform.

    This is the no-separation baseline: phase retrieval on the generated
    mel alone, same duration as the mixture. Writes a WAV and returns
    the samples.
    """
    backbone = get_backbone(request.backbone)
    samples, peak = _load_normalized(request.mixture_path)
    z0 = backbone.encode(samples)
    schedule = DiffusionSchedule(
        ddim_steps=request.ddim_steps, noising_ratio=request.noising_ratio
    )
    z_end, _ = _endpoint(z0, schedule, backbone, request.seed, request.mode)
    prior = backbone.prior(request.query, z0)
    z_hat = ddim.ddim_sample(z_end, schedule, backbone, prior)
    if not np.all(np.isfinite(z_hat)):
        raise GenerationError("traversal produced non-finite values")
    # vocode exactly the mel a refset would carry
    mel_lin = np.exp(_emit_mel(backbone, z_hat))
    audio = dsp.griffin_lim(
        mel_lin,
        backbone.weights,
        backbone.fft_size,
        backbone.win_length,
        backbone.hop_length,
        out_len=len(samples),
        seed=request.seed,
    )
    # vocoding ran at unit peak; restore the input's own scale
    audio = audio * peak
    over = float(np.max(np.abs(audio)))
    if over > 1.0:
        audio = audio / over
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    dsp.save_wav(out_path, audio)
    return audio
