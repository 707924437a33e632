"""Evaluation-mixture construction and synthetic test sources.

Mixtures are built at an exact SNR between a target and a background
stem; the returned stems are the post-scaling signals, so downstream
metrics always score against what is actually inside the mixture. A JSON
manifest drives batch construction deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import load_waveform, save_waveform
from .dsp import Waveform
from .errors import ConfigError, FormatError

_SOURCE_KINDS = ("band_noise", "tone_stack", "chirp")

# Stem loudness is drawn uniformly from this RMS range (dBFS) when a
# manifest row carries a seed, roughly matching loud-but-unclipped
# recording levels without implementing full loudness gating.
RMS_DB_RANGE = (-35.0, -25.0)


@dataclass
class MixtureSpec:
    """One mixture request.

    ``noise`` is an optional third stem added verbatim (no SNR scaling).
    ``clip_peak`` is the level everything is rescaled to when the summed
    mixture would clip.
    """

    target: Waveform
    background: Waveform
    snr_db: float = 0.0
    noise: Waveform | None = None
    clip_peak: float = 0.9

    def __post_init__(self):
        rates = {self.target.sample_rate, self.background.sample_rate}
        if self.noise is not None:
            rates.add(self.noise.sample_rate)
        if len(rates) != 1:
            raise ConfigError(f"stems disagree on sample rate: {sorted(rates)}")
        if not np.isfinite(self.snr_db):
            raise ConfigError(f"snr_db must be finite, got {self.snr_db}")
        if not (0 < self.clip_peak <= 1.0):
            raise ConfigError(f"clip_peak must be in (0, 1], got {self.clip_peak}")


def _pad_to(samples: np.ndarray, n: int) -> np.ndarray:
    if samples.size >= n:
        return samples
    return np.concatenate([samples, np.zeros(n - samples.size)])


def mix_at_snr(spec: MixtureSpec) -> tuple[Waveform, Waveform, Waveform]:
    """Combine two stems at an exact SNR.

    The background is rescaled so 10*log10(E_target / E_background)
    equals ``snr_db``; the mixture is the sample-wise sum of the returned
    stems (plus noise if present). Stems of unequal length are zero-padded
    at the end. If the sum would clip (max |sample| > 1), mixture and
    stems are all rescaled together to ``clip_peak`` so both the SNR and
    the exact-sum identity survive.

    Returns:
        (mixture, scaled_target, scaled_background).
    """
    e_target = float(np.dot(spec.target.samples, spec.target.samples))
    e_background = float(np.dot(spec.background.samples, spec.background.samples))
    if e_target == 0.0 or e_background == 0.0:
        raise ConfigError("mix_at_snr requires non-silent target and background stems")

    n = max(len(spec.target), len(spec.background), len(spec.noise) if spec.noise else 0)
    sr = spec.target.sample_rate
    target = _pad_to(spec.target.samples, n)
    background = _pad_to(spec.background.samples, n)

    # E_t / (scale^2 E_b) = 10^(snr/10)  =>  scale = sqrt(E_t/E_b) * 10^(-snr/20)
    scale = np.sqrt(e_target / e_background) * 10.0 ** (-spec.snr_db / 20.0)
    background = background * scale
    noise = _pad_to(spec.noise.samples, n) if spec.noise is not None else None
    mixture = target + background
    if noise is not None:
        mixture = mixture + noise

    gain = 1.0
    peak = float(np.max(np.abs(mixture)))
    if peak > 1.0:
        gain = spec.clip_peak / peak
        target = target * gain
        background = background * gain
        # re-sum the scaled stems: scaling the sum instead would drift from
        # the stem sum by rounding and break the exact-sum identity
        mixture = target + background
        if noise is not None:
            noise = noise * gain
            mixture = mixture + noise

    return (
        Waveform(mixture, sr, gain),
        Waveform(target, sr, gain),
        Waveform(background, sr, gain),
    )


def clip_normalize(w: Waveform, peak: float = 0.9) -> Waveform:
    """Rescale to ``peak`` only if the signal actually clips.

    Signals already inside [-1, 1] pass through untouched, so applying
    this twice equals applying it once.
    """
    current = float(np.max(np.abs(w.samples))) if len(w) else 0.0
    if current <= 1.0:
        return Waveform(w.samples.copy(), w.sample_rate, w.gain_applied)
    scale = peak / current
    return Waveform(w.samples * scale, w.sample_rate, w.gain_applied * scale)


# ---------------------------------------------------------------------------
# Synthetic sources
# ---------------------------------------------------------------------------


def synth_source(
    kind: str,
    band: tuple[float, float],
    duration_s: float = 10.24,
    sr: int = 16000,
    seed: int = 0,
) -> Waveform:
    """Deterministic band-limited test source.

    band_noise: white noise with every FFT bin outside [f_lo, f_hi]
    zeroed. tone_stack: sum of eight random sinusoids inside the band.
    chirp: linear sweep from f_lo to f_hi. All normalized to peak 0.9.
    """
    f_lo, f_hi = band
    if not (0 <= f_lo < f_hi <= sr / 2):
        raise ConfigError(f"band must satisfy 0 <= f_lo < f_hi <= sr/2, got {band}")
    if kind not in _SOURCE_KINDS:
        raise ConfigError(f"kind must be one of {_SOURCE_KINDS}, got {kind!r}")
    n = round(duration_s * sr)
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sr

    if kind == "band_noise":
        spectrum = np.fft.rfft(rng.standard_normal(n))
        freqs = np.fft.rfftfreq(n, d=1.0 / sr)
        spectrum[(freqs < f_lo) | (freqs > f_hi)] = 0.0
        samples = np.fft.irfft(spectrum, n=n)
    elif kind == "tone_stack":
        freqs = rng.uniform(f_lo if f_lo > 0 else 20.0, f_hi, size=8)
        phases = rng.uniform(0, 2 * np.pi, size=8)
        amps = rng.uniform(0.3, 1.0, size=8)
        samples = np.sum(
            amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]),
            axis=0,
        )
    else:  # chirp
        f0 = max(f_lo, 1.0)
        sweep = f0 + (f_hi - f0) * t / max(t[-1], 1e-12)
        phase = 2 * np.pi * np.cumsum(sweep) / sr
        samples = np.sin(phase)

    peak = float(np.max(np.abs(samples)))
    if peak > 0:
        samples = samples * (0.9 / peak)
    return Waveform(samples, sr)


# ---------------------------------------------------------------------------
# Manifest-driven batch construction
# ---------------------------------------------------------------------------


def load_manifest(path: str | Path) -> list[dict]:
    """Read and validate a mixing manifest.

    The manifest is a JSON array of rows {id, target, background,
    snr_db?, query?, seed?} with unique ids; target/background are WAV
    paths resolved relative to the manifest file.
    """
    path = Path(path)
    try:
        rows = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise FormatError(f"manifest {path} must be a JSON array of rows")
    seen: set[str] = set()
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise FormatError(f"manifest row {i} is not an object")
        for key in ("id", "target", "background"):
            if key not in row:
                raise FormatError(f"manifest row {i} is missing {key!r}")
        if row["id"] in seen:
            raise FormatError(f"manifest has duplicate id {row['id']!r}")
        seen.add(row["id"])
    return rows


def materialize_row(row: dict, manifest_dir: Path, out_dir: Path) -> Path:
    """Build one manifest row: load stems, set levels, mix, write outputs.

    When the row carries a seed, the target's RMS level is drawn from
    RMS_DB_RANGE with that seed before mixing (the background's level is
    set by the SNR regardless). Output layout:
    <out>/<id>/{mixture.wav, target.wav, background.wav, meta.json}.
    """
    target = load_waveform(manifest_dir / row["target"])
    background = load_waveform(manifest_dir / row["background"])
    snr_db = float(row.get("snr_db", 0.0))
    seed = row.get("seed")

    if seed is not None:
        rng = np.random.default_rng(int(seed))
        rms_db = float(rng.uniform(*RMS_DB_RANGE))
        rms = float(np.sqrt(np.mean(target.samples**2)))
        if rms > 0:
            target = Waveform(
                target.samples * (10.0 ** (rms_db / 20.0) / rms), target.sample_rate
            )

    mixture, scaled_target, scaled_background = mix_at_snr(
        MixtureSpec(target, background, snr_db=snr_db)
    )

    item_dir = out_dir / str(row["id"])
    item_dir.mkdir(parents=True, exist_ok=True)
    save_waveform(item_dir / "mixture.wav", mixture)
    save_waveform(item_dir / "target.wav", scaled_target)
    save_waveform(item_dir / "background.wav", scaled_background)
    meta = {
        "id": row["id"],
        "query": row.get("query", ""),
        "snr_db": snr_db,
        "seed": seed,
        "sample_rate": mixture.sample_rate,
        "n_samples": len(mixture),
        "clip_gain": mixture.gain_applied,
    }
    (item_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return item_dir


def materialize_manifest(manifest_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Materialize every manifest row under out_dir; returns item dirs."""
    manifest_path = Path(manifest_path)
    out = Path(out_dir)
    rows = load_manifest(manifest_path)
    return [materialize_row(row, manifest_path.parent, out) for row in rows]
