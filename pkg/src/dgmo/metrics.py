"""Separation quality metrics.

All metrics compare raw signals (no mean removal) and align lengths by
truncating or zero-padding the estimate to the reference. Results are
capped to +/-120 dB so degenerate ratios stay finite and comparable.
"""

from __future__ import annotations

import numpy as np

from .dsp import Waveform
from .errors import ConfigError

DB_CAP = 120.0


def _as_samples(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def _align(est: np.ndarray, ref: np.ndarray) -> np.ndarray:
    if est.size == ref.size:
        return est
    if est.size > ref.size:
        return est[: ref.size]
    return np.concatenate([est, np.zeros(ref.size - est.size)])


def _capped_db(num: float, den: float) -> float:
    if den <= 0.0:
        return DB_CAP if num > 0.0 else -DB_CAP
    if num <= 0.0:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


def si_sdr(est, ref) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Projects the estimate onto the reference (alpha = <e,r>/<r,r>) and
    reports 10 log10(|alpha r|^2 / |alpha r - e|^2). Invariant to any
    positive or negative rescaling of the estimate.
    """
    e = _as_samples(est)
    r = _as_samples(ref)
    e = _align(e, r)
    ref_energy = float(np.dot(r, r))
    if ref_energy == 0.0:
        raise ConfigError("si_sdr reference is all zeros")
    alpha = float(np.dot(e, r)) / ref_energy
    target = alpha * r
    noise = target - e
    return _capped_db(float(np.dot(target, target)), float(np.dot(noise, noise)))


def sdr(est, ref) -> float:
    """Plain signal-to-distortion ratio: 10 log10(|r|^2 / |r - e|^2)."""
    e = _as_samples(est)
    r = _as_samples(ref)
    e = _align(e, r)
    ref_energy = float(np.dot(r, r))
    if ref_energy == 0.0:
        raise ConfigError("sdr reference is all zeros")
    err = r - e
    return _capped_db(ref_energy, float(np.dot(err, err)))


def sdri(est, ref, mix) -> float:
    """SDR of the estimate minus SDR of the unprocessed mixture.

    Zero when the estimate IS the mixture; positive when separation
    helped. Uses the same alignment rules as sdr().
    """
    return sdr(est, ref) - sdr(mix, ref)


def strip_padding(est, original_len: int) -> np.ndarray:
    """Undo centered zero-padding before scoring.

    Estimates come back at the padded working duration; the truth stems
    keep their recorded duration. This removes the symmetric lead the
    padder inserted so metrics run on the original span only.
    """
    e = _as_samples(est)
    if original_len <= 0:
        raise ConfigError(f"original_len must be positive, got {original_len}")
    if e.size <= original_len:
        return e
    lead = (e.size - original_len) // 2
    return e[lead : lead + original_len]


def evaluate(est, ref, mix) -> dict[str, float]:
    """All metrics for one (estimate, truth, mixture) triple."""
    sdr_est = sdr(est, ref)
    sdr_mix = sdr(mix, ref)
    return {
        "si_sdr": si_sdr(est, ref),
        "sdr": sdr_est,
        "sdr_mixture": sdr_mix,
        "sdri": sdr_est - sdr_mix,
    }
