"""Built-in sanity checks for installed deployments.

Each check re-derives an expected result from first principles (finite
differences, closed-form metric values, serialization identity) and
compares the library against it. Used by the CLI's selftest command;
everything here runs in seconds.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import (
    MagnitudeSpectrogram,
    MelConfig,
    MelFilterbank,
    StftConfig,
    Waveform,
    istft,
    magphase,
    stft,
)
from .masking import Mask, ReferenceSet, dgmo_grad, dgmo_loss
from .metrics import sdr, sdri, si_sdr
from .mixkit import MixtureSpec, mix_at_snr
from .refio import read_refset, write_refset


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _tiny_instance(rng: np.random.Generator, domain: str):
    scfg = StftConfig(fft_size=14, win_length=14, hop_length=7)
    mcfg = MelConfig(n_mels=6, loss_domain=domain, f_max=8000.0)
    x = MagnitudeSpectrogram(rng.uniform(0.0, 2.0, (8, 8)), scfg)
    fb = MelFilterbank(rng.uniform(0.0, 1.0, (6, 8)), mcfg, scfg, 16000)
    mels = rng.uniform(0.1, 2.0, (2, 6, 8))
    if domain == "log":
        mels = np.log(mels)
    refs = ReferenceSet(mels, domain, mcfg, scfg, 16000)
    mask = Mask(rng.normal(0.0, 1.0, (8, 8)))
    return mask, x, refs, fb


def _fd_grad(mask: Mask, x, refs, fb, eps: float = 1e-4) -> np.ndarray:
    out = np.zeros_like(mask.logits)
    base = mask.logits.copy()
    for i in range(base.shape[0]):
        for j in range(base.shape[1]):
            up = base.copy()
            up[i, j] += eps
            down = base.copy()
            down[i, j] -= eps
            out[i, j] = (dgmo_loss(Mask(up), x, refs, fb) - dgmo_loss(Mask(down), x, refs, fb)) / (
                2 * eps
            )
    return out


def check_gradient(n_cases: int = 6, tol: float = 1e-4) -> CheckResult:
    rng = np.random.default_rng(11)
    worst = 0.0
    for case in range(n_cases):
        domain = "linear" if case % 2 == 0 else "log"
        mask, x, refs, fb = _tiny_instance(rng, domain)
        _, analytic = dgmo_grad(mask, x, refs, fb)
        numeric = _fd_grad(mask, x, refs, fb)
        sig = np.abs(analytic) > 1e-8
        if sig.any():
            rel = np.abs(analytic - numeric)[sig] / np.abs(analytic)[sig]
            worst = max(worst, float(rel.max()))
    return CheckResult("gradient vs finite differences", worst < tol, f"max rel err {worst:.2e}")


def check_stft_roundtrip(tol: float = 1e-6) -> CheckResult:
    rng = np.random.default_rng(12)
    cfg = StftConfig()
    w = Waveform(rng.uniform(-1, 1, 16000))
    mag, phase = magphase(stft(w, cfg))
    back = istft(mag, phase, cfg, out_len=len(w), sample_rate=w.sample_rate)
    interior = slice(cfg.win_length, len(w) - cfg.win_length)
    err = float(np.max(np.abs(back.samples[interior] - w.samples[interior])))
    return CheckResult("stft/istft round trip", err < tol, f"max interior err {err:.2e}")


def check_metric_identities() -> CheckResult:
    rng = np.random.default_rng(13)
    ref = rng.normal(size=512)
    est = rng.normal(size=512)
    drift = abs(si_sdr(3.7 * est, ref) - si_sdr(est, ref))
    r = np.zeros(16)
    r[0] = 1.0
    e = np.zeros(16)
    e[0] = 0.5
    hand = abs(sdr(e, r) - 10 * np.log10(1 / 0.25))
    zero = abs(sdri(ref, est, ref))
    ok = drift < 1e-9 and hand < 1e-6 and zero == 0.0
    return CheckResult(
        "metric identities", ok, f"scale drift {drift:.1e}, hand-value err {hand:.1e}, self-sdri {zero}"
    )


def check_dgm1_roundtrip() -> CheckResult:
    rng = np.random.default_rng(14)
    mcfg = MelConfig(n_mels=6, f_max=8000.0)
    scfg = StftConfig(fft_size=14, win_length=14, hop_length=7)
    mels = rng.uniform(0.0, 3.0, (3, 6, 8)).astype(np.float32).astype(np.float64)
    refs = ReferenceSet(mels, "linear", mcfg, scfg, 16000, {"created_by": "oracle"})
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "refs.dgm1"
        write_refset(refs, p)
        back = read_refset(p)
    ok = (
        np.array_equal(back.mels, refs.mels)
        and back.domain == refs.domain
        and back.mel_config == refs.mel_config
        and back.stft_config == refs.stft_config
    )
    return CheckResult("reference file round trip", ok, "bitwise" if ok else "mismatch")


def check_mix_snr(tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(15)
    t = Waveform(rng.normal(size=8000) * 0.1)
    b = Waveform(rng.normal(size=8000) * 0.3)
    worst = 0.0
    for snr in (-5.0, 0.0, 5.0):
        _, st, sb = mix_at_snr(MixtureSpec(t, b, snr_db=snr))
        measured = 10 * np.log10(np.dot(st.samples, st.samples) / np.dot(sb.samples, sb.samples))
        worst = max(worst, abs(measured - snr))
    return CheckResult("mixture snr accuracy", worst < tol, f"max snr err {worst:.1e} dB")


ALL_CHECKS = (
    check_gradient,
    check_stft_roundtrip,
    check_metric_identities,
    check_dgm1_roundtrip,
    check_mix_snr,
)


def run_all(inject_failure: bool = False) -> list[CheckResult]:
    results = [check() for check in ALL_CHECKS]
    if inject_failure:
        results.append(CheckResult("injected failure", False, "deliberate (test mode)"))
    return results
