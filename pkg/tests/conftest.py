"""Shared fixtures: small problem instances and the disjoint-band mixture."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dgmo import (
    MagnitudeSpectrogram,
    Mask,
    MelConfig,
    MelFilterbank,
    MixtureSpec,
    ReferenceSet,
    StftConfig,
    Waveform,
    mix_at_snr,
    synth_source,
)

TINY_SCFG = StftConfig(fft_size=14, win_length=14, hop_length=7)


def tiny_instance(rng: np.random.Generator, domain: str, n_refs: int = 2,
                  n_mels: int = 6, shape: tuple[int, int] = (8, 8)):
    """Random small optimization instance with a random filterbank."""
    mcfg = MelConfig(n_mels=n_mels, loss_domain=domain, f_max=8000.0)
    x = MagnitudeSpectrogram(rng.uniform(0.0, 2.0, shape), TINY_SCFG)
    fb = MelFilterbank(rng.uniform(0.0, 1.0, (n_mels, shape[0])), mcfg, TINY_SCFG, 16000)
    mels = rng.uniform(0.1, 2.0, (n_refs, n_mels, shape[1]))
    if domain == "log":
        mels = np.log(mels)
    refs = ReferenceSet(mels, domain, mcfg, TINY_SCFG, 16000)
    mask = Mask(rng.normal(0.0, 1.0, shape))
    return mask, x, refs, fb


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def band_mixture():
    """Two spectrally disjoint band noises mixed at 0 dB SNR.

    Stems are returned at file-load semantics (gain_applied 1.0), the
    way the pipeline sees them after a round trip through disk.
    """
    t = synth_source("band_noise", (0, 2000), duration_s=10.24, seed=1)
    b = synth_source("band_noise", (4000, 8000), duration_s=10.24, seed=2)
    mix, st, sb = mix_at_snr(MixtureSpec(t, b, snr_db=0.0))
    return (
        Waveform(mix.samples, 16000),
        Waveform(st.samples, 16000),
        Waveform(sb.samples, 16000),
    )
