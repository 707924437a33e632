import numpy as np
import pytest
from scipy.io import wavfile


def band_noise(rng, lo, hi, n, sr=16000):
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(n, 1 / sr)
    spec[(f < lo) | (f > hi)] = 0.0
    y = np.fft.irfft(spec, n)
    return 0.45 * y / np.abs(y).max()


@pytest.fixture
def make_mixture(tmp_path):
    """Write a two-band noise mixture WAV and return its path."""

    def _make(seed=0, n=32000, name="mix.wav"):
        rng = np.random.default_rng(seed)
        out = band_noise(rng, 100.0, 1800.0, n) + band_noise(rng, 4200.0, 7500.0, n)
        path = tmp_path / name
        wavfile.write(path, 16000, out.astype(np.float32))
        return path

    return _make
