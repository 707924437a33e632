import numpy as np
import pytest
from scipy.io import wavfile

from refgen import dsp
from refgen.errors import ConfigError

FFT, WIN, HOP = 1024, 512, 160


def test_wav_round_trip_float32(tmp_path):
    rng = np.random.default_rng(0)
    x = (rng.standard_normal(4000) * 0.1).astype(np.float32)
    dsp.save_wav(tmp_path / "x.wav", x)
    back = dsp.load_wav(tmp_path / "x.wav")
    assert np.array_equal(back, x.astype(np.float64))


def test_load_resamples_to_target_rate(tmp_path):
    rng = np.random.default_rng(1)
    x = (rng.standard_normal(8000) * 0.1).astype(np.float32)
    wavfile.write(tmp_path / "x.wav", 8000, x)
    back = dsp.load_wav(tmp_path / "x.wav", target_sr=16000)
    assert len(back) == 16000


def test_load_folds_stereo_to_mono(tmp_path):
    rng = np.random.default_rng(2)
    x = (rng.standard_normal((1000, 2)) * 0.1).astype(np.float32)
    wavfile.write(tmp_path / "x.wav", 16000, x)
    back = dsp.load_wav(tmp_path / "x.wav")
    assert np.allclose(back, x.astype(np.float64).mean(axis=1), atol=1e-7)


def test_load_int16_scaling(tmp_path):
    wavfile.write(tmp_path / "x.wav", 16000, np.array([16384, -16384], dtype=np.int16))
    back = dsp.load_wav(tmp_path / "x.wav")
    assert np.allclose(back, [0.5, -0.5], atol=1e-3)


def test_stft_frame_count():
    rng = np.random.default_rng(3)
    for n in (1600, 1601, 4000, 16000):
        spec = dsp.stft(rng.standard_normal(n), FFT, WIN, HOP)
        assert spec.shape == (FFT // 2 + 1, 1 + n // HOP)


def test_stft_istft_round_trip():
    rng = np.random.default_rng(4)
    for trial in range(5):
        x = rng.standard_normal(4000) * 0.2
        spec = dsp.stft(x, FFT, WIN, HOP)
        back = dsp.istft(spec, FFT, WIN, HOP, out_len=len(x))
        assert np.max(np.abs(back - x)) < 1e-9


def test_istft_trims_to_out_len():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(3210)
    spec = dsp.stft(x, FFT, WIN, HOP)
    assert len(dsp.istft(spec, FFT, WIN, HOP, out_len=1000)) == 1000


def test_window_longer_than_fft_rejected():
    with pytest.raises(ConfigError):
        dsp.stft(np.zeros(100), 256, 512, 64)


def test_filterbank_shape_and_coverage():
    w = dsp.mel_filterbank(128, FFT, 16000)
    assert w.shape == (128, FFT // 2 + 1)
    assert np.all(w >= 0)
    # every filter carries weight
    assert np.all(w.sum(axis=1) > 0)


def test_filterbank_too_many_filters_rejected():
    with pytest.raises(ConfigError):
        dsp.mel_filterbank(512, FFT, 16000)


def test_filterbank_f_max_above_nyquist_rejected():
    with pytest.raises(ConfigError):
        dsp.mel_filterbank(64, FFT, 16000, f_max=9000.0)


def test_log_mel_floor_on_silence():
    w = dsp.mel_filterbank(128, FFT, 16000)
    mag = np.zeros((FFT // 2 + 1, 7))
    lm = dsp.log_mel(mag, w, 1e-5)
    assert np.all(lm == np.log(1e-5))


def test_griffin_lim_length_and_determinism():
    rng = np.random.default_rng(6)
    w = dsp.mel_filterbank(128, FFT, 16000)
    x = rng.standard_normal(3200) * 0.2
    mel = np.exp(dsp.log_mel(np.abs(dsp.stft(x, FFT, WIN, HOP)), w, 1e-5))
    a = dsp.griffin_lim(mel, w, FFT, WIN, HOP, out_len=3200, seed=9)
    b = dsp.griffin_lim(mel, w, FFT, WIN, HOP, out_len=3200, seed=9)
    assert len(a) == 3200
    assert np.array_equal(a, b)


def test_griffin_lim_recovers_tone_band():
    # a 500 Hz tone's energy should come back concentrated near 500 Hz
    t = np.arange(16000) / 16000.0
    x = 0.4 * np.sin(2 * np.pi * 500.0 * t)
    w = dsp.mel_filterbank(128, FFT, 16000)
    mel = np.exp(dsp.log_mel(np.abs(dsp.stft(x, FFT, WIN, HOP)), w, 1e-5))
    y = dsp.griffin_lim(mel, w, FFT, WIN, HOP, out_len=len(x), seed=0)
    Y = np.abs(np.fft.rfft(y))
    f = np.fft.rfftfreq(len(y), 1 / 16000.0)
    band = (f > 300) & (f < 700)
    assert Y[band].sum() / Y.sum() > 0.8
