"""Minimal audio front end: WAV I/O, STFT, mel projection, Griffin-Lim.

Self-contained on purpose. This package talks to the separator only
through files, so it carries its own copy of the frame conventions the
headers describe: periodic Hann window zero-padded centered into the FFT
size, reflect padding, frame count 1 + len // hop.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile

from .errors import ConfigError

SAMPLE_RATE = 16000


def load_wav(path, target_sr: int = SAMPLE_RATE) -> np.ndarray:
    """Read a WAV as mono float64 in [-1, 1] at target_sr."""
    sr, data = wavfile.read(path)
    x = np.asarray(data)
    if x.dtype == np.uint8:
        x = (x.astype(np.float64) - 128.0) / 128.0
    elif x.dtype == np.int16:
        x = x.astype(np.float64) / 32768.0
    elif x.dtype == np.int32:
        x = x.astype(np.float64) / 2147483648.0
    else:
        x = x.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if sr != target_sr:
        from scipy.signal import resample_poly

        g = int(np.gcd(sr, target_sr))
        x = resample_poly(x, target_sr // g, sr // g)
    return x


def save_wav(path, samples: np.ndarray, sr: int = SAMPLE_RATE) -> None:
    wavfile.write(path, sr, np.asarray(samples, dtype=np.float32))


def _window(win_length: int, fft_size: int) -> np.ndarray:
    if win_length > fft_size:
        raise ConfigError(f"win_length {win_length} exceeds fft_size {fft_size}")
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(win_length) / win_length))
    padded = np.zeros(fft_size)
    off = (fft_size - win_length) // 2
    padded[off : off + win_length] = w
    return padded


def stft(x: np.ndarray, fft_size: int, win_length: int, hop_length: int) -> np.ndarray:
    """Complex spectrogram, shape (fft_size // 2 + 1, 1 + len(x) // hop)."""
    pad = fft_size // 2
    mode = "reflect" if len(x) > pad else "constant"
    xp = np.pad(x, pad, mode=mode)
    n_frames = 1 + len(x) // hop_length
    frames = sliding_window_view(xp, fft_size)[:: hop_length][:n_frames]
    return np.fft.rfft(frames * _window(win_length, fft_size), axis=1).T


def istft(spec: np.ndarray, fft_size: int, win_length: int, hop_length: int,
          out_len: int) -> np.ndarray:
    """Weighted overlap-add inverse with per-sample envelope normalization."""
    win = _window(win_length, fft_size)
    frames = np.fft.irfft(spec.T, n=fft_size, axis=1) * win
    n_frames = frames.shape[0]
    total = (n_frames - 1) * hop_length + fft_size
    acc = np.zeros(total)
    norm = np.zeros(total)
    sq = win * win
    for i in range(n_frames):
        s = i * hop_length
        acc[s : s + fft_size] += frames[i]
        norm[s : s + fft_size] += sq
    lead = fft_size // 2
    acc = acc[lead : lead + out_len]
    norm = norm[lead : lead + out_len]
    good = norm > 1e-10
    out = np.zeros(out_len)
    out[good] = acc[good] / norm[good]
    return out


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, fft_size: int, sr: int,
                   f_min: float = 0.0, f_max: float | None = None) -> np.ndarray:
    """HTK-scale triangular filters, no area normalization; (n_mels, bins)."""
    if f_max is None:
        f_max = sr / 2.0
    if f_max > sr / 2.0:
        raise ConfigError(f"f_max {f_max} above Nyquist {sr / 2.0}")
    n_bins = fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * sr / fft_size
    edges = _mel_to_hz(np.linspace(_hz_to_mel(f_min), _hz_to_mel(f_max), n_mels + 2))
    weights = np.zeros((n_mels, n_bins))
    for i in range(n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (bin_freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - mid, 1e-12)
        weights[i] = np.maximum(0.0, np.minimum(up, down))
        if weights[i].max() == 0.0:
            raise ConfigError(f"mel filter {i} covers no FFT bin")
    return weights


def log_mel(mag: np.ndarray, weights: np.ndarray, floor: float) -> np.ndarray:
    return np.log(np.maximum(weights @ mag, floor))


def griffin_lim(mel_lin: np.ndarray, weights: np.ndarray, fft_size: int,
                win_length: int, hop_length: int, out_len: int,
                n_iter: int = 32, seed: int = 0) -> np.ndarray:
    """Waveform from a linear mel spectrogram: pseudo-inverse + phase retrieval."""
    pinv = np.linalg.pinv(weights)
    mag = np.maximum(pinv @ mel_lin, 0.0)
    rng = np.random.default_rng(seed)
    phase = np.exp(2j * np.pi * rng.uniform(size=mag.shape))
    spec = mag * phase
    for _ in range(n_iter):
        x = istft(spec, fft_size, win_length, hop_length, out_len)
        re = stft(x, fft_size, win_length, hop_length)
        spec = mag * np.exp(1j * np.angle(re))
    return istft(spec, fft_size, win_length, hop_length, out_len)
