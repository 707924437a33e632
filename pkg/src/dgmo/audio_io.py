"""WAV file I/O.

Thin wrapper over scipy's RIFF reader/writer: integer PCM is scaled to
[-1, 1] on load, multichannel input is averaged to mono, and foreign
sample rates are brought to the working rate by polyphase resampling.
Supported encodings: PCM 16-bit, PCM 32-bit, unsigned 8-bit, and IEEE
float 32/64-bit, all little-endian.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .dsp import Waveform
from .errors import ConfigError, FormatError

_INT_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}
_ENCODINGS = ("float32", "pcm16")


def load_waveform(path: str | Path, target_sr: int | None = None) -> Waveform:
    """Read a WAV file as a mono float waveform with gain_applied = 1.

    Args:
        path: file to read.
        target_sr: if given and different from the file's rate, resample
            (polyphase; length becomes ceil(n * target_sr / sr)).

    Raises:
        FormatError: unreadable or unsupported WAV content.
    """
    path = Path(path)
    try:
        sr, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise FormatError(f"cannot read WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise FormatError(f"{path} contains no samples")
    if data.ndim == 2:
        data = data.astype(np.float64).mean(axis=1)
    elif data.ndim != 1:
        raise FormatError(f"{path} has unsupported shape {data.shape}")
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in _INT_SCALE:
        samples = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif np.issubdtype(data.dtype, np.floating):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path} has unsupported sample dtype {data.dtype}")
    if target_sr is not None and target_sr != sr:
        samples = resample(samples, int(sr), target_sr)
        sr = target_sr
    return Waveform(samples, int(sr))


def save_waveform(path: str | Path, w: Waveform, encoding: str = "float32") -> None:
    """Write a waveform to disk.

    ``float32`` keeps samples exact to single precision (the default, so
    estimates survive a write/read round trip without quantization);
    ``pcm16`` clips to [-1, 1] and quantizes.
    """
    if encoding not in _ENCODINGS:
        raise ConfigError(f"encoding must be one of {_ENCODINGS}, got {encoding!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if encoding == "float32":
        wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))
    else:
        clipped = np.clip(w.samples, -1.0, 1.0)
        wavfile.write(path, w.sample_rate, np.round(clipped * 32767.0).astype(np.int16))


def resample(samples: np.ndarray, sr_in: int, sr_out: int) -> np.ndarray:
    if sr_in <= 0 or sr_out <= 0:
        raise ConfigError(f"sample rates must be positive, got {sr_in} -> {sr_out}")
    if sr_in == sr_out:
        return np.asarray(samples, dtype=np.float64)
    g = np.gcd(sr_in, sr_out)
    return resample_poly(np.asarray(samples, dtype=np.float64), sr_out // g, sr_in // g)
