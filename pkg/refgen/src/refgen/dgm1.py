"""Writer for the DGM1 reference-set container.

Layout: magic b"DGM1", u32 LE header length, UTF-8 JSON header
(sorted keys), then `count` row-major float32 LE matrices. The header
carries the full mel and STFT configuration so readers can rebuild the
exact loss-space geometry without out-of-band agreements.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = b"DGM1"
FORMAT_VERSION = 1


def refset_header(shape: tuple[int, int], count: int, domain: str,
                  sample_rate: int, mel_config: dict, stft_config: dict,
                  provenance: dict) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": "refset",
        "shape": [int(shape[0]), int(shape[1])],
        "count": int(count),
        "dtype": "f32le",
        "domain": domain,
        "sample_rate": int(sample_rate),
        "mel_config": dict(mel_config),
        "stft_config": dict(stft_config),
        "provenance": dict(provenance),
    }


def write_refset(path, mels: np.ndarray, header: dict) -> None:
    """Atomically write a (count, n_mels, frames) stack with its header."""
    if mels.ndim != 3:
        raise ConfigError(f"expected a 3d reference stack, got shape {mels.shape}")
    if list(mels.shape[1:]) != header["shape"] or mels.shape[0] != header["count"]:
        raise ConfigError("header shape/count do not match the data")
    path = Path(path)
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)
            f.write(np.ascontiguousarray(mels, dtype="<f4").tobytes())
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_refset(path) -> tuple[np.ndarray, dict]:
    """Read back (mels float64, header). Validation mirrors the writer."""
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ConfigError(f"{path}: not a DGM1 file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        n_rows, n_cols = header["shape"]
        count = header["count"]
        raw = f.read(count * n_rows * n_cols * 4 + 1)
    expected = count * n_rows * n_cols * 4
    if len(raw) != expected:
        raise ConfigError(f"{path}: payload size mismatch")
    mels = np.frombuffer(raw, dtype="<f4").reshape(count, n_rows, n_cols)
    return mels.astype(np.float64), header
