"""Reference-set serialization and the oracle reference provider.

The on-disk format (extension .dgm1) is the interchange contract between
the separator and whatever produces its references:

    magic b"DGM1" | u32 LE header length | UTF-8 JSON header
    | count consecutive row-major float32 LE matrices

The JSON header carries the full mel and STFT configuration and is the
single source of truth for them: a reader builds its filterbank from the
header, never from local defaults, so loss-space geometry always matches
the producer. Files are written to a temp name and atomically renamed.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dsp import (
    MagnitudeSpectrogram,
    MelConfig,
    StftConfig,
    Waveform,
    build_mel_filterbank,
    magphase,
    stft,
)
from .errors import ConfigError, CorruptionError, FormatError, VersionError
from .masking import Mask, ReferenceSet

MAGIC = b"DGM1"
FORMAT_VERSION = 1
_KINDS = ("refset", "mask")


def _header_dict(kind: str, shape, count, domain, mel_config, stft_config, sample_rate, provenance):
    return {
        "version": FORMAT_VERSION,
        "kind": kind,
        "shape": [int(shape[0]), int(shape[1])],
        "count": int(count),
        "dtype": "f32le",
        "domain": domain,
        "sample_rate": int(sample_rate),
        "mel_config": asdict(mel_config) if mel_config is not None else None,
        "stft_config": asdict(stft_config),
        "provenance": dict(provenance),
    }


def _write_atomic(path: Path, header: dict, matrices: np.ndarray) -> None:
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)
            f.write(np.ascontiguousarray(matrices, dtype="<f4").tobytes())
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_header(f, path: Path) -> dict:
    magic = f.read(4)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    raw_len = f.read(4)
    if len(raw_len) != 4:
        raise CorruptionError(f"{path}: truncated before header length")
    (header_len,) = struct.unpack("<I", raw_len)
    raw = f.read(header_len)
    if len(raw) != header_len:
        raise CorruptionError(f"{path}: truncated header ({len(raw)} of {header_len} bytes)")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"{path}: header is not valid JSON: {exc}") from exc
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unknown format version {version!r}")
    if header.get("dtype") != "f32le":
        raise FormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    if header.get("kind") not in _KINDS:
        raise FormatError(f"{path}: unknown kind {header.get('kind')!r}")
    return header


def _read_payload(f, header: dict, path: Path) -> np.ndarray:
    n_rows, n_cols = header["shape"]
    count = header["count"]
    if n_rows < 1 or n_cols < 1 or count < 1:
        raise CorruptionError(f"{path}: non-positive shape/count in header")
    expected = count * n_rows * n_cols * 4
    raw = f.read(expected + 1)
    if len(raw) < expected:
        raise CorruptionError(
            f"{path}: payload holds {len(raw)} bytes, header declares {expected}"
        )
    if len(raw) > expected:
        raise CorruptionError(f"{path}: trailing bytes after declared payload")
    flat = np.frombuffer(raw[:expected], dtype="<f4")
    return flat.reshape(count, n_rows, n_cols).astype(np.float64)


# ---------------------------------------------------------------------------
# Reference sets
# ---------------------------------------------------------------------------


def write_refset(refs: ReferenceSet, path: str | Path) -> None:
    """Serialize a reference set; reading it back is bitwise identity.

    Payload precision is float32, so values are cast on write; a set
    loaded from disk always round-trips exactly.
    """
    path = Path(path)
    header = _header_dict(
        "refset",
        refs.mels.shape[1:],
        refs.count,
        refs.domain,
        refs.mel_config,
        refs.stft_config,
        refs.sample_rate,
        refs.provenance,
    )
    _write_atomic(path, header, refs.mels)


def read_refset(path: str | Path) -> ReferenceSet:
    """Load a reference set, validating structure before returning data."""
    path = Path(path)
    with open(path, "rb") as f:
        header = _read_header(f, path)
        if header["kind"] != "refset":
            raise FormatError(f"{path}: kind {header['kind']!r}, expected refset")
        if header.get("mel_config") is None:
            raise CorruptionError(f"{path}: refset header lacks mel_config")
        mels = _read_payload(f, header, path)
    return ReferenceSet(
        mels=mels,
        domain=header["domain"],
        mel_config=MelConfig(**header["mel_config"]),
        stft_config=StftConfig(**header["stft_config"]),
        sample_rate=header["sample_rate"],
        provenance=header.get("provenance", {}),
    )


# ---------------------------------------------------------------------------
# Single-matrix (mask) variant
# ---------------------------------------------------------------------------


def write_mask(
    mask: Mask,
    stft_config: StftConfig,
    sample_rate: int,
    path: str | Path,
    provenance: dict | None = None,
) -> None:
    """Store final mask values as a one-matrix file of the same format."""
    values = mask.values()
    header = _header_dict(
        "mask", values.shape, 1, "linear", None, stft_config, sample_rate, provenance or {}
    )
    _write_atomic(Path(path), header, values[None, :, :])


def read_mask(path: str | Path) -> tuple[np.ndarray, StftConfig, int]:
    """Load mask values plus the STFT geometry they apply to."""
    path = Path(path)
    with open(path, "rb") as f:
        header = _read_header(f, path)
        if header["kind"] != "mask":
            raise FormatError(f"{path}: kind {header['kind']!r}, expected mask")
        data = _read_payload(f, header, path)
    return data[0], StftConfig(**header["stft_config"]), header["sample_rate"]


# ---------------------------------------------------------------------------
# Oracle references
# ---------------------------------------------------------------------------


def oracle_refs(
    target: Waveform,
    mcfg: MelConfig,
    scfg: StftConfig,
    n: int = 4,
    jitter_db: float = 0.0,
    seed: int = 0,
    query: str = "",
) -> ReferenceSet:
    """Reference set built from the true target's own mel spectrogram.

    Each of the n copies is perturbed by multiplicative log-normal jitter
    with the given dB standard deviation (0 means exact copies). Stands
    in for a generative reference producer in tests and controls.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if jitter_db < 0:
        raise ConfigError(f"jitter_db must be >= 0, got {jitter_db}")
    mag, _ = magphase(stft(target, scfg))
    fb = build_mel_filterbank(mcfg, scfg, target.sample_rate)
    lin = fb.weights @ mag.values

    stack = np.broadcast_to(lin, (n,) + lin.shape).copy()
    if jitter_db > 0:
        rng = np.random.default_rng(seed)
        sigma = jitter_db * np.log(10.0) / 20.0
        stack *= np.exp(rng.normal(0.0, sigma, size=stack.shape))

    domain = mcfg.loss_domain
    if domain == "log":
        stack = np.log(np.maximum(stack, mcfg.log_floor))
    return ReferenceSet(
        mels=stack,
        domain=domain,
        mel_config=mcfg.resolved(target.sample_rate),
        stft_config=scfg,
        sample_rate=target.sample_rate,
        provenance={
            "query": query,
            "backend_id": "oracle",
            "noising_ratio": 0.0,
            "ddim_steps": 0,
            "created_by": "oracle",
        },
    )
