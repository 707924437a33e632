"""Reference providers for the mask optimizer.

A provider is a callable (estimate, iteration) -> ReferenceSet. The
optimizer calls it once per iteration; from the second iteration on it
passes the current reconstruction so generative producers can condition
on the refined signal. File and oracle providers are static and return
the same set every time.
"""

from __future__ import annotations

import shlex
import subprocess
from pathlib import Path

from .audio_io import save_waveform
from .dsp import MelConfig, StftConfig, Waveform
from .errors import ConfigError, OptimizationError
from .masking import ReferenceSet
from .refio import oracle_refs, read_refset


class FileRefProvider:
    """Serves one reference set loaded from a .dgm1 file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._refs = read_refset(self.path)

    @property
    def refs(self) -> ReferenceSet:
        return self._refs

    def __call__(self, estimate: Waveform | None, iteration: int) -> ReferenceSet:
        return self._refs


class OracleRefProvider:
    """Serves references computed from the true target signal.

    The truth waveform must already be at the scale the target has
    inside the processed mixture (same padding, multiplied by the
    mixture's normalization gain), so the references live in the same
    loss space as the masked mixture.
    """

    def __init__(
        self,
        truth: Waveform,
        mcfg: MelConfig,
        scfg: StftConfig,
        n: int = 4,
        jitter_db: float = 0.0,
        seed: int = 0,
        query: str = "",
    ):
        self._refs = oracle_refs(truth, mcfg, scfg, n=n, jitter_db=jitter_db, seed=seed, query=query)

    @property
    def refs(self) -> ReferenceSet:
        return self._refs

    def __call__(self, estimate: Waveform | None, iteration: int) -> ReferenceSet:
        return self._refs


class ExecRefProvider:
    """Shells out to an external reference generator per iteration.

    The executable contract:
        <bin> --mixture <wav> --query <text> --n <count>
              --ratio <r> --steps <k> --mode <mode> --out <file.dgm1>
    exit 0 on success, diagnostics on stderr. The first call passes the
    processed mixture; later calls write the current estimate to a WAV
    and pass that instead, so the generator re-inverts the refined
    signal.
    """

    def __init__(
        self,
        bin_cmd: str,
        mixture_path: str | Path,
        query: str,
        out_dir: str | Path,
        n: int = 4,
        ratio: float = 0.7,
        steps: int = 25,
        mode: str = "ddim_inversion",
        timeout_s: float = 600.0,
    ):
        if not bin_cmd:
            raise ConfigError(
                "diffusion-exec provider needs the generator executable "
                "(--refgen-bin or DGMO_REFGEN_BIN)"
            )
        self.argv = shlex.split(bin_cmd)
        self.mixture_path = Path(mixture_path)
        self.query = query
        self.out_dir = Path(out_dir)
        self.n = n
        self.ratio = ratio
        self.steps = steps
        self.mode = mode
        self.timeout_s = timeout_s

    def __call__(self, estimate: Waveform | None, iteration: int) -> ReferenceSet:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if estimate is None:
            wav_path = self.mixture_path
        else:
            wav_path = self.out_dir / f"refgen_input_iter{iteration}.wav"
            save_waveform(wav_path, estimate)
        out_path = self.out_dir / f"refs_iter{iteration}.dgm1"
        cmd = self.argv + [
            "--mixture", str(wav_path),
            "--query", self.query,
            "--n", str(self.n),
            "--ratio", str(self.ratio),
            "--steps", str(self.steps),
            "--mode", self.mode,
            "--out", str(out_path),
        ]
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True, timeout=self.timeout_s
            )
        except FileNotFoundError as exc:
            raise ConfigError(f"reference generator not found: {self.argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise OptimizationError(
                f"reference generator timed out after {self.timeout_s}s"
            ) from exc
        if proc.returncode != 0:
            raise OptimizationError(
                f"reference generator exited {proc.returncode}: {proc.stderr.strip()}"
            )
        return read_refset(out_path)
