"""Command line front end for reference generation.

Contract: refgen --mixture in.wav --query "..." --n 4 --ratio 0.7
          --steps 25 --mode ddim_inversion --out refs.dgm1

Exit codes: 0 success, 2 bad configuration or usage, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, RefgenError
from .generate import MODES, RefGenRequest, baseline_generate_audio, generate_references


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="refgen",
        description="Generate reference mel spectrograms for a mixture and text query.",
    )
    p.add_argument("--mixture", required=True, help="input mixture WAV")
    p.add_argument("--query", required=True, help="text description of the target source")
    p.add_argument("--n", type=int, default=4, help="number of references")
    p.add_argument("--ratio", type=float, default=0.7, help="noising ratio in [0, 1]")
    p.add_argument("--steps", type=int, default=25, help="DDIM step count")
    p.add_argument("--mode", choices=MODES, default="ddim_inversion")
    p.add_argument("--out", required=True, help="output refset path (.dgm1)")
    p.add_argument("--backbone", default="spectral-prior-v1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--baseline-out",
        default=None,
        help="also vocode the first reference to this WAV path",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        request = RefGenRequest(
            mixture_path=args.mixture,
            query=args.query,
            n_refs=args.n,
            noising_ratio=args.ratio,
            ddim_steps=args.steps,
            mode=args.mode,
            seed=args.seed,
            backbone=args.backbone,
        )
        generate_references(request, args.out)
        if args.baseline_out is not None:
            baseline_generate_audio(request, args.baseline_out)
    except ConfigError as exc:
        print(f"refgen: {exc}", file=sys.stderr)
        return 2
    except (RefgenError, OSError) as exc:
        print(f"refgen: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
