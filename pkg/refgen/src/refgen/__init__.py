"""Diffusion-style reference generator for language-queried separation.

Produces refset files a separation front end can consume: encode the
mixture to a log-mel latent, partially invert it along a DDIM grid,
sample back under a query-conditioned prior, and write the resulting
mel stack with a self-describing header.
"""

from .errors import ConfigError, GenerationError, RefgenError
from .generate import RefGenRequest, baseline_generate_audio, generate_references
from .schedule import DiffusionSchedule

__all__ = [
    "ConfigError",
    "DiffusionSchedule",
    "GenerationError",
    "RefGenRequest",
    "RefgenError",
    "baseline_generate_audio",
    "generate_references",
]
