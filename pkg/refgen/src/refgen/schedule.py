"""Diffusion noise schedule and the DDIM step grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TOTAL_STEPS = 1000
BETA_START = 0.00085
BETA_END = 0.012


def _scaled_linear_alphas_cumprod(total_steps: int) -> np.ndarray:
    betas = np.linspace(BETA_START**0.5, BETA_END**0.5, total_steps) ** 2
    return np.cumprod(1.0 - betas)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise levels plus the coarse step grid a DDIM traversal uses.

    ``noising_ratio`` is the fraction of the trajectory actually walked:
    inversion stops at step floor(ratio * ddim_steps) of the grid, and
    sampling retraces exactly that prefix.
    """

    total_steps: int = TOTAL_STEPS
    ddim_steps: int = 25
    noising_ratio: float = 0.7
    alphas_cumprod: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be positive, got {self.total_steps}")
        if not 1 <= self.ddim_steps <= self.total_steps:
            raise ConfigError(
                f"ddim_steps must be in [1, {self.total_steps}], got {self.ddim_steps}"
            )
        if not 0.0 <= self.noising_ratio <= 1.0:
            raise ConfigError(
                f"noising_ratio must be in [0, 1], got {self.noising_ratio}"
            )
        if self.alphas_cumprod is None:
            object.__setattr__(
                self, "alphas_cumprod", _scaled_linear_alphas_cumprod(self.total_steps)
            )
        abar = self.alphas_cumprod
        if len(abar) != self.total_steps or np.any(np.diff(abar) >= 0):
            raise ConfigError("alphas_cumprod must decrease strictly over total_steps")

    def grid(self) -> np.ndarray:
        """Timesteps t_i = i * (T // steps) - 1 for i = 1..ddim_steps."""
        stride = self.total_steps // self.ddim_steps
        return np.arange(1, self.ddim_steps + 1) * stride - 1

    def prefix_len(self) -> int:
        """How many grid steps the configured ratio traverses."""
        return int(np.floor(self.noising_ratio * self.ddim_steps))

    def abar(self, t: int) -> float:
        """Cumulative alpha at timestep t; t = -1 means the clean point."""
        if t < 0:
            return 1.0
        return float(self.alphas_cumprod[t])
