"""Deterministic DDIM traversal: invert a latent part-way, sample back.

Partial inversion runs the probability-flow recursion forward through a
prefix of the step grid under null conditioning, so the endpoint encodes
the input rather than fresh noise. Sampling retraces the same grid
downward under the query prior. A noising ratio of 0 makes both loops
empty and the round trip is the identity, bitwise.
"""

from __future__ import annotations

import numpy as np

from .backbones import GaussianPrior, SpectralPriorBackbone
from .schedule import DiffusionSchedule


def eps_from_x0(z_t: np.ndarray, x0: np.ndarray, abar: float) -> np.ndarray:
    """Noise implied by a clean estimate at level abar; zero at abar = 1."""
    if abar >= 1.0:
        return np.zeros_like(z_t)
    return (z_t - np.sqrt(abar) * x0) / np.sqrt(1.0 - abar)


def _step(
    z: np.ndarray,
    abar_from: float,
    abar_to: float,
    backbone: SpectralPriorBackbone,
    prior: GaussianPrior,
) -> np.ndarray:
    """One deterministic move between noise levels along the flow."""
    x0 = backbone.denoise(z, abar_from, prior)
    eps = eps_from_x0(z, x0, abar_from)
    return np.sqrt(abar_to) * x0 + np.sqrt(1.0 - abar_to) * eps


def ddim_invert(
    z0: np.ndarray,
    schedule: DiffusionSchedule,
    backbone: SpectralPriorBackbone,
) -> np.ndarray:
    """Carry a clean latent up to the schedule's partial-noise endpoint."""
    grid = schedule.grid()
    prior = backbone.prior(None)
    z = z0
    prev_t = -1
    for t in grid[: schedule.prefix_len()]:
        z = _step(z, schedule.abar(prev_t), schedule.abar(t), backbone, prior)
        prev_t = t
    return z


def ddim_sample(
    z_t: np.ndarray,
    schedule: DiffusionSchedule,
    backbone: SpectralPriorBackbone,
    prior: GaussianPrior,
) -> np.ndarray:
    """Walk the noised latent back down the grid; final step returns x0."""
    grid = schedule.grid()
    n = schedule.prefix_len()
    z = z_t
    for i in range(n - 1, -1, -1):
        t = grid[i]
        t_prev = grid[i - 1] if i > 0 else -1
        if t_prev == -1:
            z = backbone.denoise(z, schedule.abar(t), prior)
        else:
            z = _step(z, schedule.abar(t), schedule.abar(t_prev), backbone, prior)
    return z


def noise_latent(
    z0: np.ndarray, abar: float, rng: np.random.Generator
) -> np.ndarray:
    """Forward-process corruption to level abar with drawn Gaussian noise."""
    eps = rng.standard_normal(z0.shape)
    return np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps
