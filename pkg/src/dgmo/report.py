"""Figure rendering for separation and evaluation reports.

Every figure lands next to the delimited output it illustrates, so a run
directory is self-describing: CSV for machines, PNG for eyes. Uses the
Agg backend; safe on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_figure(loss_trace: list[list[float]], path: str | Path) -> Path:
    """Per-iteration loss curves on a log scale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    offset = 0
    for it, losses in enumerate(loss_trace, start=1):
        xs = np.arange(offset, offset + len(losses))
        ax.plot(xs, losses, label=f"iteration {it}")
        offset += len(losses) - 1
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("mask optimization loss")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_mask_figure(mask_values: np.ndarray, path: str | Path, sample_rate: int = 16000, hop_length: int = 160) -> Path:
    """Final mask as a time-frequency heat map."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_bins, n_frames = mask_values.shape
    fig, ax = plt.subplots(figsize=(8, 4))
    extent = (0, n_frames * hop_length / sample_rate, 0, sample_rate / 2 / 1000)
    im = ax.imshow(
        mask_values, origin="lower", aspect="auto", extent=extent, vmin=0, vmax=1, cmap="magma"
    )
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frequency [kHz]")
    ax.set_title("optimized mask")
    fig.colorbar(im, ax=ax, label="gain")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_mel_figure(panels: dict[str, np.ndarray], path: str | Path, domain: str = "log") -> Path:
    """Stacked mel panels (e.g. mixture, masked estimate, mean reference)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(panels)
    fig, axes = plt.subplots(n, 1, figsize=(8, 2.6 * n), squeeze=False)
    for ax, (label, mel) in zip(axes[:, 0], panels.items()):
        shown = mel if domain == "log" else np.log(np.maximum(mel, 1e-10))
        im = ax.imshow(shown, origin="lower", aspect="auto", cmap="magma")
        ax.set_ylabel("mel band")
        ax.set_title(label, fontsize=9)
        fig.colorbar(im, ax=ax)
    axes[-1, 0].set_xlabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_eval_figure(rows: list[dict], path: str | Path) -> Path:
    """Per-item SI-SDR and SDRi bars from an evaluation report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ids = [str(r["id"]) for r in rows]
    x = np.arange(len(ids))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(ids) + 2), 4))
    ax.bar(x - width / 2, [r["si_sdr"] for r in rows], width, label="SI-SDR")
    ax.bar(x + width / 2, [r["sdri"] for r in rows], width, label="SDRi")
    ax.set_xticks(x)
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("dB")
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.legend()
    ax.set_title("separation quality per item")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
