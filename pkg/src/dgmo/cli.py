"""Command-line interface.

Commands:
    mix       materialize evaluation mixtures from a JSON manifest
    separate  run query-guided mask separation on one mixture
    eval      score estimate directories against truth directories
    selftest  run built-in numerical sanity checks

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
error. Every command is deterministic given its config and seeds; the
meta.json written next to each output is enough to reproduce it.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from .audio_io import load_waveform, save_waveform
from .dsp import (
    DEFAULT_DURATION_S,
    DEFAULT_SAMPLE_RATE,
    MagnitudeSpectrogram,
    MelConfig,
    StftConfig,
    Waveform,
    apply_mel,
    build_mel_filterbank,
    magphase,
    pad_and_normalize,
    stft,
)
from .errors import ConfigError, ContractError, DgmoError
from .masking import OptimizerConfig, optimize_mask
from .metrics import evaluate, strip_padding
from .mixkit import load_manifest, materialize_row
from .providers import ExecRefProvider, FileRefProvider, OracleRefProvider
from .refio import write_mask

_USAGE_ERRORS = (ConfigError, ContractError)


def _fail(exc: Exception) -> "NoReturn":  # noqa: F821
    click.echo(f"error: {exc}", err=True)
    sys.exit(2 if isinstance(exc, _USAGE_ERRORS) else 1)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _merge(config: dict, **flags):
    """Flags override config-file keys; None means 'not given'."""
    merged = dict(config)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


@click.group()
def main():
    """Query-guided audio source separation by spectrogram mask optimization."""


# ---------------------------------------------------------------------------
# mix
# ---------------------------------------------------------------------------


@main.command("mix")
@click.argument("manifest", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--jobs", type=int, default=1, help="Accepted for interface compatibility; rows are processed serially.")
def cmd_mix(manifest, out_dir, jobs):
    """Materialize mixtures listed in MANIFEST under OUT_DIR.

    Each row becomes <out>/<id>/{mixture,target,background}.wav plus
    meta.json. Deterministic given the manifest's seeds.
    """
    try:
        rows = load_manifest(manifest)
    except Exception as exc:
        _fail(exc)
    failures = []
    for row in rows:
        try:
            item = materialize_row(row, Path(manifest).parent, Path(out_dir))
            click.echo(f"{row['id']}: {item}")
        except Exception as exc:
            failures.append((row.get("id", "?"), str(exc)))
    for rid, msg in failures:
        click.echo(f"{rid}: ERROR {msg}", err=True)
    if failures:
        sys.exit(1)
    click.echo(f"wrote {len(rows)} mixture(s) to {out_dir}")


# ---------------------------------------------------------------------------
# separate
# ---------------------------------------------------------------------------


@main.command("separate")
@click.option("--mixture", required=True, type=click.Path(), help="Input mixture WAV.")
@click.option("--query", default="", help="Text query naming the source to extract.")
@click.option("--refs", type=click.Path(), default=None, help="Reference .dgm1 file (file provider).")
@click.option("--provider", type=click.Choice(["file", "oracle", "diffusion-exec"]), default=None,
              help="Reference source (default: file when --refs is given, else oracle).")
@click.option("--refgen-bin", envvar="DGMO_REFGEN_BIN", default=None,
              help="Reference generator command for provider=diffusion-exec (env DGMO_REFGEN_BIN).")
@click.option("--truth", type=click.Path(), default=None,
              help="True target WAV for provider=oracle (default: target.wav next to the mixture).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file; flags override it.")
@click.option("--seed", type=int, default=None)
@click.option("--lr", type=float, default=None, help="Learning rate on mask logits.")
@click.option("--epochs", type=int, default=None, help="Gradient steps per iteration.")
@click.option("--iterations", type=int, default=None, help="Provider rounds.")
@click.option("--n-refs", type=int, default=None, help="References per set.")
@click.option("--loss-domain", type=click.Choice(["log", "linear"]), default=None)
@click.option("--method", type=click.Choice(["adam", "gd"]), default=None, help="Optimizer step rule.")
@click.option("--mask-init", type=click.Choice(["half", "ones"]), default=None)
@click.option("--jitter-db", type=float, default=None, help="Oracle reference jitter (dB stddev).")
@click.option("--duration-s", type=float, default=None, help="Working duration for provider=oracle.")
@click.option("--ratio", type=float, default=None, help="Noising step ratio for provider=diffusion-exec.")
@click.option("--steps", type=int, default=None, help="Sampler steps for provider=diffusion-exec.")
@click.option("--mode", type=click.Choice(["ddim_inversion", "random_noise"]), default=None,
              help="Noising mode for provider=diffusion-exec.")
@click.option("--figures/--no-figures", default=True, help="Render report figures next to the CSV.")
@click.option("--jobs", type=int, default=1, hidden=True)
def cmd_separate(mixture, query, refs, provider, refgen_bin, truth, out, config_path,
                 seed, lr, epochs, iterations, n_refs, loss_domain, method, mask_init,
                 jitter_db, duration_s, ratio, steps, mode, figures, jobs):
    """Separate the queried source from --mixture into --out.

    Writes estimate.wav, mask.dgm1, loss_trace.csv, meta.json, and (by
    default) figures/. The reference chain's mel and STFT geometry is
    taken from the reference header when one exists; configuration
    mismatches are hard errors.
    """
    try:
        cfg = _merge(
            _load_config_file(config_path),
            mixture=mixture, query=query or None, refs=refs, provider=provider,
            refgen_bin=refgen_bin, truth=truth, seed=seed, lr=lr, epochs=epochs,
            iterations=iterations, n_refs=n_refs, loss_domain=loss_domain,
            method=method, mask_init=mask_init, jitter_db=jitter_db,
            duration_s=duration_s, ratio=ratio, steps=steps, mode=mode,
        )
        _separate(cfg, Path(out), figures)
    except Exception as exc:
        _fail(exc)


def _separate(cfg: dict, out_dir: Path, figures: bool) -> None:
    mixture_path = Path(cfg["mixture"])
    if not mixture_path.exists():
        raise FileNotFoundError(f"mixture not found: {mixture_path}")
    provider_name = cfg.get("provider") or ("file" if cfg.get("refs") else "oracle")
    query = cfg.get("query", "")
    out_dir.mkdir(parents=True, exist_ok=True)

    ocfg = OptimizerConfig(
        learning_rate=float(cfg.get("lr", 0.1)),
        epochs_per_iteration=int(cfg.get("epochs", 300)),
        iterations=int(cfg.get("iterations", 2)),
        n_refs=int(cfg.get("n_refs", 4)),
        loss_domain=cfg.get("loss_domain"),
        mask_init=cfg.get("mask_init", "half"),
        seed=int(cfg.get("seed", 0)),
        method=cfg.get("method", "adam"),
    )

    # Resolve the processing geometry. Reference headers win; the oracle
    # path has no header and uses the library defaults.
    if provider_name == "file":
        if not cfg.get("refs"):
            raise ConfigError("provider=file requires --refs")
        ref_provider = FileRefProvider(cfg["refs"])
        first_refs = ref_provider.refs
    elif provider_name == "diffusion-exec":
        exec_provider = ExecRefProvider(
            bin_cmd=cfg.get("refgen_bin") or "",
            mixture_path=mixture_path,
            query=query,
            out_dir=out_dir / "refs",
            n=ocfg.n_refs,
            ratio=float(cfg.get("ratio", 0.7)),
            steps=int(cfg.get("steps", 25)),
            mode=cfg.get("mode", "ddim_inversion"),
        )
        first_refs = exec_provider(None, 1)

        def ref_provider(estimate, iteration, _first=first_refs, _inner=exec_provider):
            return _first if iteration == 1 else _inner(estimate, iteration)
    elif provider_name == "oracle":
        first_refs = None
        ref_provider = None
    else:
        raise ConfigError(f"unknown provider {provider_name!r}")

    if first_refs is not None:
        scfg = first_refs.stft_config
        mcfg = first_refs.mel_config
        sr = first_refs.sample_rate
        n_frames = first_refs.mels.shape[2]
        pad_len = (n_frames - 1) * scfg.hop_length
        if pad_len < 1:
            raise ContractError("reference set spans less than one hop of audio")
    else:
        scfg = StftConfig()
        domain = cfg.get("loss_domain") or "log"
        mcfg = MelConfig(loss_domain=domain)
        sr = DEFAULT_SAMPLE_RATE
        pad_len = round(float(cfg.get("duration_s", DEFAULT_DURATION_S)) * sr)

    mix = load_waveform(mixture_path, target_sr=sr)
    original_len = len(mix)
    processed = pad_and_normalize(mix, duration_s=pad_len / sr, peak=1.0)
    gain = processed.gain_applied
    mag, phase = magphase(stft(processed, scfg))
    fb = build_mel_filterbank(mcfg, scfg, sr)

    if provider_name == "oracle":
        truth_path = Path(cfg["truth"]) if cfg.get("truth") else mixture_path.parent / "target.wav"
        if not truth_path.exists():
            raise ConfigError(f"provider=oracle needs the true target; not found: {truth_path}")
        truth = load_waveform(truth_path, target_sr=sr)
        truth_padded = pad_and_normalize(truth, duration_s=pad_len / sr, peak=None)
        # Scale the truth exactly as the mixture was scaled so the
        # references live at the target's in-mixture level.
        truth_scaled = Waveform(truth_padded.samples * gain, sr)
        ref_provider = OracleRefProvider(
            truth_scaled, mcfg, scfg, n=ocfg.n_refs,
            jitter_db=float(cfg.get("jitter_db", 0.0)), seed=ocfg.seed, query=query,
        )

    recorded: dict = {"last": None}

    def recording_provider(estimate, iteration):
        recorded["last"] = ref_provider(estimate, iteration)
        return recorded["last"]

    result = optimize_mask(
        mag, phase, recording_provider, ocfg,
        fb=fb, out_len=pad_len, sample_rate=sr, gain_applied=gain,
    )

    est_path = out_dir / "estimate.wav"
    save_waveform(est_path, result.waveform)
    write_mask(result.final_mask, scfg, sr, out_dir / "mask.dgm1",
               provenance={"query": query, "created_by": provider_name})

    trace_path = out_dir / "loss_trace.csv"
    with open(trace_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "iteration", "loss"])
        for epoch, iteration, loss in result.trace_rows():
            writer.writerow([epoch, iteration, repr(loss)])

    meta = {
        "mixture": str(mixture_path),
        "query": query,
        "provider": provider_name,
        "sample_rate": sr,
        "original_len": original_len,
        "padded_len": pad_len,
        "normalization_gain": gain,
        "stft_config": asdict(scfg),
        "mel_config": asdict(mcfg),
        "optimizer_config": asdict(ocfg),
        "provider_args": {
            "refs": cfg.get("refs"),
            "truth": cfg.get("truth"),
            "jitter_db": float(cfg.get("jitter_db", 0.0)),
            "refgen_bin": cfg.get("refgen_bin"),
            "ratio": float(cfg.get("ratio", 0.7)),
            "steps": int(cfg.get("steps", 25)),
            "mode": cfg.get("mode", "ddim_inversion"),
        },
        "outputs": ["estimate.wav", "mask.dgm1", "loss_trace.csv"],
        "final_loss": result.final_loss,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    if figures:
        # matplotlib costs most of a second to import; load it only on
        # the path that actually draws
        from . import report

        fig_dir = out_dir / "figures"
        report.save_loss_figure(result.loss_trace, fig_dir / "loss_curve.png")
        report.save_mask_figure(result.final_mask.values(), fig_dir / "mask.png",
                                sample_rate=sr, hop_length=scfg.hop_length)
        refs_last = recorded["last"]
        masked = MagnitudeSpectrogram(mag.values * result.final_mask.values(), scfg)
        panels = {
            "mixture mel": apply_mel(mag, fb, refs_last.domain).values,
            "masked estimate mel": apply_mel(masked, fb, refs_last.domain).values,
            "mean reference mel": refs_last.mean_mel,
        }
        report.save_mel_figure(panels, fig_dir / "mels.png", domain=refs_last.domain)

    click.echo(f"estimate: {est_path} (final loss {result.final_loss:.6g})")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


@main.command("eval")
@click.argument("est_dir", type=click.Path())
@click.argument("truth_dir", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Report directory (default: EST_DIR).")
@click.option("--figures/--no-figures", default=True)
@click.option("--jobs", type=int, default=1, hidden=True)
def cmd_eval(est_dir, truth_dir, out, figures, jobs):
    """Score estimates in EST_DIR against truths in TRUTH_DIR.

    TRUTH_DIR holds one directory per item with target.wav and
    mixture.wav (the mix command's layout); estimates are found at
    EST_DIR/<id>/estimate.wav or EST_DIR/<id>.wav. Writes
    eval_report.csv with per-item rows plus a MEAN row.
    """
    est_root = Path(est_dir)
    truth_root = Path(truth_dir)
    out_root = Path(out) if out else est_root
    try:
        if not truth_root.is_dir():
            raise FileNotFoundError(f"truth directory not found: {truth_root}")
        rows, errors = _eval_items(est_root, truth_root)
        if not rows and not errors:
            raise ConfigError(f"no items with target.wav found under {truth_root}")
        out_root.mkdir(parents=True, exist_ok=True)
        _write_eval_report(rows, out_root)
        if figures and rows:
            from . import report

            report.save_eval_figure(rows, out_root / "eval_report.png")
    except Exception as exc:
        _fail(exc)
    for msg in errors:
        click.echo(f"ERROR {msg}", err=True)
    if errors:
        (out_root / "eval_errors.txt").write_text("\n".join(errors) + "\n")
        sys.exit(1)
    mean_sdri = float(np.mean([r["sdri"] for r in rows]))
    click.echo(f"evaluated {len(rows)} item(s); mean SDRi {mean_sdri:.3f} dB")


def _eval_items(est_root: Path, truth_root: Path):
    rows, errors = [], []
    for item in sorted(p for p in truth_root.iterdir() if (p / "target.wav").exists()):
        rid = item.name
        est_path = est_root / rid / "estimate.wav"
        if not est_path.exists():
            est_path = est_root / f"{rid}.wav"
        mix_path = item / "mixture.wav"
        if not est_path.exists():
            errors.append(f"{rid}: no estimate at {est_root / rid / 'estimate.wav'} or {est_root / (rid + '.wav')}")
            continue
        if not mix_path.exists():
            errors.append(f"{rid}: missing {mix_path}")
            continue
        truth = load_waveform(item / "target.wav")
        mix = load_waveform(mix_path, target_sr=truth.sample_rate)
        est = load_waveform(est_path, target_sr=truth.sample_rate)
        scores = evaluate(
            strip_padding(est, len(truth)), truth, strip_padding(mix, len(truth))
        )
        query = ""
        meta_path = item / "meta.json"
        if meta_path.exists():
            try:
                query = json.loads(meta_path.read_text()).get("query", "")
            except json.JSONDecodeError:
                pass
        rows.append({"id": rid, "query": query, **scores})
    return rows, errors


def _write_eval_report(rows: list[dict], out_root: Path) -> None:
    with open(out_root / "eval_report.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "query", "si_sdr", "sdr", "sdri"])
        for r in rows:
            writer.writerow([r["id"], r["query"], f"{r['si_sdr']:.6f}", f"{r['sdr']:.6f}", f"{r['sdri']:.6f}"])
        if rows:
            writer.writerow([
                "MEAN", "",
                f"{np.mean([r['si_sdr'] for r in rows]):.6f}",
                f"{np.mean([r['sdr'] for r in rows]):.6f}",
                f"{np.mean([r['sdri'] for r in rows]):.6f}",
            ])


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


@main.command("selftest")
@click.option("--inject-failure", is_flag=True, hidden=True,
              help="Force one failing row (exercises the failure path).")
def cmd_selftest(inject_failure):
    """Run built-in numerical sanity checks and print a pass/fail table."""
    from .selfcheck import run_all

    try:
        results = run_all(inject_failure=inject_failure)
    except Exception as exc:
        _fail(exc)
    width = max(len(r.name) for r in results)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        all_ok &= r.passed
        click.echo(f"{r.name:<{width}}  {status}  {r.detail}")
    if not all_ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
