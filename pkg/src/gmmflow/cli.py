"""Command-line interface: verify, sample, compare, roc, critical-steps.

All result files are written atomically (temp file + rename) so an
interrupted run never leaves truncated outputs.  Given the same config and
seed, result files are byte-identical across runs and thread counts, with
the sole exception of measured wall-time fields (the ``wall_time`` CSV
column and ``mean_wall_time`` JSON entries).
"""

import dataclasses
import functools
import json
import os
import sys
import tempfile

import click
import numpy as np

from . import harness
from .config import ConfigError, ExperimentConfig, load_config
from .harness import (
    LabelRule,
    build_detection_report,
    critical_step_map,
    draw_chain_inits,
    label_endpoint,
    roc_sweep,
    run_chains,
    run_paired_experiment,
    select_threshold,
)
from .oracles import oracle_from_gmm, oracle_with_perturbation
from .sampling import trajectory_jsonl
from .verify import SUITES, run_suites


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _handle_config_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            raise click.UsageError(f"config error: {exc}")

    return wrapper


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="Experiment config JSON.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the config's master seed.")(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True,
                      help="Worker processes for chain execution.")(fn)
    fn = click.option("--output-dir", type=click.Path(file_okay=False), default=None,
                      help="Override the config's output directory.")(fn)
    return fn


def _load(config_path: str, seed, output_dir) -> ExperimentConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg.master_seed = int(seed)
    if output_dir is not None:
        cfg.output_dir = output_dir
    return cfg


def _oracle(cfg: ExperimentConfig):
    oracle = oracle_from_gmm(cfg.gmm)
    if cfg.perturbation is not None:
        oracle = oracle_with_perturbation(oracle, cfg.perturbation)
    return oracle


def _label_rule(cfg: ExperimentConfig) -> LabelRule:
    rule = cfg.label_rule
    if rule.kind == "neg_log_p0_quantile":
        rule = rule.calibrate(cfg.gmm, cfg.calibration_draws, cfg.calibration_seed)
    return rule


def _detection_run(cfg: ExperimentConfig, threads: int):
    """Probe-only run: the configured robust sampler with an unreachable
    threshold, so trajectories match the Euler baseline while recording the
    curvature index."""
    if cfg.sampler.method not in ("rods_sas", "rods_cas"):
        raise ConfigError(
            "sampler.method: detection commands need a rods_* method "
            f"(got {cfg.sampler.method!r})"
        )
    detect_cfg = dataclasses.replace(cfg.sampler, epsilon=float("inf"))
    schedule = cfg.schedule.build()
    inits = draw_chain_inits(cfg.gmm.dim, schedule.times[0], cfg.n_chains, cfg.master_seed)
    oracle = _oracle(cfg)
    records = run_chains(oracle, schedule, detect_cfg, inits, threads)
    rule = _label_rule(cfg)
    labels = np.array([label_endpoint(cfg.gmm, r.endpoint, rule) for r in records])
    return records, labels


@click.group()
def main():
    """Mixture-target diffusion sampling with curvature-triggered robust updates."""


@main.command()
@click.option("--filter", "suite_filter", type=click.Choice(SUITES), default=None,
              help="Run a single verification suite.")
@click.option("--seed", type=int, default=None, help="Accepted for interface "
              "parity; the suites run at fixed internal seeds.")
@click.option("--threads", type=int, default=1, help="Accepted for interface parity.")
@click.option("--output-dir", type=click.Path(file_okay=False), default="out")
def verify(suite_filter, seed, threads, output_dir):
    """Run the numerical identity suites and report pass/fail per property."""
    names = [suite_filter] if suite_filter else None
    results = run_suites(names)
    for res in results:
        click.echo(res.summary())
    report = {
        "all_passed": all(r.passed for r in results),
        "results": [dataclasses.asdict(r) for r in results],
    }
    _atomic_write(os.path.join(output_dir, "verify_report.json"), _json_text(report))
    if not report["all_passed"]:
        failing = ", ".join(r.name for r in results if not r.passed)
        click.echo(f"verification failed: {failing}", err=True)
        sys.exit(1)


@main.command()
@_common_options
@_handle_config_errors
def sample(config_path, seed, threads, output_dir):
    """Run the configured sampler; write one JSONL trajectory per chain."""
    cfg = _load(config_path, seed, output_dir)
    schedule = cfg.schedule.build()
    oracle = _oracle(cfg)
    inits = draw_chain_inits(cfg.gmm.dim, schedule.times[0], cfg.n_chains, cfg.master_seed)
    records = run_chains(oracle, schedule, cfg.sampler, inits, threads)
    for i, rec in enumerate(records):
        path = os.path.join(cfg.output_dir, "trajectories", f"chain_{i:04d}.jsonl")
        _atomic_write(path, trajectory_jsonl(rec))
    _atomic_write(
        os.path.join(cfg.output_dir, "endpoints.csv"),
        harness.endpoint_csv(records, cfg.gmm),
    )
    click.echo(f"sampled {cfg.n_chains} chains with {cfg.sampler.method} "
               f"-> {cfg.output_dir}")


@main.command()
@_common_options
@_handle_config_errors
def compare(config_path, seed, threads, output_dir):
    """Paired baseline-vs-treatment run from identical inits."""
    cfg = _load(config_path, seed, output_dir)
    result = run_paired_experiment(
        cfg.gmm,
        _oracle(cfg),
        cfg.schedule.build(),
        cfg.baseline_sampler,
        cfg.sampler,
        _label_rule(cfg),
        cfg.n_chains,
        cfg.master_seed,
        threads=threads,
    )
    metrics = {
        "baseline": {"method": cfg.baseline_sampler.method, **result.baseline.to_json_dict()},
        "treatment": {"method": cfg.sampler.method, **result.treatment.to_json_dict()},
        "n_chains": cfg.n_chains,
        "master_seed": cfg.master_seed,
    }
    _atomic_write(os.path.join(cfg.output_dir, "metrics.json"), _json_text(metrics))
    _atomic_write(os.path.join(cfg.output_dir, "pairs.csv"), harness.pairs_csv(result.pairs))
    click.echo(
        f"compare {cfg.baseline_sampler.method} vs {cfg.sampler.method}: "
        f"hallucination {result.baseline.hallucination_rate:.4f} -> "
        f"{result.treatment.hallucination_rate:.4f}, "
        f"correction {result.treatment.correction_rate:.4f}, "
        f"new {result.treatment.new_hallucination_rate:.4f}"
    )


@main.command()
@_common_options
@_handle_config_errors
def roc(config_path, seed, threads, output_dir):
    """Detection threshold sweep; writes the ROC CSV and a detection report
    at the selected operating threshold."""
    cfg = _load(config_path, seed, output_dir)
    records, labels = _detection_run(cfg, threads)
    thresholds = (
        np.asarray(cfg.thresholds, dtype=float)
        if cfg.thresholds is not None
        else harness.default_threshold_grid(records)
    )
    curve = roc_sweep(records, labels, thresholds)
    epsilon = select_threshold(curve)
    report = build_detection_report(records, labels, epsilon)
    doc = {
        "selected_threshold": epsilon,
        "degenerate_labels": curve.degenerate,
        **report.to_json_dict(),
    }
    _atomic_write(os.path.join(cfg.output_dir, "roc.csv"), harness.roc_csv(curve))
    _atomic_write(os.path.join(cfg.output_dir, "detection_report.json"), _json_text(doc))
    c = report.confusion
    click.echo(
        f"roc: {len(curve.points)} thresholds, selected eps={epsilon:.6g} "
        f"(tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn})"
    )


@main.command("critical-steps")
@_common_options
@_handle_config_errors
def critical_steps(config_path, seed, threads, output_dir):
    """Mark steps whose curvature index reached the configured threshold for
    at least one chain."""
    cfg = _load(config_path, seed, output_dir)
    if not np.isfinite(cfg.sampler.epsilon):
        raise ConfigError("sampler.epsilon: critical-steps needs a finite threshold")
    records, _ = _detection_run(cfg, threads)
    mask = critical_step_map(records, cfg.sampler.epsilon)
    _atomic_write(
        os.path.join(cfg.output_dir, "critical_steps.csv"),
        harness.critical_steps_csv(mask, records[0].times),
    )
    marked = np.flatnonzero(mask)
    click.echo(f"critical steps at eps={cfg.sampler.epsilon}: {marked.tolist()}")


if __name__ == "__main__":
    main()
