#!/usr/bin/env python3
"""Derive and record the bimodal-testbed calibration.

Runs the detection sweep on the corrupted bimodal oracle, selects the
operating threshold, runs the paired euler-vs-robust comparison at it, and
writes everything to calibration/bimodal_testbed.json.  The acceptance
suite re-derives the same quantities and checks them against this record.

Usage: python scripts/calibrate_testbed.py [output.json]
"""

import dataclasses
import json
import os
import sys

import numpy as np

from gmmflow import backend_name
from gmmflow.config import load_config
from gmmflow.harness import (
    build_detection_report,
    default_threshold_grid,
    draw_chain_inits,
    label_endpoint,
    roc_sweep,
    run_chains,
    run_paired_experiment,
    select_threshold,
)
from gmmflow.oracles import oracle_from_gmm, oracle_with_perturbation

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "bimodal_demo.json")


def main(out_path: str) -> None:
    cfg = load_config(CONFIG)
    schedule = cfg.schedule.build()
    oracle = oracle_with_perturbation(oracle_from_gmm(cfg.gmm), cfg.perturbation)
    rule = cfg.label_rule.calibrate(cfg.gmm, cfg.calibration_draws, cfg.calibration_seed)

    detect_cfg = dataclasses.replace(cfg.sampler, epsilon=float("inf"))
    inits = draw_chain_inits(cfg.gmm.dim, schedule.times[0], cfg.n_chains, cfg.master_seed)
    records = run_chains(oracle, schedule, detect_cfg, inits)
    labels = np.array([label_endpoint(cfg.gmm, r.endpoint, rule) for r in records])

    curve = roc_sweep(records, labels, default_threshold_grid(records))
    epsilon = select_threshold(curve)
    report = build_detection_report(records, labels, epsilon)
    c = report.confusion
    tpr = c.tp / max(1, c.tp + c.fn)
    fpr = c.fp / max(1, c.fp + c.tn)

    treatment = dataclasses.replace(cfg.sampler, epsilon=epsilon)
    paired = run_paired_experiment(
        cfg.gmm, oracle, schedule, cfg.baseline_sampler, treatment,
        rule, cfg.n_chains, cfg.master_seed,
    )

    record = {
        "backend": backend_name(),
        "config": os.path.basename(CONFIG),
        "n_chains": cfg.n_chains,
        "master_seed": cfg.master_seed,
        "label_cutoff_neg_log_p0": rule.neg_log_p0_cutoff,
        "selected_epsilon": epsilon,
        "rho": cfg.sampler.rho,
        "detection": {"tpr": tpr, "fpr": fpr, "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
        "baseline_hallucination_rate": paired.baseline.hallucination_rate,
        "treatment_hallucination_rate": paired.treatment.hallucination_rate,
        "correction_rate": paired.treatment.correction_rate,
        "new_hallucination_rate": paired.treatment.new_hallucination_rate,
    }
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(record, indent=2, sort_keys=True))


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "calibration", "bimodal_testbed.json"
    )
    main(target)
