"""Experiment configuration: one JSON document drives every CLI command.

Field errors are reported with their JSON path so a broken config names the
offending entry rather than raising a bare traceback.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .harness import LabelRule
from .mixture import GaussianMixture
from .oracles import PerturbationSpec
from .sampling import SamplerConfig, TimeSchedule, make_schedule


class ConfigError(ValueError):
    """Malformed experiment configuration; message carries the field path."""


@dataclass(frozen=True)
class ScheduleSpec:
    n_steps: int = 40
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def build(self) -> TimeSchedule:
        return make_schedule(self.n_steps, self.sigma_min, self.sigma_max)


@dataclass
class ExperimentConfig:
    gmm: GaussianMixture
    schedule: ScheduleSpec
    sampler: SamplerConfig
    label_rule: LabelRule
    perturbation: Optional[PerturbationSpec] = None
    baseline_sampler: SamplerConfig = field(default_factory=SamplerConfig)
    n_chains: int = 64
    master_seed: int = 0
    output_dir: str = "out"
    thresholds: Optional[list] = None
    calibration_draws: int = 10_000
    calibration_seed: int = 0


def _get(doc: dict, key: str, default, path: str, required: bool = False):
    if key not in doc:
        if required:
            raise ConfigError(f"{path}{key}: missing required field")
        return default
    return doc[key]


def _build(path_ctx: str, builder, doc):
    try:
        return builder(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path_ctx}: {exc}") from exc


def _load_inline_or_file(value, base_dir: str, path_ctx: str):
    """Accept an inline JSON object or a path to a JSON file."""
    if isinstance(value, str):
        resolved = value if os.path.isabs(value) else os.path.join(base_dir, value)
        if not os.path.exists(resolved):
            raise ConfigError(f"{path_ctx}: referenced file {resolved!r} does not exist")
        with open(resolved, encoding="utf-8") as fh:
            return json.load(fh)
    if isinstance(value, dict):
        return value
    raise ConfigError(f"{path_ctx}: expected an object or a file path")


def parse_config(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")

    gmm_doc = _load_inline_or_file(
        _get(doc, "gmm", None, "", required=True), base_dir, "gmm"
    )
    gmm = _build("gmm", GaussianMixture.from_json_dict, gmm_doc)

    perturbation = None
    if doc.get("perturbation") is not None:
        pert_doc = _load_inline_or_file(doc["perturbation"], base_dir, "perturbation")
        perturbation = _build("perturbation", PerturbationSpec.from_json_dict, pert_doc)

    sched_doc = _get(doc, "schedule", {}, "")
    schedule = _build(
        "schedule",
        lambda d: ScheduleSpec(
            n_steps=int(d.get("n_steps", 40)),
            sigma_min=float(d.get("sigma_min", 0.002)),
            sigma_max=float(d.get("sigma_max", 80.0)),
        ),
        sched_doc,
    )
    _build("schedule", lambda d: d.build(), schedule)

    def build_sampler(d):
        return SamplerConfig(
            method=d.get("method", "euler"),
            epsilon=float(d.get("epsilon", float("inf"))),
            rho=float(d.get("rho", 1.0)),
            window=tuple(d.get("window", (0.1, 0.5))),
            delta_steps=int(d.get("delta_steps", 1)),
            detect_rho=(None if d.get("detect_rho") is None else float(d["detect_rho"])),
        )

    sampler = _build("sampler", build_sampler, _get(doc, "sampler", {}, ""))
    baseline = _build(
        "baseline_sampler", build_sampler, _get(doc, "baseline_sampler", {}, "")
    )

    rule_doc = _get(doc, "label_rule", {}, "")
    label_rule = _build(
        "label_rule",
        lambda d: LabelRule(
            kind=d.get("kind", "mode_distance"),
            threshold_quantile=float(d.get("threshold_quantile", 0.999)),
            distance_multiplier=float(d.get("distance_multiplier", 3.0)),
        ),
        rule_doc,
    )

    thresholds = doc.get("thresholds")
    if thresholds is not None:
        if not isinstance(thresholds, list) or not thresholds:
            raise ConfigError("thresholds: expected a non-empty list of numbers")
        thresholds = [float(v) for v in thresholds]

    cfg = ExperimentConfig(
        gmm=gmm,
        perturbation=perturbation,
        schedule=schedule,
        sampler=sampler,
        baseline_sampler=baseline,
        label_rule=label_rule,
        n_chains=int(_get(doc, "n_chains", 64, "")),
        master_seed=int(_get(doc, "master_seed", 0, "")),
        output_dir=str(_get(doc, "output_dir", "out", "")),
        thresholds=thresholds,
        calibration_draws=int(rule_doc.get("calibration_draws", 10_000)),
        calibration_seed=int(rule_doc.get("calibration_seed", 0)),
    )
    if cfg.n_chains < 1:
        raise ConfigError("n_chains: must be >= 1")
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Parse an experiment configuration JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))
