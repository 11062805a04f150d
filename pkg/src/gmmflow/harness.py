"""Desk-scale experiment engine: labeling, paired runs, detection metrics.

Endpoints are labeled hallucinated by a distributional rule (no human
annotation at this scale): either distance to the nearest mode in base-scale
units, or the negative log-density against a quantile calibrated on fresh
target draws.  Paired experiments run two samplers from identical inits and
report rates plus the per-chain better/worse bookkeeping.
"""

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mixture import GaussianMixture, log_density_t, log_density_t_batch
from .oracles import ScoreOracle
from .sampling import SamplerConfig, TimeSchedule, TrajectoryRecord, run_sampler

LABEL_KINDS = ("neg_log_p0_quantile", "mode_distance")


@dataclass(frozen=True)
class LabelRule:
    """Synthetic hallucination labeling rule.

    ``mode_distance`` labels a point hallucinated when its distance to every
    component mean exceeds ``distance_multiplier`` base scales.  The quantile
    kind labels on ``-log p_0`` exceeding the ``threshold_quantile`` level of
    fresh target draws; it must be calibrated first (the cutoff is cached on
    the rule).
    """

    kind: str = "mode_distance"
    threshold_quantile: float = 0.999
    distance_multiplier: float = 3.0
    neg_log_p0_cutoff: Optional[float] = None

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise ValueError(f"kind must be one of {LABEL_KINDS}, got {self.kind!r}")
        if not 0.0 < self.threshold_quantile < 1.0:
            raise ValueError("threshold_quantile must lie in (0, 1)")
        if self.distance_multiplier <= 0.0:
            raise ValueError("distance_multiplier must be positive")

    def calibrate(
        self, gmm: GaussianMixture, n_draws: int = 10_000, seed: int = 0
    ) -> "LabelRule":
        """Return a copy with the quantile cutoff estimated from fresh draws."""
        if n_draws < 10_000:
            raise ValueError("calibration requires at least 10,000 draws")
        draws = gmm.sample(n_draws, np.random.default_rng(seed))
        neg = -log_density_t_batch(gmm, draws, 0.0)
        cutoff = float(np.quantile(neg, self.threshold_quantile))
        return dataclasses.replace(self, neg_log_p0_cutoff=cutoff)


def label_endpoint(gmm: GaussianMixture, x, rule: LabelRule) -> bool:
    """True when the endpoint counts as hallucinated under ``rule``."""
    x = np.asarray(x, dtype=float).ravel()
    if rule.kind == "mode_distance":
        dists = np.linalg.norm(gmm.means - x, axis=1)
        return bool(dists.min() / gmm.base_scale > rule.distance_multiplier)
    if rule.neg_log_p0_cutoff is None:
        raise ValueError("quantile label rule used before calibration")
    return bool(-log_density_t(gmm, x, 0.0) > rule.neg_log_p0_cutoff)


def draw_chain_inits(
    dim: int, t0: float, n_chains: int, master_seed: int
) -> np.ndarray:
    """Initial states ``~ N(0, t0^2 I)``, one independent stream per chain.

    Stream ``i`` is seeded by ``(master_seed, i)`` so serial and parallel
    execution produce identical inits.
    """
    inits = np.empty((n_chains, dim))
    for i in range(n_chains):
        rng = np.random.default_rng([master_seed, i])
        inits[i] = t0 * rng.standard_normal(dim)
    return inits


def _chain_payload(args):
    oracle, schedule, config, x_init = args
    return run_sampler(oracle, schedule, config, x_init)


def run_chains(
    oracle: ScoreOracle,
    schedule: TimeSchedule,
    config: SamplerConfig,
    inits: np.ndarray,
    threads: int = 1,
) -> list:
    """Run one chain per row of ``inits``; results ordered by chain index."""
    payloads = [(oracle, schedule, config, inits[i]) for i in range(inits.shape[0])]
    if threads <= 1:
        return [_chain_payload(p) for p in payloads]
    chunk = max(1, len(payloads) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_chain_payload, payloads, chunksize=chunk))


@dataclass(frozen=True)
class RunMetrics:
    """Aggregate rates for one sampler arm of a paired experiment.

    Correction and new-hallucination rates compare against the paired
    baseline arm; they are None on the baseline itself.  When the relevant
    denominator (baseline hallucinated / clean count) is zero the rate is 0.
    """

    hallucination_rate: float
    correction_rate: Optional[float]
    new_hallucination_rate: Optional[float]
    mean_wall_time: float
    n_samples: int

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PairedChain:
    """Per-chain outcome of a paired run; ``transition`` records label flips."""

    chain_id: int
    seed: int
    baseline_label: bool
    treatment_label: bool
    baseline_neg_log_p0: float
    treatment_neg_log_p0: float
    transition: str  # corrected | new_hallucination | still_hallucinated | still_clean


@dataclass
class PairedExperimentResult:
    baseline: RunMetrics
    treatment: RunMetrics
    pairs: list
    baseline_records: list
    treatment_records: list
    labels_baseline: np.ndarray
    labels_treatment: np.ndarray


def _transition(before: bool, after: bool) -> str:
    if before and not after:
        return "corrected"
    if not before and after:
        return "new_hallucination"
    return "still_hallucinated" if before else "still_clean"


def run_paired_experiment(
    gmm: GaussianMixture,
    oracle: ScoreOracle,
    schedule: TimeSchedule,
    baseline_cfg: SamplerConfig,
    treatment_cfg: SamplerConfig,
    label_rule: LabelRule,
    n_chains: int,
    master_seed: int,
    threads: int = 1,
) -> PairedExperimentResult:
    """Run both samplers from identical inits and compute paired metrics."""
    inits = draw_chain_inits(oracle.dim, schedule.times[0], n_chains, master_seed)
    base_records = run_chains(oracle, schedule, baseline_cfg, inits, threads)
    treat_records = run_chains(oracle, schedule, treatment_cfg, inits, threads)
    labels_b = np.array(
        [label_endpoint(gmm, r.endpoint, label_rule) for r in base_records]
    )
    labels_t = np.array(
        [label_endpoint(gmm, r.endpoint, label_rule) for r in treat_records]
    )

    n_hall = int(labels_b.sum())
    n_clean = n_chains - n_hall
    corrected = int((labels_b & ~labels_t).sum())
    new_hall = int((~labels_b & labels_t).sum())

    baseline = RunMetrics(
        hallucination_rate=float(labels_b.mean()),
        correction_rate=None,
        new_hallucination_rate=None,
        mean_wall_time=float(np.mean([r.wall_time for r in base_records])),
        n_samples=n_chains,
    )
    treatment = RunMetrics(
        hallucination_rate=float(labels_t.mean()),
        correction_rate=corrected / n_hall if n_hall else 0.0,
        new_hallucination_rate=new_hall / n_clean if n_clean else 0.0,
        mean_wall_time=float(np.mean([r.wall_time for r in treat_records])),
        n_samples=n_chains,
    )
    pairs = [
        PairedChain(
            chain_id=i,
            seed=i,
            baseline_label=bool(labels_b[i]),
            treatment_label=bool(labels_t[i]),
            baseline_neg_log_p0=-log_density_t(gmm, base_records[i].endpoint, 0.0),
            treatment_neg_log_p0=-log_density_t(gmm, treat_records[i].endpoint, 0.0),
            transition=_transition(bool(labels_b[i]), bool(labels_t[i])),
        )
        for i in range(n_chains)
    ]
    return PairedExperimentResult(
        baseline=baseline,
        treatment=treatment,
        pairs=pairs,
        baseline_records=base_records,
        treatment_records=treat_records,
        labels_baseline=labels_b,
        labels_treatment=labels_t,
    )


@dataclass(frozen=True)
class RocCurve:
    """ROC points as ``(threshold, fpr, tpr)`` tuples.

    ``degenerate`` marks all-positive or all-negative label sets; the
    undefined rate is reported as 0 in that case.
    """

    points: tuple
    degenerate: bool = False


def detection_statistics(records) -> np.ndarray:
    """Per-record detection statistic: max curvature index over probed steps."""
    return np.array([r.max_h for r in records])


def roc_sweep(records, labels, thresholds) -> RocCurve:
    """Sweep detection thresholds over per-record max curvature statistics."""
    labels = np.asarray(labels, dtype=bool)
    if len(records) != labels.size:
        raise ValueError("records and labels must align")
    stats = detection_statistics(records)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    points = []
    for thr in thresholds:
        detected = stats >= thr
        tp = int((detected & labels).sum())
        fp = int((detected & ~labels).sum())
        tpr = tp / n_pos if n_pos else 0.0
        fpr = fp / n_neg if n_neg else 0.0
        points.append((float(thr), fpr, tpr))
    return RocCurve(points=tuple(points), degenerate=(n_pos == 0 or n_neg == 0))


def select_threshold(curve: RocCurve) -> float:
    """Operating threshold from an ROC sweep: maximize TPR - FPR.

    Ties resolve to the largest threshold (fewest detections at equal
    separation).  Deterministic given the curve.
    """
    if not curve.points:
        raise ValueError("cannot select a threshold from an empty sweep")
    best_thr, best_j = None, -np.inf
    for thr, fpr, tpr in curve.points:
        j = tpr - fpr
        if j > best_j or (j == best_j and best_thr is not None and thr > best_thr):
            best_thr, best_j = thr, j
    return float(best_thr)


def default_threshold_grid(records) -> np.ndarray:
    """Sweep grid: 0, every observed statistic, and infinity."""
    stats = detection_statistics(records)
    return np.concatenate([[0.0], np.unique(stats), [np.inf]])


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class DetectionReport:
    """Confusion matrix and per-sample detection decisions at one threshold."""

    confusion: Confusion
    per_sample: tuple

    def to_json_dict(self) -> dict:
        return {
            "confusion": dataclasses.asdict(self.confusion),
            "per_sample": [dict(s) for s in self.per_sample],
        }


def build_detection_report(records, labels, epsilon: float, seeds=None) -> DetectionReport:
    """Apply ``detected = max_h >= epsilon`` and tabulate against labels."""
    labels = np.asarray(labels, dtype=bool)
    stats = detection_statistics(records)
    detected = stats >= epsilon
    if seeds is None:
        seeds = list(range(labels.size))
    per_sample = tuple(
        {
            "seed": int(seeds[i]),
            "max_h": float(stats[i]),
            "label": bool(labels[i]),
            "detected": bool(detected[i]),
        }
        for i in range(labels.size)
    )
    return DetectionReport(
        confusion=Confusion(
            tp=int((detected & labels).sum()),
            fp=int((detected & ~labels).sum()),
            tn=int((~detected & ~labels).sum()),
            fn=int((~detected & labels).sum()),
        ),
        per_sample=per_sample,
    )


def critical_step_map(records, epsilon: float) -> np.ndarray:
    """Steps where any record's curvature index reached ``epsilon``.

    All records must share one schedule.
    """
    if not records:
        raise ValueError("need at least one record")
    times = records[0].times
    for r in records[1:]:
        if r.times.shape != times.shape or not np.array_equal(r.times, times):
            raise ValueError("records must share a common schedule")
    h = np.stack([r.h_values for r in records])
    return np.any(h >= epsilon, axis=0)


def endpoint_csv(records, gmm: GaussianMixture, seeds=None) -> str:
    """Endpoint-only CSV: one row per chain.

    The wall_time column is measured and therefore not reproducible between
    runs; all other columns are deterministic for a fixed seed.
    """
    if seeds is None:
        seeds = list(range(len(records)))
    dim = records[0].endpoint.size if records else gmm.dim
    header = ["chain_id", "seed"] + [f"x{k}" for k in range(dim)]
    header += ["neg_log_p0", "max_h", "n_triggers", "wall_time"]
    lines = [",".join(header)]
    for i, rec in enumerate(records):
        neg = -log_density_t(gmm, rec.endpoint, 0.0)
        row = [str(i), str(int(seeds[i]))]
        row += [repr(float(v)) for v in rec.endpoint]
        row += [
            repr(float(neg)),
            repr(rec.max_h),
            str(rec.n_triggers),
            repr(float(rec.wall_time)),
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def pairs_csv(pairs) -> str:
    """Deterministic per-chain paired-outcome CSV (no timing columns)."""
    header = (
        "chain_id,seed,baseline_label,treatment_label,"
        "baseline_neg_log_p0,treatment_neg_log_p0,transition"
    )
    lines = [header]
    for p in pairs:
        lines.append(
            ",".join(
                [
                    str(p.chain_id),
                    str(p.seed),
                    str(int(p.baseline_label)),
                    str(int(p.treatment_label)),
                    repr(float(p.baseline_neg_log_p0)),
                    repr(float(p.treatment_neg_log_p0)),
                    p.transition,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def roc_csv(curve: RocCurve) -> str:
    """CSV with columns threshold,fpr,tpr."""
    lines = ["threshold,fpr,tpr"]
    for thr, fpr, tpr in curve.points:
        lines.append(f"{thr!r},{fpr!r},{tpr!r}")
    return "\n".join(lines) + "\n"


def critical_steps_csv(mask: np.ndarray, times: np.ndarray) -> str:
    """CSV with columns step_index,t,critical."""
    lines = ["step_index,t,critical"]
    for i, flag in enumerate(mask):
        lines.append(f"{i},{float(times[i])!r},{int(flag)}")
    return "\n".join(lines) + "\n"
