"""Probability-flow sampling over analytic Gaussian mixtures, with
curvature-triggered robust updates and a verification/experiment harness."""

from ._backend import backend_name
from .curvature import (
    PowerIterationResult,
    ProbeResult,
    curvature_index,
    find_delta_cas,
    find_delta_sas,
    hessian_lambda_max,
    score_norm_grad,
)
from .harness import (
    Confusion,
    DetectionReport,
    LabelRule,
    PairedChain,
    PairedExperimentResult,
    RocCurve,
    RunMetrics,
    build_detection_report,
    critical_step_map,
    draw_chain_inits,
    label_endpoint,
    roc_sweep,
    run_chains,
    run_paired_experiment,
)
from .mixture import (
    GaussianMixture,
    ProxResult,
    SmoothedEval,
    grad_potential_f_t,
    log_density_t,
    log_density_t_batch,
    potential_f_t,
    prox_step,
    score_t,
    smoothed_eval,
)
from .oracles import (
    Bump,
    GMMOracle,
    OracleEval,
    PerturbationSpec,
    PerturbedOracle,
    ScoreOracle,
    convert,
    oracle_from_gmm,
    oracle_with_perturbation,
)
from .sampling import (
    SamplerConfig,
    TimeSchedule,
    TrajectoryRecord,
    euler_sample,
    heun_sample,
    make_schedule,
    rods_sample,
    run_sampler,
    trajectory_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "Bump",
    "Confusion",
    "convert",
    "critical_step_map",
    "curvature_index",
    "DetectionReport",
    "draw_chain_inits",
    "euler_sample",
    "find_delta_cas",
    "find_delta_sas",
    "GaussianMixture",
    "GMMOracle",
    "grad_potential_f_t",
    "hessian_lambda_max",
    "heun_sample",
    "label_endpoint",
    "LabelRule",
    "log_density_t",
    "log_density_t_batch",
    "make_schedule",
    "oracle_from_gmm",
    "oracle_with_perturbation",
    "OracleEval",
    "PairedChain",
    "PairedExperimentResult",
    "PerturbationSpec",
    "PerturbedOracle",
    "potential_f_t",
    "PowerIterationResult",
    "ProbeResult",
    "prox_step",
    "ProxResult",
    "roc_sweep",
    "RocCurve",
    "rods_sample",
    "run_chains",
    "run_paired_experiment",
    "run_sampler",
    "RunMetrics",
    "SamplerConfig",
    "score_norm_grad",
    "score_t",
    "ScoreOracle",
    "smoothed_eval",
    "SmoothedEval",
    "TimeSchedule",
    "TrajectoryRecord",
    "trajectory_jsonl",
    "build_detection_report",
]
