"""Time schedules and the deterministic samplers.

Three integrators share one convention: step index 0 sits at the largest
noise level and index N at zero.  The robust sampler augments the Euler
update with a curvature probe and, above threshold, evaluates the oracle at
a worst-case-shifted point instead of the current one.  Off-trigger steps
perform arithmetic identical to the plain Euler sampler, so runs with an
unreachable threshold are bit-identical to Euler runs.
"""

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .curvature import curvature_index, find_delta_cas, find_delta_sas
from .oracles import ScoreOracle

METHODS = ("euler", "heun", "rods_sas", "rods_cas")


@dataclass(frozen=True)
class TimeSchedule:
    """Descending noise levels ``t_0 > t_1 > ... > t_N = 0``."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        object.__setattr__(self, "times", times)
        if times.size < 2:
            raise ValueError("schedule needs at least two levels")
        if np.any(np.diff(times) >= 0.0):
            raise ValueError("schedule levels must be strictly decreasing")
        if times[-1] != 0.0:
            raise ValueError("schedule must end at level 0")
        if not np.isfinite(times).all() or times[0] <= 0.0:
            raise ValueError("schedule levels must be finite and start positive")

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


def make_schedule(n_steps: int, sigma_min: float, sigma_max: float) -> TimeSchedule:
    """Log-spaced schedule from ``sigma_max`` down to a final level of 0.

    The ``n_steps + 1`` levels are the geometric progression from
    ``sigma_max`` to ``sigma_min`` with the terminal level replaced by 0, so
    consecutive nonzero levels keep a constant ratio.
    """
    if n_steps < 2:
        raise ValueError(f"n_steps must be >= 2, got {n_steps}")
    if not (0.0 < sigma_min < sigma_max) or not np.isfinite(sigma_max):
        raise ValueError(
            f"need 0 < sigma_min < sigma_max finite, got ({sigma_min}, {sigma_max})"
        )
    times = np.geomspace(sigma_max, sigma_min, n_steps + 1)
    times[-1] = 0.0
    return TimeSchedule(times=times)


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler selection plus the robust-update knobs.

    ``window`` is a fraction pair ``(a, b)``: curvature is probed only at
    step indices ``i`` with ``a*N <= i < b*N``.  ``detect_rho`` optionally
    decouples the probe radius from the correction radius ``rho``.
    """

    method: str = "euler"
    epsilon: float = np.inf
    rho: float = 1.0
    window: tuple = (0.1, 0.5)
    delta_steps: int = 1
    detect_rho: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if np.isnan(self.epsilon) or self.epsilon < 0.0:
            raise ValueError("epsilon must be >= 0")
        if not np.isfinite(self.rho) or self.rho <= 0.0:
            raise ValueError("rho must be positive and finite")
        a, b = self.window
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"window must satisfy 0 <= a <= b <= 1, got {self.window}")
        if self.delta_steps < 1:
            raise ValueError("delta_steps must be >= 1")
        if self.detect_rho is not None and (
            not np.isfinite(self.detect_rho) or self.detect_rho <= 0.0
        ):
            raise ValueError("detect_rho must be positive and finite when given")

    @property
    def probe_rho(self) -> float:
        return self.rho if self.detect_rho is None else self.detect_rho


@dataclass
class TrajectoryRecord:
    """Full record of one sampling chain.

    ``states`` and ``times`` have ``N + 1`` entries; the per-step series
    have ``N``.  ``h_values[i]`` is 0 on steps where no probe ran, and
    ``triggered[i]`` is true exactly when the probe fired and the robust
    step was applied.  ``fallback_steps`` lists steps where the threshold
    was met but the perturbation solver was degenerate (plain Euler used).
    """

    states: np.ndarray
    times: np.ndarray
    h_values: np.ndarray
    triggered: np.ndarray
    deltas: list
    wall_time: float
    fallback_steps: tuple = ()

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    @property
    def max_h(self) -> float:
        return float(self.h_values.max()) if self.h_values.size else 0.0

    @property
    def n_triggers(self) -> int:
        return int(self.triggered.sum())

    def validate(self) -> None:
        """Raise if the record's bookkeeping invariants are violated."""
        n = self.n_steps
        if self.states.shape[0] != n + 1:
            raise ValueError("states must have n_steps + 1 entries")
        if not (self.h_values.shape == (n,) == self.triggered.shape) or len(self.deltas) != n:
            raise ValueError("per-step series must have n_steps entries")
        if np.any(np.isnan(self.h_values)):
            raise ValueError("h_values must be NaN-free")
        for i in range(n):
            if self.triggered[i] != (self.deltas[i] is not None):
                raise ValueError(f"trigger flag and stored delta disagree at step {i}")


def _window_bounds(config: SamplerConfig, n_steps: int):
    a, b = config.window
    return a * n_steps, b * n_steps


def euler_sample(
    oracle: ScoreOracle, schedule: TimeSchedule, x_init
) -> TrajectoryRecord:
    """First-order probability-flow integration of the oracle's drift."""
    start = time.perf_counter()
    times = schedule.times
    n = schedule.n_steps
    x = np.asarray(x_init, dtype=float).ravel().copy()
    states = np.empty((n + 1, x.size))
    states[0] = x
    for i in range(n):
        t_cur, t_next = times[i], times[i + 1]
        # d = (x - denoised)/t, formed as -t*score to avoid the cancellation
        # in x - (x + t^2 score) at small t.
        d = -t_cur * oracle.score(x, t_cur)
        x = x + (t_next - t_cur) * d
        states[i + 1] = x
    return TrajectoryRecord(
        states=states,
        times=times.copy(),
        h_values=np.zeros(n),
        triggered=np.zeros(n, dtype=bool),
        deltas=[None] * n,
        wall_time=time.perf_counter() - start,
    )


def heun_sample(
    oracle: ScoreOracle, schedule: TimeSchedule, x_init
) -> TrajectoryRecord:
    """Second-order predictor-corrector; the final step to level 0 is Euler
    because the corrector would need an oracle evaluation at t = 0."""
    start = time.perf_counter()
    times = schedule.times
    n = schedule.n_steps
    x = np.asarray(x_init, dtype=float).ravel().copy()
    states = np.empty((n + 1, x.size))
    states[0] = x
    for i in range(n):
        t_cur, t_next = times[i], times[i + 1]
        d = -t_cur * oracle.score(x, t_cur)
        x_pred = x + (t_next - t_cur) * d
        if t_next > 0.0:
            d_prime = -t_next * oracle.score(x_pred, t_next)
            x = x + (t_next - t_cur) * 0.5 * (d + d_prime)
        else:
            x = x_pred
        states[i + 1] = x
    return TrajectoryRecord(
        states=states,
        times=times.copy(),
        h_values=np.zeros(n),
        triggered=np.zeros(n, dtype=bool),
        deltas=[None] * n,
        wall_time=time.perf_counter() - start,
    )


def rods_sample(
    oracle: ScoreOracle, schedule: TimeSchedule, config: SamplerConfig, x_init
) -> TrajectoryRecord:
    """Euler sampling with windowed curvature detection and robust updates.

    Inside the step window the curvature index is probed; when it reaches
    ``config.epsilon`` the update direction is re-evaluated at the
    worst-case-shifted point ``x + delta``.  A degenerate perturbation
    solve falls back to the plain update and is reported in
    ``fallback_steps`` rather than raising.
    """
    if config.method not in ("rods_sas", "rods_cas"):
        raise ValueError(f"rods_sample requires a rods method, got {config.method!r}")
    find_delta = find_delta_sas if config.method == "rods_sas" else find_delta_cas
    start = time.perf_counter()
    times = schedule.times
    n = schedule.n_steps
    lo, hi = _window_bounds(config, n)
    x = np.asarray(x_init, dtype=float).ravel().copy()
    states = np.empty((n + 1, x.size))
    states[0] = x
    h_values = np.zeros(n)
    triggered = np.zeros(n, dtype=bool)
    deltas: list = [None] * n
    fallback = []
    for i in range(n):
        t_cur, t_next = times[i], times[i + 1]
        d = -t_cur * oracle.score(x, t_cur)
        if lo <= i < hi:
            probe = curvature_index(oracle, x, t_cur, config.probe_rho)
            h_values[i] = probe.h_value
            if probe.h_value >= config.epsilon:
                delta = find_delta(oracle, x, t_cur, config.rho, config.delta_steps)
                if delta is None:
                    fallback.append(i)
                else:
                    triggered[i] = True
                    deltas[i] = delta
                    x_hat = x + delta
                    d = -t_cur * oracle.score(x_hat, t_cur)
        x = x + (t_next - t_cur) * d
        states[i + 1] = x
    return TrajectoryRecord(
        states=states,
        times=times.copy(),
        h_values=h_values,
        triggered=triggered,
        deltas=deltas,
        wall_time=time.perf_counter() - start,
        fallback_steps=tuple(fallback),
    )


def run_sampler(
    oracle: ScoreOracle, schedule: TimeSchedule, config: SamplerConfig, x_init
) -> TrajectoryRecord:
    """Dispatch on ``config.method``."""
    if config.method == "euler":
        return euler_sample(oracle, schedule, x_init)
    if config.method == "heun":
        return heun_sample(oracle, schedule, x_init)
    return rods_sample(oracle, schedule, config, x_init)


def trajectory_jsonl(record: TrajectoryRecord) -> str:
    """One JSON object per step plus a terminal line for the endpoint.

    Step lines carry the pre-step state; the final line (index ``N``) holds
    the endpoint with no step data.
    """
    lines = []
    n = record.n_steps
    for i in range(n + 1):
        delta = record.deltas[i] if i < n else None
        lines.append(
            json.dumps(
                {
                    "i": i,
                    "t": float(record.times[i]),
                    "x": [float(v) for v in record.states[i]],
                    "h": float(record.h_values[i]) if i < n else 0.0,
                    "triggered": bool(record.triggered[i]) if i < n else False,
                    "delta_norm": float(np.linalg.norm(delta)) if delta is not None else None,
                }
            )
        )
    return "\n".join(lines) + "\n"
