"""Curvature-change probing of the sampling drift field.

The probed scalar is the norm of the per-unit-time drift
``v(x) = (x - denoised(x; t)) / t^2``, which equals ``-score`` for any
oracle satisfying the parameterization identity.  The curvature-change
index is the change of ``grad ||v||`` under a radius-``rho`` step in the
steepest score-norm direction; it tracks the largest Hessian eigenvalue of
``||v||`` at first order in ``rho``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracles import ScoreOracle

# Below this gradient norm the ascent direction is treated as degenerate.
DEGENERATE_GRAD = 1e-12


def _drift_velocity(oracle: ScoreOracle, x: np.ndarray, t: float) -> np.ndarray:
    # v = d/t = (x - denoised)/t^2 = -score, exact for all oracles here.
    return -oracle.score(x, t)


def score_norm_grad(
    oracle: ScoreOracle, x, t: float, force_fd: bool = False
) -> np.ndarray:
    """Gradient of ``||v(x)||`` at ``x``.

    Uses the oracle's analytic Jacobian product when available, otherwise
    central finite differences with step ``1e-4 * (1 + ||x||_inf)``.  Points
    with ``||v|| < 1e-12`` return the zero vector.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
    v = _drift_velocity(oracle, x, t)
    vnorm = np.linalg.norm(v)
    if vnorm < 1e-12:
        return np.zeros(oracle.dim)
    if oracle.supports_jvp and not force_fd:
        # ||v|| = ||score||, so grad ||v|| = J_score^T (score/||score||).
        return oracle.score_vjp(x, t, -v / vnorm)
    h = 1e-4 * (1.0 + np.max(np.abs(x)))
    grad = np.zeros(oracle.dim)
    for k in range(oracle.dim):
        step = np.zeros(oracle.dim)
        step[k] = h
        fp = np.linalg.norm(_drift_velocity(oracle, x + step, t))
        fm = np.linalg.norm(_drift_velocity(oracle, x - step, t))
        grad[k] = (fp - fm) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class ProbeResult:
    """Curvature probe at one point: index value and the probing step."""

    h_value: float
    delta: np.ndarray
    grad_norm_at_x: float
    grad_norm_at_probe: float
    grad_at_x: np.ndarray
    grad_at_probe: np.ndarray
    degenerate: bool = False


def curvature_index(oracle: ScoreOracle, x, t: float, rho: float) -> ProbeResult:
    """Curvature-change index at ``x`` with probe radius ``rho``.

    The probe direction is one normalized ascent step on ``||v(x + .)||``;
    the index is the norm of the resulting change in ``grad ||v||``.  A zero
    gradient at ``x`` yields index 0 with a degenerate marker.
    """
    if rho <= 0.0:
        raise ValueError(f"probe radius rho must be > 0, got {rho}")
    x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
    g = score_norm_grad(oracle, x, t)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        delta = np.zeros(oracle.dim)
        delta[0] = rho
        return ProbeResult(
            h_value=0.0,
            delta=delta,
            grad_norm_at_x=0.0,
            grad_norm_at_probe=0.0,
            grad_at_x=g,
            grad_at_probe=g,
            degenerate=True,
        )
    delta = rho * g / gnorm
    g_probe = score_norm_grad(oracle, x + delta, t)
    return ProbeResult(
        h_value=float(np.linalg.norm(g_probe - g)),
        delta=delta,
        grad_norm_at_x=gnorm,
        grad_norm_at_probe=float(np.linalg.norm(g_probe)),
        grad_at_x=g,
        grad_at_probe=g_probe,
    )


def _ascend_on_sphere(grad_fn, dim: int, rho: float, steps: int) -> Optional[np.ndarray]:
    """Projected gradient ascent on the radius-``rho`` sphere.

    ``grad_fn(delta)`` is the objective gradient at the shifted point.  The
    first step lands on the sphere along the gradient at the origin; each
    later step moves by ``rho/steps`` and renormalizes.  Returns None when
    the initial gradient is degenerate.
    """
    g0 = grad_fn(np.zeros(dim))
    n0 = np.linalg.norm(g0)
    if n0 < DEGENERATE_GRAD:
        return None
    delta = rho * g0 / n0
    for _ in range(steps - 1):
        g = grad_fn(delta)
        gn = np.linalg.norm(g)
        if gn < DEGENERATE_GRAD:
            break
        delta = delta + (rho / steps) * g
        delta = rho * delta / np.linalg.norm(delta)
    return delta


def find_delta_sas(
    oracle: ScoreOracle, x, t: float, rho: float, steps: int = 1
) -> Optional[np.ndarray]:
    """Worst-case step for the potential value: ascend ``f_t(x + delta)``.

    The potential gradient is ``-score``, so the single-step direction moves
    against the score.  Returns None when the gradient is degenerate.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
    return _ascend_on_sphere(
        lambda d: -oracle.score(x + d, t), oracle.dim, rho, max(1, int(steps))
    )


def find_delta_cas(
    oracle: ScoreOracle, x, t: float, rho: float, steps: int = 1
) -> Optional[np.ndarray]:
    """Worst-case step for the gradient norm: ascend ``||score(x + delta)||``."""
    x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())

    def grad(d):
        g = score_norm_grad(oracle, x + d, t)
        # score_norm_grad returns exact zeros at degenerate points; map that
        # onto the shared ascent degeneracy handling.
        return g

    return _ascend_on_sphere(grad, oracle.dim, rho, max(1, int(steps)))


@dataclass(frozen=True)
class PowerIterationResult:
    """Dominant-eigenvalue estimate with convergence diagnostics."""

    value: float
    iterations: int
    converged: bool


def hessian_lambda_max(
    oracle: ScoreOracle, x, t: float, iters: int = 40
) -> PowerIterationResult:
    """Dominant eigenvalue magnitude of the Hessian of ``||v(x)||``.

    Power iteration with Hessian-vector products by central differences of
    ``score_norm_grad`` (step ``1e-3 * (1 + ||x||_inf)``).  Early exit when
    the eigenvalue estimate changes by less than 1e-6 relative.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
    h = 1e-3 * (1.0 + np.max(np.abs(x)))

    def hvp(w):
        gp = score_norm_grad(oracle, x + h * w, t)
        gm = score_norm_grad(oracle, x - h * w, t)
        return (gp - gm) / (2.0 * h)

    # Deterministic non-symmetric start so no coordinate axis is privileged.
    w = np.arange(1.0, oracle.dim + 1.0)
    w /= np.linalg.norm(w)
    estimate = 0.0
    for k in range(1, max(1, iters) + 1):
        hw = hvp(w)
        hw_norm = np.linalg.norm(hw)
        if hw_norm < 1e-300:
            return PowerIterationResult(value=0.0, iterations=k, converged=True)
        new_estimate = abs(float(w @ hw))
        w = hw / hw_norm
        if k > 1 and abs(new_estimate - estimate) <= 1e-6 * max(1e-30, abs(estimate)):
            return PowerIterationResult(value=new_estimate, iterations=k, converged=True)
        estimate = new_estimate
    return PowerIterationResult(value=estimate, iterations=iters, converged=False)
