"""Exact mathematics of isotropic Gaussian-mixture targets.

The target distribution is ``p_0(x) = sum_i w_i N(x | mu_i, sigma0^2 I)``.
Smoothing with ``N(0, t^2 I)`` keeps the mixture analytic with per-axis
variance ``sigma0^2 + t^2``, which gives closed forms for the log-density,
the score, the continuation potential ``f_t`` and its gradient.  Everything
is evaluated in log-space so values stay finite for any finite ``x``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._backend import mixture_eval, mixture_logpdf_batch


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of isotropic Gaussians sharing one base scale.

    Attributes:
        means: Component means, shape ``(K, dim)``.
        weights: Mixing weights, shape ``(K,)``; must sum to 1.
        base_scale: Common per-component standard deviation (sigma0 > 0).
    """

    means: np.ndarray
    weights: np.ndarray
    base_scale: float
    log_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "base_scale", float(self.base_scale))
        if means.ndim != 2 or means.shape[0] < 1:
            raise ValueError("means must be a (K, dim) array with K >= 1")
        if weights.shape != (means.shape[0],):
            raise ValueError("weights must have one entry per component")
        if np.any(weights <= 0.0) or np.any(weights > 1.0):
            raise ValueError("weights must lie in (0, 1]")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        if not np.isfinite(means).all():
            raise ValueError("means must be finite")
        if not np.isfinite(self.base_scale) or self.base_scale <= 0.0:
            raise ValueError("base_scale must be a positive finite number")
        object.__setattr__(self, "log_weights", np.log(weights))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def to_json_dict(self) -> dict:
        """Serialize with the fixed field names used by CLI configs."""
        return {
            "dim": self.dim,
            "base_scale": self.base_scale,
            "components": [
                {"weight": float(w), "mean": [float(v) for v in m]}
                for w, m in zip(self.weights, self.means)
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GaussianMixture":
        try:
            comps = doc["components"]
            means = np.array([c["mean"] for c in comps], dtype=float)
            weights = np.array([c["weight"] for c in comps], dtype=float)
            gmm = cls(means=means, weights=weights, base_scale=doc["base_scale"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed mixture document: {exc}") from exc
        if gmm.dim != int(doc["dim"]):
            raise ValueError(
                f"declared dim {doc['dim']} does not match means of dim {gmm.dim}"
            )
        return gmm

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` exact samples from the mixture, shape ``(n, dim)``."""
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        return self.means[idx] + self.base_scale * rng.standard_normal((n, self.dim))


@dataclass(frozen=True)
class SmoothedEval:
    """Bundle of smoothed-density quantities at one ``(x, t)``.

    ``responsibilities`` are the base-scale posterior weights of each
    component at ``x`` (computed at variance sigma0^2, not the smoothed
    variance); they are nonnegative and sum to 1.
    """

    log_density: float
    score: np.ndarray
    potential: float
    responsibilities: np.ndarray


def _check_point(gmm: GaussianMixture, x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (gmm.dim,):
        raise ValueError(f"x has dimension {x.shape[0]}, expected {gmm.dim}")
    if not np.isfinite(t):
        raise ValueError("noise level t must be finite")
    if t < 0.0:
        raise ValueError(f"noise level t must be >= 0, got {t}")
    return np.ascontiguousarray(x)


def log_density_t(gmm: GaussianMixture, x, t: float) -> float:
    """Log of the smoothed density ``p_t = p_0 * N(0, t^2 I)`` at ``x``."""
    x = _check_point(gmm, x, t)
    var = gmm.base_scale**2 + t**2
    logpdf, _, _ = mixture_eval(gmm.means, gmm.log_weights, var, x)
    return float(logpdf)


def log_density_t_batch(gmm: GaussianMixture, xs, t: float) -> np.ndarray:
    """Log-density of ``p_t`` at each row of ``xs``, shape ``(n,)``."""
    xs = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=float)))
    if xs.shape[1] != gmm.dim:
        raise ValueError(f"points have dimension {xs.shape[1]}, expected {gmm.dim}")
    if not np.isfinite(t) or t < 0.0:
        raise ValueError(f"noise level t must be finite and >= 0, got {t}")
    var = gmm.base_scale**2 + t**2
    return mixture_logpdf_batch(gmm.means, gmm.log_weights, var, xs)


def score_t(gmm: GaussianMixture, x, t: float) -> np.ndarray:
    """Score ``grad log p_t(x)`` of the smoothed mixture."""
    x = _check_point(gmm, x, t)
    var = gmm.base_scale**2 + t**2
    _, score, _ = mixture_eval(gmm.means, gmm.log_weights, var, x)
    return score


def base_responsibilities(gmm: GaussianMixture, x) -> np.ndarray:
    """Posterior component weights at ``x`` under the unsmoothed mixture."""
    x = _check_point(gmm, x, 0.0)
    _, _, resp = mixture_eval(gmm.means, gmm.log_weights, gmm.base_scale**2, x)
    return resp


def potential_f_t(gmm: GaussianMixture, x, t: float) -> float:
    """Continuation potential ``f_t(x)``, equal to ``-log p_t(x)`` up to a
    t-dependent constant.

    Computed through the base-scale responsibility sum with the exponential
    tilt evaluated as a log-domain addition (no overflow for large ``x``),
    then normalized so that for every dimension

        ``f_t(x) = -log p_t(x) - 0.5 * log(sigma0^2 / (sigma0^2 + t^2))``

    which reduces to ``-log p_0(x)`` exactly at ``t = 0``.  The constant does
    not affect minimizers or gradients.
    """
    x = _check_point(gmm, x, t)
    if t == 0.0:
        return -log_density_t(gmm, x, 0.0)
    s0sq = gmm.base_scale**2
    var = s0sq + t**2
    diff = gmm.means - x
    sq = np.einsum("kd,kd->k", diff, diff)
    base_exp = gmm.log_weights - 0.5 * sq / s0sq
    log_p0 = logsumexp(base_exp) - 0.5 * gmm.dim * np.log(2.0 * np.pi * s0sq)
    log_resp = base_exp - logsumexp(base_exp)
    tilt = sq * t**2 / (2.0 * s0sq * var)
    raw = -log_p0 - logsumexp(log_resp + tilt)
    # Tilt-sum value equals -log p_t + (dim/2) log(s0sq/var); renormalize to
    # the artifact convention with the dimension-free -1/2 constant.
    return float(raw - 0.5 * (gmm.dim + 1) * np.log(s0sq / var))


def grad_potential_f_t(gmm: GaussianMixture, x, t: float) -> np.ndarray:
    """Gradient of ``f_t``; the additive constant drops, so it is ``-score``."""
    return -score_t(gmm, x, t)


def smoothed_eval(gmm: GaussianMixture, x, t: float) -> SmoothedEval:
    """Evaluate log-density, score, potential and responsibilities at once."""
    x = _check_point(gmm, x, t)
    var = gmm.base_scale**2 + t**2
    logpdf, score, _ = mixture_eval(gmm.means, gmm.log_weights, var, x)
    return SmoothedEval(
        log_density=float(logpdf),
        score=score,
        potential=potential_f_t(gmm, x, t),
        responsibilities=base_responsibilities(gmm, x),
    )


@dataclass(frozen=True)
class ProxResult:
    """Outcome of the proximal fixed-point solve."""

    y: np.ndarray
    iterations: int
    converged: bool
    residual: float


def prox_step(
    gmm: GaussianMixture,
    x,
    t: float,
    dt: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> ProxResult:
    """Proximal update ``argmin_y f_t(y) + ||y - x||^2 / (2 dt)``.

    Solved by fixed-point iteration ``y <- x - dt * grad f_t(y)`` seeded at
    ``x``.  Convergence requires ``dt`` below the reciprocal of the local
    Lipschitz constant of ``grad f_t`` (caller's responsibility).  On
    non-convergence the result carries ``converged=False`` with the last
    iterate; no exception is raised.
    """
    x = _check_point(gmm, x, t)
    if dt <= 0.0:
        raise ValueError(f"step size dt must be > 0, got {dt}")
    y = x.copy()
    residual = np.inf
    for k in range(1, max_iter + 1):
        candidate = x + dt * score_t(gmm, y, t)
        residual = float(np.linalg.norm(y - candidate))
        y = candidate
        if residual <= tol:
            return ProxResult(y=y, iterations=k, converged=True, residual=residual)
    return ProxResult(y=y, iterations=max_iter, converged=False, residual=residual)
