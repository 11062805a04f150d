"""Score oracles: interchangeable score / noise / denoiser parameterizations.

Every oracle satisfies the parameterization identity at each evaluation:

    -t * score == noise_pred == (x - denoised) / t

``noise_pred`` is the predicted added noise (the drift of the sampling ODE),
``denoised`` the posterior-mean estimate of the clean point.  Oracles are
immutable after construction and evaluation is pure, so they can be shared
freely across chains and threads.
"""

import abc
from dataclasses import dataclass

import numpy as np

from ._backend import mixture_eval, mixture_score_vjp
from .mixture import GaussianMixture

PARAMS = ("score", "noise", "denoised")


@dataclass(frozen=True)
class OracleEval:
    """One oracle evaluation in all three parameterizations."""

    denoised: np.ndarray
    score: np.ndarray
    noise_pred: np.ndarray


class ScoreOracle(abc.ABC):
    """Abstract score field with optional analytic directional derivatives."""

    dim: int
    supports_jvp: bool = False

    @abc.abstractmethod
    def score(self, x: np.ndarray, t: float) -> np.ndarray:
        """Score vector at ``(x, t)``; requires ``t > 0``."""

    def evaluate(self, x, t: float) -> OracleEval:
        """Evaluate and return the consistent (denoised, score, noise) triple."""
        x = self._check(x, t)
        s = self.score(x, t)
        return OracleEval(denoised=x + t**2 * s, score=s, noise_pred=-t * s)

    def score_vjp(self, x: np.ndarray, t: float, w: np.ndarray) -> np.ndarray:
        """Product of the transposed score Jacobian with ``w``.

        Only available when ``supports_jvp`` is true.
        """
        raise NotImplementedError(f"{type(self).__name__} has no analytic Jacobian")

    def _check(self, x, t: float) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
        if x.shape != (self.dim,):
            raise ValueError(f"x has dimension {x.shape[0]}, expected {self.dim}")
        if not np.isfinite(t) or t <= 0.0:
            raise ValueError(f"oracle evaluations require finite t > 0, got {t}")
        return x


class GMMOracle(ScoreOracle):
    """Exact oracle for an isotropic Gaussian mixture target."""

    supports_jvp = True

    def __init__(self, gmm: GaussianMixture):
        self.gmm = gmm
        self.dim = gmm.dim

    def score(self, x, t: float) -> np.ndarray:
        x = self._check(x, t)
        var = self.gmm.base_scale**2 + t**2
        _, s, _ = mixture_eval(self.gmm.means, self.gmm.log_weights, var, x)
        return s

    def score_vjp(self, x, t: float, w: np.ndarray) -> np.ndarray:
        x = self._check(x, t)
        var = self.gmm.base_scale**2 + t**2
        w = np.ascontiguousarray(np.asarray(w, dtype=float))
        return mixture_score_vjp(self.gmm.means, self.gmm.log_weights, var, x, w)


def oracle_from_gmm(gmm: GaussianMixture) -> GMMOracle:
    """Exact score oracle for ``gmm`` with analytic Jacobian products."""
    return GMMOracle(gmm)


@dataclass(frozen=True)
class Bump:
    """One localized Gaussian score corruption, active on a noise-level band."""

    center: np.ndarray
    width: float
    amplitude: float
    direction: np.ndarray
    t_range: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())
        object.__setattr__(
            self, "direction", np.asarray(self.direction, dtype=float).ravel()
        )
        object.__setattr__(self, "t_range", (float(self.t_range[0]), float(self.t_range[1])))
        if self.width <= 0.0:
            raise ValueError("bump width must be > 0")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise ValueError("bump direction must be a unit vector")
        if self.center.shape != self.direction.shape:
            raise ValueError("bump center and direction dimensions differ")
        if not self.t_range[0] < self.t_range[1]:
            raise ValueError("bump t_range must satisfy t_lo < t_hi")


@dataclass(frozen=True)
class PerturbationSpec:
    """Collection of score bumps modelling localized approximation error."""

    bumps: tuple

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))

    def to_json_dict(self) -> dict:
        return {
            "bumps": [
                {
                    "center": [float(v) for v in b.center],
                    "width": b.width,
                    "amplitude": b.amplitude,
                    "direction": [float(v) for v in b.direction],
                    "t_range": [b.t_range[0], b.t_range[1]],
                }
                for b in self.bumps
            ]
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PerturbationSpec":
        try:
            bumps = [
                Bump(
                    center=b["center"],
                    width=b["width"],
                    amplitude=b["amplitude"],
                    direction=b["direction"],
                    t_range=b["t_range"],
                )
                for b in doc["bumps"]
            ]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed perturbation document: {exc}") from exc
        return cls(bumps=tuple(bumps))


class PerturbedOracle(ScoreOracle):
    """Base oracle plus gated Gaussian bumps added to the score.

    Denoised and noise predictions are recomputed from the corrupted score,
    so the parameterization identity still holds exactly.  The field is
    smooth in ``x`` everywhere and discontinuous in ``t`` only at the gate
    boundaries of each bump.
    """

    def __init__(self, base: ScoreOracle, spec: PerturbationSpec):
        for b in spec.bumps:
            if b.center.shape != (base.dim,):
                raise ValueError("bump dimension does not match base oracle")
        self.base = base
        self.spec = spec
        self.dim = base.dim
        self.supports_jvp = base.supports_jvp

    def _active(self, t: float):
        return [b for b in self.spec.bumps if b.t_range[0] <= t <= b.t_range[1]]

    def score(self, x, t: float) -> np.ndarray:
        x = self._check(x, t)
        s = self.base.score(x, t).copy()
        for b in self._active(t):
            r = x - b.center
            s += b.amplitude * np.exp(-(r @ r) / (2.0 * b.width**2)) * b.direction
        return s

    def score_vjp(self, x, t: float, w: np.ndarray) -> np.ndarray:
        x = self._check(x, t)
        out = self.base.score_vjp(x, t, w).copy()
        for b in self._active(t):
            r = x - b.center
            phi = np.exp(-(r @ r) / (2.0 * b.width**2))
            out += b.amplitude * phi * float(b.direction @ w) * (-r / b.width**2)
        return out


def oracle_with_perturbation(base: ScoreOracle, spec: PerturbationSpec) -> ScoreOracle:
    """Wrap ``base`` with the score corruption described by ``spec``."""
    return PerturbedOracle(base, spec)


def convert(x, t: float, value, from_param: str, to_param: str) -> np.ndarray:
    """Convert ``value`` between the score/noise/denoised parameterizations."""
    if from_param not in PARAMS or to_param not in PARAMS:
        raise ValueError(f"parameterizations must be one of {PARAMS}")
    if t == 0.0:
        raise ValueError("parameterization conversion is undefined at t = 0")
    x = np.asarray(x, dtype=float)
    value = np.asarray(value, dtype=float)
    if from_param == "score":
        score = value
    elif from_param == "noise":
        score = -value / t
    else:
        score = (value - x) / t**2
    if to_param == "score":
        return score
    if to_param == "noise":
        return -t * score
    return x + t**2 * score
