"""Synthetic score fields with known geometry, used by the verify suite,
tests, and benchmarks."""

import numpy as np

from .oracles import ScoreOracle


class ConstantField(ScoreOracle):
    """Score independent of ``x``; zero Jacobian, zero curvature."""

    supports_jvp = True

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float).ravel()
        self.dim = self.value.shape[0]

    def score(self, x, t: float) -> np.ndarray:
        self._check(x, t)
        return self.value.copy()

    def score_vjp(self, x, t: float, w) -> np.ndarray:
        self._check(x, t)
        return np.zeros(self.dim)


def zero_field(dim: int) -> ConstantField:
    """Field with score identically zero (sampler updates become no-ops)."""
    return ConstantField(np.zeros(dim))


class QuadraticNormField(ScoreOracle):
    """Field whose score magnitude is the quadratic form ``x^T A x / 2``.

    The score is ``-(x^T A x / 2) * u`` for a fixed unit vector ``u``, so
    with symmetric positive-definite ``A`` the gradient of the score norm is
    exactly ``A x`` and its Hessian is ``A``.  This makes the curvature index
    and the power-iteration eigenvalue estimate checkable against an exact
    eigendecomposition.
    """

    supports_jvp = True

    def __init__(self, matrix, direction=None):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(self.matrix, self.matrix.T):
            raise ValueError("matrix must be symmetric")
        self.dim = self.matrix.shape[0]
        if direction is None:
            direction = np.zeros(self.dim)
            direction[0] = 1.0
        self.direction = np.asarray(direction, dtype=float).ravel()
        self.direction = self.direction / np.linalg.norm(self.direction)

    def score(self, x, t: float) -> np.ndarray:
        x = self._check(x, t)
        return -0.5 * float(x @ self.matrix @ x) * self.direction

    def score_vjp(self, x, t: float, w) -> np.ndarray:
        x = self._check(x, t)
        return -(self.matrix @ x) * float(self.direction @ np.asarray(w, dtype=float))
