"""Pure-numpy mixture kernels; fallback for the compiled extension.

Every function here mirrors a function in ``_kernels.pyx`` with the same
signature and semantics.  All inputs are float64: ``means`` is ``(K, d)``,
``log_weights`` is ``(K,)``, ``var`` is the per-axis variance of the
isotropic components, ``x`` is a single point ``(d,)``.
"""

import numpy as np
from scipy.special import logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))


def mixture_eval(means, log_weights, var, x):
    """Evaluate a single point under the isotropic mixture.

    Returns ``(logpdf, score, resp)`` where ``score`` is the gradient of the
    log-density and ``resp`` the posterior component responsibilities.
    """
    diff = means - x  # (K, d)
    d = means.shape[1]
    exponents = log_weights - 0.5 * np.einsum("kd,kd->k", diff, diff) / var
    lse = logsumexp(exponents)
    resp = np.exp(exponents - lse)
    score = (resp @ diff) / var
    logpdf = lse - 0.5 * d * (LOG_2PI + np.log(var))
    return logpdf, score, resp


def mixture_logpdf_batch(means, log_weights, var, xs):
    """Log-density of the isotropic mixture at each row of ``xs``."""
    d = means.shape[1]
    diff = xs[:, None, :] - means[None, :, :]  # (n, K, d)
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    exponents = log_weights[None, :] - 0.5 * sq / var
    return logsumexp(exponents, axis=1) - 0.5 * d * (LOG_2PI + np.log(var))


def mixture_score_vjp(means, log_weights, var, x, w):
    """Product of the score Jacobian with ``w``.

    The Jacobian of the mixture score is symmetric:
    ``J = sum_i resp_i m_i m_i^T - s s^T - I/var`` with ``m_i = (mu_i - x)/var``,
    so the same routine serves JVPs and VJPs.
    """
    _, score, resp = mixture_eval(means, log_weights, var, x)
    m = (means - x) / var  # (K, d)
    mw = m @ w
    return (resp * mw) @ m - score * (score @ w) - w / var
