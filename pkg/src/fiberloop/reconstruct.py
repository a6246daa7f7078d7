"""Maximum-likelihood photon statistics by Expectation-Maximization.

Given observed outcome frequencies ``f`` and a column-stochastic response
matrix ``C``, the estimate maximizes ``sum_j f_j log p_j`` with
``p = C @ rho``, which is the same as minimizing ``KL(f || p)``.  The
multiplicative update

    rho_k <- rho_k * sum_j f_j c[j, k] / p_j

keeps ``rho`` on the simplex and never decreases the likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import PhotonDistribution

__all__ = [
    "EmResult",
    "SupportError",
    "kl_divergence",
    "log_likelihood",
    "em_step",
    "em_reconstruct",
    "default_cutoff",
]


class SupportError(ValueError):
    """An observed outcome has zero model probability."""

    def __init__(self, outcome):
        self.outcome = outcome
        super().__init__(f"outcome {outcome} observed but has zero model probability")


@dataclass
class EmResult:
    estimate: PhotonDistribution
    iterations: int
    final_divergence: float
    converged: bool
    likelihood_trace: np.ndarray


def default_cutoff(channels: int) -> int:
    """All-click pattern plus a two-photon margin."""
    return channels + 2


def _freqs(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("negative frequency")
    return f


def kl_divergence(f, p) -> float:
    """``sum_{f_j > 0} f_j log(f_j / p_j)`` in nats; ``inf`` if some
    observed outcome has ``p_j = 0``."""
    f, p = _freqs(f), np.asarray(p, dtype=float)
    if f.shape != p.shape:
        raise ValueError("frequency and probability vectors differ in length")
    m = f > 0
    if np.any(p[m] <= 0):
        return math.inf
    return float(np.sum(f[m] * np.log(f[m] / p[m])))


def log_likelihood(f, p) -> float:
    """Per-pulse log-likelihood ``sum_j f_j log p_j``."""
    f, p = _freqs(f), np.asarray(p, dtype=float)
    m = f > 0
    if np.any(p[m] <= 0):
        return -math.inf
    return float(f[m] @ np.log(p[m]))


def _step(rho, C, f, observed):
    p = C @ rho
    if np.any(p[observed] <= 0):
        raise SupportError(int(np.flatnonzero(observed & (p <= 0))[0]))
    ratio = np.zeros_like(p)
    ratio[observed] = f[observed] / p[observed]
    excess = C.T @ ratio - 1.0
    new = np.clip(rho * (1.0 + excess), 0.0, None)
    return new / new.sum(), p, excess


def _labelled(C, j):
    labels = getattr(C, "labels", None)
    return labels[j] if labels else j


def em_step(rho, C, f) -> PhotonDistribution:
    """One EM update of ``rho`` towards the frequencies ``f``."""
    m = np.asarray(C, dtype=float)
    rho = np.asarray(rho, dtype=float)
    f = _freqs(f)
    if m.shape != (f.size, rho.size):
        raise ValueError(f"shapes: C {m.shape}, f {f.size}, rho {rho.size}")
    try:
        new, _, _ = _step(rho, m, f, f > 0)
    except SupportError as exc:
        raise SupportError(_labelled(C, exc.outcome)) from None
    return PhotonDistribution(new)


def em_reconstruct(C, f, init=None, max_iter: int = 100_000, tol: float = 1e-10,
                   keep_trace: bool = True) -> EmResult:
    """Iterate EM from ``init`` (uniform by default) until the per-pulse
    log-likelihood gains less than ``tol`` nats in one step.

    Hitting ``max_iter`` is not an error: the result has ``converged=False``.
    """
    m = np.asarray(C, dtype=float)
    f = _freqs(f)
    total = f.sum()
    if not total > 0:
        raise ValueError("frequencies are all zero")
    f = f / total
    if m.shape[0] != f.size:
        raise ValueError(f"{f.size} frequencies for {m.shape[0]} outcomes")
    if init is None:
        rho = np.full(m.shape[1], 1.0 / m.shape[1])
    else:
        rho = np.asarray(init, dtype=float).copy()
        if rho.size != m.shape[1]:
            raise ValueError("initial state has the wrong cutoff")
        if np.any(rho <= 0):
            raise ValueError("initial state must be strictly positive")
        rho /= rho.sum()
    observed = f > 0
    fo = f[observed]
    trace = []
    converged = False
    it = 0
    try:
        for it in range(1, max_iter + 1):
            new, p, excess = _step(rho, m, f, observed)
            if keep_trace:
                trace.append(float(fo @ np.log(p[observed])))
            # Differencing two likelihood totals drowns in rounding near the
            # optimum.  With d = rho * excess (which sums to zero) the gain is
            # sum(d * excess) + sum(f * (log1p(x) - x)), x = (C d) / p, and
            # neither term cancels catastrophically.
            d = rho * excess
            x = (m @ d)[observed] / p[observed]
            gain = float(d @ excess + fo @ (np.log1p(x) - x))
            rho = new
            if gain < tol:
                converged = True
                break
    except SupportError as exc:
        raise SupportError(_labelled(C, exc.outcome)) from None
    p = m @ rho
    final_ll = float(fo @ np.log(p[observed]))
    if keep_trace:
        trace.append(final_ll)
    neg_entropy = float(fo @ np.log(fo))
    return EmResult(
        estimate=PhotonDistribution(rho),
        iterations=it,
        final_divergence=neg_entropy - final_ll,
        converged=converged,
        likelihood_trace=np.array(trace),
    )
