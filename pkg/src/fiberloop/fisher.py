"""Fisher information, Cramer-Rao information and equivalent efficiency.

The photon distribution is parameterized by ``rho_1 .. rho_K``; ``rho_0``
follows from normalization, so ``dp_j/drho_k = c[j, k] - c[j, 0]``.  The
Fisher matrix is per trial:

    F[k, l] = sum_j (dp_j/drho_k) (dp_j/drho_l) / p_j

and the information per pulse gathered over ``N`` pulses is
``1 / (N * trace(F^-1))``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .detector import (
    DetectorConfig,
    ResponseMatrix,
    ideal_response_matrix,
    outcome_probs,
    response_matrix,
)

__all__ = [
    "FisherReport",
    "EquivalentEfficiency",
    "BoundaryError",
    "SingularFisherError",
    "IllConditionedWarning",
    "RootNotBracketedError",
    "outcome_derivatives",
    "fisher_matrix",
    "fisher_report",
    "cr_information",
    "exact_information",
    "loop_info_approx",
    "ideal_info_approx",
    "equivalent_efficiency",
    "equivalent_efficiency_sweep",
]

PROB_FLOOR = 1e-300
COND_LIMIT = 1e12


class BoundaryError(ValueError):
    """Outcomes with zero probability but nonzero derivative: the Fisher
    information diverges along those directions."""

    def __init__(self, outcomes):
        self.outcomes = tuple(outcomes)
        super().__init__(f"zero-probability outcomes with nonzero derivative: {self.outcomes}")


class SingularFisherError(np.linalg.LinAlgError):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"Fisher matrix is not invertible (condition number {condition:.3g})")


class IllConditionedWarning(RuntimeWarning):
    pass


class RootNotBracketedError(ValueError):
    def __init__(self, low, high):
        self.low, self.high = low, high
        super().__init__(
            f"equivalent efficiency not bracketed: ideal information {low:.6g} at the "
            f"lower end and {high:.6g} at the upper end"
        )


def _matrix(C):
    return np.asarray(C, dtype=float)


def _free(C, free):
    K = _matrix(C).shape[1] - 1
    if free is None:
        return list(range(1, K + 1))
    free = [int(k) for k in free]
    if any(k < 1 or k > K for k in free) or len(set(free)) != len(free):
        raise ValueError(f"free indices must be distinct and within 1..{K}")
    return free


def outcome_derivatives(C, free=None) -> np.ndarray:
    """``dp_j/drho_k`` with ``rho_0`` eliminated; shape (outcomes, free)."""
    m = _matrix(C)
    free = _free(C, free)
    return m[:, free] - m[:, [0]]


def _labels(C, mask):
    labels = getattr(C, "labels", None)
    idx = np.flatnonzero(mask)
    return tuple(labels[j] for j in idx) if labels else tuple(int(j) for j in idx)


def _parts(C, rho, free, floor):
    p = outcome_probs(C, rho) if isinstance(C, ResponseMatrix) else _matrix(C) @ np.asarray(rho, float)
    D = outcome_derivatives(C, free)
    support = p >= floor
    divergent = ~support & np.any(D != 0, axis=1)
    return p, D, support, divergent


def fisher_matrix(C, rho, free: Sequence[int] | None = None, floor: float = PROB_FLOOR,
                  strict: bool = True) -> np.ndarray:
    """Per-trial Fisher matrix over the free Fock indices (default 1..K).

    Outcomes with ``p_j < floor`` are left out.  If any of them has a
    nonzero derivative the true matrix diverges; with ``strict`` a
    :class:`BoundaryError` is raised, otherwise the finite part over the
    support is returned (see :func:`fisher_report` for the flagged form).
    """
    p, D, support, divergent = _parts(C, rho, free, floor)
    if strict and divergent.any():
        raise BoundaryError(_labels(C, divergent))
    Ds = D[support]
    F = (Ds.T / p[support]) @ Ds
    return 0.5 * (F + F.T)


def _inverse(F):
    F = np.atleast_2d(F)
    if F.size == 0:
        return F, 1.0
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(F))
    if not np.isfinite(cond) or cond > 1e16:
        raise SingularFisherError(cond)
    try:
        inv = linalg.cho_solve(linalg.cho_factor(F), np.eye(F.shape[0]))
    except linalg.LinAlgError:
        raise SingularFisherError(cond) from None
    if cond > COND_LIMIT:
        warnings.warn(f"Fisher matrix condition number {cond:.3g}", IllConditionedWarning,
                      stacklevel=3)
    return 0.5 * (inv + inv.T), cond


def cr_information(F, pulses: int = 1) -> float:
    """``1 / (pulses * trace(F^-1))`` for the per-trial matrix ``F``."""
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    inv, _ = _inverse(F)
    return 1.0 / (pulses * float(np.trace(inv)))


@dataclass
class FisherReport:
    """Fisher analysis of one (detector, state) pair.

    ``covariance`` is the Cramer-Rao covariance bound per trial.  When the
    state sits on the simplex boundary (``boundary_outcomes`` non-empty)
    the directions fixed by those outcomes carry infinite information; the
    covariance is then taken on the remaining subspace, which is the limit
    of approaching the boundary from the interior.
    """

    fisher: np.ndarray
    information: float
    free_params: tuple
    covariance: np.ndarray | None = None
    pulses: int = 1
    boundary_outcomes: tuple = ()
    condition_number: float = float("nan")
    flags: list = field(default_factory=list)
    equivalent_efficiency: float | None = None

    @property
    def trace_inverse(self) -> float:
        if self.covariance is None:
            return float("inf")
        return float(np.trace(self.covariance))

    def to_dict(self) -> dict:
        d = {
            "free_params": list(self.free_params),
            "pulses": self.pulses,
            "information": self.information,
            "trace_inverse_fisher": self.trace_inverse,
            "condition_number": self.condition_number,
            "fisher": self.fisher.tolist(),
            "boundary_outcomes": list(self.boundary_outcomes),
            "flags": list(self.flags),
        }
        if self.covariance is not None:
            d["covariance"] = self.covariance.tolist()
        if self.equivalent_efficiency is not None:
            d["equivalent_efficiency"] = self.equivalent_efficiency
        return d


def fisher_report(C, rho, free: Sequence[int] | None = None, pulses: int = 1,
                  floor: float = PROB_FLOOR) -> FisherReport:
    free = _free(C, free)
    p, D, support, divergent = _parts(C, rho, free, floor)
    F = fisher_matrix(C, rho, free, floor=floor, strict=False)
    flags = []
    boundary = _labels(C, divergent)
    if divergent.any():
        flags.append("boundary")
        pinned = D[divergent]
        Q = linalg.null_space(pinned)
    else:
        Q = np.eye(len(free))
    if Q.shape[1] == 0:
        cov = np.zeros((len(free), len(free)))
        return FisherReport(F, float("inf"), tuple(free), cov, pulses, boundary, 1.0, flags)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IllConditionedWarning)
            inv, cond = _inverse(Q.T @ F @ Q)
        if caught:
            flags.append("ill-conditioned")
    except SingularFisherError as exc:
        flags.append("singular")
        return FisherReport(F, 0.0, tuple(free), None, pulses, boundary, exc.condition, flags)
    cov = Q @ inv @ Q.T
    info = 1.0 / (pulses * float(np.trace(cov)))
    return FisherReport(F, info, tuple(free), cov, pulses, boundary, cond, flags)


def exact_information(C, rho, free: Sequence[int] | None = None) -> float:
    """Per-pulse information bound, handling boundary states by their
    interior limit.  Returns 0 when some parameter is not identifiable."""
    return fisher_report(C, rho, free).information


def _check_two_photon(rho1, rho2):
    if rho1 < 0 or rho2 < 0 or rho1 + rho2 > 1 + 1e-15:
        raise ValueError(f"invalid two-photon state rho1={rho1}, rho2={rho2}")


def loop_info_approx(rho1: float, rho2: float, eta: float, T: float) -> float:
    """Leading term in ``eta`` of the two-channel loop information."""
    _check_two_photon(rho1, rho2)
    tau = T * (1 - T)
    if rho2 > 0:
        return 2 * tau * eta**2 / (5 * rho2)
    return 2 * eta / rho1 + 2 * (1 - tau) * eta**2


def ideal_info_approx(rho1: float, rho2: float, efficiency: float) -> float:
    """Leading term in the efficiency of the ideal-counter information."""
    _check_two_photon(rho1, rho2)
    if rho2 > 0:
        return efficiency**2 / (5 * rho2)
    return 2 * efficiency / rho1


@dataclass(frozen=True)
class EquivalentEfficiency:
    value: float
    loop_information: float
    saturated: bool = False


def equivalent_efficiency(detector, rho, free: Sequence[int] | None = None,
                          xtol: float = 1e-10) -> EquivalentEfficiency:
    """Efficiency of the ideal photon counter with the same information.

    ``detector`` is a :class:`DetectorConfig` or a prepared response
    matrix.  Ideal information grows with efficiency, so the match is found
    by a bracketed root search on ``[0, 1]``.
    """
    rho = np.asarray(rho, dtype=float)
    K = rho.size - 1
    C = response_matrix(detector, K) if isinstance(detector, DetectorConfig) else detector
    target = exact_information(C, rho, free)
    if not target > 0:
        raise ValueError("detector information is zero; the state is not identifiable")

    def ideal(x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            return exact_information(ideal_response_matrix(x, K), rho, free)

    lo, hi = ideal(0.0), ideal(1.0)
    if hi <= target:
        return EquivalentEfficiency(1.0, target, saturated=True)
    if lo >= target:
        raise RootNotBracketedError(lo, hi)

    def g(x):
        return min(ideal(x), 1e300) - target

    root = optimize.brentq(g, 0.0, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return EquivalentEfficiency(float(root), target)


def equivalent_efficiency_sweep(rho, efficiencies: Sequence[float], channels: int = 2,
                                transmissions: Sequence[float] | None = None,
                                loop_transmission: float = 1.0,
                                free: Sequence[int] | None = None) -> np.ndarray:
    """Rows ``(eta, eta_eq)`` with every binary detector at efficiency ``eta``.

    Splitters default to the balanced chain.
    """
    rows = []
    for eta in efficiencies:
        if transmissions is None:
            cfg = DetectorConfig.balanced(channels, eta, loop_transmission)
        else:
            cfg = DetectorConfig((eta,) * channels, tuple(transmissions), loop_transmission)
        rows.append((float(eta), equivalent_efficiency(cfg, rho, free).value))
    return np.array(rows)
