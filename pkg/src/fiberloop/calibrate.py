"""Calibration of channel efficiencies with Poissonian light.

For a coherent source of mean ``mu`` the zero-click probability of channel
``l`` is ``exp(-mu * eta_l)``, so each efficiency follows from that
channel's no-click marginal.  Splitter transmissions are then recovered by
unwinding the splitter chain given assumed detector efficiencies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .simulate import EventHistogram

__all__ = [
    "CalibrationError",
    "CalibrationRecord",
    "zero_count_frequencies",
    "estimate_efficiencies",
    "efficiency_standard_errors",
    "infer_transmissions",
    "calibrate",
]


class CalibrationError(ValueError):
    pass


@dataclass
class CalibrationRecord:
    channel_efficiencies: np.ndarray
    source_mean: float
    pulses: int
    implied_transmissions: np.ndarray | None = None
    detector_efficiencies: np.ndarray | None = None
    loop_transmission: float = 1.0
    standard_errors: np.ndarray | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        """``detector`` and ``calibration`` sections, loadable as a run config."""
        if self.implied_transmissions is not None:
            detector = {
                "detector_efficiencies": self.detector_efficiencies.tolist(),
                "transmissions": self.implied_transmissions.tolist(),
                "loop_transmission": self.loop_transmission,
            }
        else:
            detector = {"channel_efficiencies": self.channel_efficiencies.tolist()}
        cal = {
            "source_mean": self.source_mean,
            "pulses": self.pulses,
            "channel_efficiencies": self.channel_efficiencies.tolist(),
        }
        if self.standard_errors is not None:
            cal["standard_errors"] = self.standard_errors.tolist()
        if self.flags:
            cal["flags"] = list(self.flags)
        return {"detector": detector, "calibration": cal}


def zero_count_frequencies(hist: EventHistogram) -> np.ndarray:
    """Fraction of pulses with no click in each channel."""
    s = hist.channels
    idx = np.arange(2**s)
    out = np.empty(s)
    for l in range(s):
        silent = ((idx >> (s - 1 - l)) & 1) == 0
        out[l] = hist.counts[silent].sum() / hist.pulses
    return out


def estimate_efficiencies(zero_freqs: Sequence[float], mean: float, clamp: bool = False) -> np.ndarray:
    """Invert ``p0_l = exp(-mean * eta_l)``.

    Raises :class:`CalibrationError` for a zero frequency (the source is too
    bright to resolve that channel) or an efficiency above one.  With
    ``clamp`` the latter is clipped to 1 with a warning instead.
    """
    z = np.asarray(zero_freqs, dtype=float)
    if not mean > 0:
        raise CalibrationError("source mean must be positive")
    if np.any(z > 1) or np.any(z < 0):
        raise CalibrationError("zero-count frequencies must lie in [0, 1]")
    if np.any(z == 0):
        bad = np.flatnonzero(z == 0).tolist()
        raise CalibrationError(f"channels {bad} never silent; efficiency unresolvable at mean {mean}")
    eta = -np.log(z) / mean
    eta[eta < 0] = 0.0
    if np.any(eta > 1):
        bad = np.flatnonzero(eta > 1).tolist()
        if not clamp:
            raise CalibrationError(f"channels {bad} imply efficiency above 1; source mean inconsistent")
        warnings.warn(f"efficiencies of channels {bad} clamped to 1", RuntimeWarning, stacklevel=2)
        eta = np.minimum(eta, 1.0)
    return eta


def efficiency_standard_errors(zero_freqs: Sequence[float], mean: float, pulses: int) -> np.ndarray:
    """Binomial standard error of each efficiency (delta method)."""
    z = np.asarray(zero_freqs, dtype=float)
    return np.sqrt(z * (1 - z) / pulses) / (mean * z)


def infer_transmissions(etas: Sequence[float], detector_efficiencies: Sequence[float],
                        loop_transmission: float = 1.0, check_closure: bool = True,
                        rtol: float = 1e-9) -> np.ndarray:
    """Splitter transmissions reproducing the channel efficiencies ``etas``.

    With ``a_l = eta_l / det_l`` the light reaching splitter ``l`` obeys
    ``r_l = a_l + r_{l+1} / L`` and ``r_s = a_s``, so ``T_l = a_l / r_l``.
    Summing from the tail adds positive terms only, which keeps the solve
    accurate even when early splitters pass almost everything.  A consistent
    set of efficiencies has ``r_1 = 1``; with ``check_closure`` a deviation
    beyond ``rtol`` raises.
    """
    etas = np.asarray(etas, dtype=float)
    det = np.asarray(detector_efficiencies, dtype=float)
    L = float(loop_transmission)
    if etas.size != det.size:
        raise CalibrationError(f"{etas.size} efficiencies but {det.size} detectors")
    if np.any(det <= 0):
        raise CalibrationError("detector efficiencies must be positive")
    if np.any(etas < 0):
        raise CalibrationError("channel efficiencies must be nonnegative")
    if not 0 < L <= 1:
        raise CalibrationError("loop transmission must lie in (0, 1]")
    a = etas / det
    reach = np.empty_like(a)
    reach[-1] = a[-1]
    for l in range(a.size - 2, -1, -1):
        reach[l] = a[l] + reach[l + 1] / L
    if check_closure and not math.isclose(reach[0], 1.0, rel_tol=rtol):
        raise CalibrationError(
            f"channel efficiencies account for {reach[0]!r} of the input light, not 1"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        trans = np.where(reach[:-1] > 0, a[:-1] / reach[:-1], 0.0)
    return trans


def calibrate(hist: EventHistogram, mean: float,
              detector_efficiencies: Sequence[float] | None = None,
              loop_transmission: float = 1.0) -> CalibrationRecord:
    """Calibration record from a Poissonian-light histogram."""
    z = zero_count_frequencies(hist)
    eta = estimate_efficiencies(z, mean)
    flags = []
    if eta.sum() > 1:
        raise CalibrationError(f"channel efficiencies sum to {eta.sum()} > 1")
    rec = CalibrationRecord(
        channel_efficiencies=eta,
        source_mean=float(mean),
        pulses=hist.pulses,
        standard_errors=efficiency_standard_errors(z, mean, hist.pulses),
        loop_transmission=float(loop_transmission),
        flags=flags,
    )
    if detector_efficiencies is not None:
        det = np.asarray(detector_efficiencies, dtype=float)
        rec.implied_transmissions = infer_transmissions(eta, det, loop_transmission,
                                                        check_closure=False)
        rec.detector_efficiencies = det
        closure = float(np.sum(eta / det * float(loop_transmission) ** -np.arange(det.size)))
        if not math.isclose(closure, 1.0, rel_tol=1e-9):
            flags.append("chain-not-closed")
    return rec
