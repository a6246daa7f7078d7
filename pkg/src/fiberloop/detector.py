"""Outcome-probability model of an ``s``-channel fiber-loop detector.

The loop is replaced by its substituting scheme: a chain of splitters with
transmissions ``T_1 .. T_{s-1}``.  Splitter ``l`` sends light to binary
detector ``l``; the remainder survives one more round trip (probability
``L``) and reaches the next splitter.  Photons are routed independently.

Outcome patterns are strings over ``{'0', '1'}`` with channel 1 (the first
to exit) leftmost.  Row ``j`` of a response matrix is the pattern whose
binary reading equals ``j``, so for two channels the rows are
``00, 01, 10, 11``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .fock import PhotonDistribution

__all__ = [
    "DetectorConfig",
    "ResponseMatrix",
    "MAX_CHANNELS",
    "ARBITRARY",
    "pattern_labels",
    "pattern_index",
    "channel_efficiencies",
    "zero_arbitrary_prob",
    "response_matrix",
    "response_matrix_from_efficiencies",
    "outcome_probs",
    "two_channel_probs",
    "ideal_response_matrix",
    "ideal_detector_probs",
    "no_coincidence_probs",
]

MAX_CHANNELS = 16

#: accepted spellings of the "arbitrary" (don't care) symbol
ARBITRARY = frozenset("∀*xXaA")


def _check_unit(name, values, open_low=False):
    for i, v in enumerate(values):
        if not np.isfinite(v) or v > 1 or v < 0 or (open_low and v == 0):
            interval = "(0, 1]" if open_low else "[0, 1]"
            raise ValueError(f"{name}[{i}]={v} outside {interval}")


@dataclass(frozen=True)
class DetectorConfig:
    """Splitter transmissions, binary-detector efficiencies and loop loss.

    Args:
        detector_efficiencies: per-channel efficiencies, one per output
            channel; their count defines the channel number ``s``.
        transmissions: the ``s - 1`` splitter transmissivities.
        loop_transmission: survival probability per round trip, in (0, 1].
    """

    detector_efficiencies: tuple
    transmissions: tuple = ()
    loop_transmission: float = 1.0

    def __post_init__(self):
        det = tuple(float(x) for x in self.detector_efficiencies)
        trans = tuple(float(x) for x in self.transmissions)
        if not det:
            raise ValueError("detector needs at least one channel")
        if len(trans) != len(det) - 1:
            raise ValueError(
                f"{len(det)} channels need {len(det) - 1} transmissions, got {len(trans)}"
            )
        _check_unit("detector_efficiencies", det)
        _check_unit("transmissions", trans)
        _check_unit("loop_transmission", [float(self.loop_transmission)], open_low=True)
        object.__setattr__(self, "detector_efficiencies", det)
        object.__setattr__(self, "transmissions", trans)
        object.__setattr__(self, "loop_transmission", float(self.loop_transmission))

    @property
    def channels(self) -> int:
        return len(self.detector_efficiencies)

    @classmethod
    def balanced(cls, channels: int, efficiency: float, loop_transmission: float = 1.0):
        """Splitters chosen so that every channel receives an equal share
        when the loop is lossless."""
        trans = tuple(1.0 / (channels - l) for l in range(channels - 1))
        return cls((efficiency,) * channels, trans, loop_transmission)

    @classmethod
    def from_channel_efficiencies(cls, etas: Sequence[float]) -> "DetectorConfig":
        """A factorization of given channel efficiencies.

        Only the products ``eta_l`` enter the outcome statistics.  Detectors
        1..s-1 are taken as perfect and all remaining loss is attributed to
        the last detector.
        """
        etas = np.asarray(etas, dtype=float)
        _check_unit("channel_efficiencies", etas)
        if etas.sum() > 1 + 1e-12:
            raise ValueError(f"channel efficiencies sum to {etas.sum()} > 1")
        s = etas.size
        trans = []
        remaining = 1.0
        for l in range(s - 1):
            t = etas[l] / remaining if remaining > 0 else 0.0
            t = min(max(t, 0.0), 1.0)
            trans.append(t)
            remaining *= 1 - t
        last = etas[-1] / remaining if remaining > 0 else 0.0
        det = (1.0,) * (s - 1) + (min(max(last, 0.0), 1.0),)
        return cls(det, tuple(trans), 1.0)

    def to_dict(self) -> dict:
        return {
            "detector_efficiencies": list(self.detector_efficiencies),
            "transmissions": list(self.transmissions),
            "loop_transmission": self.loop_transmission,
        }


@dataclass(frozen=True)
class ResponseMatrix:
    """Column-stochastic map ``c[j, i] = P(outcome j | i photons)``.

    ``labels`` names the rows: click patterns for a loop detector, photon
    counts for the ideal counter (``channels`` is ``None`` then).
    """

    matrix: np.ndarray
    labels: tuple
    channels: int | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != len(self.labels):
            raise ValueError("matrix rows must match labels")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[1] - 1

    @property
    def shape(self):
        return self.matrix.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def to_csv(self, path_or_buf) -> None:
        """Header of Fock indices; first column holds the row labels."""
        lines = ["outcome," + ",".join(str(i) for i in range(self.cutoff + 1))]
        for label, row in zip(self.labels, self.matrix):
            lines.append(label + "," + ",".join(format(v, ".17g") for v in row))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)


def pattern_labels(channels: int) -> tuple:
    return tuple(format(j, f"0{channels}b") for j in range(2**channels))


def pattern_index(pattern: str) -> int:
    if not pattern or set(pattern) - {"0", "1"}:
        raise ValueError(f"not a click pattern: {pattern!r}")
    return int(pattern, 2)


def channel_efficiencies(config: DetectorConfig) -> np.ndarray:
    """Probability that one input photon clicks channel ``l``."""
    det = np.asarray(config.detector_efficiencies)
    s = det.size
    route = np.empty(s)
    reach = 1.0  # probability of arriving at splitter l
    for l in range(s - 1):
        t = config.transmissions[l]
        route[l] = reach * t
        reach *= (1 - t) * config.loop_transmission
    route[-1] = reach
    return det * route


def _rho_array(rho):
    return np.asarray(rho, dtype=float)


def zero_arbitrary_prob(pattern: str, rho, etas) -> float:
    """Probability of no click on the ``'0'`` channels, ignoring the rest.

    ``pattern`` uses ``'0'`` and an arbitrary symbol (``'∀'``, ``'*'``,
    ``'x'`` or ``'a'``); a ``'1'`` is rejected.
    """
    etas = np.asarray(etas, dtype=float)
    if len(pattern) != etas.size:
        raise ValueError(f"pattern {pattern!r} has {len(pattern)} symbols for {etas.size} channels")
    zero = np.zeros(etas.size, dtype=bool)
    for l, ch in enumerate(pattern):
        if ch == "0":
            zero[l] = True
        elif ch not in ARBITRARY:
            raise ValueError(f"zero-arbitrary pattern may not contain {ch!r}")
    base = max(0.0, 1.0 - float(etas[zero].sum()))
    p = _rho_array(rho)
    return float(np.power(base, np.arange(p.size)) @ p)


def response_matrix_from_efficiencies(
    etas: Sequence[float], cutoff: int, max_channels: int = MAX_CHANNELS
) -> ResponseMatrix:
    """Response matrix for independent photons clicking channel ``l`` with
    probability ``etas[l]``.

    Starting from the zero-arbitrary probabilities ``g[A, i]`` (no click
    outside the arbitrary set ``A``), the click-pattern probabilities are
    the subset Moebius transform ``c[b] = sum_{A <= b} (-1)^{|b|-|A|} g[A]``.
    """
    etas = np.asarray(etas, dtype=float)
    s = etas.size
    if s < 1:
        raise ValueError("need at least one channel")
    if s > max_channels:
        raise ValueError(f"{s} channels exceed the limit of {max_channels}")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    _check_unit("channel efficiencies", etas)
    if etas.sum() > 1 + 1e-12:
        raise ValueError(f"channel efficiencies sum to {etas.sum()} > 1")

    rows = 2**s
    idx = np.arange(rows)
    # channel l (0-based, leftmost) is bit s-1-l of the row index
    bits = (idx[:, None] >> (s - 1 - np.arange(s))[None, :]) & 1
    zero_eff = (1 - bits) @ etas
    base = np.clip(1.0 - zero_eff, 0.0, 1.0)
    g = np.power(base[:, None], np.arange(cutoff + 1)[None, :])

    c = g.copy()
    for l in range(s):
        bit = 1 << l
        has = (idx & bit) != 0
        c[has] -= c[idx[has] ^ bit]
    np.clip(c, 0.0, 1.0, out=c)
    # i photons cannot click more than i channels; keep those entries exact zeros
    c[bits.sum(axis=1)[:, None] > np.arange(cutoff + 1)[None, :]] = 0.0
    return ResponseMatrix(c, pattern_labels(s), s)


def response_matrix(
    config: DetectorConfig, cutoff: int, max_channels: int = MAX_CHANNELS
) -> ResponseMatrix:
    if config.channels > max_channels:
        raise ValueError(f"{config.channels} channels exceed the limit of {max_channels}")
    return response_matrix_from_efficiencies(
        channel_efficiencies(config), cutoff, max_channels=max_channels
    )


def outcome_probs(C: ResponseMatrix, rho) -> np.ndarray:
    p = _rho_array(rho)
    m = np.asarray(C, dtype=float)
    if m.shape[1] != p.size:
        raise ValueError(f"response matrix cutoff {m.shape[1] - 1} != state cutoff {p.size - 1}")
    return m @ p


def two_channel_probs(rho, eta1: float, eta2: float, T: float):
    """Closed-form ``(p00, p10, p01, p11)`` of the single-round-trip loop."""
    e1, e2 = eta1 * T, eta2 * (1 - T)
    for name, v in (("eta1", eta1), ("eta2", eta2), ("T", T)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name}={v} outside [0, 1]")
    if e1 + e2 > 1 + 1e-12:
        raise ValueError("eta1*T + eta2*(1-T) exceeds 1")
    p = _rho_array(rho)
    m = np.arange(p.size)
    p00 = float(np.power(max(0.0, 1 - e1 - e2), m) @ p)
    p10 = float(np.power(1 - e2, m) @ p) - p00
    p01 = float(np.power(1 - e1, m) @ p) - p00
    p11 = 1 - p00 - p10 - p01
    return p00, p10, p01, p11


def ideal_response_matrix(efficiency: float, cutoff: int) -> ResponseMatrix:
    """Photon counter with per-photon efficiency: ``c[n, m] = Binom(n; m, eff)``."""
    if not 0 <= efficiency <= 1:
        raise ValueError(f"efficiency {efficiency} outside [0, 1]")
    n = np.arange(cutoff + 1)
    c = stats.binom.pmf(n[:, None], n[None, :], efficiency)
    return ResponseMatrix(c, tuple(str(k) for k in n), None)


def ideal_detector_probs(rho, efficiency: float) -> np.ndarray:
    p = _rho_array(rho)
    return ideal_response_matrix(efficiency, p.size - 1).matrix @ p


def no_coincidence_probs(rho, etas) -> np.ndarray:
    """Per-channel zero-click probabilities ``sum_m (1 - eta_j)**m rho_m``."""
    p = _rho_array(rho)
    etas = np.asarray(etas, dtype=float)
    _check_unit("channel efficiencies", etas)
    return np.power(1.0 - etas[:, None], np.arange(p.size)[None, :]) @ p
