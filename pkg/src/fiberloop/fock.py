"""Truncated photon-number distributions and the Poisson (Mandel) transform.

A pulse is described by the diagonal of its density matrix in the Fock
basis, truncated at a cutoff ``K``.  Classical intensity fluctuations
``P(I)`` map onto photon statistics through

    rho_n = integral I**n / n! * exp(-I) * P(I) dI

which is evaluated in closed form for the four supported intensity laws,
with adaptive quadrature available as an independent route.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

__all__ = [
    "PhotonDistribution",
    "IntensityLaw",
    "TruncationWarning",
    "photon_number_probs",
    "poisson_transform",
    "hs_distance",
    "truncated_state",
]

#: default tail mass above which a truncation warning is raised
TAIL_THRESHOLD = 1e-6

_NORM_TOL = 1e-9


class TruncationWarning(UserWarning):
    """The discarded probability above the cutoff exceeds the threshold."""


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number probabilities ``rho_0 .. rho_K``.

    The vector is validated (nonnegative, unit sum within 1e-9) and then
    renormalized exactly, so every instance sums to one to rounding.
    ``tail_mass`` records probability discarded above the cutoff when the
    distribution was produced by truncating a wider one.
    """

    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("photon distribution needs at least one entry")
        if not np.all(np.isfinite(p)):
            raise ValueError("photon distribution has non-finite entries")
        if np.any(p < 0):
            raise ValueError(f"negative probability at n={int(np.argmin(p))}")
        total = p.sum()
        if abs(total - 1.0) > _NORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    def __len__(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    @classmethod
    def vacuum(cls, cutoff: int) -> "PhotonDistribution":
        return cls.fock(0, cutoff)

    @classmethod
    def fock(cls, n: int, cutoff: int) -> "PhotonDistribution":
        if not 0 <= n <= cutoff:
            raise ValueError(f"Fock index {n} outside 0..{cutoff}")
        p = np.zeros(cutoff + 1)
        p[n] = 1.0
        return cls(p)

    @classmethod
    def poisson(cls, mean: float, cutoff: int, **kwargs) -> "PhotonDistribution":
        return poisson_transform(IntensityLaw.delta(mean), cutoff, **kwargs)

    @classmethod
    def uniform(cls, cutoff: int) -> "PhotonDistribution":
        return cls(np.full(cutoff + 1, 1.0 / (cutoff + 1)))


@dataclass(frozen=True)
class IntensityLaw:
    """Classical intensity distribution ``P(I)`` in mean photons per pulse.

    Use the constructors rather than building instances directly:

    - ``delta(i0)``: stable amplitude.
    - ``two_delta(i1, i2, weight)``: weight on ``i1``, the rest on ``i2``.
    - ``uniform(center, half_width)``: flat on ``[center - hw, center + hw]``.
    - ``exponential(mean)``: thermal-like ``exp(-I/mean)/mean``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    _KINDS = {
        "delta": ("i0",),
        "two-delta": ("i1", "i2", "weight"),
        "uniform": ("center", "half_width"),
        "exponential": ("mean",),
    }

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown intensity law {self.kind!r}")
        expected = set(self._KINDS[self.kind])
        if set(self.params) != expected:
            raise ValueError(
                f"{self.kind} law takes parameters {sorted(expected)}, got {sorted(self.params)}"
            )
        params = {k: float(v) for k, v in self.params.items()}
        for k, v in params.items():
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{self.kind}: parameter {k}={v} must be finite and >= 0")
        if self.kind == "two-delta" and params["weight"] > 1:
            raise ValueError("two-delta weight must lie in [0, 1]")
        if self.kind == "uniform" and params["center"] - params["half_width"] < 0:
            raise ValueError("uniform law extends to negative intensity")
        object.__setattr__(self, "params", params)

    @classmethod
    def delta(cls, i0: float) -> "IntensityLaw":
        return cls("delta", {"i0": i0})

    @classmethod
    def two_delta(cls, i1: float, i2: float, weight: float = 0.5) -> "IntensityLaw":
        return cls("two-delta", {"i1": i1, "i2": i2, "weight": weight})

    @classmethod
    def uniform(cls, center: float, half_width: float) -> "IntensityLaw":
        return cls("uniform", {"center": center, "half_width": half_width})

    @classmethod
    def exponential(cls, mean: float) -> "IntensityLaw":
        return cls("exponential", {"mean": mean})

    @classmethod
    def from_dict(cls, d: dict) -> "IntensityLaw":
        d = dict(d)
        kind = d.pop("kind")
        if kind == "two-delta":
            d.setdefault("weight", 0.5)
        return cls(kind, d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def mean(self) -> float:
        p = self.params
        if self.kind == "delta":
            return p["i0"]
        if self.kind == "two-delta":
            return p["weight"] * p["i1"] + (1 - p["weight"]) * p["i2"]
        if self.kind == "uniform":
            return p["center"]
        return p["mean"]


def _poisson_pmf(n, mu):
    if mu == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(mu) - mu - special.gammaln(n + 1))


def _closed_form(law, n):
    p = law.params
    if law.kind == "delta":
        return _poisson_pmf(n, p["i0"])
    if law.kind == "two-delta":
        w = p["weight"]
        return w * _poisson_pmf(n, p["i1"]) + (1 - w) * _poisson_pmf(n, p["i2"])
    if law.kind == "exponential":
        m = p["mean"]
        if m == 0:
            return (n == 0).astype(float)
        # Bose-Einstein, in log form to stay finite for large n
        return np.exp(n * math.log(m) - (n + 1) * math.log1p(m))
    c, h = p["center"], p["half_width"]
    if h < 1e-4:
        # gamma differences cancel for narrow laws; average the kernel by Taylor
        # expansion instead, using k_n'' = k_{n-2} - 2 k_{n-1} + k_n
        k = _poisson_pmf(np.arange(-2, n.size), c) if c > 0 else None
        if k is None:
            return (n == 0).astype(float)
        k[:2] = 0.0
        curv = k[:-2] - 2 * k[1:-1] + k[2:]
        return k[2:] + h * h / 6 * curv
    # integral of the Poisson kernel is a difference of regularized gamma functions
    lo, hi = c - h, c + h
    return (special.gammainc(n + 1, hi) - special.gammainc(n + 1, lo)) / (hi - lo)


def _quadrature(law, n, epsabs):
    p = law.params
    out = np.empty(n.size)
    for idx, k in enumerate(n):
        lg = special.gammaln(k + 1)

        def kernel(x, k=k, lg=lg):
            if x <= 0:
                return 1.0 if k == 0 else 0.0
            return math.exp(k * math.log(x) - x - lg)

        if law.kind == "exponential":
            m = p["mean"]
            if m == 0:
                out[idx] = 1.0 if k == 0 else 0.0
                continue
            val, _ = integrate.quad(
                lambda x: kernel(x) * math.exp(-x / m) / m,
                0, np.inf, epsabs=epsabs, epsrel=1e-13, limit=500,
            )
        elif law.kind == "uniform":
            lo = p["center"] - p["half_width"]
            hi = p["center"] + p["half_width"]
            if hi == lo:
                out[idx] = kernel(lo)
                continue
            val, _ = integrate.quad(
                kernel, lo, hi, epsabs=epsabs, epsrel=1e-13, limit=500
            )
            val /= hi - lo
        else:
            raise ValueError(f"quadrature is only defined for continuous laws, not {law.kind}")
        out[idx] = val
    return out


def photon_number_probs(
    law: IntensityLaw, cutoff: int, method: str = "closed", epsabs: float = 1e-12
) -> np.ndarray:
    """Raw ``rho_0 .. rho_cutoff`` of ``law``, without renormalization.

    ``method`` is ``"closed"`` (all laws) or ``"quadrature"`` (uniform and
    exponential only).
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    n = np.arange(cutoff + 1)
    if method == "closed":
        return _closed_form(law, n)
    if method == "quadrature":
        return _quadrature(law, n, epsabs)
    raise ValueError(f"unknown method {method!r}")


def poisson_transform(
    law: IntensityLaw,
    cutoff: int,
    method: str = "closed",
    tail_threshold: float = TAIL_THRESHOLD,
) -> PhotonDistribution:
    """Photon statistics of a pulse with intensity law ``law``.

    The result is renormalized over ``0..cutoff``; the discarded mass is
    kept in ``tail_mass`` and a :class:`TruncationWarning` is issued when it
    exceeds ``tail_threshold``.
    """
    raw = np.clip(photon_number_probs(law, cutoff, method=method), 0.0, None)
    tail = max(0.0, 1.0 - float(raw.sum()))
    if tail > tail_threshold:
        warnings.warn(
            f"cutoff {cutoff} discards probability {tail:.3g} of {law.kind} law",
            TruncationWarning,
            stacklevel=2,
        )
    return PhotonDistribution(raw / raw.sum(), tail_mass=tail)


def hs_distance(a: PhotonDistribution, b: PhotonDistribution) -> float:
    """Squared Euclidean (Hilbert-Schmidt for diagonal states) distance."""
    pa, pb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if pa.shape != pb.shape:
        raise ValueError(f"cutoff mismatch: {pa.size - 1} vs {pb.size - 1}")
    d = pa - pb
    return float(d @ d)


def truncated_state(rho1: float, rho2: float) -> PhotonDistribution:
    """State with at most two photons: ``(1 - rho1 - rho2, rho1, rho2)``."""
    if rho1 < 0 or rho2 < 0 or rho1 + rho2 > 1 + 1e-15:
        raise ValueError(f"invalid two-photon state rho1={rho1}, rho2={rho2}")
    return PhotonDistribution(np.array([max(0.0, 1.0 - rho1 - rho2), rho1, rho2]))
