"""Independent reference computations used only by the tests."""

from functools import lru_cache
from itertools import product

import numpy as np


def photon_events(config):
    """Elementary fates of one photon as ``(channel or None, probability)``.

    Walks the splitter chain directly (no channel-efficiency formula):
    exit at splitter l and get detected, exit and be missed, or be lost in
    the loop.  ``None`` means no click anywhere.
    """
    s = config.channels
    events = []
    reach = 1.0
    for l in range(s):
        t = config.transmissions[l] if l < s - 1 else 1.0
        d = config.detector_efficiencies[l]
        events.append((l, reach * t * d))
        events.append((None, reach * t * (1 - d)))
        reach *= 1 - t
        if l < s - 1:
            events.append((None, reach * (1 - config.loop_transmission)))
            reach *= config.loop_transmission
    return events


def brute_force_response(config, cutoff):
    """Enumerate the fates of every photon for each Fock column."""
    s = config.channels
    events = photon_events(config)
    C = np.zeros((2**s, cutoff + 1))
    for i in range(cutoff + 1):
        for combo in product(events, repeat=i):
            prob = 1.0
            pattern = 0
            for ch, q in combo:
                prob *= q
                if ch is not None:
                    pattern |= 1 << (s - 1 - ch)
            C[pattern, i] += prob
    return C


def recursive_response(etas, cutoff):
    """Coincidence probabilities by the subtract-the-sub-patterns recursion.

    ``p(b) = ptilde(arbitrary on ones(b), 0 elsewhere) - sum of p(b')`` over
    the patterns ``b'`` whose clicks form a proper subset of ``b``'s.
    """
    etas = np.asarray(etas, dtype=float)
    s = etas.size
    n = np.arange(cutoff + 1)

    def ptilde(mask):
        zero = [l for l in range(s) if not (mask >> (s - 1 - l)) & 1]
        return (1 - etas[zero].sum()) ** n

    @lru_cache(maxsize=None)
    def p(mask):
        total = ptilde(mask).copy()
        sub = (mask - 1) & mask
        while True:
            if sub != mask:
                total -= p(sub)
            if sub == 0:
                break
            sub = (sub - 1) & mask
        return total

    return np.array([p(m) for m in range(2**s)])


def finite_difference_fisher(C, rho, free, h=1e-5):
    """Expected outer product of log-likelihood scores, with the scores
    taken by central differences along ``rho_k - rho_0``."""
    C = np.asarray(C, dtype=float)
    rho = np.asarray(rho, dtype=float)
    # outcomes that no photon number can produce carry no information
    C = C[np.any(C > 0, axis=1)]
    p = C @ rho
    scores = []
    for k in free:
        step = np.zeros_like(rho)
        step[k] += h
        step[0] -= h
        scores.append((np.log(C @ (rho + step)) - np.log(C @ (rho - step))) / (2 * h))
    S = np.array(scores)
    return (S * p) @ S.T

