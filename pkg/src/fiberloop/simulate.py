"""Monte Carlo detection histograms by per-photon routing.

The simulator does not use the response matrix.  Each photon is walked
through the splitter chain, the loop loss and the detectors, so sampled
frequencies give an independent check of the analytic model.

Pulses are generated in fixed-size blocks, each with its own random stream
spawned from the master seed.  The histogram therefore depends only on the
seed and never on how blocks are distributed across workers.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detector import DetectorConfig, pattern_index, pattern_labels

__all__ = ["EventHistogram", "sample_events", "frequencies", "BLOCK_PULSES"]

BLOCK_PULSES = 1 << 16


@dataclass(frozen=True)
class EventHistogram:
    """Counts per click pattern, indexed like response-matrix rows."""

    counts: np.ndarray
    channels: int
    seed: int | None = None

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64).ravel()
        if c.size != 2**self.channels:
            raise ValueError(f"{c.size} counts do not match {self.channels} channels")
        if np.any(c < 0):
            raise ValueError("negative count")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def pulses(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "EventHistogram") -> "EventHistogram":
        if not isinstance(other, EventHistogram):
            return NotImplemented
        if other.channels != self.channels:
            raise ValueError("cannot merge histograms with different channel counts")
        return EventHistogram(self.counts + other.counts, self.channels)

    def to_csv(self, path_or_buf=None) -> str:
        """``<bitstring>,<count>`` lines after a ``#`` header comment."""
        seed = "none" if self.seed is None else str(self.seed)
        lines = [f"# pulses={self.pulses} channels={self.channels} seed={seed}"]
        lines += [f"{lab},{n}" for lab, n in zip(pattern_labels(self.channels), self.counts)]
        text = "\n".join(lines) + "\n"
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w") as fh:
                    fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_buf) -> "EventHistogram":
        if hasattr(path_or_buf, "read"):
            text = path_or_buf.read()
        else:
            with open(path_or_buf) as fh:
                text = fh.read()
        header = {}
        rows = []
        for lineno, raw in enumerate(io.StringIO(text), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = v
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected '<bitstring>,<count>'")
            try:
                idx = pattern_index(parts[0].strip())
                n = int(parts[1])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            rows.append((parts[0].strip(), idx, n))
        if not rows:
            raise ValueError("histogram has no rows")
        widths = {len(r[0]) for r in rows}
        if len(widths) != 1:
            raise ValueError("bitstrings of unequal length")
        s = widths.pop()
        if "channels" in header and int(header["channels"]) != s:
            raise ValueError(f"header says {header['channels']} channels, rows have {s}")
        counts = np.zeros(2**s, dtype=np.int64)
        seen = set()
        for label, idx, n in rows:
            if idx in seen:
                raise ValueError(f"duplicate pattern {label}")
            seen.add(idx)
            counts[idx] = n
        seed = header.get("seed")
        hist = cls(counts, s, None if seed in (None, "none") else int(seed))
        if "pulses" in header and int(header["pulses"]) != hist.pulses:
            raise ValueError(f"header pulses={header['pulses']} but counts sum to {hist.pulses}")
        return hist


def _simulate_block(probs, config, pulses, rng):
    s = config.channels
    n_photons = rng.choice(probs.size, size=pulses, p=probs)
    owner = np.repeat(np.arange(pulses), n_photons)
    alive = np.ones(owner.size, dtype=bool)
    pattern = np.zeros(pulses, dtype=np.int64)
    for l in range(s):
        if l < s - 1:
            exits = alive & (rng.random(owner.size) < config.transmissions[l])
        else:
            exits = alive
        clicked = exits & (rng.random(owner.size) < config.detector_efficiencies[l])
        hit = np.zeros(pulses, dtype=bool)
        hit[owner[clicked]] = True
        pattern |= hit.astype(np.int64) << (s - 1 - l)
        alive &= ~exits
        if l < s - 1 and config.loop_transmission < 1:
            alive &= rng.random(owner.size) < config.loop_transmission
    return np.bincount(pattern, minlength=2**s)


def sample_events(
    rho, config: DetectorConfig, pulses: int, seed: int, workers: int = 1
) -> EventHistogram:
    """Simulate ``pulses`` independent pulses of photon statistics ``rho``.

    The result is reproducible for a given ``seed`` and independent of
    ``workers``.
    """
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    probs = np.asarray(rho, dtype=float)
    probs = probs / probs.sum()
    n_blocks = -(-pulses // BLOCK_PULSES)
    sizes = [BLOCK_PULSES] * (n_blocks - 1) + [pulses - BLOCK_PULSES * (n_blocks - 1)]
    streams = np.random.SeedSequence(seed).spawn(n_blocks)

    def run(k):
        return _simulate_block(probs, config, sizes[k], np.random.default_rng(streams[k]))

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(k) for k in range(n_blocks)]
    return EventHistogram(np.sum(parts, axis=0), config.channels, seed)


def frequencies(hist: EventHistogram) -> np.ndarray:
    if hist.pulses < 1:
        raise ValueError("empty histogram")
    return hist.counts / hist.pulses
