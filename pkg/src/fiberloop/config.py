"""Run configuration: YAML documents checked against a JSON Schema.

Several documents may be merged (later ones win, nested sections merged
key by key), so a calibration record can be combined with an experiment
manifest.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

import jsonschema
import numpy as np
import yaml

from .detector import DetectorConfig
from .fock import TAIL_THRESHOLD, IntensityLaw, PhotonDistribution, photon_number_probs, poisson_transform

__all__ = [
    "ConfigError",
    "schema",
    "load_config",
    "merge",
    "validate",
    "detector_from",
    "source_from",
    "read_distribution",
    "dump_yaml",
]


class ConfigError(ValueError):
    """A configuration document violates the schema or is inconsistent."""


def schema() -> dict:
    text = resources.files("fiberloop").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def validate(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    return cfg


def merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(*paths) -> dict:
    cfg = {}
    for path in paths:
        with open(path) as fh:
            try:
                doc = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: not valid YAML ({exc})".replace("\n", " ")) from None
        if doc is None:
            continue
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        # a detector section replaces, rather than merges with, an earlier one
        if "detector" in doc:
            cfg.pop("detector", None)
        cfg = merge(cfg, doc)
    return validate(cfg)


def detector_from(cfg: dict) -> DetectorConfig:
    d = cfg.get("detector")
    if d is None:
        raise ConfigError("detector: section missing")
    try:
        if "channel_efficiencies" in d:
            return DetectorConfig.from_channel_efficiencies(d["channel_efficiencies"])
        return DetectorConfig(
            tuple(d["detector_efficiencies"]),
            tuple(d.get("transmissions", ())),
            d.get("loop_transmission", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"detector: {exc}") from None


def read_distribution(path) -> np.ndarray:
    """Probabilities from an ``n,probability`` CSV or a YAML report that
    carries an ``estimate`` or ``probabilities`` list."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".csv"):
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if rows and rows[0][0].strip() == "n":
            rows = rows[1:]
        probs = {}
        for r in rows:
            if len(r) != 2:
                raise ConfigError(f"{path}: expected 'n,probability' rows")
            probs[int(r[0])] = float(r[1])
        if sorted(probs) != list(range(len(probs))):
            raise ConfigError(f"{path}: photon numbers must run 0..K")
        return np.array([probs[n] for n in range(len(probs))])
    doc = yaml.safe_load(text)
    for key in ("estimate", "probabilities"):
        if isinstance(doc, dict) and key in doc:
            return np.asarray(doc[key], dtype=float)
    raise ConfigError(f"{path}: no 'estimate' or 'probabilities' list")


def _auto_cutoff(law, tail):
    # smallest cutoff whose discarded mass is at most `tail`
    K = max(1, int(math.ceil(law.mean())))
    while True:
        raw = photon_number_probs(law, K)
        if 1.0 - raw.sum() <= tail or K > 2000:
            return K
        K = int(K * 1.25) + 1


def source_from(cfg: dict, cutoff: int | None = None, tail: float = 1e-12) -> PhotonDistribution:
    """Photon distribution described by the ``source`` section.

    Intensity laws are truncated at ``cutoff``; without one, the cutoff is
    grown until the discarded mass is below ``tail``.
    """
    src = cfg.get("source")
    if src is None:
        raise ConfigError("source: section missing")
    try:
        if "law" in src:
            law = IntensityLaw.from_dict(src["law"])
            K = _auto_cutoff(law, tail) if cutoff is None else cutoff
            threshold = cfg.get("tail_threshold", TAIL_THRESHOLD)
            return poisson_transform(law, K, tail_threshold=threshold)
        probs = src["distribution"] if "distribution" in src else read_distribution(src["file"])
        probs = np.asarray(probs, dtype=float)
        if cutoff is not None and cutoff != probs.size - 1:
            raise ConfigError(
                f"source: explicit distribution has cutoff {probs.size - 1}, requested {cutoff}"
            )
        return PhotonDistribution(probs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"source: {exc}") from None


class _Dumper(yaml.SafeDumper):
    pass


def _float(dumper, value):
    if math.isnan(value):
        text = ".nan"
    elif math.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = format(value, ".17g")
        if not any(c in text for c in ".eEn"):
            text += ".0"
        elif "e" in text and "." not in text:
            mant, exp = text.split("e")
            text = f"{mant}.0e{exp}"
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


_Dumper.add_representer(float, _float)
_Dumper.add_representer(np.float64, lambda d, v: _float(d, float(v)))
_Dumper.add_representer(np.int64, lambda d, v: d.represent_int(int(v)))
_Dumper.add_representer(np.bool_, lambda d, v: d.represent_bool(bool(v)))


def dump_yaml(doc: dict) -> str:
    """YAML with 17 significant digits on every float."""
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=False, default_flow_style=None, width=120)
