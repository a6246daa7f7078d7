"""Command-line front end.

Every subcommand reads one or more ``--config`` YAML documents (merged in
order) and accepts flag overrides.  Failures print a single JSON line to
stderr and exit with a status that identifies the failure class.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .calibrate import CalibrationError, calibrate
from .config import (
    ConfigError,
    detector_from,
    dump_yaml,
    load_config,
    merge,
    source_from,
    validate,
)
from .detector import response_matrix
from .fisher import (
    RootNotBracketedError,
    SingularFisherError,
    equivalent_efficiency,
    equivalent_efficiency_sweep,
    fisher_report,
)
from .reconstruct import SupportError, default_cutoff, em_reconstruct
from .simulate import EventHistogram, sample_events

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCHEMA = 4
EXIT_PRECONDITION = 5
EXIT_NUMERICAL = 6


class CliError(Exception):
    def __init__(self, kind, message, status):
        self.kind, self.message, self.status = kind, message, status
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    # usage errors follow the same one-line JSON convention as other failures
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}", EXIT_USAGE)


def _fail(kind, message, status):
    raise CliError(kind, message, status)


def _config(args) -> dict:
    cfg = load_config(*(args.config or []))
    overrides = {}
    for key in ("seed", "cutoff", "pulses", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if overrides:
        cfg = validate(merge(cfg, overrides))
    return cfg


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _check_paths(args, *outputs):
    inputs = set(args.config or [])
    for attr in ("input",):
        if getattr(args, attr, None):
            inputs.add(getattr(args, attr))
    outs = [o for o in outputs if o not in (None, "-")]
    if len(set(outs)) != len(outs) or inputs & set(outs):
        _fail("schema", "input and output paths must be distinct", EXIT_SCHEMA)


def _load_histogram(path):
    try:
        return EventHistogram.from_csv(path)
    except ValueError as exc:
        _fail("schema", f"{path}: {exc}", EXIT_SCHEMA)


def _read_histogram(path, channels):
    hist = _load_histogram(path)
    if hist.channels != channels:
        _fail(
            "schema",
            f"histogram has {hist.channels}-bit patterns but the detector has {channels} channels",
            EXIT_SCHEMA,
        )
    return hist


def _read_frequencies(path, channels):
    # rows of <bitstring>,<frequency>
    freqs = np.zeros(2**channels)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("pattern"):
                continue
            parts = line.split(",")
            if len(parts) != 2 or len(parts[0]) != channels or set(parts[0]) - {"0", "1"}:
                _fail("schema", f"{path}:{lineno}: expected '<{channels}-bit pattern>,<frequency>'",
                      EXIT_SCHEMA)
            freqs[int(parts[0], 2)] = float(parts[1])
    return freqs


def _source(cfg, channels):
    # explicit distributions carry their own cutoff; laws default to s + 2
    K = cfg.get("cutoff")
    if K is None and "law" in cfg.get("source", {}):
        K = default_cutoff(channels)
    return source_from(cfg, K)


def cmd_simulate(args):
    _check_paths(args, args.out)
    cfg = _config(args)
    det = detector_from(cfg)
    rho = source_from(cfg, cfg.get("cutoff"))
    if "pulses" not in cfg:
        _fail("schema", "pulses: required for simulate", EXIT_SCHEMA)
    hist = sample_events(rho, det, cfg["pulses"], cfg.get("seed", 0), workers=cfg.get("workers", 1))
    _write(args.out, hist.to_csv())


def cmd_reconstruct(args):
    _check_paths(args, args.out, args.trace)
    cfg = _config(args)
    det = detector_from(cfg)
    if bool(args.input) == bool(args.frequencies):
        _fail("schema", "give exactly one of --input or --frequencies", EXIT_SCHEMA)
    if args.input:
        hist = _read_histogram(args.input, det.channels)
        f = hist.counts / hist.pulses
        pulses = hist.pulses
    else:
        f = _read_frequencies(args.frequencies, det.channels)
        pulses = None
    K = cfg.get("cutoff", default_cutoff(det.channels))
    C = response_matrix(det, K)
    em = cfg.get("em", {})
    res = em_reconstruct(C, f, max_iter=em.get("max_iter", 100_000), tol=em.get("tol", 1e-10))
    report = {
        "command": "reconstruct",
        "cutoff": K,
        "channels": det.channels,
        "pulses": pulses,
        "iterations": res.iterations,
        "converged": res.converged,
        "final_divergence": res.final_divergence,
        "log_likelihood": float(res.likelihood_trace[-1]),
        "estimate": res.estimate.probs.tolist(),
    }
    _write(args.out, dump_yaml(report))
    if args.trace:
        lines = ["iteration,log_likelihood"]
        lines += [f"{i},{v:.17g}" for i, v in enumerate(res.likelihood_trace)]
        _write(args.trace, "\n".join(lines) + "\n")


def _sweep_points(args, cfg):
    if args.sweep:
        try:
            start, stop, num = args.sweep.split(":")
            return np.linspace(float(start), float(stop), int(num))
        except ValueError:
            _fail("schema", "--sweep takes START:STOP:NUM", EXIT_SCHEMA)
    sw = cfg.get("sweep")
    if sw is None:
        return np.linspace(0.05, 1.0, 20)
    if "efficiencies" in sw:
        return np.asarray(sw["efficiencies"], dtype=float)
    return np.linspace(sw.get("start", 0.05), sw.get("stop", 1.0), sw.get("num", 20))


def cmd_fisher(args):
    _check_paths(args, args.out, args.sweep_out)
    cfg = _config(args)
    det = detector_from(cfg)
    rho = _source(cfg, det.channels)
    C = response_matrix(det, rho.cutoff)
    rep = fisher_report(C, rho, pulses=cfg.get("pulses", 1))
    if rep.information > 0:
        rep.equivalent_efficiency = equivalent_efficiency(C, rho).value
    doc = {"command": "fisher", "cutoff": rho.cutoff, "channels": det.channels, **rep.to_dict()}
    _write(args.out, dump_yaml(doc))
    if args.sweep_out:
        rows = equivalent_efficiency_sweep(
            rho, _sweep_points(args, cfg), det.channels,
            transmissions=det.transmissions, loop_transmission=det.loop_transmission,
        )
        lines = ["eta,eta_eq"] + [f"{a:.17g},{b:.17g}" for a, b in rows]
        _write(args.sweep_out, "\n".join(lines) + "\n")


def cmd_calibrate(args):
    _check_paths(args, args.out)
    cfg = _config(args) if args.config else {}
    if not args.input:
        _fail("schema", "--input histogram required", EXIT_SCHEMA)
    mean = args.mean if args.mean is not None else cfg.get("calibration", {}).get("source_mean")
    if mean is None:
        _fail("schema", "source mean required (--mean or calibration.source_mean)", EXIT_SCHEMA)
    hist = _load_histogram(args.input)
    det_effs, loop = None, 1.0
    if "detector" in cfg and "detector_efficiencies" in cfg["detector"]:
        det = detector_from(cfg)
        if det.channels != hist.channels:
            _fail("schema", f"histogram has {hist.channels} channels, detector {det.channels}",
                  EXIT_SCHEMA)
        det_effs, loop = det.detector_efficiencies, det.loop_transmission
    rec = calibrate(hist, mean, det_effs, loop)
    _write(args.out, dump_yaml(rec.to_dict()))


def cmd_equiv_eff(args):
    _check_paths(args, args.out)
    cfg = _config(args)
    det = detector_from(cfg)
    rho = _source(cfg, det.channels)
    res = equivalent_efficiency(det, rho)
    doc = {
        "command": "equiv-eff",
        "cutoff": rho.cutoff,
        "equivalent_efficiency": res.value,
        "loop_information": res.loop_information,
        "saturated": res.saturated,
    }
    _write(args.out, dump_yaml(doc))


def cmd_transform(args):
    _check_paths(args, args.out)
    cfg = _config(args)
    if "law" not in cfg.get("source", {}):
        _fail("schema", "transform needs source.law", EXIT_SCHEMA)
    rho = source_from(cfg, cfg.get("cutoff"))
    lines = [f"# tail_mass={rho.tail_mass:.17g}", "n,probability"]
    lines += [f"{n},{p:.17g}" for n, p in enumerate(rho.probs)]
    _write(args.out, "\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fiberloop",
        description="Fiber-loop photon-counting detector: simulation, Fisher analysis, "
        "calibration and EM reconstruction.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", action="append", metavar="PATH",
                       help="YAML run configuration; repeat to merge several")
        p.add_argument("--seed", type=int)
        p.add_argument("--cutoff", type=int)
        p.add_argument("--pulses", type=int)
        p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        return p

    p = common(sub.add_parser("simulate", help="write an event histogram CSV"))
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("reconstruct", help="EM reconstruction from a histogram"))
    p.add_argument("--input", metavar="PATH", help="histogram CSV")
    p.add_argument("--frequencies", metavar="PATH", help="CSV of <pattern>,<frequency>")
    p.add_argument("--trace", metavar="PATH", help="write the likelihood trace CSV")
    p.set_defaults(func=cmd_reconstruct)

    p = common(sub.add_parser("fisher", help="Fisher report and (eta, eta_eq) sweep"))
    p.add_argument("--sweep-out", metavar="PATH")
    p.add_argument("--sweep", metavar="START:STOP:NUM")
    p.set_defaults(func=cmd_fisher)

    p = common(sub.add_parser("calibrate", help="channel efficiencies from Poissonian light"))
    p.add_argument("--input", metavar="PATH", help="histogram CSV")
    p.add_argument("--mean", type=float, help="mean photon number of the calibration source")
    p.set_defaults(func=cmd_calibrate)

    p = common(sub.add_parser("equiv-eff", help="equivalent ideal-detector efficiency"))
    p.set_defaults(func=cmd_equiv_eff)

    p = common(sub.add_parser("transform", help="photon statistics of an intensity law"))
    p.set_defaults(func=cmd_transform)
    return parser


def _report(doc):
    sys.stderr.write(json.dumps(doc) + "\n")


def main(argv=None) -> int:
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                args = build_parser().parse_args(argv)
                args.func(args)
            finally:
                for w in caught:
                    _report({"warning": w.category.__name__, "message": str(w.message)})
    except CliError as exc:
        status, kind, msg = exc.status, exc.kind, exc.message
    except ConfigError as exc:
        status, kind, msg = EXIT_SCHEMA, "schema", str(exc)
    except OSError as exc:
        status, kind, msg = EXIT_IO, "io", f"{exc.strerror or exc}: {exc.filename or ''}".strip()
    except (SingularFisherError, RootNotBracketedError) as exc:
        status, kind, msg = EXIT_NUMERICAL, "numerical", str(exc)
    except (CalibrationError, SupportError, ValueError) as exc:
        status, kind, msg = EXIT_PRECONDITION, "precondition", str(exc)
    else:
        return EXIT_OK
    _report({"error": kind, "status": status, "message": msg})
    return status


if __name__ == "__main__":
    sys.exit(main())
