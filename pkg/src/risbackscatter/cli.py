"""
Command-line front end.

Every subcommand writes one CSV to ``--out`` and a JSON run manifest next
to it (``<out>.manifest.json``). Exit codes: 0 success, 1 usage error,
2 configuration error, 3 numerical failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (rate_curve, snr_to_noise_variance,
                       sweep_pe_vs_delay_spread, sweep_pe_vs_L)
from .channel import (assemble_composite, draw_st_channel, draw_tr_channel,
                      interference_vector, stream, synthesize_frame)
from .codebook import (bits_per_frame, build_codebook, decode_message,
                       encode_message, transmission_rate)
from .config import ConfigError, SystemConfig, config_from_mapping, load_config
from .detector import detect_subset, matched_filter_energies
from .ris import Direction, beampattern, direction_grid, space_time_code, steering_vector
from .specfun import ConvergenceError
from .validation import run_checks

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3, 4

SWEEP_HEADER = ["sweep_var", "snr_db", "pe", "std_err", "trials", "method", "seed"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def write_manifest(path: Path, command: str, argv: list[str], config: SystemConfig, extra: dict) -> None:
    manifest = {
        "command": command,
        "argv": argv,
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "seed": config.seed,
        "versions": {
            "risbackscatter": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        **extra,
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_rate(args, config):
    lo = args.l_min if args.l_min is not None else args.n + 1
    rows, best = rate_curve(args.n, range(lo, args.l_max + 1))
    write_csv(args.out, ["L", "N", "rate_bits_per_pri", "bits_per_frame", "is_max"],
              [[L, args.n, r, bits_per_frame(L, args.n), int(L == best)] for L, r in rows])
    print(f"max rate {transmission_rate(best, args.n):.6f} bit/PRI at L={best}")
    return {"argmax_L": best}


def _snrs(args, config):
    return args.snr_db if args.snr_db is not None else list(config.snr_grid_db)


def _sweep_rows(rows):
    return [[r[k] for k in SWEEP_HEADER] for r in rows]


def cmd_pe_vs_l(args, config):
    rows = sweep_pe_vs_L(config, _snrs(args, config), args.l_values, config.trials, config.seed,
                         overlay=args.overlay, channel_draws=args.draws, workers=args.threads)
    write_csv(args.out, SWEEP_HEADER, _sweep_rows(rows))
    return {"rows": len(rows)}


def cmd_pe_vs_spread(args, config):
    rows = sweep_pe_vs_delay_spread(config, _snrs(args, config), args.spreads, config.trials,
                                    config.seed, overlay=args.overlay, channel_draws=args.draws,
                                    workers=args.threads)
    write_csv(args.out, SWEEP_HEADER, _sweep_rows(rows))
    return {"rows": len(rows)}


def cmd_beampattern(args, config):
    gamma = config.sigma_st * steering_vector(config.geometry, Direction(*config.theta_st))
    az, el = direction_grid(args.az_points, args.el_points)
    B = beampattern(config.beamformers, config.partition, gamma, config.geometry, az, el,
                    config.codeword_length)
    write_csv(args.out, ["az_deg", "el_deg", "beampattern"], [[a, e, b] for a, e, b in zip(az, el, B)])
    return {"points": int(B.size)}


def cmd_single_frame(args, config):
    L, N, K = config.codeword_length, config.n_subarrays, config.samples_per_pri
    width = bits_per_frame(L, N)
    try:
        value = int(args.message, 16)
    except ValueError:
        raise UsageError(f"--message {args.message!r} is not a hexadecimal integer") from None
    if value < 0:
        raise UsageError("--message must be nonnegative")
    if value >= 1 << width:
        raise UsageError(f"message {args.message} needs more than the {width} payload bits")
    bits = format(value, f"0{width}b") if width else ""
    subset = encode_message(bits, L, N)
    cb = build_codebook(L)
    trial = args.trial
    st = draw_st_channel(config, stream(config.seed, trial, "st"))
    tr = draw_tr_channel(config, stream(config.seed, trial, "tr"))
    code = space_time_code(cb, subset, config.partition, config.beamformers)
    sig = assemble_composite(config.pulse, st, tr, config.geometry, config.partition,
                             config.beamformers, K, interference_vector(config), config.pulse_power)
    s2 = snr_to_noise_variance(config, args.snr_db)
    frame = synthesize_frame(code, sig, s2, stream(config.seed, trial, "noise"))
    stats = matched_filter_energies(frame, cb)
    detected = detect_subset(stats, N)
    decoded = decode_message(detected, L, N)
    write_csv(args.out, ["codeword", "statistic", "transmitted", "detected"],
              [[l, stats.values[l - 1], int(l in subset.indices), int(l in detected.indices)]
               for l in range(1, L)])
    print(f"transmitted: {list(subset.indices)}")
    print(f"detected:    {list(detected.indices)}")
    print("decoded payload: " + ("erasure" if decoded is None else hex(int(decoded, 2)) if decoded else "0x0"))
    print("result: " + ("correct" if detected == subset else "ERROR"))
    return {"transmitted": list(subset.indices), "detected": list(detected.indices),
            "correct": detected == subset}


def cmd_validate(args, config):
    rows = []
    failed = 0
    for name, ok, detail in run_checks(config):
        rows.append([name, int(ok), detail])
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += not ok
    write_csv(args.out, ["check", "passed", "detail"], rows)
    return {"failed": failed}


def read_config(path: Path) -> SystemConfig:
    """Config file, or the config recorded in a run manifest (``*.json``)."""
    if path.suffix == ".json":
        try:
            data = json.loads(path.read_text())["config"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not a run manifest ({exc})") from None
        return config_from_mapping(data)
    return load_config(path)


# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file, or a run manifest")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--trials", type=int, help="override the Monte Carlo trial count")
    common.add_argument("--out", type=Path, required=True, help="output CSV path")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")

    p = _Parser(prog="risbackscatter", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("rate", parents=[common], help="transmission rate versus L")
    s.add_argument("--n", type=int, default=9)
    s.add_argument("--l-min", type=int)
    s.add_argument("--l-max", type=int, default=60)

    for name, helptext in (("pe-vs-l", "error probability versus codeword length"),
                           ("pe-vs-spread", "error probability versus delay spread")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--snr-db", type=_floats, help="comma-separated SNRs in dB")
        s.add_argument("--overlay", action="store_true", help="add semi-analytic rows")
        s.add_argument("--draws", type=int, help="channel draws for the semi-analytic overlay")
        if name == "pe-vs-l":
            s.add_argument("--l-values", type=_ints, default=[15, 21, 31, 41])
        else:
            s.add_argument("--spreads", type=_ints, default=[5, 10, 15, 20])

    s = sub.add_parser("beampattern", parents=[common], help="RIS beampattern on a direction grid")
    s.add_argument("--az-points", type=int, default=37)
    s.add_argument("--el-points", type=int, default=13)

    s = sub.add_parser("single-frame", parents=[common], help="encode, transmit and detect one frame")
    s.add_argument("--message", required=True, help="payload as a hexadecimal integer, e.g. 0x1f")
    s.add_argument("--snr-db", type=float, default=10.0)
    s.add_argument("--trial", type=int, default=0, help="trial index selecting the random streams")

    sub.add_parser("validate", parents=[common], help="run the built-in oracle checks")
    return p


COMMANDS = {
    "rate": cmd_rate,
    "pe-vs-l": cmd_pe_vs_l,
    "pe-vs-spread": cmd_pe_vs_spread,
    "beampattern": cmd_beampattern,
    "single-frame": cmd_single_frame,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = read_config(args.config) if args.config else SystemConfig()
        overrides = {k: v for k, v in (("seed", args.seed), ("trials", args.trials)) if v is not None}
        if overrides:
            config = config.replace(**overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        extra = COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(args.out, args.command, argv, config, extra)
    if args.command == "validate" and extra["failed"]:
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
