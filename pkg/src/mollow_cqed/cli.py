"""Command-line entry point: ``mollow-cqed <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 too many failed sweep
points, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, config_from_dict, load_config
from .presets import PRESETS, preset

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

SWEEP_PROTOCOLS = ("linewidth_sweep", "intensity_sweep", "ablation")


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fock(value: str):
    if value == "auto":
        return value
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("--fock takes an integer or 'auto'") from None
    if n < 2:
        raise argparse.ArgumentTypeError("--fock must be >= 2")
    return n


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--fock", type=_fock, help="Fock truncation N or 'auto'")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgParser(prog="mollow-cqed", description="Driven dot-cavity Mollow triplet simulations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgParser)

    sp = sub.add_parser("spectrum", help="emission spectrum at one or more drives")
    _common(sp)
    sp.add_argument("--omega", type=float, nargs="+", help="target Rabi frequencies (GHz)")
    sp.add_argument("--J", type=float, nargs="+", help="drive amplitudes")
    sp.add_argument("--delta-cx", type=float, default=42.0)

    sw = sub.add_parser("sweep", help="run a sweep protocol from --config")
    _common(sw)

    ca = sub.add_parser("calibrate", help="fit the two phonon rates to a linewidth curve")
    _common(ca)
    ca.add_argument("--data", type=Path, help="linewidth CSV (omega_sq_GHz2, fwhm_GHz[, fwhm_sigma_GHz])")
    ca.add_argument("--delta-cx", type=float, default=42.0)

    rp = sub.add_parser("reproduce", help="run a figure preset")
    rp.add_argument("figure", choices=sorted(PRESETS))
    _common(rp)

    lt = sub.add_parser("locate-transition", help="breakpoint of a records.csv linewidth curve")
    lt.add_argument("records", type=Path)
    lt.add_argument("--variant", default=None, help="variant to analyse (default: the last one)")
    lt.add_argument("--delta-cx", type=float, default=None)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.fock is not None:
        changes["fock"] = args.fock
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.plot is not None:
        changes["plot"] = args.plot
    return cfg.with_(**changes) if changes else cfg


def _config_for(args) -> RunConfig:
    cmd = args.command
    if cmd == "reproduce":
        if args.config is not None:
            raise ConfigError("reproduce takes a preset name, not --config")
        return preset(args.figure, output_dir=args.out)
    if args.config is not None:
        cfg = load_config(args.config)
        if cmd == "spectrum":
            cfg = cfg.with_(protocol="spectrum")
        elif cmd == "sweep" and cfg.protocol not in SWEEP_PROTOCOLS:
            raise ConfigError(f"sweep needs one of {SWEEP_PROTOCOLS}, config has {cfg.protocol!r}")
        elif cmd == "calibrate":
            cfg = cfg.with_(protocol="calibrate")
        return cfg
    if cmd == "spectrum":
        if (args.omega is None) == (args.J is None):
            raise ConfigError("spectrum needs --config, or exactly one of --omega / --J")
        sweep = {"omega": args.omega} if args.omega is not None else {"J": args.J}
        raw = dict(
            name="spectrum", protocol="spectrum", sweep=sweep,
            params=dict(delta_c=args.delta_cx, frame="displaced"),
        )
        return config_from_dict(raw)
    if cmd == "calibrate":
        if args.data is None:
            raise ConfigError("calibrate needs --config or --data")
        raw = dict(
            name="calibrate", protocol="calibrate", sweep={"omega": [1.0]},
            params=dict(delta_c=args.delta_cx, frame="displaced"),
            calibration=dict(data=str(args.data)),
        )
        return config_from_dict(raw)
    raise ConfigError(f"{cmd} needs --config")


def _locate(args) -> int:
    from .sweep import read_records
    from .transition import line_fit, segmented_regression, transition_locator

    recs = read_records(args.records)
    variants = list(dict.fromkeys(r.variant for r in recs))
    variant = args.variant or variants[-1]
    if variant not in variants:
        raise ConfigError(f"variant {variant!r} not in {variants}")
    rows = [r for r in recs if r.variant == variant and not r.failed and r.lower_fwhm is not None]
    knee = transition_locator(rows, args.delta_cx)
    seg = segmented_regression([r.omega_sq for r in rows], [r.lower_fwhm for r in rows])
    _, _, r2 = line_fit([r.omega_sq for r in rows], [r.lower_fwhm for r in rows])
    print(f"variant: {variant}  points: {len(rows)}  single-line R^2: {r2:.4f}")
    print(f"best hinge at {seg.knee:.6g} GHz^2, slopes {seg.slope_below:.4g} -> {seg.slope_above:.4g}, p = {seg.p_value:.3g}")
    print("transition: none" if knee is None else f"transition: {knee:.6g} GHz^2")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .sweep import SchemaError, run

    try:
        if args.command == "locate-transition":
            return _locate(args)
        cfg = _apply_overrides(_config_for(args), args)
        result = run(cfg)
    except (ConfigError, SchemaError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name, path in sorted(result.paths.items()):
        print(f"{name}: {path}")
    if "result" in result.metadata:
        r = result.metadata["result"]
        print(f"gamma_ph_ads = {r['gamma_ph_ads']:.4f} +- {r['sigma_ads']:.4f} GHz")
        print(f"gamma_ph_asp = {r['gamma_ph_asp']:.4f} +- {r['sigma_asp']:.4f} GHz")
    if result.exit_code:
        print(f"{result.metadata.get('failed_points', 0)} point(s) failed or spot-check mismatch", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
