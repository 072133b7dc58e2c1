"""Command-line entry point: ``rdpf --source 0.15,0.85 --divergence tv --s1 1 --s2 0.5``."""

import argparse
import logging
import sys

from .errors import ConfigError, RDPFError
from .sweep import emit, load_config, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2


def build_parser():
    ap = argparse.ArgumentParser(
        prog="rdpf",
        description="Rate-distortion-perception curves by alternating minimization.",
    )
    ap.add_argument("--config", help="key = value file; flags override its entries")
    ap.add_argument("--source", help="source distribution, e.g. 0.15,0.85")
    ap.add_argument("--distortion", help="'hamming' (default) or path to a text matrix")
    ap.add_argument("--divergence", help="kl, tv, chi2 or hellinger")
    s1 = ap.add_mutually_exclusive_group()
    s1.add_argument("--s1", help="single distortion multiplier")
    s1.add_argument("--s1-grid", help="list a,b,c or linspace:lo:hi:n / logspace:lo:hi:n")
    s2 = ap.add_mutually_exclusive_group()
    s2.add_argument("--s2", help="single perception multiplier")
    s2.add_argument("--s2-grid", help="as --s1-grid; defaults to 0")
    ap.add_argument("--eps", type=float, help="stopping tolerance on the bound gap, nats")
    ap.add_argument("--max-iters", type=int)
    ap.add_argument("--q-floor", type=float, help="output masses below this are set to zero")
    ap.add_argument("--mode", choices=["approximate", "exact-implicit"])
    ap.add_argument("--units", choices=["bits", "nats"], help="units of R, lower, upper")
    ap.add_argument("--perception-units", choices=["native", "bits"],
                    help="'bits' converts P for the kl divergence only")
    ap.add_argument("--oracle", action="store_const", const=True,
                    help="attach a brute-force lattice reference to every point")
    ap.add_argument("--oracle-grid-step", type=float)
    ap.add_argument("--spectral", action="store_const", const=True,
                    help="attach the linearized-update spectrum to every point")
    ap.add_argument("--seed-q0", help="initial output distribution")
    ap.add_argument("--output", help="output file (default: stdout)")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--workers", type=int, help="parallel worker processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    overrides["s1_grid"] = overrides.pop("s1") or overrides["s1_grid"]
    overrides["s2_grid"] = overrides.pop("s2") or overrides["s2_grid"]
    try:
        config = load_config(args.config, overrides)
        config.distortion_matrix()
    except (ConfigError, ValueError) as exc:
        print(f"rdpf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    points = run_sweep(config)
    try:
        text = emit(points, config.output_format, config.units, config.output_path,
                    config.perception_units, config=config)
    except OSError as exc:
        print(f"rdpf: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RDPFError as exc:
        print(f"rdpf: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    if config.output_path is None:
        sys.stdout.write(text)
    return EXIT_OK if all(pt.converged for pt in points) else EXIT_NOT_CONVERGED
