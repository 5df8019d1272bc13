"""Command-line entry point: ``onebit-mimo <subcommand> --scene FILE --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import ExperimentSpec, run
from .greet import GreetConfig

SUBCOMMANDS = {
    "noise-loss": ("noise-only-loss", "DAC/ADC quantization losses over an N_r L grid"),
    "detect": ("detection-curves", "P_f vs threshold and P_d vs target power"),
    "codesign": ("codesign", "GREET over an interference power x uncertainty grid"),
    "validate": ("mc-validate", "Monte Carlo checks of the closed-form statistics"),
    "sweep": ("uncertainty-sweep", "GREET from several seeds per angle uncertainty"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onebit-mimo",
        description="Detection analysis and waveform/filter design for one-bit MIMO radar.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", required=True, help="scene YAML file")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=2000, help="Monte Carlo trials")
    common.add_argument("--grid", default=None,
                        help='grid spec, e.g. "delta=0,0.1,0.2;power_db=20:40:10"')
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a scene field (repeatable)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--rho1", type=float, default=2.0)
    common.add_argument("--rho2", type=float, default=30.0)
    common.add_argument("--admm-iters", type=int, default=200)
    common.add_argument("--alt-iters", type=int, default=50)

    for name, (_, helptext) in SUBCOMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext, description=helptext)
        if name == "detect":
            p.add_argument("--pf", type=float, default=1e-2,
                           help="false-alarm rate for the P_d curve")
            p.add_argument("--waveform", default=None, help="waveform file (default: matched phase)")
            p.add_argument("--filter", default=None, help="filter CSV (default: MVDR)")
        if name == "sweep":
            p.add_argument("--seeds", type=int, default=3, help="GREET runs per grid point")
    return parser


def spec_from_args(args) -> ExperimentSpec:
    cfg = GreetConfig(rho1=args.rho1, rho2=args.rho2, max_admm_iters=args.admm_iters,
                      max_altopt_iters=args.alt_iters, seed=args.seed)
    return ExperimentSpec(
        kind=SUBCOMMANDS[args.command][0], scene_path=args.scene, output_dir=args.out,
        seed=args.seed, overrides=tuple(args.overrides), trials=args.trials, grid=args.grid,
        greet=cfg, workers=args.workers, pf=getattr(args, "pf", 1e-2),
        waveform_path=getattr(args, "waveform", None), filter_path=getattr(args, "filter", None),
        n_seeds=getattr(args, "seeds", 3))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = spec_from_args(args)
        result = run(spec)
    except (ValueError, OSError) as exc:
        print(f"onebit-mimo: error: {exc}", file=sys.stderr)
        return 2
    paths = result if isinstance(result, tuple) else (result,)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
