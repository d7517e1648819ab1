"""Command-line entry point: ``hwlsfp --preset severe --desk --output out.csv``."""

from __future__ import annotations

import argparse
import logging
import sys

from .exceptions import HwLsfpError
from .harness import MAX_SEED, PRESETS, ExperimentConfig, desk_config, load_config, run_experiment
from .hardware import export_distortion_table


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hwlsfp",
        description="Sum-SE of SLP and MM-optimized LSFP for MR, DU-MMSE and DA-MMSE precoders.",
    )
    p.add_argument("--config", metavar="PATH", help="key = value experiment file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="hardware impairment preset")
    p.add_argument("--seed", type=_seed, help="unsigned 64-bit seed")
    p.add_argument("--mc-samples", type=int, metavar="N", help="Monte-Carlo realizations for the SINR terms")
    p.add_argument("--mm-iters", type=int, metavar="N", help="maximum MM iterations")
    p.add_argument("--mm-tol", type=float, metavar="F", help="MM stopping tolerance on the weight change")
    p.add_argument("--desk", action="store_true", help="small network: L=2, K=2, M=16, 500 samples")
    p.add_argument("--output", metavar="PATH", help="results CSV (traces and metadata go next to it)")
    p.add_argument("--precoders", help="comma-separated subset of MR,DU,DA")
    p.add_argument("--schemes", help="comma-separated subset of SLP,LSFP")
    p.add_argument("--jobs", type=int, metavar="N", help="threads for Monte-Carlo blocks")
    p.add_argument("--distortion-table", metavar="PATH", help="write the quantizer distortion table and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, the desk preset, the config file and explicit flags, in that order."""
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.desk:
        config = desk_config(**{k: v for k, v in vars(config).items() if k not in ("n_cells", "n_ues", "n_antennas", "mc_samples")})
    changes = {
        "preset": args.preset,
        "seed": args.seed,
        "mc_samples": args.mc_samples,
        "mm_iters": args.mm_iters,
        "mm_tol": args.mm_tol,
        "output": args.output,
        "n_jobs": args.jobs,
        "precoders": None if args.precoders is None else tuple(s.strip() for s in args.precoders.split(",")),
        "schemes": None if args.schemes is None else tuple(s.strip().upper() for s in args.schemes.split(",")),
    }
    return config.replace(**{k: v for k, v in changes.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.distortion_table:
        export_distortion_table(args.distortion_table)
        return 0
    try:
        config = resolve_config(args)
        result = run_experiment(config)
    except (HwLsfpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for row in result.rows:
        se = "nan" if row.per_ue_se is None else f"{row.sum_se:.4f}"
        print(f"{row.scheme:4s} {row.precoder:2s} sum-SE {se} bit/s/Hz  mm_iters={row.mm_iterations}  {row.status}")
    print(f"wrote {config.output}")
    return 0 if all(r.status == "ok" for r in result.rows) else 1


if __name__ == "__main__":
    sys.exit(main())
