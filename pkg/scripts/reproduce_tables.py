"""Print the convergence tables for the shipped configurations.

Usage: python3 scripts/reproduce_tables.py [--outdir DIR] [name ...]
where each name is a file stem under configs/ (default: all ladders).
"""

import argparse
from pathlib import Path

from fracflow import cli
from fracflow.config import ExperimentConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LADDERS = ["linear", "penergy", "entropy", "circle", "quadform"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*", default=LADDERS)
    ap.add_argument("--outdir", type=Path)
    ap.add_argument("--alphas", type=float, nargs="*", help="sweep alpha for the linear ladder")
    args = ap.parse_args()
    if args.outdir:
        args.outdir.mkdir(parents=True, exist_ok=True)
    for name in args.names:
        alphas = args.alphas if (name == "linear" and args.alphas) else [None]
        for alpha in alphas:
            over = [] if alpha is None else [f"alpha={alpha}"]
            cfg = ExperimentConfig.load(CONFIGS / f"{name}.json", over)
            tag = name if alpha is None else f"{name}_a{alpha:g}"
            print(f"\n== {tag} (alpha={cfg.alpha:g}, energy={cfg.energy['kind']})")
            out = str(args.outdir / f"{tag}.csv") if args.outdir else None
            cli._cmd_convergence(cfg, out)


if __name__ == "__main__":
    main()
