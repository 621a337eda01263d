"""Run the method comparison and both ablation sweeps on the toy benchmark.

Writes raw and summary CSVs for each experiment under --out.

    python3 scripts/run_sweeps.py --out results/ --seeds 10 --workers 4
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from spsoft import toylab


def write(out, name, rows, config):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}_raw.csv").write_text(toylab.raw_csv(rows))
    (out / f"{name}_summary.csv").write_text(toylab.summary_csv(rows))
    (out / "config.txt").write_text(toylab.config_header(config))
    print(f"\n== {name}")
    print(toylab.summary_csv(rows), end="")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip", nargs="*", default=[], choices=["methods", "beta", "superpixels"])
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    config = replace(toylab.ExperimentConfig(), seeds=tuple(range(args.seeds)))
    if "methods" not in args.skip:
        write(args.out, "methods", toylab.run_methods(config, workers=args.workers), config)
    if "beta" not in args.skip:
        write(args.out, "beta", toylab.sweep_beta(config, workers=args.workers), config)
    if "superpixels" not in args.skip:
        write(args.out, "superpixels", toylab.sweep_superpixels(config, workers=args.workers), config)


if __name__ == "__main__":
    main()
