"""Run every experiment config in configs/ and print one status line per experiment."""

import argparse
import sys
from pathlib import Path

from delayed_psgd import experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", default=str(ROOT / "configs"))
    ap.add_argument("--output-dir", default=str(ROOT / "out"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    status = 0
    for path in sorted(Path(args.configs).glob("*.json")):
        spec = experiment.load_config(path)
        spec.output_dir = args.output_dir
        res = experiment.run_experiment(spec, workers=args.workers)
        fit = res.fit
        fit_txt = f"slope={fit['slope']:.4f} passed={fit['passed']}" if fit else "no fit"
        print(f"{spec.name}: status={res.status} {fit_txt} -> {res.output_dir}")
        for msg in res.failures:
            print(f"  {msg}")
        status |= res.status
    return status


if __name__ == "__main__":
    sys.exit(main())
