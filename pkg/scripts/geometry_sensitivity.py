"""Fitted dist-sq slope of the strongly convex experiments as the box and heterogeneity vary.

Early on, eta(t) L times the delay window is large and the delayed recursion is
unstable. Box clipping leaks that transient into the slow directions. How long the
transient stays visible in the [1e2, 1e4] window depends on the box size and on
the noise floor set by the agents' heterogeneity. This script regenerates the table.
"""

import argparse
import itertools
import json
from pathlib import Path

from delayed_psgd import experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=str(ROOT / "configs" / "strongly_convex_biased.json"))
    ap.add_argument("--boxes", type=float, nargs="+", default=[2.0, 3.0, 5.0, 10.0])
    ap.add_argument("--heterogeneity", type=float, nargs="+", default=[1.0, 3.0, 10.0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--seed-base", type=int, default=1)
    args = ap.parse_args()

    base = json.loads(Path(args.config).read_text())
    print("box  heterogeneity  slope    dist-sq(1e2)  dist-sq(1e4)")
    for B, h in itertools.product(args.boxes, args.heterogeneity):
        cfg = dict(base)
        cfg["suite"] = dict(base["suite"], heterogeneity=h)
        cfg["set"] = {"kind": "box", "lower": -B, "upper": B}
        cfg["source"] = dict(base["source"], G=1.0)  # G does not enter the dynamics
        cfg["seeds"] = {"base": args.seed_base, "count": args.seeds}
        res = experiment.run_experiment(experiment.parse_config(cfg), write=False)
        s = res.ensembles[res.fit["metric"]].at([100, 10000]).values
        print(f"{B:4g} {h:14g}  {res.fit['slope']:7.3f}  {s[0]:12.4g}  {s[1]:12.4g}")


if __name__ == "__main__":
    main()
