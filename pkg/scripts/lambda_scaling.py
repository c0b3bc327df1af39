"""Lambda scaling of the first- and second-order boundary residuals.

For each Phi1 source, sweeps the coupling over a log grid, fits log-log
slopes of |R1| and |R2| and writes one CSV row per (source, lambda).
Usage: python3 scripts/lambda_scaling.py [--n-lambda 12] [--sources plane:1,plane:2,gaussian] [--out scaling.csv]
"""
import argparse
import csv
import os
import sys

import numpy as np

from multisym.perturbation import ScalingConfig, lambda_scaling_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-lambda", type=int, default=12)
    ap.add_argument("--lambda-min", type=float, default=1e-3)
    ap.add_argument("--lambda-max", type=float, default=1e-1)
    ap.add_argument("--sources", default="plane:1,plane:2,gaussian")
    ap.add_argument("--out")
    args = ap.parse_args()

    workers = int(os.environ.get("MULTISYM_THREADS", "1"))
    lams = tuple(np.geomspace(args.lambda_min, args.lambda_max, args.n_lambda))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["phi1", "lambda", "R1", "R2", "volume", "slope1", "slope2"])
    for source in args.sources.split(","):
        out = lambda_scaling_study(ScalingConfig(lambdas=lams, phi1=source), workers=workers)
        for row in out["rows"]:
            writer.writerow([source, row["lambda"], row["R1"], row["R2"], row["volume"], out["slope1"], out["slope2"]])
        print(f"{source}: slope1 {out['slope1']:.3f}  slope2 {out['slope2']:.3f}", file=sys.stderr)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
