"""Aggregated Lasso objective per sweep on a blob dataset, as CSV on stdout."""

import argparse

from knngraph import RunConfig, make_blobs, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1500)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--std", type=float, default=1.4)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--kernel-mode", default="dense", choices=("dense", "local"))
    args = ap.parse_args()
    model = train(make_blobs(args.n, args.dim, 3, std=args.std, seed=args.seed),
                  RunConfig(kernel_mode=args.kernel_mode))
    print("sweep,objective,columns_active")
    active = model.trace.sweeps_per_column
    for t, obj in enumerate(model.trace.objective_per_sweep, 1):
        print(f"{t},{float(obj)!r},{int((active >= t).sum())}")


if __name__ == "__main__":
    main()
