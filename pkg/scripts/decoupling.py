"""Distance evaluations per query versus learned neighborhood size.

Sweeps the lambda bounds in local kernel mode and reports mean K_j next to
the per-query count at several beam widths, then the static-voting baseline
over k for contrast.
"""

import argparse

import numpy as np

from knngraph import RunConfig, make_blobs, train
from knngraph.classifier import StaticHNSW, index_params


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--queries", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    ds = make_blobs(args.n + args.queries, 10, 3, std=1.4, seed=args.seed)
    tr = ds.subset(np.arange(args.n))
    Q = ds.features[args.n:]
    print("lambda_min,lambda_max,mean_k,avg_degree,evals_ef1,evals_ef8,evals_ef32")
    for lo in (1.0, 0.1, 1e-2, 1e-3, 1e-4, 3e-6):
        m = train(tr, RunConfig(kernel_mode="local", lambda_min=lo, lambda_max=5 * lo))
        counts = [m.predict_counted(Q, ef)[1].mean() for ef in (1, 8, 32)]
        print(f"{lo:g},{5 * lo:g},{m.stats['mean_k']:.2f},{m.stats['avg_degree']:.2f},"
              + ",".join(f"{c:.1f}" for c in counts))
    st = StaticHNSW.build(tr, index_params(RunConfig()))
    print("\nstatic_k,evals")
    for k in (1, 3, 5, 10, 30):
        print(f"{k},{np.mean([st.predict_counted(q, k, max(1, k))[1] for q in Q]):.1f}")


if __name__ == "__main__":
    main()
