"""Adaptive run on the relaxation problem; writes the step history and compares with uniform steps."""

import argparse

import numpy as np

from fracflow.adaptive import AdaptiveConfig, adaptive_solve
from fracflow.energy import Quadratic
from fracflow.estimate import error_vs_reference
from fracflow.flow import FlowProblem, solve_flow
from fracflow.partition import uniform_partition
from fracflow.special import mittag_leffler


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--epsilon", type=float, default=1e-4)
    ap.add_argument("--out", default="adaptive_steps.csv")
    args = ap.parse_args()

    pb = FlowProblem(args.alpha, Quadratic(args.lam), 1.0)
    ref = lambda t: mittag_leffler(args.alpha, -args.lam * np.asarray(t) ** args.alpha)
    res, hist = adaptive_solve(pb, 1.0, AdaptiveConfig(epsilon=args.epsilon))
    err, _ = error_vs_reference(res, ref, samples=8)
    tau = res.partition.tau
    print(f"adaptive: N={res.N} rejections={sum(h.rejections for h in hist)} "
          f"min/max step {tau.min():.4e}/{tau.max():.4e} E_H={err:.4e} time {res.wall_time:.2f}s")
    with open(args.out, "w") as fh:
        fh.write("t,tau,estimator,rejections\n")
        for h in hist:
            fh.write(f"{h.t:.5e},{h.tau:.5e},{h.estimator:.5e},{h.rejections}\n")

    uni = solve_flow(pb, uniform_partition(1.0, res.N))
    eu, _ = error_vs_reference(uni, ref, samples=8)
    print(f"uniform with the same N: E_H={eu:.4e}")


if __name__ == "__main__":
    main()
