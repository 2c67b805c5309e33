"""Sample the nonlocal basis functions on a small partition as plot-ready CSV."""

import argparse

import numpy as np

from fracflow.caputo import basis_matrix, caputo_kernel
from fracflow.partition import make_partition


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--nodes", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.6, 1.0])
    ap.add_argument("--samples", type=int, default=401)
    ap.add_argument("--out", default="basis.csv")
    args = ap.parse_args()

    K = caputo_kernel(make_partition(args.nodes), args.alpha)
    t = np.linspace(0.0, args.nodes[-1], args.samples)
    B = basis_matrix(K, t)
    header = "t," + ",".join(f"phi{i}" for i in range(B.shape[1]))
    np.savetxt(args.out, np.column_stack([t, B]), delimiter=",", header=header, comments="", fmt="%.6e")
    print(f"wrote {args.out}: {B.shape[1]} basis functions, min {B.min():.3e}, max |sum-1| {np.abs(B.sum(1) - 1).max():.3e}")


if __name__ == "__main__":
    main()
