"""Per-point PCA and jet baselines on a PCPNet test split.

Expects ROOT/<split>.txt listing shape names and ROOT/<name>.xyz, .normals and
(optionally) .pidx files. Prints the RMSE of each shape and the mean.
"""
import argparse
import os
from pathlib import Path

import numpy as np

from e3normals import InferenceConfig, JetEstimator, PCAEstimator, infer
from e3normals.data import load_shape, read_shape_list
from e3normals.metrics import rmse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root")
    ap.add_argument("--split", default="testset_no_noise")
    ap.add_argument("--k", type=int, default=256, help="neighbourhood size")
    ap.add_argument("--jet-order", type=int, default=2)
    args = ap.parse_args()
    cfg = InferenceConfig(patch_size=args.k, n_frames=1, use_geodesic=False, per_point_mode=True,
                          threads=os.cpu_count() or 1)
    ests = {"pca": PCAEstimator(), "jet": JetEstimator(args.jet_order)}
    rows = {name: [] for name in ests}
    print("shape," + ",".join(ests))
    for shape in read_shape_list(Path(args.root, f"{args.split}.txt")):
        cloud = load_shape(args.root, shape)
        pidx = Path(args.root, f"{shape}.pidx")
        q = np.loadtxt(pidx, dtype=np.int64) if pidx.exists() else np.arange(len(cloud))
        for name, est in ests.items():
            rows[name].append(rmse(infer(cloud, est, cfg, query=q), cloud.gt_normals[q]))
        print(shape + "," + ",".join(f"{rows[n][-1]:.3f}" for n in ests))
    print("mean," + ",".join(f"{np.mean(rows[n]):.3f}" for n in ests))


if __name__ == "__main__":
    main()
