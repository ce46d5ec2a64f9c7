"""Jet-2 accuracy on a clean unit sphere versus patch size.

Runs the full pipeline, and next to it a brute-force reference that shares no code
with the package beyond the synthetic sampler: for every point, a quadratic height
field is fit by least squares to its N nearest neighbours in the exact tangent frame
of the sphere, and the normal is read off at that point. A second reference evaluates
the same fit over the nearest half of the cap, as the pipeline does. Together they show
how much error a quadratic over an N-point cap carries by itself.
"""
import argparse
import time

import numpy as np
from scipy.spatial import cKDTree

from e3normals import InferenceConfig, JetEstimator, SynthSpec, infer, synthesize
from e3normals.metrics import rmse


def reference_rmse(pts, n, sample, rng):
    """(center-only RMSE, half-cap RMSE) in degrees over ``sample`` seeds."""
    tree = cKDTree(pts)
    errs, half_errs = [], []
    for i in rng.choice(len(pts), sample, replace=False):
        _, nb = tree.query(pts[i], n)
        z = pts[i] / np.linalg.norm(pts[i])
        a = np.cross(z, [1.0, 0, 0] if abs(z[0]) < 0.9 else [0, 1.0, 0])
        a /= np.linalg.norm(a)
        b = np.cross(z, a)
        local = (pts[nb] - pts[i]) @ np.column_stack([a, b, z])
        x, y, h = local.T
        A = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
        c = np.linalg.lstsq(A, h, rcond=None)[0]
        normal = np.array([-c[1], -c[2], 1.0])
        normal /= np.linalg.norm(normal)
        errs.append(np.degrees(np.arccos(min(1.0, abs(normal[2])))))
        k = (n + 1) // 2  # query order is by distance
        xk, yk = x[:k], y[:k]
        nl = np.column_stack([-(c[1] + 2 * c[3] * xk + c[4] * yk), -(c[2] + c[4] * xk + 2 * c[5] * yk), np.ones(k)])
        nl /= np.linalg.norm(nl, axis=1, keepdims=True)
        truth = pts[nb[:k]] @ np.column_stack([a, b, z])
        truth /= np.linalg.norm(truth, axis=1, keepdims=True)
        dots = np.minimum(1.0, np.abs(np.sum(nl * truth, axis=1)))
        half_errs.extend(np.degrees(np.arccos(dots)))
    rms = lambda e: float(np.sqrt(np.mean(np.square(e))))
    return rms(errs), rms(half_errs)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-points", type=int, default=5000)
    ap.add_argument("--sizes", default="200,400,700,1000,1400")
    ap.add_argument("--sample", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    c = synthesize(SynthSpec("sphere", args.n_points, seed=args.seed))
    rng = np.random.default_rng(args.seed)
    print("patch_size,pipeline_rmse_deg,pipeline_s,reference_center_rmse_deg,reference_half_cap_rmse_deg")
    for n in (int(s) for s in args.sizes.split(",")):
        t0 = time.perf_counter()
        out = infer(c, JetEstimator(2), InferenceConfig(patch_size=n, threads=8))
        dt = time.perf_counter() - t0
        ref, ref_half = reference_rmse(c.positions, n, args.sample, rng)
        print(f"{n},{rmse(out, c.gt_normals):.3f},{dt:.2f},{ref:.3f},{ref_half:.3f}")


if __name__ == "__main__":
    main()
