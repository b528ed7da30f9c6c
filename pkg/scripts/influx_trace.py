#!/usr/bin/env python3
"""Paired with/without-correction runs on a blurred smooth image.

Prints the step-averaged residual noise level and final PSNR for both arms
and writes the per-step curves (CSV plus an SVG chart) for the first seed.
"""
import argparse
import os

import numpy as np

from sgps.analysis import smooth_field
from sgps.core import RngStream, SamplerConfig
from sgps.harness.svg import write_chart
from sgps.operators import BlurOp, gaussian_kernel
from sgps.prior import GmmDenoiser, GmmPrior
from sgps.sampler import noise_influx_trace


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=24, help="image side length")
    ap.add_argument("--steps", type=int, default=16)
    ap.add_argument("--sigma-y", type=float, default=0.05)
    ap.add_argument("--prior-var", type=float, default=0.04)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="out/influx")
    args = ap.parse_args(argv)

    shape = (args.size, args.size)
    mean = smooth_field(RngStream(101, 0), shape, 0.5)
    prior = GmmPrior(np.array([1.0]), mean.data[None, :], args.prior_var, shape)
    den = GmmDenoiser(prior)
    op = BlurOp(shape, gaussian_kernel(5, 1.2, 2))
    cfg = SamplerConfig(steps=args.steps, t_max=float(args.steps), sigma_y=args.sigma_y)

    os.makedirs(args.out, exist_ok=True)
    sig_gap = []
    psnr_gap = []
    first = None
    for s in range(args.seeds):
        g = RngStream(500 + s, 0)
        x0 = prior.draw(g.substream(9))
        clean = op.apply(x0)
        y = clean.with_data(clean.data + args.sigma_y * g.substream(10).normal(clean.n))
        trace = noise_influx_trace(den, op, y, cfg, g, x_true=x0)
        w, wo = trace.mean_sigma_hat()
        sig_gap.append(wo - w)
        psnr_gap.append(trace.report_with.psnr_final - trace.report_without.psnr_final)
        if first is None:
            first = trace

    csv_path = os.path.join(args.out, "influx_seed0.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(first.to_csv())
    steps = [r.step for r in first.report_with.steps]
    write_chart(
        os.path.join(args.out, "influx_seed0.svg"),
        [
            ("sigma_t", steps, [r.sigma_t for r in first.report_with.steps]),
            ("corrected", steps, [r.sigma_hat_star for r in first.report_with.steps]),
            ("uncorrected", steps, [r.sigma_hat_star for r in first.report_without.steps]),
        ],
        title="residual noise per step",
        xlabel="step",
        ylabel="noise level",
    )

    print(f"seeds: {args.seeds}")
    print(f"mean sigma_hat reduction: {np.mean(sig_gap):+.4f}")
    print(f"mean final PSNR gain:     {np.mean(psnr_gap):+.2f} dB")
    print(f"wrote {csv_path} and the matching .svg")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
