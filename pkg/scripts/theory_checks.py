#!/usr/bin/env python3
"""Two quick distributional checks of the guidance and correction stages.

1. The one-step guidance bias: squared W2 between the guided residual and
   the nominal Gaussian should scale like eta^2 (slope ~2 on log-log axes).
2. A single risk-gradient update should shrink the Gaussian-fit KL to the
   exact linear-Gaussian posterior in most trials.
"""
import argparse
import math

import numpy as np

from sgps.analysis import (
    kl_trend_trials,
    loglog_slope,
    smooth_field,
    w2_scaling_curve,
)
from sgps.core import RngStream, SamplerConfig, Signal
from sgps.noise_est import PatchConfig
from sgps.operators import identity_op
from sgps.prior import GmmDenoiser, GmmPrior


def check_w2(samples: int) -> None:
    n = 16
    op = identity_op((n,))
    anchor = Signal(np.zeros(n), (n,))
    y = Signal(np.full(n, 3.0), (n,))
    cfg = SamplerConfig(steps=4, t_max=4.0, sigma_y=0.7)
    etas = (0.2, 0.1, 0.05, 0.025)
    curve = w2_scaling_curve(op, y, anchor, 1.0, cfg, etas, samples, seed=21)
    slope = loglog_slope([c[0] for c in curve], [c[1] for c in curve])
    print("W2 scaling:")
    for eta, w2 in curve:
        print(f"  eta={eta:<6} W2^2={w2:.5f}")
    print(f"  log-log slope: {slope:.3f} (quadratic bias -> ~2)")


def check_kl(trials: int, samples: int) -> None:
    shape = (16, 16)
    mean = smooth_field(RngStream(77, 0), shape, 0.5)
    prior = GmmPrior(np.array([1.0]), mean.data[None, :], 0.04, shape)
    den = GmmDenoiser(prior)
    op = identity_op(shape)
    rngy = RngStream(77, 1)
    x0 = Signal(mean.data + math.sqrt(0.04) * rngy.normal(prior.n), shape)
    clean = op.apply(x0)
    y = clean.with_data(clean.data + 0.1 * rngy.normal(clean.n))
    cfg = SamplerConfig(steps=12, t_max=12.0, sigma_y=0.1)
    out = kl_trend_trials(den, prior, op, y, cfg, PatchConfig(), trials=trials,
                          samples=samples, depth=8, seed=13)
    frac = float(np.mean(out[:, 1] < out[:, 0]))
    print("KL to posterior across one update:")
    print(f"  before: {out[:, 0].mean():.2f}   after: {out[:, 1].mean():.2f}")
    print(f"  decreased in {100 * frac:.0f}% of {trials} trials")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--w2-samples", type=int, default=2000)
    ap.add_argument("--kl-trials", type=int, default=20)
    ap.add_argument("--kl-samples", type=int, default=40)
    args = ap.parse_args(argv)
    check_w2(args.w2_samples)
    check_kl(args.kl_trials, args.kl_samples)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
