#!/usr/bin/env python3
"""Sweep correction hyperparameters through the experiment harness.

Writes a config with a [sweep] axis, runs it, and prints mean final PSNR per
point from the summary CSV.  The same artifacts appear as with `sgps sweep`.
"""
import argparse
import collections
import os

from sgps.harness.config import parse_config_text
from sgps.harness.runner import run_experiment, summary_csv_name

TEMPLATE = """\
[experiment]
name = hyperparam-sweep
seed = 11
measurement_sigma = 0.005
repeats = {repeats}
output_dir = {out}

[prior]
shape = {size} {size}
mean_kind = smooth
mean_seed = 101
mean_amplitude = 0.5
s2 = 0.00016

[operator]
kind = identity

[sampler]
steps = {steps}

[sweep]
{axis} = {values}
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--axis", default="alpha", help="sampler field to sweep")
    ap.add_argument("--values", default="0.25 0.5 1.0 1.5", help="whitespace-separated values")
    ap.add_argument("--repeats", type=int, default=6)
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--steps", type=int, default=16)
    ap.add_argument("--out", default="out/hyperparam")
    args = ap.parse_args(argv)

    text = TEMPLATE.format(
        axis=args.axis, values=args.values, repeats=args.repeats,
        size=args.size, steps=args.steps, out=args.out,
    )
    cfg = parse_config_text(text)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.cfg"), "w", encoding="utf-8") as fh:
        fh.write(text)
    code = run_experiment(cfg, sweep=True)

    path = os.path.join(args.out, summary_csv_name(cfg))
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().strip().split("\n")
    header = lines[0].split(",")
    ai = header.index(args.axis)
    pi = header.index("psnr_final")
    by_value = collections.defaultdict(list)
    for line in lines[1:]:
        parts = line.split(",")
        if parts[2] == "ok":
            by_value[parts[ai]].append(float(parts[pi]))
    print(f"{args.axis:>12} {'mean PSNR':>10} {'runs':>5}")
    for val in sorted(by_value, key=float):
        vals = by_value[val]
        print(f"{val:>12} {sum(vals) / len(vals):>10.2f} {len(vals):>5}")
    print(f"summary: {path}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
