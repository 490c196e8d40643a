"""First-try success rate of the partial-coloring walk against the constraint budget.

For each budget fraction f, draws random systems with sum exp(-lam^2/16) <= f N
and reports how often the walk rounds half the coordinates without a retry.
"""

import argparse

import numpy as np

from packlab.discrepancy import partial_color
from packlab.params import SolveParams
from packlab.synth import random_constraints


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--fracs", default="0.03125,0.0625")
    ap.add_argument("--gamma", type=float, default=0.05)
    args = ap.parse_args()
    p = SolveParams(gamma=args.gamma, retries=0)
    print(f"N={args.N} runs={args.runs} gamma={args.gamma}")
    for f in (float(s) for s in args.fracs.split(",")):
        ok = 0
        steps = []
        for seed in range(args.runs):
            rng = np.random.default_rng(seed)
            x0 = rng.uniform(0, 1, args.N)
            w = partial_color(x0, random_constraints(rng, args.N, budget_frac=f), p, rng)
            ok += w.success
            steps.append(w.steps)
        print(f"budget <= {f:.4f} N: {ok}/{args.runs} first-try successes, median steps {int(np.median(steps))}")


if __name__ == "__main__":
    main()
