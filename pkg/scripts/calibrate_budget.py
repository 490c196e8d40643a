"""Where does the interval budget sum exp(-lam^2/16) + 1 fit under N/16?

Builds post-rebuild states of many support sizes, evaluates the interval
family budget for a grid of (K, delta_large), and prints the largest
N / log2(1/s_min) among states that still break the budget, i.e. the
smallest support constant L that would have been enough.
"""

import argparse
import math
from fractions import Fraction

import numpy as np

from packlab.containers import split_integral
from packlab.discrepancy import build_intervals
from packlab.params import SolveParams
from packlab.rebuild import rebuild_all
from packlab.synth import random_state, small_heavy_state


def states(rng, count, n_max):
    out = []
    for t in range(count):
        N = int(np.exp(rng.uniform(np.log(16), np.log(n_max))))
        if t % 2:
            s = small_heavy_state(rng, n_patterns=N, level=int(rng.integers(4, 9)),
                                  n_types=int(rng.integers(3, 10)))
        else:
            s = random_state(rng, n_types=int(rng.integers(3, 12)), n_patterns=N,
                             n_containers=int(rng.integers(3, 20)))
        out.append(s)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--states", type=int, default=30)
    ap.add_argument("--n-max", type=int, default=1000)
    ap.add_argument("--K", default="1,256,4096,65536")
    ap.add_argument("--delta-large", default="8,32")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    pool = states(np.random.default_rng(args.seed), args.states, args.n_max)
    for K in (float(k) for k in args.K.split(",")):
        for dl in args.delta_large.split(","):
            p = SolveParams(budget_K=K, delta_large=Fraction(dl))
            need, ratios = 0.0, []
            for s in pool:
                frac = split_integral(s)[1]
                N = len(frac.x)
                _, M, _ = rebuild_all(frac, p, measure=False)
                fam = build_intervals(M, p)
                lg = math.log2(1 / float(min(s.sizes)))
                ratios.append(fam.budget / (N / 16))
                if fam.budget > N / 16:
                    need = max(need, N / lg)
            print(f"K={K:<8g} delta_large={dl:<3} budget/(N/16) median {np.median(ratios):.2f} "
                  f"max {max(ratios):.2f}  L needed > {need:.1f}")


if __name__ == "__main__":
    main()
