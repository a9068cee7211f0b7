"""Reproduce the calibration behind the frozen constants in data/constants.json.

Run ``python scripts/calibrate.py [--quick]``.  Each section prints the
measured quantity next to the frozen value so drift is easy to spot.
"""

import argparse
import itertools
import math

import numpy as np

from ripkit import config
from ripkit.construct import gen_from_plan, gen_matrix, plan_params
from ripkit.expander import verify_expander_exact
from ripkit.recover import rip_from_recovery, theorem_constants
from ripkit.tails import (HypothesisViolation, binom_pmf, load_summand, moment_bound,
                          sample_row_loads, tail_hypotheses)


def moment_constant():
    # smallest integer C with exact moment <= bound on the pre-registered grid
    worst, arg = 0.0, None
    for k, dl, p, ell in itertools.product([2, 5, 20, 100], [0.001, 0.01, 0.05, 0.067],
                                           [2.0, 2.5, 3.0, 4.0], [1.0, 1.5, 2.0, 3.0]):
        x, pmf = binom_pmf(k, dl / k)
        exact = float(np.sum(pmf * load_summand(x, p) ** ell))
        r = exact / moment_bound(dl, p, ell, 1.0)
        if r > worst:
            worst, arg = r, (k, dl, p, ell)
    print(f"moment_C: max exact/bound(C=1) = {worst:.4f} at {arg}; "
          f"smallest integer C = {max(1, math.ceil(worst))}, frozen {config.section('tails')['moment_C']}")


def tail_constant(trials):
    # largest c with empirical tail <= exp(-c (eps d)^(1/(p-1)) / p) across admissible points
    hyp_C = config.section("tails")["hypothesis_C"]
    cs = []
    for m, d, k, p, eps in [(4000, 100, 5, 3.0, 0.5), (20000, 200, 10, 2.5, 0.5),
                            (8000, 60, 4, 2.0, 0.5), (50000, 400, 20, 3.0, 0.8)]:
        if tail_hypotheses(m, d, k, p, eps, hyp_C)["problems"]:
            print(f"  skip {(m, d, k, p, eps)}: outside the hypotheses")
            continue
        S = sample_row_loads(m, d, k, p, 0, trials)
        tail = max(float(np.mean(S > eps * d)), 1.0 / trials)
        c = -p * math.log(tail) / (eps * d) ** (1 / (p - 1))
        cs.append(c)
        print(f"  {(m, d, k, p, eps)}: tail <= {tail:.2e}, admissible c <= {c:.3f}")
    print(f"tail_c: min admissible c = {min(cs):.3f}, frozen {config.section('tails')['tail_c']}")


def recovery_constants():
    c1, c2 = theorem_constants(1.0)
    print(f"recover C1, C2 at D = 1: {c1:g}, {c2:g}; frozen {config.section('recover')['C1']}, "
          f"{config.section('recover')['C2']}")


def converse_spread(seeds):
    for n, k, p in [(128, 4, 2.0), (64, 8, 1.5), (64, 3, 3.0)]:
        plan = plan_params(n, k, p, 0.25)
        vals = [rip_from_recovery(gen_from_plan(plan, s), None, k, p, trials=1000, seed=s).C2_estimate
                for s in range(seeds)]
        print(f"converse C2 at {(n, k, p)}: {np.round(vals, 3).tolist()}, max/min {max(vals) / min(vals):.3f}")


def expander_replay(seeds):
    for ell in (1, 2, 3):
        hits = sum(verify_expander_exact(gen_matrix(16, 1500, 24, 1.5, s), 2 * ell, 0.1).passed
                   for s in range(seeds))
        print(f"expander replay (16, 1500, 24), 2 ell = {2 * ell}: {hits}/{seeds} certified")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="fewer trials and seeds")
    args = ap.parse_args()
    moment_constant()
    try:
        tail_constant(10**4 if args.quick else 10**5)
    except HypothesisViolation as exc:
        print(f"tail_c: {exc}")
    recovery_constants()
    converse_spread(2 if args.quick else 4)
    expander_replay(20 if args.quick else 100)


if __name__ == "__main__":
    main()
