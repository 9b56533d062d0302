"""Compare seller revenue across mechanism classes on random instances.

For each sampled instance, solves the single-round menu, the optimal
deposit-return menu (independent priors only), the probabilistic-return
LP, and the LP-free full-revelation benchmark, and reports each one's
revenue as a fraction of the full-surplus cap.
"""

import argparse

import numpy as np

from infosale import (full_revelation_menu, revenue_cap, solve_cm_depr,
                      solve_cm_probr, solve_single_round)
from infosale.random_instances import (random_correlated_instance,
                                       random_independent_instance)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=100,
                        help="number of random instances (default 100)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--correlated", action="store_true",
                        help="sample fully correlated priors instead of "
                             "independent ones (skips the solvers that "
                             "require independence)")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    ratios: dict[str, list[float]] = {}

    def record(name: str, revenue: float, cap: float) -> None:
        ratios.setdefault(name, []).append(revenue / cap if cap > 0 else 1.0)

    for _ in range(args.instances):
        if args.correlated:
            inst = random_correlated_instance(rng)
        else:
            inst = random_independent_instance(rng)
        cap = revenue_cap(inst)
        record("prob-return LP", solve_cm_probr(inst).revenue, cap)
        record("full-revelation benchmark",
               full_revelation_menu(inst).revenue, cap)
        if not args.correlated:
            record("deposit-return LP", solve_cm_depr(inst).revenue, cap)
            record("single-round menu", solve_single_round(inst).revenue, cap)

    print(f"{args.instances} instances, "
          f"{'correlated' if args.correlated else 'independent'} priors, "
          f"seed {args.seed}")
    print(f"{'mechanism':<28} {'mean':>7} {'min':>7} {'max':>7}  "
          "(revenue / surplus cap)")
    for name in ("single-round menu", "full-revelation benchmark",
                 "deposit-return LP", "prob-return LP"):
        if name not in ratios:
            continue
        vals = np.array(ratios[name])
        print(f"{name:<28} {vals.mean():7.4f} {vals.min():7.4f} "
              f"{vals.max():7.4f}")


if __name__ == "__main__":
    main()
