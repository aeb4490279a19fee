"""Reconstruct the standard synthetic trip with every algorithm and print a scorecard.

Columns: ideal-trajectory flags, position RMSE against ground truth, share
of door-open seconds captured at 0/3/5 mph, and share of implausible
accelerations.

    python3 scripts/run_standard_trip.py [--seed 2022] [--sigma 5] [--bandwidth-points 20]
"""

import argparse

from bustraj.simulator import position_rmse, simulate, standard_trip_spec
from bustraj.smoothing import LocregConfig, fit
from bustraj.validation import build_scorecard

from _common import series_from_trip


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2022)
    ap.add_argument("--sigma", type=float, default=5.0, help="GPS noise per axis, metres")
    ap.add_argument("--bandwidth-points", type=int, default=20)
    args = ap.parse_args()

    trip = simulate(standard_trip_spec(seed=args.seed, noise_sigma_m=args.sigma))
    series = series_from_trip(trip)
    cfg = LocregConfig(bandwidth_points=args.bandwidth_points)
    card = build_scorecard(series, trip.avl_events, cfg)
    print(f"seed {args.seed}: {series.n} points over {series.t[-1]:.0f} s, {series.d[-1]:.0f} m, "
          f"{len(trip.avl_events)} door events")
    print(f"{'algorithm':<14}{'MON':>5}{'CUB':>5}{'DIFF':>6}{'ERR':>5}{'RMSE m':>9}"
          f"{'AVL0':>7}{'AVL3':>7}{'AVL5':>7}{'bad acc%':>10}{'best':>6}")
    for row in card.rows:
        rmse = position_rmse(trip, series, fit(series, row.algorithm, cfg))
        avl = row.avl_pct or {}
        flags = "".join(f"{('Y' if f else 'N'):>{w}}" for f, w in
                        ((row.mon, 5), (row.cub, 5), (row.diff, 6), (row.err, 5)))
        print(f"{row.algorithm.slug:<14}{flags}{rmse:9.2f}{avl.get(0.0, 0):7.1f}{avl.get(3.0, 0):7.1f}"
              f"{avl.get(5.0, 0):7.1f}{row.acc_unreasonable_pct:10.2f}{'*' if row.best else '':>6}")


if __name__ == "__main__":
    main()
