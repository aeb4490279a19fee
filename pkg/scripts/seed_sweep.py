"""Per-algorithm RMSE, door capture at 5 mph and implausible-acceleration share across seeds.

    python3 scripts/seed_sweep.py [--first 2020] [--count 10]
"""

import argparse

from bustraj.simulator import position_rmse, simulate, standard_trip_spec
from bustraj.smoothing import Algorithm, fit
from bustraj.validation import validate_accel, validate_speed

from _common import series_from_trip


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--first", type=int, default=2020)
    ap.add_argument("--count", type=int, default=10)
    args = ap.parse_args()

    print("seed   n  " + "  ".join(f"{a.slug:>22}" for a in Algorithm))
    print("          " + "  ".join(f"{'rmse  avl5  badacc':>22}" for _ in Algorithm))
    for seed in range(args.first, args.first + args.count):
        trip = simulate(standard_trip_spec(seed=seed))
        series = series_from_trip(trip)
        cells = []
        for alg in Algorithm:
            traj = fit(series, alg)
            cells.append(f"{position_rmse(trip, series, traj):6.2f} "
                         f"{validate_speed(traj, trip.avl_events, (5.0,)).at(5.0):5.1f} "
                         f"{validate_accel(traj).unreasonable_pct:6.2f}")
        print(f"{seed} {series.n:4d}  " + "  ".join(f"{c:>22}" for c in cells))


if __name__ == "__main__":
    main()
