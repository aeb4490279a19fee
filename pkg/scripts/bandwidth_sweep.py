"""LOCREG-PCHIP position error and door capture as the neighbour count k varies.

Shows the bias/variance trade-off behind the recovery figures: small k
follows stops closely but passes more noise, large k averages noise away
but rounds off every stop.

    python3 scripts/bandwidth_sweep.py [--seeds 2020 2021 ...] [--k 6 8 10 15 20 30]
"""

import argparse

import numpy as np

from bustraj.simulator import position_rmse, simulate, standard_trip_spec
from bustraj.smoothing import Algorithm, LocregConfig, fit
from bustraj.validation import validate_speed

from _common import series_from_trip


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(2020, 2025)))
    ap.add_argument("--k", type=int, nargs="+", default=[6, 8, 10, 15, 20, 30])
    ap.add_argument("--sigma", type=float, default=5.0)
    args = ap.parse_args()

    trips = []
    for seed in args.seeds:
        trip = simulate(standard_trip_spec(seed=seed, noise_sigma_m=args.sigma))
        trips.append((trip, series_from_trip(trip)))

    print(f"{'k':>4}{'RMSE mean':>11}{'RMSE max':>10}{'AVL5 mean':>11}{'AVL5 min':>10}")
    for k in args.k:
        cfg = LocregConfig(bandwidth_points=k)
        rmse, cap = [], []
        for trip, series in trips:
            traj = fit(series, Algorithm.LOCREG_PCHIP, cfg)
            rmse.append(position_rmse(trip, series, traj))
            cap.append(validate_speed(traj, trip.avl_events, (5.0,)).at(5.0))
        print(f"{k:>4}{np.mean(rmse):11.2f}{np.max(rmse):10.2f}{np.mean(cap):11.1f}{np.min(cap):10.1f}")


if __name__ == "__main__":
    main()
