"""Throughput against bank count over several seeded devices.

    python scripts/throughput_sweep.py --devices 5 --out throughput_curve.csv
"""

import argparse
from dataclasses import replace

from drangesim import bench, calibration
from drangesim.config import RunConfig
from drangesim.device import generate_device
from drangesim.drange import identify_rng_cells


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--devices", type=int, default=5)
    ap.add_argument("--out")
    a = ap.parse_args()
    base = RunConfig().device
    rates = []
    for seed in range(a.devices):
        cfg = replace(base, seed=seed)
        cat = identify_rng_cells(generate_device(cfg))
        rates.append(bench.bank_data_rates(cat, cfg))
        print(f"seed {seed}: bits/iteration per bank {rates[-1]}")
    rep = bench.throughput_report(rates)
    print("bank_count min q1 median q3 max (Mb/s, one channel, scheduled loop)")
    for row in rep.quantiles():
        print(row[0], " ".join(f"{v:8.2f}" for v in row[1:]))
    print(f"closed form with calibrated runtime {calibration.LOOP_RUNTIME_NS:.3f} ns: "
          f"max {bench.calibrated_throughput():.1f} Mb/s per channel, "
          f"{bench.calibrated_throughput(channels=4):.1f} Mb/s on 4 channels")
    if a.out:
        rep.to_csv(a.out)


if __name__ == "__main__":
    main()
