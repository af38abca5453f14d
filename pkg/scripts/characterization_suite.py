"""Run the four characterization experiments on one seeded device and summarize.

    python scripts/characterization_suite.py --seed 0
"""

import argparse

import numpy as np

from drangesim.characterize import (coverage_by_pattern, failing_columns_per_subarray,
                                    row_bucket_counts, run_activation_failure_test,
                                    temperature_sweep, time_stability)
from drangesim.device import DeviceConfig, generate_device


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=100)
    a = ap.parse_args()
    dev = generate_device(DeviceConfig(seed=a.seed))

    m = run_activation_failure_test(dev, iterations=a.iterations)
    cols = failing_columns_per_subarray(m)
    _, slopes = row_bucket_counts(m)
    print("spatial: failing bitlines per subarray", {k: len(v) for k, v in cols.items()})
    print("spatial: row-bucket slopes", {k: round(v, 2) for k, v in slopes.items()})
    safe = run_activation_failure_test(dev, trcd=18.0, iterations=a.iterations)
    print("spatial: failures at 18 ns", int(safe.failures.sum()))

    cov = coverage_by_pattern(dev, iterations=a.iterations)
    best = max(cov.coverage, key=cov.coverage.get)
    print(f"coverage: union {cov.union}, best single pattern {best} at {cov.coverage[best]:.3f}")
    print("coverage: walk families (mean, min, max)", cov.families)

    ts = temperature_sweep(dev, iterations=a.iterations)
    print(f"temperature: {len(ts.points)} points, fraction below x=y {ts.fraction_below():.4f}")
    for lo, mx, my, n in ts.bucket_medians():
        print(f"  x in [{lo:.1f}, {lo + 0.1:.1f}): median F(T)={mx:.3f} F(T+5)={my:.3f} n={n}")

    st = time_stability(dev, 25, a.iterations)
    print(f"stability: {st.cells.size} cells, max std {np.max(st.std):.4f}, "
          f"violations of 2-sigma bound {st.violations()}")


if __name__ == "__main__":
    main()
