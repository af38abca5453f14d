"""Monte Carlo and exact acceptance rate of the 3-bit symbol-balance rule.

Fair Bernoulli(0.5) streams of 1000 bits are cut into 333 non-overlapping
3-bit symbols; a stream is accepted when all 8 symbol counts lie within 10%
of 333/8. Uses numpy's PCG64 generator only, independent of the simulator.

    python scripts/identification_oracle.py [--streams 10000] [--out tests/oracles/identification_oracle.json]
"""

import argparse
import json
from math import comb

import numpy as np

SAMPLES, TOL = 1000, 0.10


def monte_carlo(streams, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(streams, SAMPLES), dtype=np.int64)
    m = SAMPLES // 3
    sym = bits[:, :3 * m].reshape(streams, m, 3) @ np.array([4, 2, 1])
    counts = np.stack([(sym == s).sum(axis=1) for s in range(8)], axis=1)
    exp = m / 8
    ok = np.all(np.abs(counts - exp) <= TOL * exp, axis=1)
    return float(ok.mean())


def exact():
    """P(all 8 multinomial(333, 1/8) counts inside the band), by convolution."""
    m = SAMPLES // 3
    exp = m / 8
    allowed = [k for k in range(m + 1) if abs(k - exp) <= TOL * exp]
    # sum over count vectors of m! / prod(k_i!) * 8^-m
    poly = {0: 1}
    for _ in range(8):
        nxt = {}
        for tot, w in poly.items():
            for k in allowed:
                if tot + k <= m:
                    nxt[tot + k] = nxt.get(tot + k, 0) + w * comb(m - tot, k)
        poly = nxt
    return poly.get(m, 0) / 8 ** m


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--streams", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--out")
    a = ap.parse_args()
    res = {"samples": SAMPLES, "tolerance": TOL, "streams": a.streams, "seed": a.seed,
           "mc_accept_rate": monte_carlo(a.streams, a.seed), "exact_accept_rate": exact()}
    print(json.dumps(res, indent=2))
    if a.out:
        with open(a.out, "w") as fh:
            json.dump(res, fh, indent=2)


if __name__ == "__main__":
    main()
