"""Reference p-values for short example sequences, in plain Python.

Uses only the ``math`` module (loops, an explicit DFT, complementary
incomplete gamma by series/continued fraction) so it shares no code with the
vectorized implementations it checks.

    python scripts/nist_kat_oracle.py --out tests/oracles/nist_kat.json
"""

import argparse
import cmath
import json
import math


def igamc(a, x):
    """Regularized upper incomplete gamma Q(a, x)."""
    if x <= 0:
        return 1.0
    if x < a + 1:
        term = s = 1.0 / a
        n = a
        while abs(term) > 1e-17 * abs(s):
            n += 1
            term *= x / n
            s += term
        return 1.0 - s * math.exp(-x + a * math.log(x) - math.lgamma(a))
    # Lentz continued fraction
    b = x + 1 - a
    c = 1e300
    d = 1 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = 1e-300 if abs(d) < 1e-300 else d
        c = b + an / c
        c = 1e-300 if abs(c) < 1e-300 else c
        d = 1 / d
        dl = d * c
        h *= dl
        if abs(dl - 1) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2))


def bits(s):
    return [int(c) for c in s]


def monobit(e):
    n = len(e)
    s = abs(sum(2 * x - 1 for x in e)) / math.sqrt(n)
    return math.erfc(s / math.sqrt(2))


def block_frequency(e, M):
    N = len(e) // M
    chi = 4 * M * sum((sum(e[i * M:(i + 1) * M]) / M - 0.5) ** 2 for i in range(N))
    return igamc(N / 2, chi / 2)


def runs(e):
    n = len(e)
    pi = sum(e) / n
    v = 1 + sum(1 for k in range(n - 1) if e[k] != e[k + 1])
    return math.erfc(abs(v - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))


def longest_run_m8(e):
    pis = [0.2148, 0.3672, 0.2305, 0.1875]
    N = len(e) // 8
    v = [0, 0, 0, 0]
    for i in range(N):
        best = cur = 0
        for x in e[i * 8:(i + 1) * 8]:
            cur = cur + 1 if x else 0
            best = max(best, cur)
        v[min(max(best, 1), 4) - 1] += 1
    chi = sum((v[i] - N * pis[i]) ** 2 / (N * pis[i]) for i in range(4))
    return igamc(1.5, chi / 2)


def rank_gf2(rows):
    rows = [r[:] for r in rows]
    r = 0
    for c in range(len(rows[0])):
        piv = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                rows[i] = [a ^ b for a, b in zip(rows[i], rows[r])]
        r += 1
    return r


def matrix_rank(e, M, Q, probs):
    N = len(e) // (M * Q)
    f = [0, 0, 0]
    for k in range(N):
        blk = e[k * M * Q:(k + 1) * M * Q]
        rk = rank_gf2([blk[i * Q:(i + 1) * Q] for i in range(M)])
        f[0 if rk == M else 1 if rk == M - 1 else 2] += 1
    chi = sum((f[i] - probs[i] * N) ** 2 / (probs[i] * N) for i in range(3))
    return math.exp(-chi / 2)


def dft(e):
    n = len(e)
    x = [2 * b - 1 for b in e]
    mods = [abs(sum(x[t] * cmath.exp(-2j * math.pi * k * t / n) for t in range(n))) for k in range(n // 2)]
    T = math.sqrt(math.log(1 / 0.05) * n)
    n1 = sum(1 for m in mods if m < T)
    d = (n1 - 0.95 * n / 2) / math.sqrt(n * 0.95 * 0.05 / 4)
    return math.erfc(abs(d) / math.sqrt(2))


def counts(e, m):
    n = len(e)
    ext = e + e[:m - 1]
    c = {}
    for i in range(n):
        key = tuple(ext[i:i + m])
        c[key] = c.get(key, 0) + 1
    return c


def psi2(e, m):
    if m <= 0:
        return 0.0
    n = len(e)
    return 2 ** m / n * sum(v * v for v in counts(e, m).values()) - n


def serial(e, m):
    d1 = psi2(e, m) - psi2(e, m - 1)
    d2 = psi2(e, m) - 2 * psi2(e, m - 1) + psi2(e, m - 2)
    return igamc(2 ** (m - 2), d1 / 2), igamc(2 ** (m - 3), d2 / 2)


def apen(e, m):
    n = len(e)

    def ph(k):
        return sum(v / n * math.log(v / n) for v in counts(e, k).values())

    chi = 2 * n * (math.log(2) - (ph(m) - ph(m + 1)))
    return igamc(2 ** (m - 1), chi / 2)


def cusum(e, reverse=False):
    x = [2 * b - 1 for b in (e[::-1] if reverse else e)]
    n = len(x)
    s = z = 0
    for v in x:
        s += v
        z = max(z, abs(s))
    sq = math.sqrt(n)
    t1 = sum(phi((4 * k + 1) * z / sq) - phi((4 * k - 1) * z / sq)
             for k in range(int((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1))
    t2 = sum(phi((4 * k + 3) * z / sq) - phi((4 * k + 1) * z / sq)
             for k in range(int((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1))
    return 1 - t1 + t2


LONG = ("11001100000101010110110001001100111000000000001001001101010100010001"
        "001111010110100000001101011111001100111001101101100010110010")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out")
    a = ap.parse_args()
    res = {
        "monobit/1011010101": monobit(bits("1011010101")),
        "frequency_within_block/0110011010/M=3": block_frequency(bits("0110011010"), 3),
        "runs/1001101011": runs(bits("1001101011")),
        "longest_run_ones_in_a_block/128bit": longest_run_m8(bits(LONG)),
        "binary_matrix_rank/01011001001010101101/M=Q=3/rounded": matrix_rank(
            bits("01011001001010101101"), 3, 3, (0.2888, 0.5776, 0.1336)),
        "dft/1001010011": dft(bits("1001010011")),
        "serial/0011011101/m=3": list(serial(bits("0011011101"), 3)),
        "approximate_entropy/0100110101/m=3": apen(bits("0100110101"), 3),
        "cumulative_sums/1011010111/forward": cusum(bits("1011010111")),
        "cumulative_sums/1011010111/backward": cusum(bits("1011010111"), True),
    }
    print(json.dumps(res, indent=2))
    if a.out:
        with open(a.out, "w") as fh:
            json.dump(res, fh, indent=2)


if __name__ == "__main__":
    main()
