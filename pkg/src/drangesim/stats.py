"""Statistical randomness tests.

Nine tests of the NIST SP 800-22 battery, the binary Shannon entropy, and
the passing-proportion interval. Bits are numpy arrays (or sequences) of 0/1.
Every test returns a p-value in [0, 1]; tests producing two p-values (serial,
cumulative sums) report the smaller one through :func:`run_test`.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

from .errors import InputError, LengthError

DEFAULT_ALPHA = 0.0001
BATTERY_MIN_BITS = 1_000_000


def as_bits(bits):
    a = np.asarray(bits)
    if a.dtype.kind in "US":
        a = np.frombuffer("".join(a.ravel().tolist()).encode(), dtype=np.uint8) - ord("0")
    a = a.astype(np.int8).ravel()
    if a.size and (a.min() < 0 or a.max() > 1):
        raise InputError("bits must be 0/1")
    return a


def bits_from_string(s):
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def _need(name, n, minimum):
    if n < minimum:
        raise LengthError(name, minimum, n)


def _clamp(p):
    p = float(p)
    if not math.isfinite(p):
        return 0.0
    return min(1.0, max(0.0, p))


# -- entropy and proportions -------------------------------------------------------

def shannon_entropy(bits):
    """Binary Shannon entropy of the fraction of ones."""
    b = as_bits(bits)
    if b.size == 0:
        raise InputError("entropy of an empty stream")
    p = b.mean()
    return float(sum(-q * math.log2(q) for q in (p, 1 - p) if q > 0))


def passing_proportion_bounds(alpha, k):
    """(1 - alpha) +- 3 sqrt(alpha (1 - alpha) / k), clamped to [0, 1]."""
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    if k < 1:
        raise InputError("k must be >= 1")
    c = 1 - alpha
    d = 3 * math.sqrt(alpha * (1 - alpha) / k)
    return max(0.0, c - d), min(1.0, c + d)


# -- the tests ------------------------------------------------------------------------

def monobit(bits):
    b = as_bits(bits)
    n = b.size
    _need("monobit", n, 2)
    s = abs(2 * int(b.sum()) - n) / math.sqrt(n)
    return _clamp(erfc(s / math.sqrt(2)))


def frequency_within_block(bits, M=128):
    b = as_bits(bits)
    n = b.size
    _need("frequency_within_block", n, M)
    N = n // M
    pi = b[:N * M].reshape(N, M).mean(axis=1)
    chi2 = 4 * M * np.sum((pi - 0.5) ** 2)
    return _clamp(gammaincc(N / 2, chi2 / 2))


def runs(bits):
    b = as_bits(bits)
    n = b.size
    _need("runs", n, 2)
    pi = b.mean()
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return 0.0
    v = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v - 2 * n * pi * (1 - pi))
    return _clamp(erfc(num / (2 * math.sqrt(2 * n) * pi * (1 - pi))))


_LONGEST = (
    # (min n, M, class edges (lowest, highest), probabilities)
    (750000, 10000, (10, 16), (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 9), (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 4), (0.2148, 0.3672, 0.2305, 0.1875)),
)


def _longest_runs(blocks):
    """Length of the longest run of ones in each row."""
    N, M = blocks.shape
    pad = np.zeros((N, M + 2), dtype=np.int8)
    pad[:, 1:-1] = blocks
    d = np.diff(pad, axis=1)
    r_s, c_s = np.nonzero(d == 1)
    _, c_e = np.nonzero(d == -1)
    out = np.zeros(N, dtype=np.int64)
    if r_s.size:
        np.maximum.at(out, r_s, c_e - c_s)
    return out


def longest_run_ones_in_a_block(bits):
    b = as_bits(bits)
    n = b.size
    _need("longest_run_ones_in_a_block", n, 128)
    for min_n, M, (lo, hi), probs in _LONGEST:
        if n >= min_n:
            break
    N = n // M
    longest = _longest_runs(b[:N * M].reshape(N, M))
    v = np.bincount(np.clip(longest, lo, hi) - lo, minlength=hi - lo + 1)
    probs = np.asarray(probs)
    chi2 = np.sum((v - N * probs) ** 2 / (N * probs))
    return _clamp(gammaincc((len(probs) - 1) / 2, chi2 / 2))


def _gf2_ranks(mats, cols):
    """Rank over GF(2) of each matrix; rows are given as uint64 bitmasks."""
    m = mats.copy()
    n_mat, rows = m.shape
    rank = np.zeros(n_mat, dtype=np.int64)
    ar = np.arange(n_mat)
    for c in range(cols):
        bit = np.uint64(1) << np.uint64(cols - 1 - c)
        has = (m & bit) != 0
        # candidate pivot rows are those at or below the current rank
        eligible = has & (np.arange(rows)[None, :] >= rank[:, None])
        ok = eligible.any(axis=1)
        piv = np.argmax(eligible, axis=1)
        sel = ar[ok]
        if sel.size == 0:
            continue
        prow = m[sel, piv[ok]]
        # swap pivot into position rank
        tgt = rank[ok]
        m[sel, piv[ok]] = m[sel, tgt]
        m[sel, tgt] = prow
        sub = m[sel]
        elim = ((sub & bit) != 0) & (np.arange(rows)[None, :] != tgt[:, None])
        sub ^= np.where(elim, prow[:, None], np.uint64(0))
        m[sel] = sub
        rank[ok] += 1
    return rank


def _rank_prob(r, M, Q):
    if r == 0:
        return 2.0 ** (-M * Q)
    prod = 1.0
    for i in range(r):
        prod *= (1 - 2.0 ** (i - Q)) * (1 - 2.0 ** (i - M)) / (1 - 2.0 ** (i - r))
    return 2.0 ** (r * (Q + M - r) - M * Q) * prod


def binary_matrix_rank(bits, M=32, Q=32, probs=None, min_matrices=38):
    """Rank test; ``probs`` overrides the (full, full-1, lower) rank probabilities.

    By default the probabilities are computed exactly for ``M`` x ``Q``.
    ``min_matrices`` guards the chi-square approximation; lower it only for
    worked examples.
    """
    b = as_bits(bits)
    n = b.size
    if Q > 64:
        raise InputError("Q must be <= 64")
    _need("binary_matrix_rank", n, max(1, min_matrices) * M * Q)
    N = n // (M * Q)
    rows = b[:N * M * Q].reshape(N, M, Q).astype(np.uint64)
    weights = np.uint64(1) << np.arange(Q - 1, -1, -1, dtype=np.uint64)
    masks = (rows * weights).sum(axis=2, dtype=np.uint64)
    ranks = _gf2_ranks(masks, Q)
    full = min(M, Q)
    f_m = int(np.sum(ranks == full))
    f_m1 = int(np.sum(ranks == full - 1))
    rest = N - f_m - f_m1
    if probs is None:
        p_full, p_m1 = _rank_prob(full, M, Q), _rank_prob(full - 1, M, Q)
        p_rest = 1 - p_full - p_m1
    else:
        p_full, p_m1, p_rest = probs
    chi2 = ((f_m - p_full * N) ** 2 / (p_full * N) + (f_m1 - p_m1 * N) ** 2 / (p_m1 * N)
            + (rest - p_rest * N) ** 2 / (p_rest * N))
    return _clamp(math.exp(-chi2 / 2))


def dft(bits):
    b = as_bits(bits)
    n = b.size
    _need("dft", n, 2)
    x = 2.0 * b - 1.0
    mod = np.abs(np.fft.fft(x))[: n // 2]
    t = math.sqrt(math.log(1 / 0.05) * n)
    n0 = 0.95 * n / 2
    n1 = int(np.count_nonzero(mod < t))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4)
    return _clamp(erfc(abs(d) / math.sqrt(2)))


def _pattern_counts(b, m):
    """Counts of overlapping m-bit patterns with wrap-around."""
    if m == 0:
        return np.array([b.size])
    n = b.size
    ext = np.concatenate([b, b[: m - 1]]).astype(np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for k in range(m):
        codes = (codes << 1) | ext[k:k + n]
    return np.bincount(codes, minlength=1 << m)


def _psi2(b, m):
    if m <= 0:
        return 0.0
    n = b.size
    v = _pattern_counts(b, m).astype(np.float64)
    return (2.0 ** m / n) * float(np.sum(v * v)) - n


def serial_pvalues(bits, m=16):
    b = as_bits(bits)
    n = b.size
    if m < 2:
        raise InputError("serial block length must be >= 2")
    _need("serial", n, 2 ** m)
    p0, p1, p2 = _psi2(b, m), _psi2(b, m - 1), _psi2(b, m - 2)
    d1 = p0 - p1
    d2 = p0 - 2 * p1 + p2
    return _clamp(gammaincc(2.0 ** (m - 2), d1 / 2)), _clamp(gammaincc(2.0 ** (m - 3), d2 / 2))


def serial(bits, m=16):
    return min(serial_pvalues(bits, m))


def approximate_entropy(bits, m=10):
    b = as_bits(bits)
    n = b.size
    if m < 1:
        raise InputError("approximate entropy block length must be >= 1")
    _need("approximate_entropy", n, 2 ** m)

    def phi(k):
        c = _pattern_counts(b, k).astype(np.float64) / n
        c = c[c > 0]
        return float(np.sum(c * np.log(c)))

    apen = phi(m) - phi(m + 1)
    chi2 = 2 * n * (math.log(2) - apen)
    return _clamp(gammaincc(2.0 ** (m - 1), chi2 / 2))


def _cusum_p(z, n):
    if z == 0:
        return 1.0
    sq = math.sqrt(n)
    k1 = np.arange(int((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1)
    k2 = np.arange(int((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1)
    s1 = np.sum(norm.cdf((4 * k1 + 1) * z / sq) - norm.cdf((4 * k1 - 1) * z / sq))
    s2 = np.sum(norm.cdf((4 * k2 + 3) * z / sq) - norm.cdf((4 * k2 + 1) * z / sq))
    return _clamp(1 - s1 + s2)


def cumulative_sums_pvalues(bits):
    b = as_bits(bits)
    n = b.size
    _need("cumulative_sums", n, 2)
    x = 2 * b.astype(np.int64) - 1
    fwd = int(np.max(np.abs(np.cumsum(x))))
    bwd = int(np.max(np.abs(np.cumsum(x[::-1]))))
    return _cusum_p(fwd, n), _cusum_p(bwd, n)


def cumulative_sums(bits):
    return min(cumulative_sums_pvalues(bits))


TESTS = {
    "monobit": monobit,
    "frequency_within_block": frequency_within_block,
    "runs": runs,
    "longest_run_ones_in_a_block": longest_run_ones_in_a_block,
    "binary_matrix_rank": binary_matrix_rank,
    "dft": dft,
    "serial": serial,
    "approximate_entropy": approximate_entropy,
    "cumulative_sums": cumulative_sums,
}

# parameters used by the battery; recorded in every report
DEFAULT_PARAMS = {
    "frequency_within_block": {"M": 128},
    "binary_matrix_rank": {"M": 32, "Q": 32},
    "serial": {"m": 16},
    "approximate_entropy": {"m": 10},
}


def run_test(name, bits, alpha=DEFAULT_ALPHA, **params):
    """(p_value, passed) for one named test."""
    fn = TESTS.get(name)
    if fn is None:
        raise InputError(f"unknown test {name!r}; choose from {', '.join(TESTS)}")
    p = fn(bits, **params)
    return p, p >= alpha


# -- battery and reports --------------------------------------------------------------

@dataclass
class TestResult:
    name: str
    p_value: float
    passed: bool
    params: dict = field(default_factory=dict)


@dataclass
class TestReport:
    results: list
    alpha: float
    n_bits: int
    entropy: float = None

    __test__ = False  # not a pytest class

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def by_name(self):
        return {r.name: r for r in self.results}

    def to_dict(self):
        return {"alpha": self.alpha, "n_bits": self.n_bits, "entropy": self.entropy,
                "passed": self.passed,
                "results": [r.__dict__ for r in self.results]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self):
        lines = [f"{'test':<30} {'p-value':>10}  result", "-" * 49]
        for r in self.results:
            lines.append(f"{r.name:<30} {r.p_value:>10.6f}  {'PASS' if r.passed else 'FAIL'}")
        lines.append("-" * 49)
        if self.entropy is not None:
            lines.append(f"{'shannon_entropy':<30} {self.entropy:>10.6f}")
        lines.append(f"bits={self.n_bits} alpha={self.alpha} overall={'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


TestResult.__test__ = False


def run_battery(bits, alpha=DEFAULT_ALPHA, min_bits=BATTERY_MIN_BITS):
    """Run all nine tests with the default parameters."""
    b = as_bits(bits)
    _need("battery", b.size, min_bits)
    results = []
    for name in TESTS:
        params = DEFAULT_PARAMS.get(name, {})
        p, ok = run_test(name, b, alpha, **params)
        results.append(TestResult(name, p, bool(ok), dict(params)))
    return TestReport(results, alpha, int(b.size), shannon_entropy(b))


def aggregate(reports, alpha=None):
    """Mean p-value and passing proportion per test over several reports."""
    if not reports:
        raise InputError("no reports to aggregate")
    alpha = alpha or reports[0].alpha
    lo, hi = passing_proportion_bounds(alpha, len(reports))
    out = {}
    for name in TESTS:
        rs = [r.by_name()[name] for r in reports]
        prop = sum(x.passed for x in rs) / len(rs)
        out[name] = {"mean_p": float(np.mean([x.p_value for x in rs])), "proportion": prop,
                     "proportion_ok": lo <= prop <= hi}
    return {"k": len(reports), "bounds": [lo, hi], "tests": out}


def load_bits(path):
    """Read a packed-bit file (count from its ``.json`` sidecar) or an ASCII 0/1 file."""
    with open(path, "rb") as fh:
        data = fh.read()
    side = str(path) + ".json"
    if os.path.exists(side):
        with open(side) as fh:
            count = int(json.load(fh)["bit_count"])
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
        if bits.size < count:
            raise InputError(f"{path}: sidecar claims {count} bits, file holds {bits.size}")
        return bits[:count]
    stripped = bytes(c for c in data if c not in b" \t\r\n")
    if stripped and set(stripped) <= {ord("0"), ord("1")}:
        return np.frombuffer(stripped, dtype=np.uint8) - ord("0")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
