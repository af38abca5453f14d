"""Activation-failure characterization experiments.

:func:`run_activation_failure_test` runs the profiling loop: write the data
pattern into the region, lower tRCD, then for every column and every row
issue ACT, PRE (refreshing the row), ACT, READ, PRE. Columns are the outer
loop, so every READ hits a closed row and is a first access.

The command sequence is the same in every iteration, so it is scheduled once
per region and its first-access flags gate the sampling of all iterations.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .device import Condition
from .errors import AddressError, ConfigError, InputError
from .patterns import SOLID0, all_patterns
from .streams import SampleStream
from .timing import ACT, NOMINAL, PRE, READ, REDUCED, WRITE, Request, TimingParams, schedule


@dataclass(frozen=True)
class Region:
    """Rectangle of one bank: subarrays x rows (subarray-local) x columns.

    ``None`` selects the whole extent.
    """

    channel: int = 0
    bank: int = 0
    subarrays: tuple = None
    rows: tuple = None
    columns: tuple = None

    def resolve(self, config):
        def full(v, n):
            return tuple(range(n)) if v is None else tuple(int(x) for x in v)
        r = Region(self.channel, self.bank, full(self.subarrays, config.subarrays_per_bank),
                   full(self.rows, config.rows_per_subarray), full(self.columns, config.columns_per_row))
        if not (0 <= r.channel < config.channels and 0 <= r.bank < config.banks_per_channel):
            raise AddressError(f"region bank ({r.channel}, {r.bank}) outside device")
        for name, vals, n in (("subarray", r.subarrays, config.subarrays_per_bank),
                              ("row", r.rows, config.rows_per_subarray),
                              ("column", r.columns, config.columns_per_row)):
            if any(not 0 <= v < n for v in vals):
                raise AddressError(f"region {name} outside device (limit {n})")
        return r

    def global_rows(self, config):
        return [s * config.rows_per_subarray + r for s in self.subarrays for r in self.rows]

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


# -- profiling command sequence ---------------------------------------------

def alg1_requests(region, config):
    """Profiling requests for one iteration (after the pattern write)."""
    reqs = []
    b = region.bank
    rows = region.global_rows(config)
    for col in region.columns:
        for row in rows:
            reqs += [Request(ACT, b, row), Request(PRE, b),
                     Request(ACT, b, row), Request(READ, b, row, col), Request(PRE, b)]
    return reqs


def pattern_write_requests(region, config):
    reqs = []
    b = region.bank
    for row in region.global_rows(config):
        reqs.append(Request(ACT, b, row))
        reqs += [Request(WRITE, b, row, col) for col in region.columns]
        reqs.append(Request(PRE, b))
    return reqs


_TRACE_CACHE = {}


def profiling_traces(region, config, timing, trcd):
    """(write trace, reduced-tRCD read trace) for ``region``; cached."""
    key = (region, config.subarrays_per_bank, config.rows_per_subarray, timing, trcd)
    hit = _TRACE_CACHE.get(key)
    if hit is None:
        write = schedule(pattern_write_requests(region, config), timing, NOMINAL)
        read = schedule(alg1_requests(region, config), timing.with_(trcd_reduced=trcd), REDUCED)
        if len(_TRACE_CACHE) > 8:
            _TRACE_CACHE.clear()
        hit = _TRACE_CACHE[key] = (write, read)
    return hit


# -- results ------------------------------------------------------------------

@dataclass
class FprobMap:
    """Per-cell failure counts from one characterization run.

    Profiled cells are the failure-capable cells of the region; every other
    cell in the region reads back correctly by construction.
    """

    device: object
    condition: Condition
    iterations: int
    region: Region
    cells: np.ndarray        # weak indices
    failures: np.ndarray
    trials: np.ndarray
    reads: int = 0
    first_access_reads: int = 0

    @property
    def fprob(self):
        return self.failures / np.maximum(self.trials, 1)

    def failing(self):
        return self.cells[self.failures > 0]

    def entries(self):
        for w, f, t in zip(self.cells, self.failures, self.trials):
            yield self.device.address(int(w)), (int(f), int(t))

    def to_csv(self, path):
        ch, b, s, r, _, j = self.device.decompose(self.cells)
        ws = self.device.config.word_size
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["channel", "bank", "subarray", "row", "col", "bit", "failures", "trials"])
            for row in zip(ch, b, s, r, j // ws, j % ws, self.failures, self.trials):
                wr.writerow([int(x) for x in row])


def run_activation_failure_test(device, region=None, pattern=SOLID0, trcd=10.0, temperature=55.0,
                                iterations=100, stream=None, timing=None):
    """Profile ``region`` ``iterations`` times under one condition."""
    if iterations < 1:
        raise InputError("iterations must be >= 1")
    config = device.config
    cond = Condition(float(trcd), float(temperature), pattern).validate(config.model)
    region = (region or Region()).resolve(config)
    timing = timing or TimingParams()
    stream = stream or SampleStream(device)
    _, trace = profiling_traces(region, config, timing, float(trcd))

    reads = trace.reads()
    first = {(c.row, c.col) for c in reads if c.first_access}
    cells = device.region_cells(region.channel, region.bank, region.subarrays, region.rows, region.columns)
    if cells.size:
        ws = config.word_size
        rows = device.global_rows(cells)
        cols = device.decompose(cells)[5] // ws
        hit = np.fromiter(((int(r), int(c)) in first for r, c in zip(rows, cols)), bool, cells.size)
    else:
        hit = np.zeros(0, bool)
    failures = np.zeros(cells.size, dtype=np.int64)
    if hit.any():
        # chunk to bound memory for large regions
        idx = np.nonzero(hit)[0]
        for lo in range(0, idx.size, 1 << 15):
            part = idx[lo:lo + (1 << 15)]
            failures[part] = device.sample_flips(cells[part], cond, stream, iterations).sum(axis=1)
    trials = np.full(cells.size, iterations, dtype=np.int64)
    return FprobMap(device, cond, iterations, region, cells, failures, trials,
                    reads=len(reads), first_access_reads=len(first))


# -- spatial -------------------------------------------------------------------

def spatial_bitmap(fprob_map, rows=None, cols=None):
    """0/1 matrix (region rows x bitlines) marking cells that failed at least once.

    Rows are indexed from the region's first global row and columns from the
    first bitline of its first column; the matrix is clipped to
    ``rows`` x ``cols``.
    """
    dev, reg = fprob_map.device, fprob_map.region
    c = dev.config
    grows = reg.global_rows(c)
    rows = len(grows) if rows is None else rows
    cols = len(reg.columns) * c.word_size if cols is None else cols
    out = np.zeros((rows, cols), dtype=np.uint8)
    w = fprob_map.failing()
    if w.size == 0:
        return out
    row_pos = {g: i for i, g in enumerate(grows)}
    r = np.array([row_pos[int(g)] for g in dev.global_rows(w)])
    j = dev.decompose(w)[5] - reg.columns[0] * c.word_size
    keep = (r < rows) & (j >= 0) & (j < cols)
    out[r[keep], j[keep]] = 1
    return out


def write_bitmap(matrix, path):
    """Row-major export: ``.pgm`` (plain P2, failures white) or CSV."""
    if str(path).endswith(".pgm"):
        with open(path, "w") as fh:
            fh.write(f"P2\n{matrix.shape[1]} {matrix.shape[0]}\n1\n")
            for row in matrix:
                fh.write(" ".join(map(str, row.tolist())) + "\n")
    else:
        np.savetxt(path, matrix, fmt="%d", delimiter=",")


def failing_columns_per_subarray(fprob_map):
    """{subarray: sorted failing (column, bit) positions}."""
    dev = fprob_map.device
    w = fprob_map.failing()
    _, _, s, _, _, j = dev.decompose(w)
    out = {int(x): set() for x in fprob_map.region.subarrays}
    for si, ji in zip(s, j):
        out[int(si)].add(int(ji))
    return {k: sorted(v) for k, v in out.items()}


def row_bucket_counts(fprob_map, buckets=8):
    """{subarray: failing-cell count per row bucket} plus per-subarray slopes."""
    dev = fprob_map.device
    n_rows = dev.config.rows_per_subarray
    w = fprob_map.failing()
    _, _, s, r, _, _ = dev.decompose(w)
    counts, slopes = {}, {}
    for sub in fprob_map.region.subarrays:
        rr = r[s == sub]
        cnt = np.bincount(rr * buckets // n_rows, minlength=buckets)
        counts[int(sub)] = cnt.tolist()
        slopes[int(sub)] = float(np.polyfit(np.arange(buckets), cnt, 1)[0])
    return counts, slopes


# -- data patterns --------------------------------------------------------------

@dataclass
class CoverageReport:
    iterations: int
    fails: dict                  # pattern name -> failing-cell count
    coverage: dict               # pattern name -> ratio vs union
    union: int
    failing_sets: dict = field(repr=False, default_factory=dict)
    families: dict = field(default_factory=dict)  # WALK1/WALK0 -> (mean, min, max)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["pattern", "fails", "coverage", "coverage_min", "coverage_max"])
            for name in self.fails:
                wr.writerow([name, self.fails[name], f"{self.coverage[name]:.6f}", "", ""])
            for fam, (mean, lo, hi) in self.families.items():
                fails = np.mean([v for k, v in self.fails.items() if k.startswith(fam + "_")])
                wr.writerow([fam + "_AGG", f"{fails:.2f}", f"{mean:.6f}", f"{lo:.6f}", f"{hi:.6f}"])
            wr.writerow(["UNION", self.union, "1.000000", "", ""])


def coverage_by_pattern(device, patterns=None, trcd=10.0, temperature=55.0, iterations=100,
                        region=None, stream_start=0, timing=None):
    """Failing cells per pattern and their share of the union over patterns.

    Every pattern run starts from the same draw counters, so raising
    ``iterations`` only ever adds failing cells.
    """
    patterns = list(patterns or all_patterns())
    sets = {}
    for p in patterns:
        m = run_activation_failure_test(device, region, p, trcd, temperature, iterations,
                                        SampleStream(device, stream_start), timing)
        sets[p.name] = m.failing()
    union = np.unique(np.concatenate(list(sets.values()))) if sets else np.zeros(0, np.int64)
    n = union.size
    fails = {k: int(v.size) for k, v in sets.items()}
    cov = {k: (v / n if n else 0.0) for k, v in fails.items()}
    fams = {}
    for fam in ("WALK1", "WALK0"):
        vals = [cov[p.name] for p in patterns if p.kind == fam]
        if vals:
            fams[fam] = (float(np.mean(vals)), float(min(vals)), float(max(vals)))
    return CoverageReport(iterations, fails, cov, n, sets, fams)


# -- temperature ---------------------------------------------------------------

@dataclass
class TemperatureDeltaSet:
    points: list      # (weak index, T, fprob_T, fprob_T_plus_5)
    iterations: int

    def arrays(self):
        if not self.points:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        a = np.asarray(self.points, dtype=float)
        return a[:, 1], a[:, 2], a[:, 3]

    def fraction_below(self):
        _, x, y = self.arrays()
        return float(np.mean(y < x)) if x.size else 0.0

    def bucket_medians(self, width=0.1):
        """[(bucket low edge, median x, median y, count)] over x buckets."""
        _, x, y = self.arrays()
        out = []
        nb = int(round(1 / width))
        idx = np.minimum((x / width).astype(int), nb - 1)
        for b in range(nb):
            sel = idx == b
            if sel.any():
                out.append((b * width, float(np.median(x[sel])), float(np.median(y[sel])), int(sel.sum())))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["T", "fprob_T", "fprob_T5"])
            for _, t, a, b in self.points:
                wr.writerow([f"{t:g}", f"{a:.4f}", f"{b:.4f}"])


def temperature_sweep(device, temperatures=(55, 60, 65, 70), trcd=10.0, pattern=SOLID0,
                      iterations=100, region=None, stream_start=0, timing=None):
    """Paired F_prob at T and T+5 for cells failing at either temperature."""
    temps = [float(t) for t in temperatures]
    if len(temps) < 2:
        raise ConfigError("temperatures", "need at least two temperatures")
    if any(b - a != 5 for a, b in zip(temps, temps[1:])):
        raise ConfigError("temperatures", "must ascend in 5 degree steps")
    lo, hi = device.config.model.temp_range
    if temps[0] < lo or temps[-1] > hi:
        raise ConfigError("temperatures", f"outside supported range [{lo}, {hi}]")
    maps = [run_activation_failure_test(device, region, pattern, trcd, t, iterations,
                                        SampleStream(device, stream_start), timing) for t in temps]
    points = []
    for t, a, b in zip(temps, maps, maps[1:]):
        sel = (a.failures > 0) | (b.failures > 0)
        for w, pa, pb in zip(a.cells[sel], a.fprob[sel], b.fprob[sel]):
            points.append((int(w), t, float(pa), float(pb)))
    return TemperatureDeltaSet(points, iterations)


# -- time stability --------------------------------------------------------------

@dataclass
class StabilityResult:
    maps: list
    mean: np.ndarray
    std: np.ndarray

    @property
    def cells(self):
        return self.maps[0].cells

    def bound(self, k=2.0):
        n = self.maps[0].iterations
        return k * np.sqrt(self.mean * (1 - self.mean) / n)

    def violations(self, k=2.0):
        return int(np.sum(self.std > self.bound(k) + 1e-12))


def time_stability(device, rounds=25, iterations_per_round=100, region=None, pattern=SOLID0,
                   trcd=10.0, temperature=55.0, stream_start=0, timing=None):
    """Repeat profiling with fresh draw counters per round.

    Returns per-round maps with the per-cell pooled mean and across-round
    (population) standard deviation of the empirical F_prob.
    """
    if rounds < 2:
        raise InputError("rounds must be >= 2")
    stream = SampleStream(device, stream_start)
    maps = [run_activation_failure_test(device, region, pattern, trcd, temperature,
                                        iterations_per_round, stream, timing) for _ in range(rounds)]
    p = np.stack([m.fprob for m in maps])
    return StabilityResult(maps, p.mean(axis=0), p.std(axis=0))

