"""Synthetic DRAM device with activation failures under reduced tRCD.

Only cells on *weak* bitlines (bitlines served by a weak local sense
amplifier) can fail. Each weak cell has a base logistic coefficient; its
failure probability under a :class:`Condition` is

    p = logistic(beta0 + beta_row * row / rows_per_subarray + beta_col
                 + beta_trcd * (trcd_safe - max(trcd, trcd_min_fail))
                 + beta_temp * (T - T_ref) + beta_pattern * match)

and exactly 0 when ``trcd >= trcd_safe``. ``match`` is 1 when the stored
data around the cell (its own bit and the two adjacent bitlines) equals the
cell's preferred neighbourhood class.
"""

import csv
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.special import expit, logit, ndtri

from . import streams
from .errors import AddressError, ConfigError
from .patterns import DataPattern, SOLID0, all_patterns

N_CLASSES = 8


@dataclass(frozen=True)
class FailureModel:
    # (mean, stddev) of the base coefficient of weak cells
    beta0: tuple = (-14.5, 3.0)
    beta_row: float = 3.0
    beta_col: float = 2.0
    beta_trcd: float = 0.8
    beta_temp: float = 0.1
    beta_pattern: float = 3.0
    trcd_safe: float = 18.0
    trcd_min_fail: float = 6.0
    t_ref: float = 55.0
    # reference tRCD at which injected RNG cells sit at probability 0.5
    trcd_ref: float = 10.0
    # prior over preferred neighbourhood classes, indexed by left<<2|own<<1|right
    class_weights: tuple = (0.4, 0.05, 0.1, 0.05, 0.05, 0.1, 0.05, 0.2)
    # non-injected cells are kept out of (0.5 - gap, 0.5 + gap) at the reference
    natural_gap: float = 0.05
    temp_range: tuple = (40.0, 70.0)

    def validate(self):
        mean, std = self.beta0
        if std < 0:
            raise ConfigError("model.beta0", "stddev must be >= 0")
        if self.beta_temp < 0:
            raise ConfigError("model.beta_temp", "must be >= 0")
        if self.beta_trcd <= 0:
            raise ConfigError("model.beta_trcd", "must be > 0")
        if self.beta_row < 0:
            raise ConfigError("model.beta_row", "must be >= 0")
        if self.beta_pattern < 0:
            raise ConfigError("model.beta_pattern", "must be >= 0")
        if not 0 < self.trcd_min_fail < self.trcd_safe:
            raise ConfigError("model.trcd_min_fail", "must lie in (0, trcd_safe)")
        w = np.asarray(self.class_weights, dtype=float)
        if w.shape != (N_CLASSES,) or (w < 0).any() or w.sum() <= 0:
            raise ConfigError("model.class_weights", "need 8 nonnegative weights with positive sum")
        if not 0 <= self.natural_gap < 0.5:
            raise ConfigError("model.natural_gap", "must lie in [0, 0.5)")
        lo, hi = self.temp_range
        if lo >= hi:
            raise ConfigError("model.temp_range", "empty range")


@dataclass(frozen=True)
class DeviceConfig:
    seed: int = 0
    channels: int = 1
    banks_per_channel: int = 8
    subarrays_per_bank: int = 4
    rows_per_subarray: int = 512
    columns_per_row: int = 16
    word_size: int = 64
    weak_columns_per_subarray: int = 8
    rng_cell_fraction: float = 0.001
    model: FailureModel = field(default_factory=FailureModel)

    @property
    def bitlines_per_row(self):
        return self.columns_per_row * self.word_size

    @property
    def rows_per_bank(self):
        return self.subarrays_per_bank * self.rows_per_subarray

    def validate(self):
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")
        for name in ("channels", "banks_per_channel", "subarrays_per_bank", "columns_per_row",
                     "word_size", "weak_columns_per_subarray"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.rows_per_subarray not in (512, 1024):
            raise ConfigError("rows_per_subarray", "must be 512 or 1024")
        if self.weak_columns_per_subarray > self.bitlines_per_row:
            raise ConfigError("weak_columns_per_subarray", "exceeds bitlines per row")
        if not 0.0 <= self.rng_cell_fraction <= 1.0:
            raise ConfigError("rng_cell_fraction", "must lie in [0, 1]")
        self.model.validate()

    def to_dict(self):
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "model"}
        out["model"] = {f.name: (list(v) if isinstance(v := getattr(self.model, f.name), tuple) else v)
                        for f in fields(self.model)}
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown device field")
        model = data.pop("model", None) or {}
        mknown = {f.name for f in fields(FailureModel)}
        bad = set(model) - mknown
        if bad:
            raise ConfigError("model." + sorted(bad)[0], "unknown model field")
        model = {k: tuple(v) if isinstance(v, list) else v for k, v in model.items()}
        try:
            return cls(model=FailureModel(**model), **data)
        except TypeError as exc:
            raise ConfigError("device", str(exc)) from None


@dataclass(frozen=True, order=True)
class CellAddress:
    channel: int
    bank: int
    subarray: int
    row: int
    column: int
    bit: int

    def global_row(self, rows_per_subarray):
        return self.subarray * rows_per_subarray + self.row

    def bitline(self, word_size):
        return self.column * word_size + self.bit


@dataclass(frozen=True, order=True)
class WordAddress:
    channel: int
    bank: int
    row: int  # bank-global row
    column: int


@dataclass(frozen=True)
class Condition:
    trcd: float
    temperature: float
    pattern: DataPattern = SOLID0

    def validate(self, model=None):
        if not self.trcd > 0:
            raise ConfigError("trcd", "must be > 0")
        lo, hi = (model or FailureModel()).temp_range
        if not lo <= self.temperature <= hi:
            raise ConfigError("temperature", f"{self.temperature} outside supported range [{lo}, {hi}]")
        return self

    def to_dict(self):
        return {"trcd": self.trcd, "temperature": self.temperature, "pattern": self.pattern.name}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["trcd"]), float(d["temperature"]), DataPattern.parse(d["pattern"]))


def _readonly(a):
    a.setflags(write=False)
    return a


class Device:
    """Immutable generated device. Build with :func:`generate_device`."""

    def __init__(self, config, weak_bitlines, beta0, pref_class, is_rng):
        self.config = config
        self.shape = _weak_shape(config)
        self.n_weak = int(np.prod(self.shape))
        self.weak_bitlines = _readonly(weak_bitlines)
        self.beta0 = _readonly(beta0)
        self.pref_class = _readonly(pref_class)
        self.is_rng = _readonly(is_rng)
        self.read_keys = _readonly(streams.derive_key(config.seed, self.linear_ids(), streams.TAG_READ))

    # -- indexing -------------------------------------------------------
    def decompose(self, w):
        """Weak index -> (channel, bank, subarray, row, k, bitline) arrays."""
        ch, b, s, r, k = np.unravel_index(np.asarray(w, dtype=np.int64), self.shape)
        return ch, b, s, r, k, self.weak_bitlines[ch, b, s, k]

    def linear_ids(self, w=None):
        """Canonical linear cell address (unique across the device)."""
        if w is None:
            w = np.arange(self.n_weak)
        return _linear_ids_for(self.config, self.weak_bitlines, w)

    def address(self, w):
        ch, b, s, r, _, j = (int(x) for x in self.decompose(w))
        ws = self.config.word_size
        return CellAddress(ch, b, s, r, j // ws, j % ws)

    def addresses(self, w):
        return [self.address(i) for i in np.asarray(w).ravel()]

    def check_address(self, cell):
        c = self.config
        limits = (("channel", c.channels), ("bank", c.banks_per_channel),
                  ("subarray", c.subarrays_per_bank), ("row", c.rows_per_subarray),
                  ("column", c.columns_per_row), ("bit", c.word_size))
        for name, lim in limits:
            v = getattr(cell, name)
            if not 0 <= v < lim:
                raise AddressError(f"{name}={v} out of range [0, {lim})")

    def weak_index(self, cell):
        """Weak index of ``cell``, or None when the cell is not failure-capable."""
        self.check_address(cell)
        j = cell.bitline(self.config.word_size)
        row = self.weak_bitlines[cell.channel, cell.bank, cell.subarray]
        hit = np.nonzero(row == j)[0]
        if hit.size == 0:
            return None
        return int(np.ravel_multi_index(
            (cell.channel, cell.bank, cell.subarray, cell.row, int(hit[0])), self.shape))

    def region_cells(self, channel=0, bank=0, subarrays=None, rows=None, columns=None):
        """Weak indices inside a region, ordered by (subarray, row, k)."""
        c = self.config
        if not 0 <= channel < c.channels or not 0 <= bank < c.banks_per_channel:
            raise AddressError(f"channel/bank ({channel}, {bank}) out of range")
        subarrays = range(c.subarrays_per_bank) if subarrays is None else subarrays
        rows = range(c.rows_per_subarray) if rows is None else rows
        columns = range(c.columns_per_row) if columns is None else columns
        subarrays, rows, columns = (np.asarray(list(x), dtype=np.int64) for x in (subarrays, rows, columns))
        if subarrays.size and (subarrays.min() < 0 or subarrays.max() >= c.subarrays_per_bank):
            raise AddressError("subarray out of range")
        if rows.size and (rows.min() < 0 or rows.max() >= c.rows_per_subarray):
            raise AddressError("row out of range")
        if columns.size and (columns.min() < 0 or columns.max() >= c.columns_per_row):
            raise AddressError("column out of range")
        out = []
        for s in subarrays:
            bl = self.weak_bitlines[channel, bank, s]
            ks = np.nonzero(np.isin(bl // c.word_size, columns))[0]
            if ks.size == 0 or rows.size == 0:
                continue
            rr, kk = np.meshgrid(rows, ks, indexing="ij")
            out.append(np.ravel_multi_index((np.full(rr.size, channel), np.full(rr.size, bank),
                                             np.full(rr.size, s), rr.ravel(), kk.ravel()), self.shape))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def word_cells(self, word):
        """Weak indices of the failure-capable bits of one word, by bit order."""
        c = self.config
        s, r = divmod(word.row, c.rows_per_subarray)
        if not (0 <= word.channel < c.channels and 0 <= word.bank < c.banks_per_channel
                and 0 <= s < c.subarrays_per_bank and 0 <= word.column < c.columns_per_row):
            raise AddressError(f"word {word} out of range")
        bl = self.weak_bitlines[word.channel, word.bank, s]
        ks = np.nonzero(bl // c.word_size == word.column)[0]
        return np.ravel_multi_index((np.full(ks.size, word.channel), np.full(ks.size, word.bank),
                                     np.full(ks.size, s), np.full(ks.size, r), ks), self.shape)

    # -- model ----------------------------------------------------------
    def global_rows(self, w):
        _, _, s, r, _, _ = self.decompose(w)
        return s * self.config.rows_per_subarray + r

    def stored_bits(self, w, pattern):
        _, _, s, r, _, j = self.decompose(w)
        return pattern.bits(s * self.config.rows_per_subarray + r, j)

    def pattern_match(self, w, pattern):
        _, _, s, r, _, j = self.decompose(w)
        cls = pattern.neighborhood(s * self.config.rows_per_subarray + r, j)
        return cls == self.pref_class[np.asarray(w, dtype=np.int64)]

    def logit_terms(self, w, cond, match=None):
        """Logistic argument for each weak cell (ignores the safe-tRCD cutoff)."""
        m = self.config.model
        w = np.asarray(w, dtype=np.int64)
        _, _, _, r, _, _ = self.decompose(w)
        if match is None:
            match = self.pattern_match(w, cond.pattern)
        return (self.beta0[w]
                + m.beta_row * (r / self.config.rows_per_subarray)
                + m.beta_col
                + m.beta_trcd * (m.trcd_safe - max(cond.trcd, m.trcd_min_fail))
                + m.beta_temp * (cond.temperature - m.t_ref)
                + m.beta_pattern * np.asarray(match, dtype=np.float64))

    def fprob(self, w, cond):
        """Vectorized failure probability for weak cells ``w``."""
        w = np.asarray(w, dtype=np.int64)
        if cond.trcd >= self.config.model.trcd_safe:
            return np.zeros(w.shape)
        return expit(self.logit_terms(w, cond))

    def reference_condition(self, pattern):
        m = self.config.model
        return Condition(m.trcd_ref, m.t_ref, pattern)

    def preferred_pattern(self, w):
        """First of the 40 patterns whose neighbourhood matches cell ``w``."""
        for p in all_patterns():
            if bool(self.pattern_match([w], p)[0]):
                return p
        raise AssertionError("every neighbourhood class is reachable")

    def sample_flips(self, w, cond, stream, n):
        """``(len(w), n)`` boolean flips for ``n`` first-access reads per cell."""
        w = np.asarray(w, dtype=np.int64)
        counters = stream.take(w, n)
        p = self.fprob(w, cond)
        return streams.bernoulli(self.read_keys[w][:, None], counters, p[:, None])

    def rng_cells(self):
        return np.nonzero(self.is_rng)[0]

    def dump_weak_columns(self, path):
        c = self.config
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["channel", "bank", "subarray", "column", "bit"])
            for ch in range(c.channels):
                for b in range(c.banks_per_channel):
                    for s in range(c.subarrays_per_bank):
                        for j in self.weak_bitlines[ch, b, s]:
                            wr.writerow([ch, b, s, int(j) // c.word_size, int(j) % c.word_size])


def _open_uniform(seed, ids, tag):
    x = streams.hash_draw(streams.derive_key(seed, ids, tag), 0) >> np.uint64(11)
    return (x.astype(np.float64) + 0.5) / (1 << 53)


def generate_device(config):
    """Build the device for ``config``; identical configs give identical devices."""
    config.validate()
    c, m = config, config.model
    nb = c.bitlines_per_row
    n_sub = c.channels * c.banks_per_channel * c.subarrays_per_bank
    K = c.weak_columns_per_subarray

    # weak bitlines: the K lowest hash values among each subarray's bitlines
    ids = np.arange(n_sub, dtype=np.uint64)[:, None] * np.uint64(nb) + np.arange(nb, dtype=np.uint64)
    u = _open_uniform(c.seed, ids, streams.TAG_WEAKCOL)
    weak = np.sort(np.argsort(u, axis=1, kind="stable")[:, :K], axis=1)
    weak = weak.reshape(c.channels, c.banks_per_channel, c.subarrays_per_bank, K).astype(np.int64)

    shape = _weak_shape(config)
    n = int(np.prod(shape))
    lin = _linear_ids_for(config, weak, np.arange(n))

    mean, std = m.beta0
    beta0 = mean + std * ndtri(_open_uniform(c.seed, lin, streams.TAG_BETA0))
    cum = np.cumsum(np.asarray(m.class_weights, dtype=float))
    cum /= cum[-1]
    pref = np.searchsorted(cum, _open_uniform(c.seed, lin, streams.TAG_CLASS), side="right")
    pref = np.minimum(pref, N_CLASSES - 1).astype(np.uint8)

    n_rng = int(round(c.rng_cell_fraction * n))
    order = np.argsort(_open_uniform(c.seed, lin, streams.TAG_RNG), kind="stable")
    is_rng = np.zeros(n, dtype=bool)
    is_rng[order[:n_rng]] = True

    # everything except beta0 at the reference condition with a matching pattern
    r = np.unravel_index(np.arange(n), shape)[3]
    offset = (m.beta_row * (r / c.rows_per_subarray) + m.beta_col
              + m.beta_trcd * (m.trcd_safe - max(m.trcd_ref, m.trcd_min_fail)) + m.beta_pattern)
    z = beta0 + offset
    if m.natural_gap > 0:
        edge = float(logit(0.5 + m.natural_gap)) + 1e-6
        inside = (np.abs(z) < edge) & ~is_rng
        z[inside] = np.where(z[inside] >= 0, edge, -edge)
    z[is_rng] = 0.0
    beta0 = z - offset
    # keep RNG cells exactly at zero logit despite float rounding in z - offset
    beta0[is_rng] = -offset[is_rng]
    return Device(config, weak, beta0, pref, is_rng)


def _weak_shape(c):
    return (c.channels, c.banks_per_channel, c.subarrays_per_bank, c.rows_per_subarray,
            c.weak_columns_per_subarray)


def _linear_ids_for(config, weak, w):
    c = config
    ch, b, s, r, k = np.unravel_index(np.asarray(w, dtype=np.int64), _weak_shape(c))
    j = weak[ch, b, s, k]
    sub = (ch * c.banks_per_channel + b) * c.subarrays_per_bank + s
    return (sub.astype(np.uint64) * np.uint64(c.rows_per_subarray) + r.astype(np.uint64)) \
        * np.uint64(c.bitlines_per_row) + j.astype(np.uint64)


def failure_probability(device, cell, cond):
    """Failure probability of one cell; 0 for cells on strong bitlines."""
    w = device.weak_index(cell)
    if w is None:
        return 0.0
    return float(device.fprob([w], cond)[0])


def sample_read(device, word, cond, stream, first_access):
    """Read one word (stored with ``cond.pattern``) and return its bits.

    Only a first access after activation can flip bits; later accesses to the
    open row return the stored data and consume no draws.
    """
    c = device.config
    bitlines = word.column * c.word_size + np.arange(c.word_size)
    out = cond.pattern.bits(word.row, bitlines).copy()
    w = device.word_cells(word)
    if not first_access or w.size == 0:
        return out
    flips = device.sample_flips(w, cond, stream, 1)[:, 0]
    _, _, _, _, _, j = device.decompose(w)
    out[j - word.column * c.word_size] ^= flips.astype(np.uint8)
    return out
