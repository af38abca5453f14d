"""RNG-cell identification and random-bit harvesting.

Identification reads every failure-capable cell ``samples`` times with
first-access reads and keeps cells whose 3-bit symbol histogram is balanced.
Generation runs the bank-conflict core loop: in every bank two words in
distinct rows are read alternately, so each read follows a fresh ACT.

Bit order of a generated stream: iteration by iteration; within an iteration
banks in ascending order; within a bank the RNG cells of the first selected
word then the second, each by ascending bit position.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .device import CellAddress, Condition, WordAddress
from .errors import InputError, ProtocolError, UnavailableError
from .patterns import DataPattern, SOLID0
from .streams import SampleStream
from .timing import TimingParams, alg2_period, alg2_trace

RESERVED_ROWS_PER_BANK = 6
REIDENTIFY_DAYS = 15


# -- symbol balance ------------------------------------------------------------

def symbol_counts(bits, overlapping=False):
    """Counts of the 8 3-bit symbols per row of a 2-D 0/1 array.

    Non-overlapping windows drop the trailing ``n % 3`` bits.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim == 1:
        bits = bits[None, :]
    n = bits.shape[1]
    if overlapping:
        codes = (bits[:, :-2] << 2) | (bits[:, 1:-1] << 1) | bits[:, 2:]
    else:
        m = n // 3
        b = bits[:, :3 * m].reshape(bits.shape[0], m, 3)
        codes = (b[:, :, 0] << 2) | (b[:, :, 1] << 1) | b[:, :, 2]
    rows = bits.shape[0]
    flat = codes.astype(np.int64) + 8 * np.arange(rows)[:, None]
    return np.bincount(flat.ravel(), minlength=8 * rows).reshape(rows, 8)


def symbol_balanced(counts, tolerance):
    """True where every symbol count lies within +-tolerance of the mean count."""
    counts = np.asarray(counts)
    expected = counts.sum(axis=-1, keepdims=True) / 8.0
    return np.all(np.abs(counts - expected) <= tolerance * expected + 1e-9, axis=-1)


def binary_entropy(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.nan_to_num(h, nan=0.0)


# -- catalog ------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    cell: CellAddress
    entropy: float
    fprob: float


@dataclass
class RngCellCatalog:
    temperature: float
    trcd: float
    pattern: DataPattern
    entries: list
    seed: int
    tolerance: float = 0.10
    samples: int = 1000
    overlapping: bool = False
    reidentify_days: int = REIDENTIFY_DAYS
    word_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.word_index:
            self.word_index = self.build_word_index(self.entries)

    @staticmethod
    def build_word_index(entries):
        idx = {}
        for e in entries:
            c = e.cell
            key = (c.channel, c.bank, c.subarray, c.row, c.column)
            idx[key] = idx.get(key, 0) + 1
        return idx

    def words(self, rows_per_subarray):
        """{WordAddress: RNG-cell count} with bank-global rows."""
        return {WordAddress(ch, b, s * rows_per_subarray + r, col): n
                for (ch, b, s, r, col), n in self.word_index.items()}

    def density_histogram(self):
        out = {}
        for n in self.word_index.values():
            out[n] = out.get(n, 0) + 1
        return dict(sorted(out.items()))

    def condition(self):
        return Condition(self.trcd, self.temperature, self.pattern)

    def __len__(self):
        return len(self.entries)

    def to_dict(self):
        return {
            "temperature": self.temperature, "trcd": self.trcd, "pattern": self.pattern.name,
            "seed": self.seed, "tolerance": self.tolerance, "samples": self.samples,
            "overlapping": self.overlapping, "reidentify_days": self.reidentify_days,
            "entries": [{"cell": list(e.cell.__dict__.values()), "entropy": e.entropy, "fprob": e.fprob}
                        for e in self.entries],
            "word_index": [list(k) + [n] for k, n in sorted(self.word_index.items())],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d):
        entries = [CatalogEntry(CellAddress(*e["cell"]), e["entropy"], e["fprob"]) for e in d["entries"]]
        return cls(float(d["temperature"]), float(d["trcd"]), DataPattern.parse(d["pattern"]), entries,
                   int(d["seed"]), float(d["tolerance"]), int(d["samples"]), bool(d["overlapping"]),
                   int(d.get("reidentify_days", REIDENTIFY_DAYS)),
                   {tuple(w[:5]): int(w[5]) for w in d["word_index"]})

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def identify_rng_cells(device, temperature=55.0, trcd=10.0, pattern=SOLID0, samples=1000,
                       tolerance=0.10, overlapping=False, cells=None, stream=None, chunk=8192):
    """Catalog of cells whose read streams pass the 3-bit symbol balance rule.

    Each candidate (all failure-capable cells by default) is read ``samples``
    times; a cell is accepted when each of the 8 symbol counts lies within
    ``tolerance`` of the expected count.
    """
    if samples < 24:
        raise InputError("samples must be >= 24")
    if not tolerance >= 0:
        raise InputError("tolerance must be >= 0")
    cond = Condition(float(trcd), float(temperature), pattern).validate(device.config.model)
    stream = stream or SampleStream(device)
    cand = np.arange(device.n_weak) if cells is None else np.asarray(cells, dtype=np.int64)
    accepted, ent, fp = [], [], []
    for lo in range(0, cand.size, chunk):
        w = cand[lo:lo + chunk]
        flips = device.sample_flips(w, cond, stream, samples)
        bits = flips.astype(np.uint8) ^ device.stored_bits(w, pattern)[:, None]
        ok = symbol_balanced(symbol_counts(bits, overlapping), tolerance)
        if ok.any():
            ones = bits[ok].mean(axis=1)
            accepted.append(w[ok])
            ent.append(binary_entropy(ones))
            fp.append(flips[ok].mean(axis=1))
    if accepted:
        w, ent, fp = np.concatenate(accepted), np.concatenate(ent), np.concatenate(fp)
    else:
        w, ent, fp = np.zeros(0, np.int64), np.zeros(0), np.zeros(0)
    entries = [CatalogEntry(device.address(int(i)), float(h), float(p)) for i, h, p in zip(w, ent, fp)]
    return RngCellCatalog(float(temperature), float(trcd), pattern, entries, int(device.config.seed),
                          float(tolerance), int(samples), bool(overlapping))


# -- word selection -------------------------------------------------------------------

def select_words(catalog, bank, rows_per_subarray, channel=0):
    """The two words of ``bank`` in distinct rows with the most RNG cells.

    Ties go to the lowest (row, column). Returns None when the bank has no
    such pair, which excludes it from generation.
    """
    words = sorted(((w, n) for w, n in catalog.words(rows_per_subarray).items()
                    if w.bank == bank and w.channel == channel),
                   key=lambda x: (-x[1], x[0].row, x[0].column))
    if not words:
        return None
    first = words[0][0]
    for w, _ in words[1:]:
        if w.row != first.row:
            return first, w
    return None


def reserved_rows(selection, rows_per_bank):
    """Sampled rows plus their immediate neighbours, kept away from other traffic."""
    out = set()
    for w in selection:
        out.update(r for r in (w.row - 1, w.row, w.row + 1) if 0 <= r < rows_per_bank)
    return sorted(out)


# -- bitstreams --------------------------------------------------------------------------

@dataclass
class Bitstream:
    bits: np.ndarray
    condition: Condition
    seed: int
    cells: list = field(default_factory=list)         # CellAddress per source, in stream order
    sources: np.ndarray = None                        # per-bit index into ``cells``
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.bits.size)

    def packed(self):
        return pack_bits(self.bits)

    def sidecar(self):
        return {
            "bit_count": int(self.bits.size), "seed": self.seed,
            "condition": self.condition.to_dict(),
            "cells": [list(c.__dict__.values()) for c in self.cells],
            "bit_order": "lsb-first", **self.meta,
        }

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.packed())
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.sidecar(), fh, indent=1, sort_keys=True)
        return [str(path), str(path) + ".json"]


def pack_bits(bits):
    """Little-endian packing: bit 0 is the least significant bit of byte 0."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bits(data, count=None):
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    return bits if count is None else bits[:count]


def _pick_catalog(catalog, temperature):
    if isinstance(catalog, RngCellCatalog):
        if temperature is not None and float(temperature) != catalog.temperature:
            raise UnavailableError(f"no catalog for {temperature} C (have {catalog.temperature} C)")
        return catalog
    if temperature is None:
        raise UnavailableError("temperature required to pick from a catalog set")
    found = catalog.get(float(temperature))
    if found is None:
        raise UnavailableError(f"no catalog for {temperature} C")
    return found


def generate_random(device, catalog, num_bits, temperature=None, stream=None, timing=None,
                    channel=0, record_sources=False, trace_iterations=4):
    """Harvest ``num_bits`` random bits with the bank-conflict core loop.

    ``catalog`` is one catalog or a mapping from temperature to catalog; only
    the catalog for the operating temperature is used.

    The loop body is identical in every iteration, so a head of
    ``trace_iterations`` iterations is scheduled on the timing engine; it
    supplies the first-access guarantee and the steady-state period used for
    the runtime.
    """
    catalog = _pick_catalog(catalog, temperature)
    if len(catalog) == 0:
        raise UnavailableError("catalog has no RNG cells")
    cfg = device.config
    cond = catalog.condition()
    if num_bits < 0:
        raise InputError("num_bits must be >= 0")
    timing = timing or TimingParams()
    stream = stream or SampleStream(device)
    rps = cfg.rows_per_subarray

    rng_set = {(e.cell.channel, e.cell.bank, e.cell.subarray, e.cell.row, e.cell.column, e.cell.bit)
               for e in catalog.entries}
    plan = []  # (bank, selection, [(word, all weak idx, rng mask)])
    for b in range(cfg.banks_per_channel):
        sel = select_words(catalog, b, rps, channel)
        if sel is None:
            continue
        words = []
        for word in sel:
            w = device.word_cells(word)
            mask = np.array([(a.channel, a.bank, a.subarray, a.row, a.column, a.bit) in rng_set
                             for a in device.addresses(w)], dtype=bool)
            words.append((word, w, mask))
        plan.append((b, sel, words))
    if not plan:
        raise UnavailableError("no bank has two cataloged words in distinct rows")
    per_iter = sum(int(m.sum()) for _, _, ws in plan for _, _, m in ws)

    selections = [(b, (s[0].row, s[0].column), (s[1].row, s[1].column)) for b, s, _ in plan]
    t = timing.with_(trcd_reduced=cond.trcd)
    head = alg2_trace(selections, t, max(1, trace_iterations))
    reads = head.reads()
    if not all(c.first_access for c in reads):
        raise ProtocolError(next(c.index for c in reads if not c.first_access),
                            "core-loop read is not a first access")
    period_ns = alg2_period(selections, t) * t.clock_period

    iterations = math.ceil(num_bits / per_iter) if num_bits else 0
    cols, srcs, cells, last = [], [], [], []
    for _, _, ws in plan:
        for word, w, mask in ws:
            flips = device.sample_flips(w, cond, stream, iterations)
            last.append(flips[:, -1].astype(np.uint8) if iterations else np.zeros(w.size, np.uint8))
            data = flips.astype(np.uint8) ^ device.stored_bits(w, cond.pattern)[:, None]
            for i in np.nonzero(mask)[0]:
                cols.append(data[i])
                srcs.append(len(cells))
                cells.append(device.address(int(w[i])))
    mat = np.stack(cols, axis=1) if iterations else np.zeros((0, per_iter), np.uint8)
    bits = mat.reshape(-1)[:num_bits].copy()
    sources = None
    if record_sources:
        sources = np.tile(np.asarray(srcs, dtype=np.int32), iterations)[:num_bits]

    restored = _restore_check(device, plan, cond, last)
    meta = {
        "iterations": iterations, "reads": iterations * 2 * len(plan),
        "bits_per_iteration": per_iter, "banks": [b for b, _, _ in plan],
        "selected_words": [[list(w.__dict__.values()) for w in s] for _, s, _ in plan],
        "reserved_rows": {str(b): reserved_rows(s, cfg.rows_per_bank) for b, s, _ in plan},
        "period_ns": period_ns, "runtime_ns": period_ns * iterations,
        "trcd_reduced_ns": cond.trcd, "trcd_restored_ns": timing.trcd,
        "restored": restored, "channel": channel,
    }
    out = Bitstream(bits, cond, int(cfg.seed), cells, sources, meta)
    out.trace_head = head
    return out


class WordMemory:
    """Contents of the words touched by the core loop."""

    def __init__(self):
        self.data = {}

    def write(self, word, bits):
        self.data[word] = np.array(bits, dtype=np.uint8)

    def read(self, word, flips):
        """Return the read value; failed bits are also latched back into the row."""
        self.data[word] = self.data[word] ^ flips
        return self.data[word].copy()


def _restore_check(device, plan, cond, last_flips):
    """Replay the final read and restore of each word and compare with the pattern."""
    ws = device.config.word_size
    mem = WordMemory()
    ok = True
    for (word, w, _), flips in zip([x for _, _, words in plan for x in words], last_flips):
        original = cond.pattern.bits(word.row, word.column * ws + np.arange(ws))
        mem.write(word, original)
        full = np.zeros(ws, dtype=np.uint8)
        if w.size:
            full[device.decompose(w)[5] - word.column * ws] = flips
        mem.read(word, full)
        mem.write(word, original)
        ok &= bool(np.array_equal(mem.data[word], original))
    return ok


def sample_cell_bits(device, w, cond, num_bits, start=0):
    """``num_bits`` consecutive first-access read values of one cell."""
    stream = SampleStream(device, start)
    flips = device.sample_flips([int(w)], cond, stream, int(num_bits))[0]
    return flips.astype(np.uint8) ^ device.stored_bits([int(w)], cond.pattern)[0]

