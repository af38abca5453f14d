"""Throughput, latency, storage, energy and baseline models.

Units: throughput in Mb/s (10^6 bits per second) unless a name says
otherwise; the closed-form baselines are also reported in binary Mb/s
(2^20 bits per second), the unit that reproduces their reference figures.
"""

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import calibration as cal
from .drange import select_words
from .errors import ConfigError, InputError
from .timing import ACT, PRE, READ, REF, WRITE, TimingParams, alg2_loop_runtime

MIB = 2 ** 20


# -- throughput ------------------------------------------------------------------

def trng_throughput(data_rates, loop_runtime_ns, channels=1):
    """Sum of per-bank bits per iteration over the loop runtime, in Mb/s."""
    data_rates = list(data_rates)
    if not data_rates:
        raise InputError("data_rates is empty")
    if not loop_runtime_ns > 0:
        raise InputError("loop runtime must be > 0")
    if channels < 1:
        raise InputError("channels must be >= 1")
    return sum(data_rates) / loop_runtime_ns * 1000.0 * channels


def calibrated_throughput(bits_per_bank=cal.BEST_BITS_PER_BANK, banks=cal.BANKS, channels=1):
    return trng_throughput([bits_per_bank] * banks, cal.LOOP_RUNTIME_NS, channels)


def bank_data_rates(catalog, config, channel=0):
    """Bits per iteration for every bank (0 when the bank cannot take part)."""
    words = catalog.words(config.rows_per_subarray)
    out = []
    for b in range(config.banks_per_channel):
        sel = select_words(catalog, b, config.rows_per_subarray, channel)
        out.append(0 if sel is None else sum(words[w] for w in sel))
    return out


def throughput_curve(rates, timing=None, channels=1):
    """Throughput for x = 1..len(rates) banks with the scheduled loop runtime.

    The banks with the highest data rates are used first. A memory controller
    given x banks may leave some idle, so the value for x is the best over
    k <= x banks; adding a slow bank to a tFAW-bound loop never lowers it.
    """
    timing = timing or TimingParams()
    rates = sorted(rates, reverse=True)
    n = len(rates)
    raw = [trng_throughput(rates[:x], alg2_loop_runtime(x, timing, n), channels) for x in range(1, n + 1)]
    return np.maximum.accumulate(raw).tolist(), raw


@dataclass
class ThroughputReport:
    bank_counts: list
    per_device: list          # one throughput list (per bank count) per device
    channels: int = 1
    seeds: list = field(default_factory=list)

    def quantiles(self):
        a = np.asarray(self.per_device, dtype=float)
        rows = []
        for i, x in enumerate(self.bank_counts):
            col = a[:, i]
            rows.append((x, *np.quantile(col, [0, 0.25, 0.5, 0.75, 1.0]).tolist()))
        return rows

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["bank_count", "min", "q1", "median", "q3", "max"])
            for row in self.quantiles():
                wr.writerow([row[0]] + [f"{v:.4f}" for v in row[1:]])


def throughput_report(rate_sets, timing=None, channels=1, seeds=None):
    curves = [throughput_curve(r, timing, channels)[0] for r in rate_sets]
    n = len(rate_sets[0]) if rate_sets else 0
    return ThroughputReport(list(range(1, n + 1)), curves, channels, list(seeds or []))


def duty_cycled_throughput(full_throughput, duty):
    """Throughput when reduced-tRCD intervals take a ``duty`` share of time."""
    if not 0 <= duty <= 1:
        raise InputError("duty must lie in [0, 1]")
    return duty * full_throughput


# -- latency -------------------------------------------------------------------------

def latency_64bit(bits_per_access, banks, channels, per_access_period_ns=cal.LATENCY_FIRST_NS,
                  pipeline_interval_ns=cal.LATENCY_INTERVAL_NS):
    """Time to collect 64 random bits.

    Accesses are spread over all banks of all channels; each bank pipeline
    delivers its first access after ``per_access_period_ns`` and one more
    every ``pipeline_interval_ns``.
    """
    for name, v in (("bits_per_access", bits_per_access), ("banks", banks), ("channels", channels),
                    ("per_access_period_ns", per_access_period_ns)):
        if not v > 0:
            raise InputError(f"{name} must be > 0")
    if pipeline_interval_ns < 0:
        raise InputError("pipeline_interval_ns must be >= 0")
    accesses = math.ceil(64 / bits_per_access)
    depth = math.ceil(accesses / (banks * channels))
    return per_access_period_ns + (depth - 1) * pipeline_interval_ns


LATENCY_SCENARIOS = {
    # name: (bits per access, banks, channels, target latency ns)
    "worst": (1, 1, 1, 960.0),
    "parallel": (1, 8, 4, 220.0),
    "best": (4, 8, 4, 100.0),
}


def latency_table(first=cal.LATENCY_FIRST_NS, interval=cal.LATENCY_INTERVAL_NS):
    return {k: (latency_64bit(b, n, c, first, interval), target)
            for k, (b, n, c, target) in LATENCY_SCENARIOS.items()}


# -- storage ---------------------------------------------------------------------------

def storage_overhead(rows_reserved_per_bank=6, rows_per_bank=32768):
    if not rows_per_bank > 0:
        raise InputError("rows_per_bank must be > 0")
    return rows_reserved_per_bank / rows_per_bank


# -- energy ------------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyModel:
    act_nj: float = cal.ENERGY_ACT_NJ
    pre_nj: float = cal.ENERGY_PRE_NJ
    read_nj: float = cal.ENERGY_READ_NJ
    write_nj: float = cal.ENERGY_WRITE_NJ
    ref_nj: float = cal.ENERGY_REF_NJ
    background_mw: float = cal.ENERGY_BACKGROUND_MW
    idle_mw: float = cal.ENERGY_IDLE_MW

    def command_nj(self, kind):
        return {ACT: self.act_nj, PRE: self.pre_nj, READ: self.read_nj,
                WRITE: self.write_nj, REF: self.ref_nj}[kind]

    def scaled(self, k):
        """Command energies multiplied by ``k``; powers unchanged."""
        return EnergyModel(self.act_nj * k, self.pre_nj * k, self.read_nj * k, self.write_nj * k,
                           self.ref_nj * k, self.background_mw, self.idle_mw)


def trace_energy_nj(trace, model=None):
    """Command energy plus background over the span, less the idle baseline."""
    model = model or EnergyModel()
    if len(trace) == 0:
        return 0.0
    cmd = sum(model.command_nj(c.cmd) for c in trace)
    # mW * ns = pJ
    return cmd + (model.background_mw - model.idle_mw) * trace.span_ns * 1e-3


def energy_per_bit(trace, bits, model=None):
    if not bits > 0:
        raise InputError("bits must be > 0")
    return trace_energy_nj(trace, model) / bits


# -- baseline comparison ------------------------------------------------------------------

@dataclass(frozen=True)
class BaselineParams:
    pyo_cycles_per_byte: float = 45000.0
    pyo_clock_hz: float = 5e9
    pyo_channels: float = 4.0
    pyo_stated_mbps: float = 3.40
    retention_wait_s: float = 40.0
    retention_block_bytes: float = 4 * MIB
    retention_bits_per_block: float = 256.0
    retention_capacity_bytes: float = 32 * 2 ** 30
    retention_energy_nj_per_bit: float = 6.8e6
    startup_bits_per_mib: float = 420 * 1024
    startup_read_ns: float = 60.0
    startup_energy_nj_per_bit: float = 0.2459

    def validate(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"baselines.{f.name}", "must be > 0")
        return self

    def with_(self, **kw):
        return BaselineParams(**{**self.__dict__, **kw})


@dataclass
class DrangeSummary:
    max_mbps: float
    avg_mbps: float
    latency_min_ns: float
    latency_max_ns: float
    energy_nj_per_bit: float


def default_drange_summary():
    return DrangeSummary(
        calibrated_throughput(cal.BEST_BITS_PER_BANK, channels=cal.CHANNELS),
        calibrated_throughput(cal.AVG_BITS_PER_BANK, channels=cal.CHANNELS),
        latency_64bit(*LATENCY_SCENARIOS["best"][:3]),
        latency_64bit(*LATENCY_SCENARIOS["worst"][:3]),
        cal.ENERGY_TARGET_NJ_PER_BIT,
    )


def pyo_throughput_bps(p):
    return 8.0 / (p.pyo_cycles_per_byte / p.pyo_clock_hz) * p.pyo_channels


def pyo_latency_s(p):
    return 8 * p.pyo_cycles_per_byte / p.pyo_clock_hz / p.pyo_channels


def retention_throughput_bps(p):
    return p.retention_capacity_bytes / p.retention_block_bytes * p.retention_bits_per_block / p.retention_wait_s


@dataclass
class Comparison:
    rows: list
    ratios: dict
    ordering: dict

    @property
    def ordering_ok(self):
        return all(self.ordering.values())

    _COLS = ("name", "year", "entropy_source", "true_random", "streaming", "latency_64bit",
             "energy_per_bit", "throughput_mibps", "throughput_mbps", "throughput_stated_mbps")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self._COLS)
            for r in self.rows:
                wr.writerow([_fmt(r.get(c)) for c in self._COLS])

    def to_markdown(self):
        head = "| " + " | ".join(self._COLS) + " |"
        sep = "|" + "---|" * len(self._COLS)
        body = ["| " + " | ".join(_fmt(r.get(c)) for c in self._COLS) + " |" for r in self.rows]
        tail = [f"\nratio max/Pyo: {self.ratios['max_vs_pyo']:.1f}x; "
                f"avg/Pyo: {self.ratios['avg_vs_pyo']:.1f}x",
                "ordering: " + ", ".join(f"{k}={'ok' if v else 'VIOLATED'}" for k, v in self.ordering.items())]
        return "\n".join([head, sep] + body + tail)


def _fmt(v):
    if v is None:
        return "N/A"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _lat(s):
    if s >= 1:
        return f"{s:g} s"
    if s >= 1e-6:
        return f"{s * 1e6:g} us"
    return f"{s * 1e9:g} ns"


def compare_baselines(params=None, drange=None):
    """Comparison of DRAM-based TRNG mechanisms."""
    p = (params or BaselineParams()).validate()
    d = drange or default_drange_summary()
    pyo = pyo_throughput_bps(p)
    ret = retention_throughput_bps(p)
    rows = [
        {"name": "Pyo+", "year": 2009, "entropy_source": "command schedule", "true_random": False,
         "streaming": True, "latency_64bit": _lat(pyo_latency_s(p)), "energy_per_bit": None,
         "throughput_mibps": pyo / MIB, "throughput_mbps": pyo / 1e6,
         "throughput_stated_mbps": p.pyo_stated_mbps},
        {"name": "Keller+", "year": 2014, "entropy_source": "data retention", "true_random": True,
         "streaming": True, "latency_64bit": _lat(p.retention_wait_s),
         "energy_per_bit": f"{p.retention_energy_nj_per_bit * 1e-6:g} mJ/bit",
         "throughput_mibps": ret / MIB, "throughput_mbps": ret / 1e6, "throughput_stated_mbps": None},
        {"name": "Tehranipoor+", "year": 2016, "entropy_source": "startup values", "true_random": True,
         "streaming": False, "latency_64bit": f">{p.startup_read_ns:g} ns",
         "energy_per_bit": f">{p.startup_energy_nj_per_bit * 1e3:g} pJ/bit",
         "throughput_mibps": None, "throughput_mbps": None, "throughput_stated_mbps": None},
        {"name": "Sutar+", "year": 2018, "entropy_source": "data retention", "true_random": True,
         "streaming": True, "latency_64bit": _lat(p.retention_wait_s),
         "energy_per_bit": f"{p.retention_energy_nj_per_bit * 1e-6:g} mJ/bit",
         "throughput_mibps": ret / MIB, "throughput_mbps": ret / 1e6, "throughput_stated_mbps": None},
        {"name": "drangesim", "year": 2018, "entropy_source": "activation failures", "true_random": True,
         "streaming": True,
         "latency_64bit": f"{d.latency_min_ns:g} ns < x < {d.latency_max_ns:g} ns",
         "energy_per_bit": f"{d.energy_nj_per_bit:g} nJ/bit",
         "throughput_mibps": None, "throughput_mbps": d.max_mbps, "throughput_stated_mbps": None},
    ]
    ratios = {"max_vs_pyo": d.max_mbps / p.pyo_stated_mbps, "avg_vs_pyo": d.avg_mbps / p.pyo_stated_mbps,
              "max_vs_pyo_recomputed": d.max_mbps / (pyo / 1e6)}
    ordering = {
        "throughput_drange_gt_pyo": d.avg_mbps > pyo / 1e6 and d.avg_mbps > p.pyo_stated_mbps,
        "throughput_pyo_gt_retention": pyo > ret,
        "energy_drange_lt_retention": d.energy_nj_per_bit < p.retention_energy_nj_per_bit,
    }
    return Comparison(rows, ratios, ordering)
