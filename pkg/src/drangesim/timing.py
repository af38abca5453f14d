"""Command-level DRAM timing engine.

Requests are processed in list order and each command gets the earliest
cycle that satisfies every constraint against the commands listed before it.
Commands to different banks may therefore overlap; the resulting trace is
sorted by time. All constraints are ``max`` terms over earlier timestamps, so
raising any timing parameter can only delay commands.

Column commands are annotated with ``first_access``: True for the first
column access after the row's most recent ACT. Only such reads can exhibit
activation failures.
"""

import csv
import math
from dataclasses import dataclass, fields
from typing import NamedTuple

from .errors import ConfigError, ProtocolError

ACT, READ, WRITE, PRE, REF, BARRIER = "ACT", "READ", "WRITE", "PRE", "REF", "BARRIER"
NOMINAL, REDUCED = "nominal", "reduced"


@dataclass(frozen=True)
class TimingParams:
    """Timing parameters in ns; rounded up to whole clock cycles when used.

    Defaults follow an LPDDR4-3200-class part. They are calibration inputs,
    not measured values.
    """

    clock_period: float = 0.625
    trcd: float = 18.0
    trcd_reduced: float = 10.0
    tras: float = 42.0
    trp: float = 18.0
    trrd: float = 10.0
    tfaw: float = 40.0
    tccd: float = 5.0
    twr: float = 18.0
    refresh_interval: float = 3904.0
    trfc: float = 180.0

    def validate(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"timing.{f.name}", "must be > 0")
        return self

    def cycles(self, ns):
        return max(0, math.ceil(ns / self.clock_period - 1e-9))

    def with_(self, **kw):
        return TimingParams(**{**self.__dict__, **kw})

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError("timing." + sorted(bad)[0], "unknown timing field")
        return cls(**{k: float(v) for k, v in d.items()}).validate()


class Request(NamedTuple):
    kind: str
    bank: int
    row: int = -1
    col: int = -1


class Command(NamedTuple):
    time_ns: float
    cmd: str
    bank: int
    row: int
    col: int
    first_access: bool
    index: int  # position in the request list
    cycle: int


class CommandTrace:
    """Time-ordered commands of one channel."""

    def __init__(self, commands, timing, mode):
        self.commands = commands
        self.timing = timing
        self.mode = mode

    def __len__(self):
        return len(self.commands)

    def __iter__(self):
        return iter(self.commands)

    def __getitem__(self, i):
        return self.commands[i]

    def reads(self):
        return [c for c in self.commands if c.cmd == READ]

    def by_index(self):
        out = [None] * (max((c.index for c in self.commands), default=-1) + 1)
        for c in self.commands:
            out[c.index] = c
        return out

    @property
    def span_ns(self):
        if not self.commands:
            return 0.0
        return self.commands[-1].time_ns - self.commands[0].time_ns

    def counts(self):
        out = {}
        for c in self.commands:
            out[c.cmd] = out.get(c.cmd, 0) + 1
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["timestamp_ns", "cmd", "bank", "row", "col", "first_access"])
            for c in self.commands:
                wr.writerow([f"{c.time_ns:.4f}", c.cmd, c.bank, c.row, c.col,
                             int(c.first_access) if c.cmd in (READ, WRITE) else ""])


class _Bank:
    __slots__ = ("open_row", "t_act", "t_pre", "t_col", "t_rd", "t_wr", "fence", "accessed")

    def __init__(self):
        self.open_row = None
        self.t_act = None
        self.t_pre = None
        self.t_col = None
        self.t_rd = None
        self.t_wr = None
        self.fence = 0
        self.accessed = False


def schedule(requests, timing, mode=NOMINAL, refresh=False):
    """Assign the earliest legal cycle to each request.

    ``refresh`` enables the periodic blackout: no command may issue during
    the first tRFC of every refresh interval.
    """
    if mode not in (NOMINAL, REDUCED):
        raise ConfigError("mode", f"unknown mode {mode!r}")
    cy = timing.cycles
    trcd = cy(timing.trcd_reduced if mode == REDUCED else timing.trcd)
    tras, trp, trrd, tfaw = cy(timing.tras), cy(timing.trp), cy(timing.trrd), cy(timing.tfaw)
    tccd, twr, trfc = cy(timing.tccd), cy(timing.twr), cy(timing.trfc)
    trefi = cy(timing.refresh_interval)

    banks = {}
    acts = []  # ACT cycles in issue order (list order == time order via tRRD)
    ref_until = 0
    out = []
    for i, req in enumerate(requests):
        kind, b = req[0], req[1]
        if kind == REF:
            for bank in banks.values():
                if bank.open_row is not None:
                    raise ProtocolError(i, "REF while a bank is open")
            t = max([ref_until] + [bk.t_pre + trp for bk in banks.values() if bk.t_pre is not None])
            t = _blackout(t, refresh, trefi, trfc)
            ref_until = t + trfc
            out.append(Command(t * timing.clock_period, REF, -1, -1, -1, False, i, t))
            continue
        bank = banks.get(b)
        if bank is None:
            bank = banks[b] = _Bank()
        if kind == BARRIER:
            if bank.t_wr is not None:
                bank.fence = max(bank.fence, bank.t_wr + twr)
            continue
        row, col = req[2], req[3]
        t = max(bank.fence, ref_until)
        first = False
        if kind == ACT:
            if bank.open_row is not None:
                raise ProtocolError(i, f"ACT to bank {b} with row {bank.open_row} open")
            if bank.t_pre is not None:
                t = max(t, bank.t_pre + trp)
            if acts:
                t = max(t, acts[-1] + trrd)
            if len(acts) >= 4:
                t = max(t, acts[-4] + tfaw)
        elif kind in (READ, WRITE):
            if bank.open_row is None:
                raise ProtocolError(i, f"{kind} to closed bank {b}")
            if row >= 0 and row != bank.open_row:
                raise ProtocolError(i, f"{kind} to row {row} but row {bank.open_row} is open")
            t = max(t, bank.t_act + trcd)
            if bank.t_col is not None:
                t = max(t, bank.t_col + tccd)
            first = not bank.accessed
        elif kind == PRE:
            if bank.open_row is None:
                raise ProtocolError(i, f"PRE to closed bank {b}")
            t = max(t, bank.t_act + tras)
            if bank.t_rd is not None:
                t = max(t, bank.t_rd + tccd)
            if bank.t_wr is not None:
                t = max(t, bank.t_wr + twr)
        else:
            raise ProtocolError(i, f"unknown command {kind!r}")
        t = _blackout(t, refresh, trefi, trfc)

        if kind == ACT:
            bank.open_row, bank.t_act, bank.accessed = row, t, False
            bank.t_col = bank.t_rd = bank.t_wr = None
            acts.append(t)
        elif kind == PRE:
            out.append(Command(t * timing.clock_period, PRE, b, bank.open_row, -1, False, i, t))
            bank.open_row, bank.t_pre = None, t
            continue
        else:
            bank.accessed = True
            bank.t_col = t
            if kind == READ:
                bank.t_rd = t
            else:
                bank.t_wr = t
            row = bank.open_row
        out.append(Command(t * timing.clock_period, kind, b, row, col, first, i, t))
    out.sort(key=lambda c: (c.cycle, c.index))
    return CommandTrace(out, timing, mode)


def _blackout(t, enabled, trefi, trfc):
    if enabled and t % trefi < trfc:
        return t - t % trefi + trfc
    return t


def validate_trace(trace, timing=None, mode=None):
    """Return a list of constraint violations in ``trace`` (empty when legal).

    Works from the time-ordered trace alone, independently of the scheduler's
    bookkeeping.
    """
    timing = timing or trace.timing
    mode = mode or trace.mode
    cy = timing.cycles
    trcd = cy(timing.trcd_reduced if mode == REDUCED else timing.trcd)
    p = {k: cy(getattr(timing, k)) for k in ("tras", "trp", "trrd", "tfaw", "tccd", "twr", "trfc")}
    errs = []
    cmds = list(trace)
    for a, b in zip(cmds, cmds[1:]):
        if b.cycle < a.cycle:
            errs.append(f"timestamps decrease at request {b.index}")
    act_times = [c.cycle for c in cmds if c.cmd == ACT]
    for a, b in zip(act_times, act_times[1:]):
        if b - a < p["trrd"]:
            errs.append(f"tRRD violated at cycle {b}")
    for i in range(4, len(act_times)):
        if act_times[i] - act_times[i - 4] < p["tfaw"]:
            errs.append(f"tFAW violated at cycle {act_times[i]}")
    per_bank = {}
    for c in cmds:
        if c.cmd != REF:
            per_bank.setdefault(c.bank, []).append(c)
    refs = [c.cycle for c in cmds if c.cmd == REF]
    for bank, seq in per_bank.items():
        act = pre = None
        last_col = last_rd = last_wr = None
        open_row = None
        for c in seq:
            if c.cmd == ACT:
                if open_row is not None:
                    errs.append(f"bank {bank}: ACT while row open at cycle {c.cycle}")
                if pre is not None and c.cycle - pre < p["trp"]:
                    errs.append(f"bank {bank}: tRP violated at cycle {c.cycle}")
                if any(r <= c.cycle < r + p["trfc"] for r in refs):
                    errs.append(f"bank {bank}: ACT inside tRFC at cycle {c.cycle}")
                act, open_row = c.cycle, c.row
                last_col = last_rd = last_wr = None
            elif c.cmd in (READ, WRITE):
                if open_row is None or c.row != open_row:
                    errs.append(f"bank {bank}: {c.cmd} without matching ACT at cycle {c.cycle}")
                    continue
                if c.cycle - act < trcd:
                    errs.append(f"bank {bank}: tRCD violated at cycle {c.cycle}")
                if last_col is not None and c.cycle - last_col < p["tccd"]:
                    errs.append(f"bank {bank}: tCCD violated at cycle {c.cycle}")
                last_col = c.cycle
                if c.cmd == READ:
                    last_rd = c.cycle
                else:
                    last_wr = c.cycle
            elif c.cmd == PRE:
                if open_row is None:
                    errs.append(f"bank {bank}: PRE to closed bank at cycle {c.cycle}")
                    continue
                if c.cycle - act < p["tras"]:
                    errs.append(f"bank {bank}: tRAS violated at cycle {c.cycle}")
                if last_wr is not None and c.cycle - last_wr < p["twr"]:
                    errs.append(f"bank {bank}: tWR violated at cycle {c.cycle}")
                if last_rd is not None and c.cycle - last_rd < p["tccd"]:
                    errs.append(f"bank {bank}: read-to-precharge violated at cycle {c.cycle}")
                pre, open_row = c.cycle, None
    return errs


def first_access_flags(trace):
    """Recompute first-access flags from the trace alone: {request index: flag}."""
    out = {}
    touched = {}
    for c in trace:
        if c.cmd == ACT:
            touched[c.bank] = False
        elif c.cmd in (READ, WRITE):
            out[c.index] = not touched.get(c.bank, True)
            touched[c.bank] = True
    return out


# -- bank-conflict core loop -----------------------------------------------

def alg2_iteration(selections):
    """Requests for one core-loop iteration.

    ``selections`` holds ``(bank, (row1, col1), (row2, col2))`` per bank. Each
    word is activated, read (inducing failures), restored with a WRITE,
    fenced by a barrier, and precharged; the two words sit in distinct rows so
    every read follows a fresh activation.
    """
    reqs = []
    for word in (1, 2):
        for bank, w1, w2 in selections:
            row, col = w1 if word == 1 else w2
            reqs += [Request(ACT, bank, row), Request(READ, bank, row, col),
                     Request(WRITE, bank, row, col), Request(BARRIER, bank), Request(PRE, bank)]
    return reqs


def alg2_trace(selections, timing, iterations):
    reqs = []
    for _ in range(iterations):
        reqs += alg2_iteration(selections)
    return schedule(reqs, timing, REDUCED)


def _iteration_completion(trace, per_iter, timing, k):
    lo, hi = k * per_iter, (k + 1) * per_iter
    pres = [c.cycle for c in trace if c.cmd == PRE and lo <= c.index < hi]
    return max(pres) + timing.cycles(timing.trp)


def alg2_period(selections, timing):
    """Steady-state cycles per core-loop iteration for ``selections``.

    Two iterations are scheduled; the period is the difference between the
    completion (last PRE plus tRP) of the second and of the first.
    """
    per_iter = len(alg2_iteration(selections))
    trace = alg2_trace(selections, timing, 2)
    return (_iteration_completion(trace, per_iter, timing, 1)
            - _iteration_completion(trace, per_iter, timing, 0))


def alg2_loop_runtime(banks_used, timing, banks_per_channel=8):
    """Runtime in ns of one core-loop iteration on ``banks_used`` banks."""
    if not 1 <= banks_used <= banks_per_channel:
        raise ConfigError("banks_used", f"{banks_used} not in [1, {banks_per_channel}]")
    timing.validate()
    sel = [(b, (0, 0), (2, 0)) for b in range(banks_used)]
    return alg2_period(sel, timing) * timing.clock_period
