import pytest
from hypothesis import given, strategies as st

from drangesim.errors import ConfigError, ProtocolError
from drangesim.timing import (ACT, BARRIER, NOMINAL, PRE, READ, REDUCED, REF, WRITE, Request,
                              TimingParams, alg2_loop_runtime, alg2_period, alg2_trace,
                              first_access_flags, schedule, validate_trace)

T = TimingParams()


@st.composite
def legal_requests(draw, banks=4, max_len=60):
    """A protocol-legal request list: ACT before column commands, PRE to open banks only."""
    open_rows = {}
    reqs = []
    for _ in range(draw(st.integers(1, max_len))):
        b = draw(st.integers(0, banks - 1))
        if b not in open_rows:
            row = draw(st.integers(0, 7))
            open_rows[b] = row
            reqs.append(Request(ACT, b, row))
            continue
        kind = draw(st.sampled_from([READ, WRITE, PRE, BARRIER]))
        if kind == PRE:
            del open_rows[b]
            reqs.append(Request(PRE, b))
        elif kind == BARRIER:
            reqs.append(Request(BARRIER, b))
        else:
            reqs.append(Request(kind, b, open_rows[b], draw(st.integers(0, 15))))
    return reqs


PARAMS = ["trcd", "trcd_reduced", "tras", "trp", "trrd", "tfaw", "tccd", "twr"]


def test_cycle_rounding():
    assert T.cycles(18) == 29 and T.cycles(10) == 16 and T.cycles(0.625) == 1 and T.cycles(0) == 0


@pytest.mark.parametrize("banks,ns", [(1, 121.25), (7, 140.0), (8, 160.0)])
def test_core_loop_period(banks, ns):
    assert alg2_loop_runtime(banks, T) == pytest.approx(ns)


def test_longer_trcd_lengthens_single_bank_loop():
    assert alg2_loop_runtime(1, T.with_(trcd_reduced=20.0)) == pytest.approx(122.5)


def test_loop_runtime_bank_range():
    with pytest.raises(ConfigError):
        alg2_loop_runtime(0, T)
    with pytest.raises(ConfigError):
        alg2_loop_runtime(9, T)


def test_core_loop_trace_is_legal_and_first_access():
    sel = [(b, (0, b), (2, b)) for b in range(8)]
    tr = alg2_trace(sel, T, 5)
    assert validate_trace(tr) == []
    reads = tr.reads()
    assert len(reads) == 5 * 16 and all(c.first_access for c in reads)
    acts = {c.index: c for c in tr if c.cmd == ACT}
    for r in reads:
        assert r.cycle - acts[r.index - 1].cycle == T.cycles(T.trcd_reduced)


@given(legal_requests(), st.sampled_from([NOMINAL, REDUCED]))
def test_scheduled_traces_are_legal(reqs, mode):
    tr = schedule(reqs, T, mode)
    assert validate_trace(tr) == []
    cycles = [c.cycle for c in tr]
    assert cycles == sorted(cycles)


@given(legal_requests())
def test_first_access_partition(reqs):
    tr = schedule(reqs, T)
    flags = first_access_flags(tr)
    for c in tr:
        if c.cmd in (READ, WRITE):
            assert c.first_access == flags[c.index]
    # exactly one first access per activation that is followed by a column command
    per_bank = {}
    for c in sorted(tr, key=lambda c: c.index):
        if c.cmd == ACT:
            per_bank[c.bank] = 0
        elif c.cmd in (READ, WRITE):
            per_bank[c.bank] += c.first_access
            assert per_bank[c.bank] == 1


@given(legal_requests(max_len=40), st.sampled_from(PARAMS), st.floats(1.0, 3.0))
def test_raising_a_parameter_never_advances_commands(reqs, name, k):
    base = schedule(reqs, T, REDUCED).by_index()
    slower = schedule(reqs, T.with_(**{name: getattr(T, name) * k}), REDUCED).by_index()
    for a, b in zip(base, slower):
        if a is not None:
            assert b.cycle >= a.cycle


@given(legal_requests(max_len=40))
def test_refresh_blackout_respected(reqs):
    t = T.with_(refresh_interval=100.0, trfc=20.0)
    tr = schedule(reqs, t, refresh=True)
    trefi, trfc = t.cycles(t.refresh_interval), t.cycles(t.trfc)
    assert all(c.cycle % trefi >= trfc for c in tr)


def test_ref_command():
    reqs = [Request(ACT, 0, 1), Request(PRE, 0), Request(REF, -1), Request(ACT, 0, 2)]
    tr = schedule(reqs, T).by_index()
    assert tr[2].cycle >= tr[1].cycle + T.cycles(T.trp)
    assert tr[3].cycle >= tr[2].cycle + T.cycles(T.trfc)


@pytest.mark.parametrize("reqs", [
    [Request(READ, 0, 0, 0)],
    [Request(ACT, 0, 1), Request(ACT, 0, 2)],
    [Request(PRE, 0)],
    [Request(ACT, 0, 1), Request(READ, 0, 2, 0)],
    [Request(ACT, 0, 1), Request(REF, -1)],
])
def test_protocol_errors(reqs):
    with pytest.raises(ProtocolError):
        schedule(reqs, T)


def test_validator_catches_violation():
    tr = schedule([Request(ACT, 0, 1), Request(READ, 0, 1, 0)], T, REDUCED)
    assert validate_trace(tr, T, NOMINAL) != []


def test_write_fence_delays_precharge():
    reqs = [Request(ACT, 0, 1), Request(WRITE, 0, 1, 0), Request(BARRIER, 0), Request(PRE, 0)]
    tr = schedule(reqs, T).by_index()
    assert tr[3].cycle >= tr[1].cycle + T.cycles(T.twr)


def test_params_roundtrip_and_validation(tmp_path):
    assert TimingParams.from_dict(T.to_dict()) == T
    with pytest.raises(ConfigError):
        TimingParams.from_dict({"tXYZ": 1})
    with pytest.raises(ConfigError):
        T.with_(trp=0).validate()
    tr = alg2_trace([(0, (0, 0), (2, 0))], T, 1)
    tr.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("timestamp_ns,cmd,bank,row,col,first_access")


def test_period_in_cycles():
    assert alg2_period([(0, (0, 0), (2, 0))], T) == 194
