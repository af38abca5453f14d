import pytest
from hypothesis import given, strategies as st

from drangesim import bench, calibration as cal
from drangesim.errors import ConfigError, InputError
from drangesim.timing import TimingParams, alg2_trace

SEL8 = [(b, (0, 0), (2, 0)) for b in range(8)]


def test_throughput_formula():
    assert bench.trng_throughput([2] * 8, 100.0) == pytest.approx(160.0)
    assert bench.trng_throughput([2] * 8, 100.0, channels=4) == pytest.approx(640.0)
    assert bench.trng_throughput([0], 100.0) == 0.0
    for bad in (([], 1.0), ([1], 0.0)):
        with pytest.raises(InputError):
            bench.trng_throughput(*bad)


def test_calibrated_loop_runtime_is_derived():
    assert cal.LOOP_RUNTIME_NS == pytest.approx(64 / 179.4 * 1000)
    assert bench.calibrated_throughput() == pytest.approx(179.4)
    assert bench.calibrated_throughput(cal.AVG_BITS_PER_BANK) == pytest.approx(108.9)


@given(st.lists(st.integers(0, 8), min_size=8, max_size=8))
def test_curve_monotone_and_bounded(rates):
    curve, raw = bench.throughput_curve(rates)
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert all(c >= r for c, r in zip(curve, raw))
    for x, v in enumerate(curve, 1):
        assert v <= x * curve[0] + 1e-9


def test_report_quantiles(tmp_path):
    rep = bench.throughput_report([[2] * 8, [4] * 8, [1] * 8])
    q = rep.quantiles()
    assert [r[0] for r in q] == list(range(1, 9))
    assert q[0][3] == pytest.approx(2 / 121.25 * 1000)
    rep.to_csv(tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().startswith("bank_count,min,q1,median,q3,max")


def test_duty_cycle():
    assert bench.duty_cycled_throughput(108.9, 0.5) == pytest.approx(54.45)
    with pytest.raises(InputError):
        bench.duty_cycled_throughput(100, 1.5)


def test_latency_formula():
    assert bench.latency_64bit(1, 1, 1, 100, 10) == 100 + 63 * 10
    assert bench.latency_64bit(4, 8, 4, 100, 10) == 100
    assert bench.latency_64bit(3, 1, 1, 50, 1) == 50 + 21
    with pytest.raises(InputError):
        bench.latency_64bit(0, 1, 1)


def test_storage_overhead():
    assert bench.storage_overhead(6, 32768) == pytest.approx(0.000183, abs=1e-6)
    with pytest.raises(InputError):
        bench.storage_overhead(6, 0)


def test_energy_calibration_point():
    tr = alg2_trace(SEL8, TimingParams(), 100)
    assert bench.energy_per_bit(tr, 100 * 8 * 8) == pytest.approx(4.4, rel=1e-3)


@given(st.integers(1, 30))
def test_energy_linear_without_background(n):
    m = bench.EnergyModel(background_mw=40.0, idle_mw=40.0)
    one = bench.trace_energy_nj(alg2_trace(SEL8, TimingParams(), 1), m)
    assert bench.trace_energy_nj(alg2_trace(SEL8, TimingParams(), n), m) == pytest.approx(n * one)
    assert bench.trace_energy_nj(alg2_trace(SEL8, TimingParams(), n), m.scaled(2)) == pytest.approx(2 * n * one)


def test_baseline_closed_forms():
    p = bench.BaselineParams()
    assert bench.pyo_throughput_bps(p) / 1e6 == pytest.approx(3.5556, abs=1e-4)
    assert bench.pyo_throughput_bps(p) / bench.MIB == pytest.approx(3.40, rel=0.01)
    assert bench.pyo_latency_s(p) == pytest.approx(18e-6)
    assert bench.retention_throughput_bps(p) / bench.MIB == pytest.approx(0.05)


@given(st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(0.5, 1.5))
def test_orderings_survive_perturbation(a, b, c, d):
    p = bench.BaselineParams()
    p = p.with_(pyo_cycles_per_byte=p.pyo_cycles_per_byte * a, pyo_clock_hz=p.pyo_clock_hz * b,
                retention_wait_s=p.retention_wait_s * c,
                retention_energy_nj_per_bit=p.retention_energy_nj_per_bit * d)
    assert bench.compare_baselines(p).ordering_ok


def test_comparison_outputs(tmp_path):
    cmp = bench.compare_baselines()
    names = [r["name"] for r in cmp.rows]
    assert names == ["Pyo+", "Keller+", "Tehranipoor+", "Sutar+", "drangesim"]
    assert [r["streaming"] for r in cmp.rows] == [True, True, False, True, True]
    cmp.to_csv(tmp_path / "t2.csv")
    md = cmp.to_markdown()
    assert "211.1x" in md and "128.1x" in md
    with pytest.raises(ConfigError):
        bench.BaselineParams(pyo_clock_hz=0).validate()
