import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import logit

from drangesim.device import (CellAddress, Condition, DeviceConfig, FailureModel, WordAddress,
                              failure_probability, generate_device, sample_read)
from drangesim.errors import AddressError, ConfigError
from drangesim.patterns import SOLID0, SOLID1, all_patterns
from drangesim.streams import SampleStream

from conftest import SMALL


def test_generation_is_deterministic(small_device):
    again = generate_device(SMALL)
    for name in ("weak_bitlines", "beta0", "pref_class", "is_rng"):
        assert np.array_equal(getattr(small_device, name), getattr(again, name))
    other = generate_device(DeviceConfig(**{**SMALL.__dict__, "seed": 8}))
    assert not np.array_equal(small_device.weak_bitlines, other.weak_bitlines)


def test_weak_bitlines_per_subarray(small_device):
    c = small_device.config
    wb = small_device.weak_bitlines
    assert wb.shape == (1, 2, 2, c.weak_columns_per_subarray)
    for sub in wb.reshape(-1, wb.shape[-1]):
        assert len(set(sub.tolist())) == c.weak_columns_per_subarray
        assert sub.min() >= 0 and sub.max() < c.bitlines_per_row


def test_rng_cell_count(default_device):
    n = default_device.n_weak
    assert default_device.is_rng.sum() == round(0.001 * n)


def test_injected_cells_sit_at_half(default_device):
    w = default_device.rng_cells()
    cond = default_device.reference_condition(SOLID0)
    match = np.ones(w.size, dtype=bool)
    assert np.allclose(default_device.logit_terms(w, cond, match), 0.0, atol=1e-9)


def test_natural_cells_avoid_the_gap(default_device):
    d = default_device
    m = d.config.model
    w = np.nonzero(~d.is_rng)[0]
    cond = d.reference_condition(SOLID0)
    z = d.logit_terms(w, cond, np.ones(w.size, dtype=bool))
    assert np.all(np.abs(z) >= logit(0.5 + m.natural_gap))


@given(st.floats(18.0, 60.0), st.floats(40.0, 70.0), st.sampled_from(all_patterns()))
def test_zero_failures_at_safe_trcd(small_device, trcd, temp, pattern):
    w = np.arange(0, small_device.n_weak, 97)
    assert not small_device.fprob(w, Condition(trcd, temp, pattern)).any()


@given(st.floats(1.0, 17.9), st.floats(1.0, 17.9), st.floats(40.0, 70.0))
def test_fprob_nonincreasing_in_trcd(small_device, a, b, temp):
    lo, hi = sorted((a, b))
    w = np.arange(0, small_device.n_weak, 31)
    assert np.all(small_device.fprob(w, Condition(lo, temp)) >= small_device.fprob(w, Condition(hi, temp)))


@given(st.floats(40.0, 70.0), st.floats(40.0, 70.0))
def test_fprob_nondecreasing_in_temperature(small_device, a, b):
    lo, hi = sorted((a, b))
    w = np.arange(0, small_device.n_weak, 31)
    assert np.all(small_device.fprob(w, Condition(10, hi)) >= small_device.fprob(w, Condition(10, lo)))


def test_preferred_pattern_maximizes_fprob(small_device):
    for w in range(0, small_device.n_weak, 997):
        best = small_device.preferred_pattern(w)
        cond = Condition(10, 55, best)
        assert small_device.pattern_match([w], best)[0]
        assert small_device.fprob([w], cond)[0] >= small_device.fprob([w], Condition(10, 55, best.inverse()))[0]


@given(st.integers(0, 2 * 2 * 512 * 8 - 1))
def test_address_roundtrip(small_device, w):
    assert small_device.weak_index(small_device.address(w)) == w


def test_strong_bitline_never_fails(small_device):
    c = small_device.config
    weak = set(small_device.weak_bitlines[0, 0, 0].tolist())
    j = next(j for j in range(c.bitlines_per_row) if j not in weak)
    cell = CellAddress(0, 0, 0, 3, j // c.word_size, j % c.word_size)
    assert small_device.weak_index(cell) is None
    assert failure_probability(small_device, cell, Condition(6, 70)) == 0.0


@pytest.mark.parametrize("cell", [CellAddress(1, 0, 0, 0, 0, 0), CellAddress(0, 2, 0, 0, 0, 0),
                                  CellAddress(0, 0, 0, 512, 0, 0), CellAddress(0, 0, 0, 0, 4, 0),
                                  CellAddress(0, 0, 0, 0, 0, 64)])
def test_out_of_range_address(small_device, cell):
    with pytest.raises(AddressError):
        small_device.weak_index(cell)


def test_sample_read_only_flips_weak_bits_on_first_access(small_device):
    c = small_device.config
    word = WordAddress(0, 0, 10, 0)
    w = small_device.word_cells(word)
    cond = Condition(6, 70, SOLID1)
    stored = SOLID1.bits(word.row, np.arange(c.word_size))
    stream = SampleStream(small_device)
    assert np.array_equal(sample_read(small_device, word, cond, stream, False), stored)
    weak_bits = small_device.decompose(w)[5] % c.word_size
    flipped = np.zeros(c.word_size, dtype=bool)
    for _ in range(50):
        flipped |= sample_read(small_device, word, cond, stream, True) != stored
    assert set(np.nonzero(flipped)[0]) <= set(weak_bits.tolist())


def test_region_cells_cover_region(small_device):
    w = small_device.region_cells(0, 1, [0], range(4), None)
    assert w.size == 4 * 8
    ch, b, s, r, _, _ = small_device.decompose(w)
    assert set(b) == {1} and set(s) == {0} and set(r) == set(range(4))


def test_config_roundtrip_and_validation():
    c = DeviceConfig(seed=3, rows_per_subarray=1024)
    assert DeviceConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigError):
        DeviceConfig(rows_per_subarray=700).validate()
    with pytest.raises(ConfigError):
        DeviceConfig.from_dict({"banks": 8})
    with pytest.raises(ConfigError):
        DeviceConfig(model=FailureModel(beta_temp=-1)).validate()
    with pytest.raises(ConfigError):
        Condition(10, 90).validate()


def test_weak_column_dump(small_device, tmp_path):
    p = tmp_path / "weak.csv"
    small_device.dump_weak_columns(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "channel,bank,subarray,column,bit"
    assert len(lines) == 1 + 2 * 2 * 8
