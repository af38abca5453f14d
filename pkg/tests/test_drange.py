import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drangesim.device import Condition, DeviceConfig, WordAddress, generate_device
from drangesim.drange import (RngCellCatalog, binary_entropy, generate_random, identify_rng_cells,
                              pack_bits, reserved_rows, sample_cell_bits, select_words,
                              symbol_balanced, symbol_counts, unpack_bits)
from drangesim.errors import ConfigError, InputError, UnavailableError
from drangesim.patterns import SOLID0
from drangesim.streams import SampleStream
from drangesim.timing import TimingParams

from conftest import SMALL

RICH = DeviceConfig(**{**SMALL.__dict__, "rng_cell_fraction": 0.2})


@pytest.fixture(scope="module")
def rich():
    dev = generate_device(RICH)
    return dev, identify_rng_cells(dev)


def test_symbol_counts():
    bits = np.array([0, 0, 0, 1, 1, 1, 0, 1, 0, 1])
    assert symbol_counts(bits).tolist() == [[1, 0, 1, 0, 0, 0, 0, 1]]
    assert symbol_counts(bits, overlapping=True).sum() == bits.size - 2


def test_symbol_balance_tolerance():
    assert symbol_balanced([[10] * 8], 0.0)[0]
    assert symbol_balanced([[11, 9, 10, 10, 10, 10, 10, 10]], 0.1)[0]
    assert not symbol_balanced([[12, 8, 10, 10, 10, 10, 10, 10]], 0.1)[0]


def test_binary_entropy():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.43) == pytest.approx(0.98575, abs=1e-4)


@given(st.lists(st.integers(0, 1), max_size=200))
def test_pack_roundtrip(bits):
    b = np.array(bits, dtype=np.uint8)
    assert np.array_equal(unpack_bits(pack_bits(b), b.size), b)


def test_pack_is_lsb_first():
    assert pack_bits([1, 0, 0, 0, 0, 0, 0, 0, 0, 1]) == bytes([1, 2])


def test_identification_keeps_only_balanced_cells(rich):
    dev, cat = rich
    assert len(cat) > 0
    for e in cat.entries:
        w = dev.weak_index(e.cell)
        assert 0.3 < dev.fprob([w], cat.condition())[0] < 0.7
        assert e.entropy > 0.9


def test_deterministic_cells_rejected(small_device):
    w = np.arange(small_device.n_weak)
    p = small_device.fprob(w, Condition(10.0, 55.0, SOLID0))
    det = w[(p <= 0.1) | (p >= 0.9)]
    assert det.size > 1000
    assert len(identify_rng_cells(small_device, cells=det)) == 0


def test_identification_validates_inputs(small_device):
    with pytest.raises(InputError):
        identify_rng_cells(small_device, samples=10)
    with pytest.raises(ConfigError):
        identify_rng_cells(small_device, temperature=95)


def test_catalog_roundtrip(rich, tmp_path):
    _, cat = rich
    cat.save(tmp_path / "cat.json")
    back = RngCellCatalog.load(tmp_path / "cat.json")
    assert back.entries == cat.entries and back.word_index == cat.word_index
    assert back.condition() == cat.condition()
    assert sum(k * v for k, v in cat.density_histogram().items()) == len(cat)


def test_select_words_picks_densest_pair(rich):
    dev, cat = rich
    words = cat.words(dev.config.rows_per_subarray)
    for b in range(dev.config.banks_per_channel):
        sel = select_words(cat, b, dev.config.rows_per_subarray)
        assert sel is not None
        w1, w2 = sel
        assert w1.row != w2.row
        best = max(n for w, n in words.items() if w.bank == b)
        assert words[w1] == best


def test_select_words_needs_two_rows(rich):
    dev, cat = rich
    keep = [e for e in cat.entries if e.cell.bank == 0][:1]
    one = RngCellCatalog(cat.temperature, cat.trcd, cat.pattern, keep, cat.seed)
    assert select_words(one, 0, dev.config.rows_per_subarray) is None


def test_reserved_rows():
    sel = (WordAddress(0, 0, 0, 1), WordAddress(0, 0, 9, 2))
    assert reserved_rows(sel, 10) == [0, 1, 8, 9]


def test_generation(rich, tmp_path):
    dev, cat = rich
    a = generate_random(dev, cat, 5000, record_sources=True)
    b = generate_random(dev, cat, 5000)
    assert len(a) == 5000 and np.array_equal(a.bits, b.bits)
    assert a.sources.size == 5000 and a.sources.max() < len(a.cells)
    assert all(c.first_access for c in a.trace_head.reads())
    assert a.meta["restored"] and a.meta["trcd_reduced_ns"] == 10.0
    assert a.meta["period_ns"] > 0
    c = generate_random(dev, cat, 5000, stream=SampleStream(dev, 10 ** 6))
    assert not np.array_equal(a.bits, c.bits)
    files = a.save(tmp_path / "bits.bin")
    side = json.loads(open(files[1]).read())
    assert side["bit_count"] == 5000 and side["bit_order"] == "lsb-first"
    assert np.array_equal(unpack_bits(open(files[0], "rb").read(), 5000), a.bits)


def test_generation_matches_cell_streams(rich):
    dev, cat = rich
    bs = generate_random(dev, cat, 3000, record_sources=True)
    per = bs.meta["bits_per_iteration"]
    cell = bs.cells[0]
    w = dev.weak_index(cell)
    expect = sample_cell_bits(dev, w, cat.condition(), 3000 // per)
    assert np.array_equal(bs.bits[bs.sources == 0][:expect.size], expect)


def test_generation_errors(rich):
    dev, cat = rich
    with pytest.raises(UnavailableError):
        generate_random(dev, cat, 10, temperature=60)
    with pytest.raises(UnavailableError):
        generate_random(dev, {55.0: cat}, 10, temperature=70)
    empty = RngCellCatalog(55.0, 10.0, cat.pattern, [], 0)
    with pytest.raises(UnavailableError):
        generate_random(dev, empty, 10)
    with pytest.raises(InputError):
        generate_random(dev, cat, -1)
    assert len(generate_random(dev, {55.0: cat}, 0, temperature=55)) == 0


def test_generation_uses_catalog_trcd(rich):
    dev, cat = rich
    slow = generate_random(dev, cat, 100, timing=TimingParams(trcd_reduced=14.0))
    assert slow.meta["trcd_reduced_ns"] == cat.trcd
