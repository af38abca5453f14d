import numpy as np
import pytest
from hypothesis import given, strategies as st

from drangesim.errors import ConfigError
from drangesim.patterns import SOLID0, SOLID1, WALK_PERIOD, DataPattern, all_patterns

PATTERNS = all_patterns()


def test_forty_distinct_patterns():
    assert len(PATTERNS) == 40
    assert len({p.name for p in PATTERNS}) == 40


@given(st.sampled_from(PATTERNS), st.integers(0, 4095), st.integers(0, 2047))
def test_inverse_complements_every_cell(p, row, bitline):
    assert p.inverse().inverse() == p
    assert p.bits(row, bitline) ^ p.inverse().bits(row, bitline) == 1


@given(st.sampled_from(PATTERNS))
def test_parse_roundtrip(p):
    assert DataPattern.parse(p.name) == p
    assert DataPattern.parse(p.name.lower()) == p


def test_base_pattern_values():
    rows, bl = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    assert (SOLID1.bits(rows, bl) == 1).all() and (SOLID0.bits(rows, bl) == 0).all()
    assert np.array_equal(DataPattern("CHECKERED").bits(rows, bl), (rows + bl) % 2)
    assert np.array_equal(DataPattern("ROW_STRIPE").bits(rows, bl), rows % 2)
    assert np.array_equal(DataPattern("COL_STRIPE").bits(rows, bl), bl % 2)
    w = DataPattern("WALK1", 3).bits(0, np.arange(2 * WALK_PERIOD))
    assert np.nonzero(w)[0].tolist() == [3, 3 + WALK_PERIOD]


def test_neighborhood_classes():
    assert SOLID0.neighborhood(0, 5) == 0
    assert SOLID1.neighborhood(0, 5) == 7
    assert DataPattern("COL_STRIPE").neighborhood(0, 5) == 0b010
    assert DataPattern("COL_STRIPE").neighborhood(0, 4) == 0b101
    assert DataPattern("WALK1", 4).neighborhood(0, 5) == 0b100


def test_every_class_is_reachable():
    classes = {int(p.neighborhood(r, j)) for p in PATTERNS for r in (0, 1) for j in range(16)}
    assert classes == set(range(8))


@pytest.mark.parametrize("bad", [("WALK1", 16), ("SOLID1", 1), ("STRIPES", 0)])
def test_invalid_patterns(bad):
    with pytest.raises(ConfigError):
        DataPattern(*bad)
