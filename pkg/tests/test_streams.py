import numpy as np
from hypothesis import given, strategies as st

from drangesim import streams
from drangesim.streams import SampleStream


def test_hash_is_deterministic_and_key_sensitive():
    k = streams.derive_key(1, np.arange(4), streams.TAG_READ)
    assert np.array_equal(streams.hash_draw(k, 3), streams.hash_draw(k, 3))
    assert len(set(k.tolist())) == 4
    other = streams.derive_key(2, np.arange(4), streams.TAG_READ)
    assert not np.array_equal(k, other)
    assert not np.array_equal(k, streams.derive_key(1, np.arange(4), streams.TAG_RNG))


def test_uniform_range_and_mean():
    k = streams.derive_key(0, np.arange(1000), 5)
    u = streams.uniform(k[:, None], np.arange(100)[None, :])
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.01


@given(st.floats(0, 1), st.floats(0, 1))
def test_bernoulli_monotone_in_p(p, q):
    lo, hi = sorted((p, q))
    k = streams.derive_key(3, np.arange(50), 9)
    c = np.arange(40)
    a = streams.bernoulli(k[:, None], c[None, :], lo)
    b = streams.bernoulli(k[:, None], c[None, :], hi)
    assert not (a & ~b).any()


def test_take_is_order_independent(small_device):
    s1, s2 = SampleStream(small_device), SampleStream(small_device)
    a = s1.take([5, 2, 9], 4)
    b = s2.take([9, 5, 2], 4)
    assert np.array_equal(a[0], b[1]) and np.array_equal(a[2], b[0])
    assert np.array_equal(s1.position([2, 5, 9]), [4, 4, 4])


def test_skip_and_start(small_device):
    s = SampleStream(small_device, start=100)
    s.skip([0], 7)
    assert s.take([0], 1)[0, 0] == 107
