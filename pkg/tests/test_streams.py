import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pgts.streams import BLOCK_SIZE, Purpose, RandomStream, blocks, pairwise_sum


def test_substreams_differ_by_every_key():
    s = RandomStream(1)
    ref = s.generator(Purpose.THETA, 0, 0).standard_normal(4)
    for key in [(Purpose.REWARD_NOISE, 0, 0), (Purpose.THETA, 1, 0), (Purpose.THETA, 0, 1)]:
        assert not np.array_equal(ref, s.generator(*key).standard_normal(4))
    assert not np.array_equal(ref, RandomStream(2).generator(Purpose.THETA).standard_normal(4))


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)


def test_large_seed_accepted():
    RandomStream(2**64 - 1).generator(Purpose.TAU).random()


@given(st.integers(0, 5000))
def test_blocks_partition(n):
    bl = blocks(n)
    assert sum(hi - lo for _, lo, hi in bl) == n
    assert all(hi - lo <= BLOCK_SIZE for _, lo, hi in bl)
    assert [b for b, _, _ in bl] == list(range(len(bl)))


def test_pairwise_sum_order_is_fixed():
    parts = [np.array([0.1 * i]) for i in range(7)]
    expected = (((parts[0] + parts[1]) + (parts[2] + parts[3])) + ((parts[4] + parts[5]) + parts[6]))
    assert np.array_equal(pairwise_sum(parts), expected)
    with pytest.raises(ValueError):
        pairwise_sum([])
