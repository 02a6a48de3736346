"""Counter-based uniform streams: reproducibility and distribution."""
import numpy as np
from scipy import stats

from pdmpkit.rng import AUXILIARY, DESTINATION, HOLDING, UniformStream, replication_streams


def test_same_key_same_sequence():
    a = [UniformStream(42, 3, HOLDING).next() for _ in range(50)]
    b = [UniformStream(42, 3, HOLDING).next() for _ in range(50)]
    assert a == b


def test_distinct_keys_decorrelate():
    base = [UniformStream(42, 3, HOLDING).next() for _ in range(50)]
    for seed, rep, sid in [(43, 3, HOLDING), (42, 4, HOLDING), (42, 3, DESTINATION)]:
        other = [UniformStream(seed, rep, sid).next() for _ in range(50)]
        assert base != other


def test_open_interval():
    s = UniformStream(0, 0, AUXILIARY)
    us = [s.next() for _ in range(20000)]
    assert min(us) > 0.0
    assert max(us) < 1.0


def test_uniformity():
    s = UniformStream(7, 0, HOLDING)
    us = [s.next() for _ in range(5000)]
    assert stats.kstest(us, "uniform").pvalue > 0.01


def test_replication_streams_are_disjoint():
    hold, dest = replication_streams(9, 2)
    assert [hold.next() for _ in range(20)] != [dest.next() for _ in range(20)]


def test_streams_pick_up_where_left_off():
    s = UniformStream(5, 5, HOLDING)
    first = [s.next() for _ in range(10)]
    fresh = UniformStream(5, 5, HOLDING)
    both = [fresh.next() for _ in range(20)]
    assert both[:10] == first
    assert np.all(np.diff(sorted(both)) > 0)  # 53-bit draws should not collide
