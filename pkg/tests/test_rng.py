from hypothesis import given
from hypothesis import strategies as st

from searchmarket.rng import RandomnessBundle


@given(st.integers(0, 2**32), st.lists(st.tuples(st.integers(0, 3), st.integers(0, 600)), min_size=1, max_size=30))
def test_draws_independent_of_access_order(seed, keys):
    a = RandomnessBundle(seed)
    first = [a.fit_uniform(j, r) for j, r in keys]
    b = RandomnessBundle(seed)
    second = [b.fit_uniform(j, r) for j, r in reversed(keys)]
    assert first == list(reversed(second))


def test_streams_are_distinct():
    b = RandomnessBundle((1, 2))
    assert b.fit_uniform(0, 0) != b.fit_uniform(1, 0)
    assert b.fit_uniform(0, 0) != b.quality_uniform(0, 0)
    assert b.screen_uniform(0, 0, 0) != b.screen_uniform(0, 1, 0)
    assert RandomnessBundle((1, 2)).value_uniform(5) != RandomnessBundle((1, 3)).value_uniform(5)


def test_bits_are_monotone_in_probability():
    b = RandomnessBundle(4)
    for r in range(200):
        assert b.fit_bit(0, r, 0.3) <= b.fit_bit(0, r, 0.6)
