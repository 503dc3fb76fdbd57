import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prophet_lab.values import (NEVER, Empirical, Exponential, FiniteDiscrete, Instance, PointMass, TaggedValue,
                                Uniform, compare_tagged)

FAMILIES = [
    Uniform(0.0, 1.0),
    Uniform(-2.0, 3.5),
    Exponential(1.0),
    Exponential(0.3),
    FiniteDiscrete((0.0, 1.0), (0.5, 0.5)),
    FiniteDiscrete((3.0, -1.0, 2.0, 7.0), (0.1, 0.2, 0.3, 0.4)),
    PointMass(1.0),
    Empirical([1.0, 2.0, 2.0, 5.0]),
]

tagged = st.builds(TaggedValue, st.floats(-10, 10, allow_nan=False), st.floats(0, 1, exclude_max=True))


@pytest.mark.parametrize("a, b, expected", [
    ((3.0, 0.2), (2.0, 0.9), 1),
    ((2.0, 0.9), (2.0, 0.1), 1),
    ((2.0, 0.5), (2.0, 0.5), 0),
])
def test_compare_tagged_examples(a, b, expected):
    assert compare_tagged(TaggedValue(*a), TaggedValue(*b)) == expected
    assert compare_tagged(TaggedValue(*b), TaggedValue(*a)) == -expected


@given(tagged, tagged, tagged)
def test_compare_is_a_total_order(a, b, c):
    assert compare_tagged(a, b) == -compare_tagged(b, a)
    if compare_tagged(a, b) <= 0 and compare_tagged(b, c) <= 0:
        assert compare_tagged(a, c) <= 0
    # the tuple order agrees with the explicit comparator
    assert (a > b) == (compare_tagged(a, b) == 1)


@given(tagged)
def test_never_exceeds_everything(a):
    assert NEVER > a
    assert compare_tagged(NEVER, a) == 1


def test_upper_quantile_examples():
    assert Uniform().upper_quantile(0.25).value == pytest.approx(0.75, abs=1e-15)
    assert FiniteDiscrete((0, 1), (0.5, 0.5)).upper_quantile(0.25) == TaggedValue(1.0, 0.5)
    for d in FAMILIES:
        assert d.upper_quantile(0.0) is NEVER


def test_tail_examples():
    assert Uniform().tail(TaggedValue(0.75, 0.5)) == pytest.approx(0.25, abs=1e-15)
    assert FiniteDiscrete((0, 1), (0.5, 0.5)).tail(TaggedValue(1.0, 0.5)) == 0.25
    for d in FAMILIES:
        assert d.tail(NEVER) == 0.0


def test_upper_quantile_rejects_bad_probability():
    with pytest.raises(ValueError):
        Uniform().upper_quantile(1.5)
    with pytest.raises(ValueError):
        Uniform().upper_quantile(-0.1)


@pytest.mark.parametrize("dist", FAMILIES, ids=str)
def test_round_trip_on_grid(dist):
    for p in np.linspace(0.0, 1.0, 101):
        assert dist.tail(dist.upper_quantile(p)) == pytest.approx(p, abs=1e-12)


@pytest.mark.parametrize("dist", FAMILIES, ids=str)
def test_vectorized_tail_and_quantile_agree_with_scalar(dist):
    u = np.linspace(0.0, 1.0, 57)
    v, t = dist.quantile_from_tail(u)
    for x, (a, b) in zip(u, zip(v, t)):
        assert TaggedValue(a, b) == dist.upper_quantile(x) or x == 0.0
    tails = dist.tail_many(v, t)
    np.testing.assert_allclose(tails, u, atol=1e-12)
    rng = np.random.default_rng(0)
    probe_v, probe_t = dist.draw_many(rng, 200)
    expected = [dist.tail(TaggedValue(a, b)) for a, b in zip(probe_v, probe_t)]
    np.testing.assert_allclose(dist.tail_many(probe_v, probe_t), expected, atol=1e-15)


@pytest.mark.parametrize("dist, threshold", [
    (Uniform(), TaggedValue(0.3, 0.0)),
    (Exponential(2.0), TaggedValue(0.5, 0.0)),
    (FiniteDiscrete((0, 1), (0.5, 0.5)), TaggedValue(1.0, 0.5)),
    (FiniteDiscrete((3.0, -1.0, 2.0, 7.0), (0.1, 0.2, 0.3, 0.4)), TaggedValue(2.0, 0.25)),
    (PointMass(1.0), TaggedValue(1.0, 0.9)),
], ids=lambda x: str(x))
def test_sampling_matches_tail(dist, threshold):
    rng = np.random.default_rng(12345)
    size = 10**6
    values, ties = dist.draw_many(rng, size)
    hits = (values > threshold.value) | ((values == threshold.value) & (ties > threshold.tiebreak))
    p = dist.tail(threshold)
    se = math.sqrt(p * (1 - p) / size)
    assert abs(hits.mean() - p) <= 4 * se + 1e-12


def test_tagged_draws_pairwise_distinct():
    rng = np.random.default_rng(99)
    values, ties = PointMass(1.0).draw_many(rng, 10**6)
    # all values coincide, so distinctness rests on the tiebreak alone
    assert len(np.unique(ties)) == len(ties)
    values, ties = FiniteDiscrete((0, 1), (0.5, 0.5)).draw_many(rng, 10**6)
    pairs = np.rec.fromarrays([values, ties])
    assert len(np.unique(pairs)) == len(pairs)


def test_discrete_validation():
    with pytest.raises(ValueError):
        FiniteDiscrete((0, 1), (0.5, 0.6))
    with pytest.raises(ValueError):
        FiniteDiscrete((0, 1), (1.5, -0.5))
    FiniteDiscrete((0, 1), (0.5, 0.5 + 5e-13))


def test_draw_is_driven_by_injected_rng():
    a = Exponential(1.0).draw(np.random.default_rng(5))
    b = Exponential(1.0).draw(np.random.default_rng(5))
    assert a == b and isinstance(a, TaggedValue)


def test_empirical_resamples_stored_list():
    d = Empirical([1.0, 2.0, 2.0, 5.0])
    assert d.atoms == (1.0, 2.0, 5.0)
    assert d.tail(TaggedValue(2.0, 0.0)) == pytest.approx(0.75)
    values, _ = d.draw_many(np.random.default_rng(1), 10_000)
    assert set(np.unique(values)) == {1.0, 2.0, 5.0}


def test_instance():
    with pytest.raises(ValueError):
        Instance(())
    with pytest.raises(ValueError):
        Instance((Uniform(),), adversary="sneaky")
    inst = Instance.iid(Uniform(), 3)
    assert inst.n == 3 and inst.is_iid
    assert not Instance((Uniform(), PointMass(1.0))).is_iid
