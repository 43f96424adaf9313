import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fadesched.errors import CapacityError, ModelError
from fadesched.fading import (
    FOUR_LINK_MEANS,
    FOUR_LINK_PMFS,
    FOUR_LINK_RATE_VALUES,
    FactoredFadingModel,
    FadingModel,
    build_product_model,
    four_link_factored,
    max_entropy_pmf,
    mean_rates,
    sample_state,
    sample_states,
    two_state_model,
)
from strategies import fading_models


def test_single_state_mean_is_the_rate():
    m = FadingModel.static([1.5, 2.0])
    assert mean_rates(m).tolist() == [1.5, 2.0]


def test_two_state_model_means():
    m = two_state_model(0.1)
    # 0.5 * 1 + 0.5 * 0.1 on each link
    assert mean_rates(m) == pytest.approx([0.55, 0.55], abs=1e-15)


def test_four_link_pmfs_reproduce_means():
    model = four_link_factored().expand()
    assert model.num_states == 256
    assert math.fsum(model.pi) == pytest.approx(1.0, abs=1e-12)
    assert mean_rates(model) == pytest.approx(FOUR_LINK_MEANS, abs=1e-12)


def test_four_link_pmfs_are_max_entropy():
    for pmf, mean in zip(FOUR_LINK_PMFS, FOUR_LINK_MEANS):
        assert max_entropy_pmf(FOUR_LINK_RATE_VALUES, mean) == pytest.approx(pmf, abs=1e-12)
        # Exponential-family shape: constant ratio between consecutive probabilities.
        ratios = np.array(pmf[1:]) / np.array(pmf[:-1])
        assert np.ptp(ratios) < 1e-9


def test_product_means_equal_pmf_means_exactly():
    f = four_link_factored()
    expected = [sum(p * c for p, c in zip(pmf, FOUR_LINK_RATE_VALUES)) for pmf in FOUR_LINK_PMFS]
    assert mean_rates(f.expand()).tolist() == expected


def test_single_link_product_is_the_link_model():
    m = build_product_model([[0.3, 0.7]], [[1.0, 2.0]])
    assert m.pi.tolist() == [0.3, 0.7]
    assert m.rates.tolist() == [[1.0, 2.0]]


def test_product_mixed_radix_order():
    m = build_product_model([[0.5, 0.5], [0.25, 0.75]], [[1.0, 2.0], [3.0, 4.0]])
    # link 0 is the most significant digit
    assert m.rates.tolist() == [[1, 1, 2, 2], [3, 4, 3, 4]]
    assert m.pi.tolist() == [0.125, 0.375, 0.125, 0.375]


def test_product_cap():
    f = FactoredFadingModel(tuple([np.full(4, 0.25)] * 5), tuple([np.arange(1.0, 5.0)] * 5))
    with pytest.raises(CapacityError):
        f.expand(cap=512)


@pytest.mark.parametrize(
    "pi, rates",
    [
        ([0.5, 0.6], [[1, 1]]),
        ([0.5, 0.5], [[1, -1]]),
        ([1.0], [[0.0]]),
        ([0.5, 0.5], [[1, 2, 3]]),
    ],
)
def test_invalid_models_rejected(pi, rates):
    with pytest.raises(ModelError):
        FadingModel(pi, rates)


def test_transition_checks():
    with pytest.raises(ModelError, match="irreducible"):
        FadingModel([0.5, 0.5], [[1, 1]], transition=[[1, 0], [0, 1]])
    with pytest.raises(ModelError, match="stationary"):
        FadingModel([0.9, 0.1], [[1, 1]], transition=[[0, 1], [1, 0]])


def test_degenerate_pi_always_first_state():
    m = FadingModel([1.0, 0.0], [[1.0, 2.0]])
    rng = np.random.default_rng(0)
    assert set(sample_states(m, rng, 1000).tolist()) == {0}
    assert sample_state(m, rng) == 0


def test_deterministic_chain_alternates():
    m = FadingModel([0.5, 0.5], [[1.0, 2.0]], transition=[[0, 1], [1, 0]])
    rng = np.random.default_rng(3)
    seq = sample_states(m, rng, 6, previous=0, markov=True)
    assert seq.tolist() == [1, 0, 1, 0, 1, 0]
    assert sample_state(m, rng, current=1) == 0


def test_factored_marginals_match_pmfs():
    f = four_link_factored()
    m = f.expand()
    rng = np.random.default_rng(11)
    n = 100_000
    states = sample_states(m, rng, n)
    for l, pmf in enumerate(f.pmfs):
        # state digit of link l in the mixed-radix index
        digit = states // 4 ** (3 - l) % 4
        counts = np.bincount(digit, minlength=4) / n
        sd = np.sqrt(pmf * (1 - pmf) / n)
        assert np.all(np.abs(counts - pmf) <= 3 * sd + 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: fading_models(n)), st.floats(0.1, 10), st.data())
def test_rescaling_one_link_rescales_its_mean(model, k, data):
    l = data.draw(st.integers(0, model.num_links - 1))
    rates = model.rates.copy()
    rates[l] *= k
    scaled = FadingModel(model.pi, rates)
    assert scaled.mean_rates()[l] == pytest.approx(k * model.mean_rates()[l], rel=1e-12)
    others = [i for i in range(model.num_links) if i != l]
    assert scaled.mean_rates()[others].tolist() == model.mean_rates()[others].tolist()


def test_mean_model_is_static():
    m = two_state_model(0.1).mean_model()
    assert m.num_states == 1
    assert m.rates[:, 0] == pytest.approx([0.55, 0.55])
