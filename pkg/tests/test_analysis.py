import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fadesched.analysis import (
    gfs_stability_guaranteed,
    lambda_membership,
    lambdahat_membership,
    lpf,
    max_load_scale,
    subgraph_sigma,
)
from fadesched.errors import CapacityError
from fadesched.fading import FOUR_LINK_MEANS, FadingModel, four_link_factored, two_state_model
from fadesched.network import cycle_graph, path_graph, star_graph
from oracles import load_scale_bisection, lpf_oracle, region_member, sigma_bisection
from strategies import conflict_sets, fading_models, graph_from_sets

PATH_MEANS = np.array(FOUR_LINK_MEANS)


def test_single_link_sigma_and_witness():
    res = subgraph_sigma([0], [set()], [1.0])
    assert res.sigma == pytest.approx(1.0, abs=1e-12)
    assert res.beta.tolist() == pytest.approx([1.0]) and res.gamma.tolist() == pytest.approx([1.0])


def test_two_interfering_links_sigma():
    assert subgraph_sigma([0, 1], [{1}, {0}], [2.0, 0.5]).sigma == pytest.approx(1.0, abs=1e-12)


def test_six_cycle_sigma_and_witness():
    g = cycle_graph(6)
    res = subgraph_sigma(range(6), g.interference, [1.0] * 6)
    assert res.sigma == pytest.approx(2 / 3, abs=1e-9)
    # Certificate check: M beta >= M gamma with gamma a convex weight.
    assert res.gamma.sum() == pytest.approx(1.0)
    assert np.all(res.matrix @ res.beta >= res.matrix @ res.gamma - 1e-9)
    assert res.beta.sum() == pytest.approx(2 / 3, abs=1e-9)


@pytest.mark.parametrize(
    "graph, expected",
    [(path_graph(1), 1.0), (path_graph(2), 1.0), (path_graph(4), 1.0), (star_graph(4), 1.0),
     (cycle_graph(6), 2 / 3), (cycle_graph(8), 0.75)],
)
def test_lpf_reference_graphs(graph, expected):
    rep = lpf(graph)
    assert rep.sigma_star == pytest.approx(expected, abs=1e-9)
    assert rep.sigma_star == pytest.approx(lpf_oracle(graph.interference), abs=1e-6)


def test_six_cycle_minimum_at_full_cycle():
    rep = lpf(cycle_graph(6))
    assert rep.subset == tuple(range(6))
    assert rep.subset_ids == (1, 2, 3, 4, 5, 6)


def test_lpf_cap():
    with pytest.raises(CapacityError):
        lpf(path_graph(13))


def test_lpf_fast_for_eight_links():
    for g in (path_graph(8), cycle_graph(8), star_graph(8)):
        t0 = time.perf_counter()
        lpf(g)
        assert time.perf_counter() - t0 < 1.0


@settings(max_examples=25, deadline=None)
@given(conflict_sets(max_links=5), st.data())
def test_subgraph_sigma_matches_bisection(sets, data):
    n = len(sets)
    subset = data.draw(st.lists(st.integers(0, n - 1), min_size=1, unique=True))
    rates = data.draw(st.lists(st.sampled_from([0.5, 1.0, 2.0, 3.0]), min_size=n, max_size=n))
    res = subgraph_sigma(subset, sets, rates)
    assert 0 < res.sigma <= 1 + 1e-12
    assert res.sigma == pytest.approx(sigma_bisection(sets, rates, subset), abs=1e-6)


def test_lambda_zero_is_member():
    cert = lambda_membership([0.0, 0.0], two_state_model(), [{1}, {0}])
    assert cert.member
    assert [a.sum() for a in cert.alpha] == pytest.approx([1.0, 1.0])


def test_two_state_model_single_link_load():
    m = two_state_model(0.1)
    cert = lambda_membership([0.99 * 0.55, 0.0], m, [{1}, {0}])
    assert cert.member
    assert cert.service[0] >= 0.99 * 0.55 - 1e-9


def test_path_unit_load_in_mean_region_with_hand_witness():
    g = path_graph(4)
    assert lambdahat_membership([1.0] * 4, PATH_MEANS, g).member
    # Hand witness: 0.36 on {1,3}, 0.16 on {1,4}, 0.48 on {2,4}.
    service = PATH_MEANS * np.array([0.36 + 0.16, 0.48, 0.36, 0.48 + 0.16])
    assert np.all(service >= 1.0)


def test_path_load_2_1_not_in_mean_region():
    g = path_graph(4)
    cert = lambdahat_membership([2.1] * 4, PATH_MEANS, g)
    assert not cert.member
    assert cert.margin > 0
    assert np.all(cert.separator >= -1e-12)
    # links 2 and 3 interfere and 2.1 / 2.1 + 2.1 / 2.8 > 1
    assert 2.1 / 2.1 + 2.1 / 2.8 > 1
    best = max(cert.separator @ np.array(v.rates) for v in cert.schedules[0])
    assert cert.separator @ np.full(4, 2.1) - best == pytest.approx(cert.margin, abs=1e-9)


def test_fading_region_contains_unit_load_for_product_model():
    m = four_link_factored().expand()
    assert lambda_membership([1.0] * 4, m, path_graph(4)).member


def test_guarantee_examples():
    assert gfs_stability_guaranteed([0.0] * 4, 1.0, PATH_MEANS, path_graph(4))
    assert gfs_stability_guaranteed([1.0] * 4, 1.0, PATH_MEANS, path_graph(4))
    # lambda / sigma* = 0.675 per link exceeds the 6-cycle's symmetric limit of 0.5
    assert not gfs_stability_guaranteed([0.45] * 6, 2 / 3, [1.0] * 6, cycle_graph(6))
    assert gfs_stability_guaranteed([0.3] * 6, 2 / 3, [1.0] * 6, cycle_graph(6))


def test_max_load_scale_symmetric_six_cycle():
    assert max_load_scale([1.0] * 6, FadingModel.static([1.0] * 6), cycle_graph(6)) == pytest.approx(0.5)


@settings(max_examples=25, deadline=None)
@given(conflict_sets(max_links=4).flatmap(lambda s: st.tuples(st.just(s), fading_models(len(s)))), st.data())
def test_membership_agrees_with_highs(problem, data):
    sets, model = problem
    n = len(sets)
    lam = np.array(data.draw(st.lists(st.sampled_from([0.0, 0.1, 0.3, 0.6, 1.0, 1.5]), min_size=n, max_size=n)))
    ours = lambda_membership(lam, model, sets).member
    # Points very close to the boundary are excluded from the comparison.
    inside = region_member(lam + 1e-7, model.pi, model.rates, sets)
    outside = not region_member(lam - 1e-7, model.pi, model.rates, sets)
    if inside:
        assert ours
    if outside:
        assert not ours


@settings(max_examples=25, deadline=None)
@given(conflict_sets(max_links=4).flatmap(lambda s: st.tuples(st.just(s), fading_models(len(s)))), st.data())
def test_mean_region_inside_fading_region(problem, data):
    sets, model = problem
    n = len(sets)
    lam = data.draw(st.lists(st.floats(0, 2), min_size=n, max_size=n))
    if lambdahat_membership(lam, model.mean_rates(), sets).member:
        assert lambda_membership(lam, model, sets).member


@settings(max_examples=25, deadline=None)
@given(conflict_sets(max_links=4).flatmap(lambda s: st.tuples(st.just(s), fading_models(len(s)))), st.data())
def test_membership_is_monotone(problem, data):
    sets, model = problem
    n = len(sets)
    lam = np.array(data.draw(st.lists(st.floats(0, 1.5), min_size=n, max_size=n)))
    shrink = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    if lambda_membership(lam, model, sets).member:
        assert lambda_membership(lam * shrink, model, sets).member


@settings(max_examples=15, deadline=None)
@given(conflict_sets(max_links=4).flatmap(lambda s: st.tuples(st.just(s), fading_models(len(s)))), st.data())
def test_max_load_scale_matches_bisection(problem, data):
    sets, model = problem
    n = len(sets)
    d = data.draw(st.lists(st.sampled_from([0.0, 0.5, 1.0, 2.0]), min_size=n, max_size=n))
    if not any(d):
        d[0] = 1.0
    s = max_load_scale(d, model, sets)
    assert s == pytest.approx(load_scale_bisection(d, model.pi, model.rates, sets), abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(conflict_sets(max_links=6), st.data())
def test_lpf_invariant_under_rate_rescaling(sets, data):
    n = len(sets)
    g = graph_from_sets(sets)
    scale = data.draw(st.lists(st.floats(0.05, 20), min_size=n, max_size=n))
    assert lpf(g, scale).sigma_star == pytest.approx(lpf(g).sigma_star, abs=1e-6)
