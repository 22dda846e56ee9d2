import numpy as np
import pytest

from dpwb.datagen import Dataset
from dpwb.errors import InvalidArgumentError, UnsupportedQueryError
from dpwb.kinds import DpDefinition, QueryKind
from dpwb.mechanisms import Bounds
from dpwb.rng import random_source
from dpwb.sensitivity import SamplerConfig, analytic_sensitivity, sample_sensitivity

from oracles import brute_force_bounded, brute_force_unbounded

BOUNDED, UNBOUNDED = DpDefinition.BOUNDED, DpDefinition.UNBOUNDED
DOMAINS = [(0, 1), (0, 3), (-2, 3), (0, 5), (-5, 5), (0, 10)]


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("lo, hi", DOMAINS)
@pytest.mark.parametrize("query", ["count", "sum", "mean", "var"])
def test_bounded_matches_brute_force(query, lo, hi, n):
    expected = brute_force_bounded(query, lo, hi, n)
    got = analytic_sensitivity(QueryKind(query), Bounds(lo, hi), n, BOUNDED)
    assert got == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("lo, hi", DOMAINS)
@pytest.mark.parametrize("query", ["count", "sum", "mean"])
def test_unbounded_matches_brute_force(query, lo, hi, n):
    expected = brute_force_unbounded(query, lo, hi, n)
    got = analytic_sensitivity(QueryKind(query), Bounds(lo, hi), n, UNBOUNDED)
    assert got == pytest.approx(expected, abs=1e-9)


def test_vectors():
    assert analytic_sensitivity(QueryKind.COUNT, Bounds(0, 1), 17, UNBOUNDED) == 1
    assert analytic_sensitivity(QueryKind.SUM, Bounds(0, 10), 5, BOUNDED) == 10
    assert analytic_sensitivity(QueryKind.SUM, Bounds(-3, 10), 5, UNBOUNDED) == 10
    assert analytic_sensitivity(QueryKind.MEAN, Bounds(0, 100), 1000, BOUNDED) == pytest.approx(0.1)


def test_unbounded_variance_unsupported():
    with pytest.raises(UnsupportedQueryError):
        analytic_sensitivity(QueryKind.VAR, Bounds(0, 1), 10, UNBOUNDED)


def test_invalid_n():
    with pytest.raises(InvalidArgumentError):
        analytic_sensitivity(QueryKind.SUM, Bounds(0, 1), 0, BOUNDED)


def test_order_index():
    assert SamplerConfig(gamma=0.1, m=10).order_index == 9
    assert SamplerConfig(gamma=0.1, m=1000).order_index == 900


def test_sampler_config_validation():
    with pytest.raises(InvalidArgumentError):
        SamplerConfig(gamma=0.0)
    with pytest.raises(InvalidArgumentError):
        SamplerConfig(gamma=0.1, m=5)


def test_sampler_constant_data():
    data = Dataset(np.full(50, 5.0))
    assert sample_sensitivity(QueryKind.SUM, data, SamplerConfig(), random_source(0)) == 0.0


def test_sampler_count_unsupported():
    data = Dataset(np.arange(10.0))
    with pytest.raises(UnsupportedQueryError):
        sample_sensitivity(QueryKind.COUNT, data, SamplerConfig(), random_source(0))


def test_sampler_picks_order_statistic():
    # with m=10 the 9th smallest difference is returned
    data = Dataset(np.arange(100.0))
    cfg = SamplerConfig(gamma=0.1, m=10)
    est = sample_sensitivity(QueryKind.SUM, data, cfg, random_source(5))
    r = random_source(5)
    diffs = []
    for _ in range(10):
        d = data.records[r.integers(0, 100, 100)]
        e = d.copy()
        e[r.integers(0, 100)] = data.records[r.integers(0, 100)]
        diffs.append(abs(d.sum() - e.sum()))
    assert est == sorted(diffs)[8]


def test_sampler_deterministic_for_seed():
    data = Dataset(random_source(1).uniform(0, 10, 200))
    a = sample_sensitivity(QueryKind.MEAN, data, SamplerConfig(), random_source(9))
    b = sample_sensitivity(QueryKind.MEAN, data, SamplerConfig(), random_source(9))
    assert a == b
