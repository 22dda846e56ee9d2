import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dpwb.errors import ConfigurationError, InvalidArgumentError, NonConvergenceError
from dpwb.mechanisms import (
    Bounds,
    MechanismKind,
    MechanismSpec,
    fold_into,
    geometric_pure,
    geometric_truncated,
    is_power_of_two,
    laplace_bounded_domain,
    laplace_folded,
    laplace_pure,
    laplace_truncated,
    next_power_of_two,
    release,
    round_to_multiple,
    snapping_grid,
    snapping_laplace,
    two_sided_geometric,
    uniform_full_entropy,
)
from dpwb.rng import random_source

N = 10**6


def rng(*stream):
    return random_source(1234, *stream)


# --- Laplace, pure ---------------------------------------------------------


def test_laplace_pure_mean_abs_noise():
    x = laplace_pure(0.0, 1.0, 1.0, rng(), N)
    # |Lap(0, 1)| is Exp(1): mean 1, sd 1
    assert abs(np.mean(x)) < 5 * math.sqrt(2 / N)
    assert abs(np.mean(np.abs(x)) - 1.0) < 5 / math.sqrt(N)


def test_laplace_pure_std():
    x = laplace_pure(100.0, 1.0, 0.1, rng(), N)
    b = 10.0
    # sd of the sample variance of Laplace is sqrt(20) b^2 / sqrt(N)
    var_tol = 5 * math.sqrt(20) * b * b / math.sqrt(N)
    assert abs(np.var(x) - 2 * b * b) < var_tol
    assert np.std(x) == pytest.approx(math.sqrt(2) * 10, abs=0.1)


def test_zero_sensitivity_is_deterministic():
    assert laplace_pure(42.0, 0.0, 1.0, rng()) == 42.0
    assert np.all(laplace_pure(42.0, 0.0, 1.0, rng(), 5) == 42.0)


def test_scalar_output_type():
    assert isinstance(laplace_pure(0.0, 1.0, 1.0, rng()), float)
    assert isinstance(geometric_pure(0, 1, 1.0, rng()), int)


@pytest.mark.parametrize("eps", [0.0, -1.0, math.inf, math.nan])
def test_invalid_epsilon(eps):
    with pytest.raises(InvalidArgumentError):
        laplace_pure(0.0, 1.0, eps, rng())


def test_negative_sensitivity():
    with pytest.raises(InvalidArgumentError):
        laplace_pure(0.0, -1.0, 1.0, rng())


def test_same_seed_same_draws():
    a = laplace_pure(0.0, 1.0, 1.0, rng(7), 100)
    b = laplace_pure(0.0, 1.0, 1.0, rng(7), 100)
    assert np.array_equal(a, b)


# --- truncated / bounded-domain / folded -----------------------------------

B010 = Bounds(0.0, 10.0)


def test_truncated_stays_in_bounds():
    x = laplace_truncated(0.0, 1.0, 1e-3, B010, rng(), 10_000)
    assert x.min() >= 0 and x.max() <= 10
    # huge scale: most mass sits on the bounds
    assert np.mean((x == 0) | (x == 10)) > 0.99


def test_truncated_degenerate():
    assert laplace_truncated(5.0, 0.0, 1.0, B010, rng()) == 5.0
    assert laplace_truncated(-3.0, 0.0, 1.0, B010, rng()) == 0.0


def test_bounded_domain_in_bounds_and_degenerate():
    x = laplace_bounded_domain(5.0, 1.0, 0.01, B010, rng(), 10_000)
    assert x.min() >= 0 and x.max() <= 10
    assert laplace_bounded_domain(5.0, 0.0, 1.0, B010, rng()) == 5.0


def test_bounded_domain_matches_conditioned_laplace():
    x = laplace_bounded_domain(0.0, 1.0, 1.0, B010, rng(), 200_000)
    dist = stats.laplace(0.0, 1.0)
    norm = dist.cdf(10.0) - dist.cdf(0.0)

    def cdf(t):
        return (dist.cdf(np.clip(t, 0, 10)) - dist.cdf(0.0)) / norm

    assert stats.kstest(x, cdf).pvalue > 1e-3


def test_bounded_domain_non_convergence():
    with pytest.raises(NonConvergenceError):
        laplace_bounded_domain(1e4, 1.0, 1.0, B010, rng())


@pytest.mark.parametrize("raw, expected", [(12.0, 8.0), (-3.0, 3.0), (23.0, 3.0), (5.0, 5.0), (10.0, 10.0), (0.0, 0.0)])
def test_fold_into(raw, expected):
    assert fold_into(raw, 0.0, 10.0) == pytest.approx(expected, abs=1e-12)


def test_fold_into_matches_repeated_reflection():
    def reflect(x, lo, hi):
        while not lo <= x <= hi:
            x = 2 * hi - x if x > hi else 2 * lo - x
        return x

    for x in np.linspace(-57.3, 61.9, 401):
        assert fold_into(x, -2.0, 3.5) == pytest.approx(reflect(x, -2.0, 3.5), abs=1e-9)


def test_folded_in_bounds():
    x = laplace_folded(5.0, 1.0, 0.01, B010, rng(), 10_000)
    assert x.min() >= 0 and x.max() <= 10
    assert laplace_folded(5.0, 0.0, 1.0, B010, rng()) == 5.0


@settings(max_examples=60, deadline=None)
@given(
    value=st.floats(-1e3, 1e3),
    lo=st.floats(-100, 100),
    width=st.floats(0.5, 100),
    eps=st.floats(1e-3, 10),
    seed=st.integers(0, 2**32),
)
def test_bounded_variants_respect_bounds(value, lo, width, eps, seed):
    b = Bounds(lo, lo + width)
    r = random_source(seed)
    for f in (laplace_truncated, laplace_folded):
        x = f(value, 1.0, eps, b, r, 64)
        assert np.all((x >= b.lower) & (x <= b.upper))


# --- geometric ---------------------------------------------------------------


@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_two_sided_geometric_zero_probability(eps):
    alpha = math.exp(-eps)
    closed = (1 - alpha) / (1 + alpha)
    # brute-force normalisation of P(Z=k) = closed * alpha^|k|
    ks = np.arange(-2000, 2001)
    assert np.sum(closed * alpha ** np.abs(ks)) == pytest.approx(1.0, abs=1e-12)
    z = two_sided_geometric(alpha, rng(), N)
    sigma = math.sqrt(closed * (1 - closed) / N)
    assert abs(np.mean(z == 0) - closed) < 3 * sigma


def test_two_sided_geometric_variance():
    alpha = math.exp(-1)
    z = two_sided_geometric(alpha, rng(), N)
    assert z.dtype == np.int64
    assert np.var(z) == pytest.approx(2 * alpha / (1 - alpha) ** 2, rel=0.01)


def test_geometric_huge_epsilon_is_exact():
    assert np.all(geometric_pure(7, 1, 1e3, rng(), 1000) == 7)


def test_geometric_rejects_fractional():
    with pytest.raises(InvalidArgumentError):
        geometric_pure(1.5, 1, 1.0, rng())
    with pytest.raises(InvalidArgumentError):
        geometric_pure(1, 0.5, 1.0, rng())


def test_geometric_truncated():
    x = geometric_truncated(0, 1, 0.1, Bounds(0, 1000), rng(), 10_000)
    assert x.min() >= 0
    assert geometric_truncated(-1, 1, 1e3, B010, rng()) == 0
    with pytest.raises(InvalidArgumentError):
        geometric_truncated(0, 1, 1.0, Bounds(0, 1.5), rng())


# --- snapping -------------------------------------------------------------------


def test_uniform_full_entropy_range_and_tail():
    u = uniform_full_entropy(rng(), 10**7)
    assert u.min() > 0 and u.max() < 1
    p = 2.0**-10
    sigma = math.sqrt(p * (1 - p) / u.size)
    assert abs(np.mean(u < p) - p) < 3 * sigma
    assert abs(np.mean(u[: 10**6]) - 0.5) < 0.002


def test_uniform_full_entropy_uses_fine_spacing():
    # a 53-bit uniform only yields multiples of 2**-53; small full-entropy
    # draws use the finer spacing of their own binade
    u = uniform_full_entropy(rng(), 10**6)
    small = u[u < 2.0**-10]
    assert small.size > 0
    assert np.mean(np.mod(small, 2.0**-53) != 0) > 0.99


@pytest.mark.parametrize("x, grid, expected", [(3.3, 1.0, 3.0), (3.5, 1.0, 4.0), (2.5, 1.0, 2.0), (0.7, 0.5, 0.5), (-0.2, 1.0, 0.0)])
def test_round_to_multiple(x, grid, expected):
    out = round_to_multiple(x, grid)
    assert out == expected
    assert math.copysign(1.0, out) == math.copysign(1.0, expected)


def test_round_to_multiple_rejects_non_power():
    with pytest.raises(InvalidArgumentError):
        round_to_multiple(1.0, 3.0)


def test_powers_of_two():
    assert next_power_of_two(1.0) == 1.0
    assert next_power_of_two(1.5) == 2.0
    assert next_power_of_two(0.3) == 0.5
    assert is_power_of_two(0.125) and not is_power_of_two(0.3)


def test_snapping_grid_unit():
    scale, grid = snapping_grid(1.0, 1.0)
    assert scale == 1.0 and grid == 1.0
    x = snapping_laplace(0.0, 1.0, 1.0, 20.0, rng(), 10_000)
    assert np.all(x == np.round(x)) and np.all(np.abs(x) <= 20)


def test_snapping_outputs_on_grid():
    radius = 10.0
    _, grid = snapping_grid(1.0, 0.3)
    x = snapping_laplace(3.7, 1.0, 0.3, radius, rng(), 10**5)
    on_grid = np.mod(x, grid) == 0
    assert np.all(on_grid | (np.abs(x) == radius))


def test_snapping_clamps_input_first():
    a = snapping_laplace(1e9, 1.0, 1.0, 50.0, rng(3), 1000)
    b = snapping_laplace(50.0, 1.0, 1.0, 50.0, rng(3), 1000)
    assert np.array_equal(a, b)


def test_snapping_configuration_errors():
    with pytest.raises(ConfigurationError):
        snapping_laplace(0.0, 1.0, 0.01, 10.0, rng())
    with pytest.raises(ConfigurationError):
        snapping_laplace(0.0, 1.0, 1.0, 0.0, rng())


def test_snapping_zero_sensitivity():
    assert snapping_laplace(99.0, 0.0, 1.0, 10.0, rng()) == 10.0


# --- dispatch -------------------------------------------------------------------


def test_release_requires_bounds():
    with pytest.raises(ConfigurationError):
        release(MechanismSpec(MechanismKind.LAPLACE_TRUNCATED), 0.0, 1.0, 1.0, rng())


@pytest.mark.parametrize("kind", list(MechanismKind))
def test_release_every_kind(kind):
    spec = MechanismSpec(
        kind,
        bounds=Bounds(0, 100) if kind.needs_bounds else None,
        clamp_radius=128.0 if kind is MechanismKind.SNAPPING else None,
    )
    x = release(spec, 50, 1, 1.0, rng(), 100)
    assert x.shape == (100,)
    assert abs(np.median(x) - 50) < 5
