import math

import numpy as np
import pytest

from resilient_sgd.errors import ConfigurationError, DimensionMismatchError
from resilient_sgd.objectives import (
    AgentData, DataMode, DataModel, ObjectiveKind, PL_SIGMA_SEED, certified_pl_constant,
    curvature, honest_population_gradient, objective_value, population_suboptimality,
    sample_gradient, stochastic_gradient)

SC, PL = ObjectiveKind.SC_QUADRATIC, ObjectiveKind.PL_SINE


def fd_gradient(kind, x, sample, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (objective_value(kind, x + e, sample) - objective_value(kind, x - e, sample)) / (2 * h)
    return g


@pytest.mark.parametrize("kind", [SC, PL])
def test_gradient_zero_at_center(kind):
    s = np.array([0.3, -1.2, 2.0])
    assert np.array_equal(sample_gradient(kind, s, s), np.zeros(3))
    assert objective_value(kind, s, s) == 0.0


def test_pl_gradient_matches_finite_difference_at_unit_radius():
    x, s = np.array([1.0]), np.array([0.0])
    fd = (objective_value(PL, x + 1e-5, s) - objective_value(PL, x - 1e-5, s)) / 2e-5
    assert abs(sample_gradient(PL, x, s)[0] - fd) < 1e-6
    # closed form 1 + sin(2)/2
    assert sample_gradient(PL, x, s)[0] == pytest.approx(1 + math.sin(2) / 2, rel=1e-15)


@pytest.mark.parametrize("kind", [SC, PL])
def test_gradient_consistency_random_pairs(kind):
    rng = np.random.default_rng(7)
    for case in range(100):
        d = (1, 3, 10)[case % 3]
        x = rng.normal(scale=2.0, size=d)
        s = rng.normal(scale=2.0, size=d)
        g = sample_gradient(kind, x, s)
        fd = fd_gradient(kind, x, s)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-12)


def test_dimension_mismatch_names_both_dimensions():
    with pytest.raises(DimensionMismatchError, match="3.*2"):
        sample_gradient(SC, np.zeros(3), np.zeros(2))


def test_pl_radial_factor_below_threshold_uses_limit():
    x = np.array([1e-10, 0.0])
    g = sample_gradient(PL, x, np.zeros(2))
    assert np.all(np.isfinite(g))
    assert g[0] == pytest.approx(2e-10, rel=1e-15)


def test_honest_population_gradient_examples():
    x_star = np.array([1.0, -2.0, 0.5])
    u = np.array([0.1, 0.2, -0.3])
    assert np.array_equal(honest_population_gradient(SC, x_star, x_star), np.zeros(3))
    assert np.allclose(honest_population_gradient(SC, x_star + u, x_star), u, rtol=0, atol=1e-15)
    e1 = np.array([1.0, 0.0, 0.0])
    g = honest_population_gradient(PL, x_star + math.pi * e1, x_star)
    assert g == pytest.approx(math.pi * e1, abs=1e-12)


def test_population_suboptimality_examples():
    x_star = np.array([0.5, 0.5])
    for kind in (SC, PL):
        assert population_suboptimality(kind, x_star, x_star) == 0.0
    assert population_suboptimality(SC, x_star + np.array([2.0, 0.0]), x_star) == 2.0
    val = population_suboptimality(PL, x_star + np.array([0.0, math.pi]), x_star)
    assert val == pytest.approx(math.pi**2 / 2, rel=1e-14)


def test_curvature_constants():
    c = curvature(SC, 1.0, 10)
    assert (c.mu, c.lipschitz, c.sigma_sq) == (1.0, 1.0, 10.0)
    c0 = curvature(SC, 0.0, 10)
    assert (c0.mu, c0.lipschitz, c0.sigma_sq) == (1.0, 1.0, 0.0)
    p = curvature(PL, 1.0, 10)
    assert p.lipschitz == 2.0
    assert p.mu == certified_pl_constant() == 0.537
    assert p.sigma_sq_seed == PL_SIGMA_SEED
    assert curvature(PL, 0.0, 10).sigma_sq == 0.0


def test_pl_lipschitz_constant_on_radial_grid():
    # radial second derivative and tangential factor both bounded by 2 on (0, 50]
    r = np.arange(1, 50_001) * 1e-3
    radial = 1 + np.cos(2 * r)
    tangential = 1 + np.sin(2 * r) / (2 * r)
    assert radial.max() <= 2.0
    assert tangential.max() <= 2.0


def test_pl_inequality_on_grid_with_certified_mu():
    mu = certified_pl_constant()
    r = np.arange(1, 20_001) * 1e-3
    x = np.zeros((r.size, 3))
    x[:, 0] = r
    g = sample_gradient(PL, x, np.zeros(3))
    q = objective_value(PL, x, np.zeros(3))
    assert np.all(0.5 * np.einsum("ij,ij->i", g, g) >= mu * q)


@pytest.mark.parametrize("kind", [SC, PL])
def test_lipschitz_bound_random_pairs(kind):
    L = curvature(kind, 1.0, 4).lipschitz
    rng = np.random.default_rng(11)
    x = rng.normal(scale=3.0, size=(10_000, 4))
    y = rng.normal(scale=3.0, size=(10_000, 4))
    s = np.zeros(4)
    lhs = np.linalg.norm(sample_gradient(kind, x, s) - sample_gradient(kind, y, s), axis=1)
    assert np.all(lhs <= L * np.linalg.norm(x - y, axis=1) * (1 + 1e-12))


def test_zero_noise_population_oracle_is_exact():
    x_star = np.array([1.0, 2.0])
    data = AgentData(DataModel(DataMode.POPULATION, noise_std=0.0), x_star)
    x = np.array([3.0, -1.0])
    g = stochastic_gradient(SC, x, data, np.random.default_rng(0))
    assert np.array_equal(g, x - x_star)


def test_sc_population_oracle_is_unbiased():
    d, m = 10, 100_000
    x_star = np.linspace(-1, 1, d)
    x = x_star + 0.5
    data = AgentData(DataModel(DataMode.POPULATION, noise_std=1.0), x_star)
    g = sample_gradient(SC, x, data.draw(np.random.default_rng(3), m))
    err = np.linalg.norm(g.mean(axis=0) - honest_population_gradient(SC, x, x_star))
    assert err <= 3 * math.sqrt(d / m)


def test_finite_sample_enumeration_gives_empirical_gradient():
    rng = np.random.default_rng(5)
    x_star = rng.normal(size=4)
    data = AgentData.generate(DataModel(DataMode.FINITE_SAMPLE, 100, 1.0), x_star, rng)
    assert data.samples.shape == (100, 4)
    x = rng.normal(size=4)
    mean_grad = np.mean([sample_gradient(SC, x, s) for s in data.samples], axis=0)
    assert np.allclose(mean_grad, x - data.samples.mean(axis=0), rtol=0, atol=1e-13)


def test_finite_sample_without_samples_is_configuration_error():
    with pytest.raises(ConfigurationError):
        AgentData(DataModel(DataMode.FINITE_SAMPLE, 100, 1.0), np.zeros(2), np.empty((0, 2)))
    with pytest.raises(ConfigurationError):
        DataModel(DataMode.FINITE_SAMPLE, 0, 1.0)


@pytest.mark.parametrize("kind", [SC, PL])
def test_noise_variance_within_bound(kind):
    d, m = 10, 100_000
    sigma_sq = curvature(kind, 1.0, d).sigma_sq
    data = AgentData(DataModel(DataMode.POPULATION, noise_std=1.0), np.zeros(d))
    rng = np.random.default_rng(99)
    for radius in (0.0, 1.0, 2.0, 5.0):
        x = np.zeros(d)
        x[0] = radius
        g = sample_gradient(kind, x, data.draw(rng, m))
        # noise is measured around E[g]; for the sine loss E[g] is not the
        # gradient at the noiseless sample, so the empirical mean stands in
        mean = honest_population_gradient(kind, x, np.zeros(d)) if kind is SC else g.mean(axis=0)
        noise = g - mean
        second = np.mean(np.einsum("ij,ij->i", noise, noise))
        assert second <= 1.05 * sigma_sq, (radius, second, sigma_sq)
