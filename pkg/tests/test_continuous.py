import numpy as np
import pytest

from sofkit import autodiff as ad
from sofkit import continuous as co
from sofkit import models

CENTROID = np.array([4 / (3 * np.pi), 4 / (3 * np.pi)])


@pytest.fixture(scope="module")
def region():
    return co.quarter_disc_region()


@pytest.fixture(scope="module")
def grid():
    return co.polar_quadrature(256, 256)


def uniform_density(region):
    inv = 1.0 / region.measure

    def fn(pts):
        return np.full(len(np.atleast_2d(pts)), inv)

    return fn


class TestRegion:
    def test_membership(self, region):
        assert region.indicator(np.array([[0.5, 0.5]]))[0]
        assert not region.indicator(np.array([[-0.1, 0.5]]))[0]
        assert not region.indicator(np.array([[0.9, 0.9]]))[0]

    def test_measure(self, region):
        assert region.measure == pytest.approx(np.pi / 4)

    def test_measure_validation(self):
        with pytest.raises(ValueError):
            co.Region(indicator=lambda p: p, measure=0.0, bbox=(0, 1, 0, 1))


class TestQuadrature:
    def test_constant_one_integrates_to_area(self, grid):
        assert float(np.sum(grid.weights)) == pytest.approx(np.pi / 4, abs=1e-6)

    def test_integral_of_radius(self):
        # int_0^1 int_0^{pi/2} r * r dtheta dr = pi/6; Gauss nodes are exact
        # for polynomials, midpoint converges at second order
        g = co.polar_quadrature(256, 256, rule="gauss")
        r = np.linalg.norm(g.nodes, axis=1)
        assert float(np.sum(g.weights * r)) == pytest.approx(np.pi / 6, abs=1e-6)
        m = co.polar_quadrature(256, 256)
        rm = np.linalg.norm(m.nodes, axis=1)
        assert float(np.sum(m.weights * rm)) == pytest.approx(np.pi / 6, abs=1e-5)

    def test_weights_positive(self, grid):
        assert np.all(grid.weights > 0)

    def test_degenerate_resolution(self):
        with pytest.raises(ValueError):
            co.polar_quadrature(1, 16)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            co.polar_quadrature(8, 8, rule="simpson")


class TestWIntegral:
    def test_uniform_density_has_unit_mass(self, region, grid):
        assert co.w_integral(uniform_density(region), grid) == pytest.approx(1.0, abs=1e-6)

    def test_faraway_normal_has_no_mass(self, grid):
        density = lambda pts: models.normal_density_at(pts, np.array([10.0, 10.0]), 0.35)
        assert co.w_integral(density, grid) < 1e-10

    def test_mass_bounded_by_one(self, grid):
        rng = np.random.default_rng(0)
        for _ in range(5):
            mu = rng.uniform(-0.5, 1.0, size=2)
            density = lambda pts: models.normal_density_at(pts, mu, 0.4)
            w = co.w_integral(density, grid)
            assert -1e-9 <= w <= 1.0 + 1e-9

    def test_nonfinite_density_rejected(self, grid):
        with pytest.raises(FloatingPointError):
            co.w_integral(lambda pts: np.full(len(pts), np.inf), grid)


class TestKLContinuous:
    def test_zero_at_uniform(self, region, grid):
        assert co.kl_continuous(region, uniform_density(region), grid) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_nonnegative_for_normals(self, region, grid):
        rng = np.random.default_rng(1)
        for _ in range(5):
            mu = rng.uniform(0.0, 1.0, size=2)
            density = lambda pts: models.normal_density_at(pts, mu, 0.35)
            assert co.kl_continuous(region, density, grid) >= 0.0

    def test_nonpositive_density_rejected(self, region, grid):
        with pytest.raises(FloatingPointError):
            co.kl_continuous(region, lambda pts: np.zeros(len(pts)), grid)

    @pytest.mark.parametrize("sigma", [0.2, 0.35, 0.5])
    def test_gradient_vanishes_at_centroid(self, region, sigma):
        # Gauss nodes so quadrature error doesn't pollute the stationarity check
        g = co.polar_quadrature(128, 128, rule="gauss")

        def fn(params):
            density = lambda pts: models.normal_density_at(pts, params[0], sigma)
            return co.kl_continuous(region, density, g)

        leaf = ad.Node(CENTROID.copy())
        ad.backward(fn([leaf]))
        assert np.linalg.norm(leaf.grad) < 1e-6

    def test_gradient_check(self, region):
        g = co.polar_quadrature(32, 32)
        rng = np.random.default_rng(2)
        for _ in range(3):
            mu = rng.uniform(0.0, 0.8, size=2)

            def fn(params):
                density = lambda pts: models.normal_density_at(pts, params[0], 0.35)
                return co.kl_continuous(region, density, g)

            assert ad.gradient_check(fn, [mu]) < 1e-4


class TestTotalVariation:
    def test_zero_at_uniform(self, region, grid):
        assert co.tv_continuous(region, uniform_density(region), grid) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_one_for_disjoint_mass(self, region, grid):
        density = lambda pts: models.normal_density_at(pts, np.array([10.0, 10.0]), 0.35)
        assert co.tv_continuous(region, density, grid) == pytest.approx(1.0, abs=1e-6)

    def test_against_monte_carlo(self, region, grid):
        # independent oracle over an enlarged box capturing both densities
        mu = CENTROID
        sigma = 0.35
        density = lambda pts: models.normal_density_at(pts, mu, sigma)
        quad_tv = co.tv_continuous(region, density, grid)
        rng = np.random.default_rng(123)
        n = 1_000_000
        box = (-1.0, 2.0, -1.0, 2.0)
        pts = np.column_stack(
            [rng.uniform(box[0], box[1], n), rng.uniform(box[2], box[3], n)]
        )
        rho = np.where(region.indicator(pts), 1.0 / region.measure, 0.0)
        integrand = 0.5 * np.abs(rho - density(pts))
        area = (box[1] - box[0]) * (box[3] - box[2])
        mc_tv = area * integrand.mean()
        assert quad_tv == pytest.approx(mc_tv, abs=2e-3)


class TestMonteCarlo:
    def test_quarter_disc_area(self, region):
        est, se = co.monte_carlo_integrate(lambda pts: np.ones(len(pts)), region,
                                           1_000_000, seed=0)
        assert abs(est - np.pi / 4) < 3 * se

    def test_zero_function(self, region):
        est, _ = co.monte_carlo_integrate(lambda pts: np.zeros(len(pts)), region,
                                          10_000, seed=0)
        assert est == 0.0

    def test_deterministic(self, region):
        a = co.monte_carlo_integrate(lambda pts: pts[:, 0], region, 10_000, seed=7)
        b = co.monte_carlo_integrate(lambda pts: pts[:, 0], region, 10_000, seed=7)
        assert a == b

    def test_sample_count_validated(self, region):
        with pytest.raises(ValueError):
            co.monte_carlo_integrate(lambda pts: np.ones(len(pts)), region, 0, seed=0)

    def test_quadrature_agreement_for_random_normals(self, region, grid):
        rng = np.random.default_rng(11)
        for i in range(10):
            mu = rng.uniform(0.0, 1.0, size=2)
            sigma = rng.uniform(0.25, 0.6)
            density = lambda pts: models.normal_density_at(pts, mu, sigma)
            quad = co.w_integral(density, grid)
            est, se = co.monte_carlo_integrate(density, region, 1_000_000, seed=i)
            assert abs(quad - est) < 3 * se


def test_region_from_inequalities():
    # unit square corner triangle x + y <= 1
    region = co.region_from_inequalities(
        [lambda pts: pts[:, 0] + pts[:, 1] - 1.0], bbox=(0, 1, 0, 1),
        n_measure_samples=200_000, seed=0
    )
    assert region.measure == pytest.approx(0.5, abs=5e-3)
    assert region.indicator(np.array([[0.2, 0.2]]))[0]
    assert not region.indicator(np.array([[0.9, 0.9]]))[0]
