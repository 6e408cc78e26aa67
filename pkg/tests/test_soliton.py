import numpy as np
import pytest

from nlkg.evolve import energy, momentum
from nlkg.grid import Grid, norm_energy, pair_sub
from nlkg.soliton import (
    Boost,
    GroundStateError,
    Nonlinearity,
    SolitonParams,
    TruncationWarning,
    boosted_soliton,
    groundstate,
    groundstate_shoot,
    lorentz_matrix,
    soliton_sum,
    velocity_add,
)


class TestNonlinearity:
    def test_power_cubic_values(self):
        nl = Nonlinearity.power(3, 1.0)
        u = np.array([-2.0, 0.5, 3.0])
        assert np.allclose(nl.f(u), u**3)
        assert np.allclose(nl.fprime(u), 3 * u**2)
        assert np.allclose(nl.F(u), u**4 / 4)

    def test_power_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            Nonlinearity.power(1.0)
        with pytest.raises(ValueError):
            Nonlinearity.power(3, -1.0)

    def test_custom_accepts_cubic(self):
        nl = Nonlinearity.custom(lambda u: u**3, lambda u: 3 * u**2,
                                 lambda u: u**4 / 4)
        assert nl.p is None
        assert float(nl.f(2.0)) == 8.0

    def test_custom_rejects_even_function(self):
        with pytest.raises(ValueError, match="odd"):
            Nonlinearity.custom(lambda u: u**2, lambda u: 2 * u,
                                lambda u: u**3 / 3)

    def test_custom_rejects_defocusing(self):
        with pytest.raises(ValueError, match="focusing"):
            Nonlinearity.custom(lambda u: -(u**3), lambda u: -3 * u**2,
                                lambda u: -(u**4) / 4)

    def test_custom_rejects_nonzero_origin(self):
        with pytest.raises(ValueError):
            Nonlinearity.custom(lambda u: u**3 + 1e-6,
                                lambda u: 3 * u**2,
                                lambda u: u**4 / 4 + 1e-6 * u)


class TestGroundState:
    def test_cubic_closed_form(self, nl_cubic, grid_small, gs_small):
        # Q(x) = sqrt(2) sech(x) for the cubic nonlinearity
        assert gs_small.amplitude == pytest.approx(np.sqrt(2.0), abs=1e-14)
        expected = np.sqrt(2.0) / np.cosh(grid_small.x)
        assert np.allclose(gs_small.profile.values, expected, atol=1e-14)
        assert gs_small.residual < 1e-6
        assert gs_small.decay_rate == pytest.approx(1.0, abs=1e-3)

    def test_quintic_closed_form(self):
        grid = Grid(n=512, length=40.0)
        nl = Nonlinearity.power(5, 1.0)
        gs = groundstate(nl, grid)
        # amplitude (p+1)/(2 lam))^(1/(p-1)) = 3^(1/4)
        assert gs.amplitude == pytest.approx(3.0 ** 0.25, abs=1e-12)
        assert gs.residual < 1e-6

    def test_evaluators_match_grid_samples(self, gs_small, grid_small):
        assert np.allclose(gs_small.evaluate(grid_small.x),
                           gs_small.profile.values, atol=1e-14)
        assert np.allclose(gs_small.evaluate_deriv(grid_small.x),
                           gs_small.derivative.values, atol=1e-14)

    def test_shooting_matches_closed_form(self):
        grid = Grid(n=256, length=30.0)
        nl = Nonlinearity.custom(lambda u: np.abs(u) ** 2 * u,
                                 lambda u: 3 * np.abs(u) ** 2,
                                 lambda u: np.abs(u) ** 4 / 4)
        gs = groundstate_shoot(nl, grid)
        assert gs.amplitude == pytest.approx(np.sqrt(2.0), abs=1e-9)
        exact = np.sqrt(2.0) / np.cosh(grid.x)
        assert np.max(np.abs(gs.profile.values - exact)) < 1e-5

    def test_shooting_failure_reported(self):
        grid = Grid(n=256, length=30.0)
        # focusing only beyond the bracket scan's amplitude ceiling
        nl = Nonlinearity.power(3, 1.0)
        with pytest.raises(GroundStateError):
            groundstate_shoot(nl, grid, s_max=0.5)


class TestBoost:
    def test_gamma(self):
        assert Boost(0.0).gamma == 1.0
        assert Boost(0.6).gamma == pytest.approx(1.25)

    def test_rejects_superluminal(self):
        with pytest.raises(ValueError):
            Boost(1.0)


class TestLorentz:
    def test_matrix_preserves_metric(self):
        eta = np.diag([-1.0, 1.0, 1.0])
        M = lorentz_matrix([0.3, -0.4])
        assert np.allclose(M @ eta @ M.T, eta, atol=1e-14)

    def test_identity_at_zero(self):
        assert np.allclose(lorentz_matrix([0.0]), np.eye(2))

    def test_rejects_superluminal(self):
        with pytest.raises(ValueError):
            lorentz_matrix([0.8, 0.8])

    def test_velocity_add_collinear(self):
        assert velocity_add(0.5, 0.5) == pytest.approx(0.8)
        assert velocity_add(0.3, 0.0) == pytest.approx(0.3)
        assert velocity_add(0.3, -0.3) == pytest.approx(0.0, abs=1e-15)

    def test_velocity_add_stays_subluminal(self, rng):
        for _ in range(50):
            x, y = rng.uniform(-0.99, 0.99, size=2)
            assert abs(velocity_add(float(x), float(y))) < 1.0

    def test_velocity_add_rejects_unit_ball_violation(self):
        with pytest.raises(ValueError):
            velocity_add(1.0, 0.5)


class TestSolitonParams:
    def test_centers(self, nl_cubic):
        params = SolitonParams((-0.3, 0.4), (1.0, -1.0), nl_cubic)
        assert params.n_solitons == 2
        assert np.allclose(params.centers(10.0), [-2.0, 3.0])

    def test_rejects_unsorted(self, nl_cubic):
        with pytest.raises(ValueError):
            SolitonParams((0.4, -0.3), (0.0, 0.0), nl_cubic)

    def test_rejects_duplicates(self, nl_cubic):
        with pytest.raises(ValueError):
            SolitonParams((0.4, 0.4), (0.0, 0.0), nl_cubic)

    def test_rejects_length_mismatch(self, nl_cubic):
        with pytest.raises(ValueError):
            SolitonParams((0.4,), (0.0, 0.0), nl_cubic)


class TestBoostedSoliton:
    def test_rest_soliton_is_ground_state(self, gs_small, grid_small):
        U = boosted_soliton(gs_small, Boost(0.0), 0.0, 0.0, grid_small)
        assert np.allclose(U.first.values, gs_small.profile.values)
        assert np.allclose(U.second.values, 0.0)

    def test_profile_contraction_and_velocity(self, gs_small, grid_small):
        b = Boost(0.6)
        U = boosted_soliton(gs_small, b, 0.0, 0.0, grid_small)
        xi = grid_small.wrap(grid_small.x)
        assert np.allclose(U.first.values, gs_small.evaluate(b.gamma * xi),
                           atol=1e-14)
        assert np.allclose(
            U.second.values,
            -0.6 * b.gamma * gs_small.evaluate_deriv(b.gamma * xi),
            atol=1e-14)

    def test_energy_scales_with_gamma(self, gs_small, grid_small, nl_cubic):
        # cubic soliton energy gamma * 4/3 (rest energy 4/3)
        e0 = energy(boosted_soliton(gs_small, Boost(0.0), 0.0, 0.0,
                                    grid_small), nl_cubic)
        e6 = energy(boosted_soliton(gs_small, Boost(0.6), 0.0, 0.0,
                                    grid_small), nl_cubic)
        assert e0 == pytest.approx(4.0 / 3.0, rel=1e-10)
        assert e6 == pytest.approx(1.25 * 4.0 / 3.0, rel=1e-10)

    def test_momentum_sign(self, gs_small, grid_small):
        P = momentum(boosted_soliton(gs_small, Boost(0.6), 0.0, 0.0,
                                     grid_small))
        assert P < 0.0

    def test_warns_near_wrap(self, gs_small, grid_small):
        with pytest.warns(TruncationWarning):
            boosted_soliton(gs_small, Boost(0.0),
                            0.5 * grid_small.length - 1.0, 0.0, grid_small)


def test_soliton_sum_superposes(gs_small, grid_small, nl_cubic):
    params = SolitonParams((-0.3, 0.4), (0.0, 0.0), nl_cubic)
    t = 20.0
    R = soliton_sum(params, gs_small, t, grid_small)
    R1 = boosted_soliton(gs_small, Boost(-0.3), 0.0, t, grid_small)
    R2 = boosted_soliton(gs_small, Boost(0.4), 0.0, t, grid_small)
    diff_u = R.first.values - R1.first.values - R2.first.values
    assert np.max(np.abs(diff_u)) < 1e-14
    assert norm_energy(pair_sub(R, R1)) > 0.0
