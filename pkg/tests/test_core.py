import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwloc.core import (
    BoundaryOverflowError,
    CoinParams,
    Direction,
    InvalidConfigError,
    InvalidParameterError,
    WalkConfig,
    WalkerState,
    apply_coin,
    apply_translation,
    coin_matrix,
    initial_state,
    step,
)
from qwloc.observables import probability_distribution

from .conftest import reference_walk

S2 = 1 / math.sqrt(2)


def random_state(rng, n_max, support):
    """Normalized random state with amplitude only on |x| <= support."""
    size = 2 * n_max + 1
    p = np.zeros(size, dtype=complex)
    m = np.zeros(size, dtype=complex)
    sl = slice(n_max - support, n_max + support + 1)
    p[sl] = rng.normal(size=2 * support + 1) + 1j * rng.normal(size=2 * support + 1)
    m[sl] = rng.normal(size=2 * support + 1) + 1j * rng.normal(size=2 * support + 1)
    norm = math.sqrt(np.sum(abs(p) ** 2) + np.sum(abs(m) ** 2))
    return WalkerState(p / norm, m / norm, n_max)


class TestCoinMatrix:
    def test_theta_zero_is_identity(self):
        np.testing.assert_allclose(coin_matrix(CoinParams(0.0)), np.eye(2), atol=1e-15)

    def test_theta_half_pi(self):
        np.testing.assert_allclose(coin_matrix(CoinParams(math.pi / 2)), [[0, 1j], [1j, 0]], atol=1e-15)

    def test_theta_quarter_pi(self):
        expected = S2 * np.array([[1, 1j], [1j, 1]])
        np.testing.assert_allclose(coin_matrix(CoinParams(math.pi / 4)), expected, atol=1e-15)

    def test_general_form(self):
        t, p1, p2 = 0.3, 0.7, -1.1
        expected = np.array([
            [math.cos(t), np.exp(1j * p1) * math.sin(t)],
            [np.exp(1j * p2) * math.sin(t), -np.exp(1j * (p1 + p2)) * math.cos(t)],
        ])
        np.testing.assert_allclose(coin_matrix(CoinParams(t, p1, p2)), expected, atol=1e-15)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidParameterError):
            CoinParams(bad)
        with pytest.raises(InvalidParameterError):
            CoinParams(0.1, phi1=bad)

    def test_unitary_for_many_angles(self, rng):
        for theta in rng.uniform(0, 2 * math.pi, 1000):
            c = coin_matrix(CoinParams(float(theta)))
            assert np.max(np.abs(c.conj().T @ c - np.eye(2))) < 1e-13

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_unitary_property(self, t, p1, p2):
        c = coin_matrix(CoinParams(t, p1, p2))
        assert np.max(np.abs(c.conj().T @ c - np.eye(2))) < 1e-13


class TestInitialState:
    def test_five(self):
        s = initial_state(5)
        assert len(s.plus_amp) == 11
        assert s.origin_index == 5
        P = probability_distribution(s).values
        assert P[5] == pytest.approx(1.0, abs=1e-15)
        assert np.count_nonzero(P) == 1

    def test_one(self):
        s = initial_state(1)
        np.testing.assert_array_equal(s.plus_amp, [0, S2, 0])
        np.testing.assert_array_equal(s.minus_amp, [0, S2, 0])

    @pytest.mark.parametrize("n", [1, 2, 17, 400])
    def test_normalized(self, n):
        assert initial_state(n).norm() == pytest.approx(1.0, abs=1e-15)

    def test_invalid(self):
        with pytest.raises(InvalidConfigError):
            initial_state(0)


class TestCoinAndTranslation:
    def test_identity_coin_leaves_state(self, rng):
        s = random_state(rng, 6, 4)
        out = apply_coin(s, CoinParams(0.0))
        np.testing.assert_allclose(out.plus_amp, s.plus_amp, atol=1e-15)
        np.testing.assert_allclose(out.minus_amp, s.minus_amp, atol=1e-15)

    def test_quarter_pi_on_initial(self):
        # hand product: (1/sqrt2)[[1, i], [i, 1]] (1/sqrt2, 1/sqrt2) = ((1+i)/2, (1+i)/2)
        out = apply_coin(initial_state(3), CoinParams(math.pi / 4))
        assert out.amplitude(0)[0] == pytest.approx((1 + 1j) / 2, abs=1e-15)
        assert out.amplitude(0)[1] == pytest.approx((1 + 1j) / 2, abs=1e-15)

    @given(st.floats(0, 2 * math.pi))
    def test_coin_preserves_norm(self, theta):
        s = random_state(np.random.default_rng(1), 5, 3)
        assert apply_coin(s, CoinParams(theta)).norm() == pytest.approx(s.norm(), abs=1e-12)

    def test_forward_moves_plus_right_minus_left(self):
        n = 3
        p = np.zeros(7, dtype=complex)
        p[n] = 1.0
        s = WalkerState(p, np.zeros(7, dtype=complex), n)
        out = apply_translation(s, Direction.FORWARD)
        assert out.amplitude(1)[0] == 1.0
        m = np.zeros(7, dtype=complex)
        m[n] = 1.0
        out = apply_translation(WalkerState(np.zeros(7, dtype=complex), m, n), "forward")
        assert out.amplitude(-1)[1] == 1.0

    def test_inverse_moves_opposite(self):
        out = apply_translation(initial_state(2), Direction.INVERSE)
        assert out.amplitude(-1)[0] == S2
        assert out.amplitude(1)[1] == S2

    @given(st.integers(0, 2**32 - 1))
    def test_forward_then_inverse_is_exact(self, seed):
        s = random_state(np.random.default_rng(seed), 8, 6)
        back = apply_translation(apply_translation(s, "forward"), "inverse")
        np.testing.assert_array_equal(back.plus_amp, s.plus_amp)
        np.testing.assert_array_equal(back.minus_amp, s.minus_amp)

    def test_translation_preserves_norm_exactly(self, rng):
        s = random_state(rng, 8, 6)
        assert apply_translation(s, "forward").norm() == s.norm()

    def test_boundary_overflow(self):
        s = initial_state(1)
        s = apply_translation(s, "forward")
        with pytest.raises(BoundaryOverflowError):
            apply_translation(s, "forward")
        # the inverse shift pulls both components back from the edges
        back = apply_translation(s, "inverse")
        assert back.amplitude(0) == (S2, S2)

    def test_inputs_not_mutated(self):
        s = initial_state(3)
        before = s.plus_amp.copy()
        step(s, CoinParams(0.4))
        np.testing.assert_array_equal(s.plus_amp, before)


class TestStep:
    def test_quarter_pi_step(self):
        P = probability_distribution(step(initial_state(4), CoinParams(math.pi / 4))).values
        assert P[4 + 1] == pytest.approx(0.5, abs=1e-15)
        assert P[4 - 1] == pytest.approx(0.5, abs=1e-15)

    def test_identity_coin_step(self):
        s = step(initial_state(2), CoinParams(0.0))
        assert s.amplitude(1) == pytest.approx((S2, 0), abs=1e-15)
        assert s.amplitude(-1) == pytest.approx((0, S2), abs=1e-15)

    def test_step_is_coin_then_translation(self, rng):
        s = random_state(rng, 6, 3)
        c = CoinParams(0.8, 0.1, 0.2)
        a = step(s, c, "inverse")
        b = apply_translation(apply_coin(s, c), "inverse")
        np.testing.assert_array_equal(a.plus_amp, b.plus_amp)

    def test_matches_site_by_site_reference(self, rng):
        thetas = rng.uniform(0, math.pi, 30)
        fwd = rng.random(30) < 0.7
        s = initial_state(30)
        for th, f in zip(thetas, fwd):
            s = step(s, CoinParams(float(th)), "forward" if f else "inverse")
        P, M = reference_walk(thetas, fwd, 30)
        np.testing.assert_allclose(s.plus_amp, P, atol=1e-13)
        np.testing.assert_allclose(s.minus_amp, M, atol=1e-13)

    @given(st.integers(1, 25), st.floats(0.01, 1.5))
    def test_light_cone(self, t, theta):
        s = initial_state(30)
        for _ in range(t):
            s = step(s, CoinParams(theta))
        P = probability_distribution(s).values
        x = s.sites
        assert np.all(P[np.abs(x) > t] == 0.0)

    def test_deterministic(self, rng):
        s = random_state(rng, 6, 3)
        a = step(s, CoinParams(0.3))
        b = step(s, CoinParams(0.3))
        assert a.plus_amp.tobytes() == b.plus_amp.tobytes()


class TestWalkConfig:
    def test_valid(self):
        c = WalkConfig(10, 10)
        assert c.theta0 == pytest.approx(math.pi / 6)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_max=0, n_t=1),
            dict(n_max=5, n_t=6),
            dict(n_max=5, n_t=0),
            dict(n_max=5, n_t=5, theta0=0.0),
            dict(n_max=5, n_t=5, theta0=math.pi / 2),
            dict(n_max=5, n_t=5, seed=-1),
            dict(n_max=5, n_t=5, seed=2**64),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfigError):
            WalkConfig(**kwargs)
