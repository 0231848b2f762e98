import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwloc.core import BoundaryOverflowError, Direction, InvalidParameterError, WalkConfig
from qwloc.observables import PeakLabel, classify_peaks
from qwloc.randomness import (
    ContinuousAngle,
    DiscreteAngle,
    NoRandomness,
    RandomTranslation,
    derive_seed,
    draw_choice,
    draw_schedule,
    ensemble_mean,
    evolve,
    final_amplitudes,
    make_model,
    make_rng,
    propagate,
)

from .conftest import reference_walk

THETA0 = math.pi / 6
MODELS = [DiscreteAngle(0.2), ContinuousAngle(0.3), RandomTranslation(0.3)]


class TestModels:
    def test_make_model(self):
        assert make_model("discrete_angle", 0.1) == DiscreteAngle(0.1)
        assert make_model("continuous_angle", 0.1) == ContinuousAngle(0.1)
        assert make_model("random_translation", 0.1) == RandomTranslation(0.1)
        assert make_model("none") == NoRandomness()

    @pytest.mark.parametrize(
        "kind, value",
        [("discrete_angle", -0.1), ("continuous_angle", math.nan), ("random_translation", 0.6), ("bogus", 0.1)],
    )
    def test_invalid(self, kind, value):
        with pytest.raises(InvalidParameterError):
            make_model(kind, value)

    def test_discrete_above_theta0_rejected(self):
        with pytest.raises(InvalidParameterError):
            evolve(WalkConfig(5, 5, THETA0), DiscreteAngle(THETA0 + 0.01))


class TestDrawChoice:
    def test_zero_delta_gives_theta0(self):
        rng = make_rng(3)
        assert all(draw_choice(DiscreteAngle(0.0), THETA0, rng).theta_used == THETA0 for _ in range(100))

    def test_zero_pr_always_forward(self):
        rng = make_rng(3)
        assert all(
            draw_choice(RandomTranslation(0.0), THETA0, rng).direction_used is Direction.FORWARD for _ in range(100)
        )

    def test_discrete_fair_coin(self):
        # binomial 3 sigma at 1e6 draws is 0.0015
        thetas, _ = draw_schedule(DiscreteAngle(0.04), THETA0, 10**6, make_rng(7))
        freq = np.mean(thetas == THETA0 + 0.04)
        assert abs(freq - 0.5) < 0.002
        assert set(np.unique(thetas)) == {THETA0 - 0.04, THETA0 + 0.04}

    def test_continuous_range(self):
        thetas, fwd = draw_schedule(ContinuousAngle(0.3), THETA0, 10**5, make_rng(1))
        assert thetas.min() >= THETA0 and thetas.max() < THETA0 + 0.3
        assert fwd.all()

    def test_translation_frequency(self):
        _, fwd = draw_schedule(RandomTranslation(0.2), THETA0, 10**5, make_rng(2))
        assert abs(np.mean(~fwd) - 0.2) < 0.004

    @pytest.mark.parametrize("model", MODELS + [NoRandomness()])
    def test_schedule_matches_sequential_draws(self, model):
        thetas, fwd = draw_schedule(model, THETA0, 200, make_rng(11))
        rng = make_rng(11)
        for th, f in zip(thetas, fwd):
            c = draw_choice(model, THETA0, rng)
            assert c.theta_used == th
            assert (c.direction_used is Direction.FORWARD) == f

    def test_direction_forward_unless_translation(self):
        for model in (DiscreteAngle(0.3), ContinuousAngle(0.3), NoRandomness()):
            rec = evolve(WalkConfig(40, 40, THETA0, seed=5), model)
            assert all(c.direction_used is Direction.FORWARD for c in rec.choices)


class TestSeeds:
    def test_derive_seed_deterministic_and_distinct(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        seeds = {derive_seed(1, 2, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert all(0 <= s < 2**64 for s in seeds)

    def test_rng_is_philox(self):
        assert isinstance(make_rng(0).bit_generator, np.random.Philox)


class TestEvolve:
    def test_clean_walk_two_peaks(self):
        rec = evolve(WalkConfig(50, 50, THETA0), NoRandomness())
        assert classify_peaks(rec.final_distribution, 50).label is PeakLabel.TWO_PEAK

    def test_zero_delta_matches_clean_walk(self):
        cfg = WalkConfig(60, 60, THETA0, seed=9)
        a = evolve(cfg, DiscreteAngle(0.0))
        b = evolve(cfg, NoRandomness())
        assert a.distributions.tobytes() == b.distributions.tobytes()
        assert a.final_state.plus_amp.tobytes() == b.final_state.plus_amp.tobytes()

    @pytest.mark.parametrize("model", MODELS)
    def test_matches_reference(self, model):
        rec = evolve(WalkConfig(40, 40, THETA0, seed=21), model)
        thetas = [c.theta_used for c in rec.choices]
        fwd = [c.direction_used is Direction.FORWARD for c in rec.choices]
        P, M = reference_walk(thetas, fwd, 40)
        np.testing.assert_allclose(rec.final_state.plus_amp, P, atol=1e-13)
        np.testing.assert_allclose(rec.final_state.minus_amp, M, atol=1e-13)

    def test_record_shapes(self):
        rec = evolve(WalkConfig(30, 20, THETA0, seed=1), DiscreteAngle(0.1))
        assert len(rec.choices) == 20
        assert rec.distributions.shape == (21, 61)
        assert rec.distributions[0, 30] == pytest.approx(1.0)
        assert rec.moi.shape == rec.ipr.shape == (20,)

    @pytest.mark.parametrize("model", MODELS)
    def test_norm_conserved(self, model):
        for seed in range(3):
            rec = evolve(WalkConfig(200, 200, THETA0, seed=seed), model)
            assert np.max(np.abs(rec.distributions.sum(axis=1) - 1.0)) < 1e-10

    def test_reproducible(self):
        cfg = WalkConfig(80, 80, THETA0, seed=2**63 + 5)
        a = evolve(cfg, ContinuousAngle(0.2))
        b = evolve(cfg, ContinuousAngle(0.2))
        assert a.distributions.tobytes() == b.distributions.tobytes()

    def test_row_independent_of_batch(self):
        cfg = WalkConfig(50, 50, THETA0)
        models = [DiscreteAngle(0.05), RandomTranslation(0.2), ContinuousAngle(0.4)]
        seeds = [3, 4, 5]
        plus, minus = final_amplitudes(cfg, models, seeds)
        for i, (m, s) in enumerate(zip(models, seeds)):
            p1, m1 = final_amplitudes(cfg, [m], [s])
            assert p1[0].tobytes() == plus[i].tobytes()
            assert m1[0].tobytes() == minus[i].tobytes()

    def test_overflow_detected(self):
        with pytest.raises(BoundaryOverflowError):
            propagate(np.full((1, 6), 0.3), np.ones((1, 6), dtype=bool), 5, (math.pi / 2, math.pi / 2))

    @given(st.integers(0, 2**64 - 1), st.sampled_from(MODELS))
    def test_support_within_light_cone(self, seed, model):
        rec = evolve(WalkConfig(30, 12, THETA0, seed=seed), model)
        x = np.arange(-30, 31)
        for t in range(13):
            assert np.all(rec.distributions[t][np.abs(x) > t] == 0.0)


class TestEnsemble:
    def test_single_equals_evolve(self):
        cfg = WalkConfig(40, 40, THETA0, seed=4)
        a = ensemble_mean(cfg, DiscreteAngle(0.2), 1)
        b = evolve(cfg, DiscreteAngle(0.2))
        assert a.distributions.tobytes() == b.distributions.tobytes()

    @pytest.mark.parametrize("model", MODELS)
    def test_mean_normalized(self, model):
        rec = ensemble_mean(WalkConfig(60, 60, THETA0, seed=1), model, 70)
        assert np.max(np.abs(rec.distributions.sum(axis=1) - 1.0)) < 1e-10
        assert rec.choices == [] and rec.final_state is None

    def test_clean_walk_mean_equals_single(self):
        cfg = WalkConfig(40, 40, THETA0)
        a = ensemble_mean(cfg, NoRandomness(), 5)
        b = evolve(cfg, NoRandomness())
        np.testing.assert_allclose(a.distributions, b.distributions, rtol=0, atol=1e-15)

    def test_mean_of_explicit_realizations(self):
        cfg = WalkConfig(30, 30, THETA0, seed=100)
        rec = ensemble_mean(cfg, RandomTranslation(0.3), 5, batch_size=2)
        singles = [evolve(WalkConfig(30, 30, THETA0, seed=100 + k), RandomTranslation(0.3)) for k in range(5)]
        expected = sum(s.distributions for s in singles) / 5
        np.testing.assert_allclose(rec.distributions, expected, atol=1e-15)

    def test_translation_parity_symmetry(self):
        # probabilities p and 1 - p mirror each other under x -> -x
        n_t, reps = 30, 2000
        phis = (math.pi / 2, math.pi / 2)

        def sample(p, seed):
            u = make_rng(seed).random((reps, n_t))
            res = propagate(np.full((reps, n_t), THETA0), ~(u < p), n_t, phis)
            P = np.abs(res["plus"]) ** 2 + np.abs(res["minus"]) ** 2
            return P.mean(axis=0), P.std(axis=0, ddof=1) / math.sqrt(reps)

        m1, e1 = sample(0.2, 1)
        m2, e2 = sample(0.8, 2)
        m2, e2 = m2[::-1], e2[::-1]
        se = np.sqrt(e1**2 + e2**2)
        mask = se > 0
        assert np.all(np.abs(m1 - m2)[mask] < 5 * se[mask])
        assert np.all(np.abs(m1 - m2)[~mask] < 1e-12)
