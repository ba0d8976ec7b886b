"""Particle-filter baseline: Bayes updates, ESS, rejuvenation, full runs."""

import mpmath
import numpy as np
import pytest

from qstlab import abqt, povm, qcore
from qstlab.sources import SimulatorSource


def _record(family, angles, counts, n_qubits=1):
    return povm.MeasurementRecord(povm.build_povm(family, angles, n_qubits), np.asarray(counts))


class TestBayesUpdate:
    def test_single_copy_two_particles(self):
        z0 = np.diag([1.0, 0.0]).astype(complex)
        bank = abqt.WeightedBank(np.stack([z0, qcore.maximally_mixed(2)]), np.array([0.5, 0.5]))
        updated = abqt.bayes_update(bank, _record("basis", np.zeros(3), [1, 0]))
        assert updated.weights == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-12)
        assert np.array_equal(updated.particles, bank.particles)

    def test_zero_copy_record_is_identity(self, rng):
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(5)])
        bank = abqt.WeightedBank(particles, np.full(5, 0.2))
        updated = abqt.bayes_update(bank, _record("sic", np.zeros((2, 3)), np.zeros(16, dtype=int), 2))
        assert np.array_equal(updated.weights, bank.weights)

    def test_matches_extended_precision_oracle(self, rng):
        mpmath.mp.dps = 60
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(6)])
        weights = rng.dirichlet(np.ones(6))
        p = povm.build_povm("sic", povm.random_orientation(rng, 2), 2)
        counts = qcore.sample_counts(np.full(16, 1 / 16), 200, rng)
        bank = abqt.bayes_update(abqt.WeightedBank(particles, weights), povm.MeasurementRecord(p, counts))
        expected = []
        for i in range(6):
            probs = qcore.born_probabilities(particles[i], p)
            post = mpmath.mpf(float(weights[i]))
            for n, prob in zip(counts, probs):
                post *= mpmath.mpf(float(prob)) ** int(n)
            expected.append(post)
        total = mpmath.fsum(expected)
        expected = np.array([float(w / total) for w in expected])
        assert bank.weights == pytest.approx(expected, abs=1e-10)

    def test_degenerate_posterior_raises(self):
        z0 = np.diag([1.0, 0.0]).astype(complex)
        z1 = np.diag([0.0, 1.0]).astype(complex)
        bank = abqt.WeightedBank(np.stack([z0, z1]), np.array([0.5, 0.5]))
        # Both particles are eigenstates; an impossible joint outcome pattern
        # (clicks in both detectors) zeroes every weight.
        with pytest.raises(abqt.DegeneratePosteriorError):
            abqt.bayes_update(bank, _record("basis", np.zeros(3), [1, 1]))

    def test_composition_equals_concatenation(self, rng):
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(8)])
        weights = rng.dirichlet(np.ones(8))
        p = povm.build_povm("six", povm.random_orientation(rng, 2), 2)
        c1 = qcore.sample_counts(np.full(36, 1 / 36), 60, rng)
        c2 = qcore.sample_counts(np.full(36, 1 / 36), 40, rng)
        via_two = abqt.bayes_update(
            abqt.bayes_update(abqt.WeightedBank(particles, weights), povm.MeasurementRecord(p, c1)),
            povm.MeasurementRecord(p, c2),
        )
        via_one = abqt.bayes_update(
            abqt.WeightedBank(particles, weights), povm.MeasurementRecord(p, c1 + c2)
        )
        log_a = np.log(via_two.weights)
        log_b = np.log(via_one.weights)
        assert log_a - log_a[0] == pytest.approx(log_b - log_b[0], abs=1e-10)


class TestEffectiveSampleSize:
    def test_uniform(self):
        assert abqt.effective_sample_size(np.full(30, 1 / 30)) == pytest.approx(30.0)

    def test_degenerate(self):
        w = np.zeros(10)
        w[0] = 1.0
        assert abqt.effective_sample_size(w) == pytest.approx(1.0)

    def test_arithmetic_case(self):
        assert abqt.effective_sample_size(np.array([0.5, 0.25, 0.25])) == pytest.approx(8.0 / 3.0)


class TestResampleMh:
    def test_zero_mh_steps_is_pure_systematic_resample(self, rng):
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(10)])
        weights = rng.dirichlet(np.ones(10))
        bank = abqt.WeightedBank(particles, weights)
        out = abqt.resample_mh(bank, [], np.random.default_rng(5), mh_steps=0)
        assert out.weights == pytest.approx(np.full(10, 0.1))
        idx = abqt.systematic_resample(weights, np.random.default_rng(5))
        assert np.array_equal(out.particles, particles[idx])

    def test_ess_after_resample_is_bank_size(self, rng):
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(12)])
        weights = rng.dirichlet(np.ones(12))
        out = abqt.resample_mh(abqt.WeightedBank(particles, weights), [], rng, mh_steps=3)
        assert abqt.effective_sample_size(out.weights) == pytest.approx(12.0)

    def test_systematic_resample_matches_weights_in_expectation(self):
        weights = np.array([0.7, 0.2, 0.1])
        draws = np.concatenate(
            [abqt.systematic_resample(weights, np.random.default_rng(s)) for s in range(2000)]
        )
        freq = np.bincount(draws, minlength=3) / draws.size
        assert freq == pytest.approx(weights, abs=0.02)

    def test_particles_stay_on_support_when_rejected(self, rng):
        # With an extreme history, distant proposals are always rejected:
        # particles can only stay where they were drawn.
        z0 = np.diag([1.0, 0.0]).astype(complex)
        sharp = povm.MeasurementRecord(
            povm.build_povm("basis", np.zeros(3), 1), np.array([10**6, 0])
        )
        bank = abqt.WeightedBank(np.stack([z0, z0]), np.array([0.5, 0.5]))
        out = abqt.resample_mh(bank, [sharp], rng, mh_steps=5, step_scale=0.5)
        for particle in out.particles:
            assert qcore.hs_distance(particle, z0) < 0.05

    def test_mutation_improves_fit_to_concentrated_history(self):
        # Long history around a truth: post-rejuvenation banks should not be
        # farther from the truth on average (paired over seeds).
        wins = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            truth = qcore.random_state("mixed-hs", 2, rng)
            history = []
            for _ in range(6):
                p = povm.build_povm("six", povm.random_orientation(rng, 1), 1)
                counts = qcore.sample_counts(qcore.born_probabilities(truth, p), 2000, rng)
                history.append(povm.MeasurementRecord(p, counts))
            particles = np.stack([qcore.random_state("mixed-hs", 2, rng) for _ in range(15)])
            bank = abqt.WeightedBank(particles, np.full(15, 1 / 15))
            for rec in history:
                bank = abqt.bayes_update(bank, rec)
            before = np.mean([qcore.bures_sq(p_, truth) for p_ in bank.particles])
            out = abqt.resample_mh(bank, history, rng, mh_steps=10, step_scale=0.1)
            after = np.mean([qcore.bures_sq(p_, truth) for p_ in out.particles])
            wins += after <= before
        assert wins >= 40

    def test_empty_history_free_diffusion_moves_particles(self, rng):
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(6)])
        bank = abqt.WeightedBank(particles, np.full(6, 1 / 6))
        out = abqt.resample_mh(bank, [], rng, mh_steps=5, step_scale=0.3)
        assert any(qcore.hs_distance(a, b) > 1e-6 for a, b in zip(out.particles, particles))


class TestBankMean:
    def test_single_particle(self, rng):
        rho = qcore.random_state("mixed-hs", 4, rng)
        bank = abqt.WeightedBank(rho[None], np.array([1.0]))
        assert np.array_equal(abqt.bank_mean(bank), rho)

    def test_equal_mixture_of_orthogonal_pures(self):
        z0 = np.diag([1.0, 0.0]).astype(complex)
        z1 = np.diag([0.0, 1.0]).astype(complex)
        bank = abqt.WeightedBank(np.stack([z0, z1]), np.array([0.5, 0.5]))
        assert np.allclose(abqt.bank_mean(bank), qcore.maximally_mixed(2))

    def test_matches_summation_oracle(self, rng):
        particles = np.stack([qcore.random_state("mixed-hs", 4, rng) for _ in range(7)])
        weights = rng.dirichlet(np.ones(7))
        manual = sum(w * p for w, p in zip(weights, particles))
        assert np.abs(abqt.bank_mean(abqt.WeightedBank(particles, weights)) - manual).max() < 1e-12

    def test_mean_is_valid_state(self, rng):
        particles = np.stack([qcore.random_state("pure-haar", 4, rng) for _ in range(9)])
        weights = rng.dirichlet(np.ones(9))
        qcore.assert_density_matrix(abqt.bank_mean(abqt.WeightedBank(particles, weights)))


class TestRunAbqt:
    def test_deterministic_given_seeds(self):
        def one_run():
            srng = np.random.default_rng(31)
            truth = qcore.random_state("mixed-hs", 4, srng)
            steps = abqt.run_abqt(
                SimulatorSource(truth, srng), [50] * 8, "sic", False, 10, np.random.default_rng(32)
            )
            return steps[-1].estimate

        assert np.array_equal(one_run(), one_run())

    def test_accuracy_improves_over_decades(self):
        means = []
        for total in (10**2, 10**4):
            vals = []
            for trial in range(6):
                s_ss, a_ss = np.random.SeedSequence(600 + trial).spawn(2)
                srng = np.random.default_rng(s_ss)
                truth = qcore.random_state("mixed-hs", 4, srng)
                steps = abqt.run_abqt(
                    SimulatorSource(truth, srng),
                    [100] * (total // 100),
                    "sic",
                    False,
                    30,
                    np.random.default_rng(a_ss),
                )
                vals.append(steps[-1].bures_sq)
            means.append(np.mean(vals))
        assert means[1] < means[0]

    def test_estimates_valid_and_copies_cumulative(self, rng):
        truth = qcore.random_state("mixed-hs", 4, rng)
        steps = abqt.run_abqt(SimulatorSource(truth, rng), [40, 60, 80], "trine", True, 8, rng)
        assert [s.copies for s in steps] == [40, 100, 180]
        for s in steps:
            qcore.assert_density_matrix(s.estimate)

    def test_empty_schedule_rejected(self, rng):
        truth = qcore.random_state("mixed-hs", 4, rng)
        with pytest.raises(ValueError):
            abqt.run_abqt(SimulatorSource(truth, rng), [], "sic", False, 5, rng)

    def test_adaptive_runtime_grows_with_history(self):
        # Later steps rejuvenate against longer histories, so per-step
        # analysis time in the last quarter should exceed the first quarter.
        srng = np.random.default_rng(77)
        truth = qcore.random_state("mixed-hs", 4, srng)
        steps = abqt.run_abqt(
            SimulatorSource(truth, srng), [100] * 400, "sic", False, 20, np.random.default_rng(78)
        )
        walls = np.array([s.wall_seconds for s in steps])
        assert walls[300:].sum() > walls[:100].sum()
