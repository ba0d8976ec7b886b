"""Mixed-entropy heuristic, its mutual-information twin, and orientation search."""

import numpy as np
import pytest

from qstlab import adapt, povm, qcore


def _z_bank():
    z0 = np.diag([1.0, 0.0]).astype(complex)
    z1 = np.diag([0.0, 1.0]).astype(complex)
    return np.stack([z0, z1]), np.array([0.5, 0.5])


def _random_bank(rng, size, d=4, kind="mixed-hs"):
    particles = np.stack([qcore.random_state(kind, d, rng) for _ in range(size)])
    weights = rng.dirichlet(np.ones(size))
    return particles, weights


class TestMixedEntropy:
    def test_perfectly_distinguishing_measurement(self):
        particles, weights = _z_bank()
        p = povm.build_povm("basis", np.zeros(3), 1)
        assert adapt.mixed_entropy(particles, weights, p) == pytest.approx(np.log(2), abs=1e-12)

    def test_uninformative_measurement(self):
        particles, weights = _z_bank()
        p = povm.build_povm("basis", np.array([0.0, np.pi / 2, 0.0]), 1)
        assert adapt.mixed_entropy(particles, weights, p) == pytest.approx(0.0, abs=1e-12)

    def test_single_particle_gives_zero(self, rng):
        particles = qcore.random_state("mixed-hs", 4, rng)[None]
        p = povm.build_povm("sic", povm.random_orientation(rng, 2), 2)
        assert adapt.mixed_entropy(particles, np.array([1.0]), p) == pytest.approx(0.0, abs=1e-12)

    def test_permutation_invariance(self, rng):
        particles, weights = _random_bank(rng, 12)
        p = povm.build_povm("trine", povm.random_orientation(rng, 2), 2)
        perm = rng.permutation(12)
        f1 = adapt.mixed_entropy(particles, weights, p)
        f2 = adapt.mixed_entropy(particles[perm], weights[perm], p)
        assert f1 == pytest.approx(f2, abs=1e-12)

    def test_bounds(self, rng):
        for _ in range(100):
            particles, weights = _random_bank(rng, int(rng.integers(2, 20)))
            fam = povm.FAMILIES[rng.integers(4)]
            p = povm.build_povm(fam, povm.random_orientation(rng, 2), 2)
            f = adapt.mixed_entropy(particles, weights, p)
            weight_entropy = -np.sum(weights * np.log(weights))
            assert -1e-9 <= f <= min(weight_entropy, np.log(p.n_outcomes)) + 1e-9


class TestMutualInformationIdentity:
    def test_deterministic_channel_values(self):
        particles, weights = _z_bank()
        pz = povm.build_povm("basis", np.zeros(3), 1)
        px = povm.build_povm("basis", np.array([0.0, np.pi / 2, 0.0]), 1)
        assert adapt.mutual_information(particles, weights, pz) == pytest.approx(np.log(2), abs=1e-12)
        assert adapt.mutual_information(particles, weights, px) == pytest.approx(0.0, abs=1e-12)

    def test_identity_with_mixed_entropy(self, rng):
        # The two formulations must agree to 1e-9 across banks and families.
        for _ in range(300):
            size = int(rng.integers(2, 101))
            kind = "pure-haar" if rng.uniform() < 0.3 else "mixed-hs"
            particles, weights = _random_bank(rng, size, kind=kind)
            fam = povm.FAMILIES[rng.integers(4)]
            p = povm.build_povm(fam, povm.random_orientation(rng, 2), 2)
            f = adapt.mixed_entropy(particles, weights, p)
            mi = adapt.mutual_information(particles, weights, p)
            assert abs(f - mi) < 1e-9

    def test_information_bounds(self, rng):
        particles, weights = _random_bank(rng, 10)
        p = povm.build_povm("basis", povm.random_orientation(rng, 2), 2)
        mi = adapt.mutual_information(particles, weights, p)
        assert mi <= -np.sum(weights * np.log(weights)) + 1e-9
        assert mi <= np.log(p.n_outcomes) + 1e-9


class TestChoosePovm:
    def test_single_candidate_is_that_orientation(self, rng):
        particles, weights = _random_bank(rng, 5)
        seed_rng = np.random.default_rng(77)
        expected_angles = povm.random_orientation(np.random.default_rng(77), 2)
        chosen = adapt.choose_povm(particles, weights, "sic", 2, 1, seed_rng)
        assert np.allclose(chosen.angles, expected_angles)

    def test_dense_search_approaches_optimum(self):
        particles, weights = _z_bank()
        chosen = adapt.choose_povm(particles, weights, "basis", 1, 200, np.random.default_rng(4))
        f = adapt.mixed_entropy(particles, weights, chosen)
        assert f > 0.95 * np.log(2)

    def test_deterministic_given_seed(self, rng):
        particles, weights = _random_bank(rng, 8)
        a = adapt.choose_povm(particles, weights, "trine", 2, 25, np.random.default_rng(3))
        b = adapt.choose_povm(particles, weights, "trine", 2, 25, np.random.default_rng(3))
        assert np.array_equal(a.angles, b.angles)

    def test_never_below_candidate_maximum(self, rng):
        particles, weights = _random_bank(rng, 10)
        probe = np.random.default_rng(123)
        chosen = adapt.choose_povm(particles, weights, "basis", 2, 30, np.random.default_rng(123))
        replay = [
            adapt.mixed_entropy(particles, weights, povm.build_povm("basis", povm.random_orientation(probe, 2), 2))
            for _ in range(30)
        ]
        assert adapt.mixed_entropy(particles, weights, chosen) == pytest.approx(max(replay), abs=1e-12)

    def test_requires_candidates(self, rng):
        particles, weights = _random_bank(rng, 4)
        with pytest.raises(ValueError):
            adapt.choose_povm(particles, weights, "sic", 2, 0, rng)


class TestLandscapeScan:
    def test_single_particle_bank_is_flat_zero(self, rng):
        particles = qcore.random_state("mixed-hs", 4, rng)[None]
        _, values = adapt.landscape_scan(particles, np.array([1.0]), "basis", 8)
        assert np.abs(values).max() < 1e-12

    def test_grid_matches_pointwise_calls(self, rng):
        particles, weights = _random_bank(rng, 6)
        axis, values = adapt.landscape_scan(particles, weights, "sic", 4)
        for i in (0, 3):
            for j in (1, 2):
                angles = np.zeros((2, 3))
                angles[0, 0] = axis[i]
                angles[1, 0] = axis[j]
                f = adapt.mixed_entropy(particles, weights, povm.build_povm("sic", angles, 2))
                assert values[i, j] == pytest.approx(f, abs=1e-12)

    def test_basis_range_dwarfs_sic_range(self, rng):
        # Relative orientation sensitivity: basis >> sic on the same banks.
        ratios = []
        for _ in range(5):
            particles, weights = _random_bank(rng, 10, kind="pure-haar")
            rel = {}
            for fam in ("basis", "sic"):
                _, values = adapt.landscape_scan(particles, weights, fam, 12)
                rel[fam] = (values.max() - values.min()) / values.max()
            ratios.append(rel["basis"] / rel["sic"])
        assert np.median(ratios) > 5.0

    def test_grid_resolution_validated(self, rng):
        particles, weights = _random_bank(rng, 3)
        with pytest.raises(ValueError):
            adapt.landscape_scan(particles, weights, "sic", 1)
