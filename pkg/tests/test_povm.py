"""POVM family geometry, rotation conventions, product structure."""

import numpy as np
import pytest

from qstlab import povm, qcore


def _oracle_qubit_probs(rho2, ops):
    # Independent 2x2 matrix arithmetic, no shared helpers.
    return np.array([np.trace(rho2 @ op).real for op in ops])


class TestReferenceLegs:
    def test_basis_sums_to_identity_exactly(self):
        ops = povm.family_operators("basis")
        assert np.array_equal(ops.sum(axis=0), np.eye(2))

    def test_sic_tetrahedron_angles(self):
        _, vecs = povm.reference_legs("sic")
        for j in range(4):
            for k in range(j + 1, 4):
                assert np.dot(vecs[j], vecs[k]) == pytest.approx(-1.0 / 3.0, abs=1e-12)

    @pytest.mark.parametrize("family", povm.FAMILIES)
    def test_completeness(self, family):
        ops = povm.family_operators(family)
        assert np.abs(ops.sum(axis=0) - np.eye(2)).max() < 1e-12

    @pytest.mark.parametrize("family", povm.FAMILIES)
    def test_legs_are_psd_and_counted(self, family):
        ops = povm.family_operators(family)
        assert ops.shape[0] == povm.LEGS[family]
        for op in ops:
            assert np.linalg.eigvalsh(op)[0] >= -1e-12

    def test_unit_bloch_vectors(self):
        for family in povm.FAMILIES:
            _, vecs = povm.reference_legs(family)
            assert np.linalg.norm(vecs, axis=1) == pytest.approx(np.ones(len(vecs)), abs=1e-12)

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="unknown POVM family"):
            povm.reference_legs("heptagon")


class TestBuildPovm:
    def test_zero_angles_keep_reference_legs(self):
        for family in povm.FAMILIES:
            built = povm.build_povm(family, np.zeros(3), 1)
            assert np.abs(built.outcomes - povm.family_operators(family)).max() < 1e-14

    def test_completeness_any_angles(self, rng):
        for _ in range(200):
            family = povm.FAMILIES[rng.integers(4)]
            n = int(rng.integers(1, 4))
            built = povm.build_povm(family, povm.random_orientation(rng, n), n)
            d = 2**n
            assert np.abs(built.outcomes.sum(axis=0) - np.eye(d)).max() < 1e-10

    def test_outcomes_psd_any_angles(self, rng):
        for _ in range(100):
            family = povm.FAMILIES[rng.integers(4)]
            n = int(rng.integers(1, 3))
            built = povm.build_povm(family, povm.random_orientation(rng, n), n)
            for op in built.outcomes:
                assert np.linalg.eigvalsh(op)[0] >= -1e-10

    def test_outcome_count(self, rng):
        for family in povm.FAMILIES:
            for n in (1, 2, 3):
                built = povm.build_povm(family, povm.random_orientation(rng, n), n)
                assert built.n_outcomes == povm.LEGS[family] ** n

    def test_basis_quarter_turn_measures_plus_state(self):
        # ty = pi/2 rotates the +z leg onto +x, so |+><+| hits outcome 0.
        plus = np.full((2, 2), 0.5, dtype=complex)
        built = povm.build_povm("basis", np.array([0.0, np.pi / 2.0, 0.0]), 1)
        expected = _oracle_qubit_probs(plus, built.outcomes)
        probs = qcore.born_probabilities(plus, built)
        assert probs == pytest.approx(expected, abs=1e-12)
        assert probs == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_lexicographic_product_order(self, rng):
        angles = povm.random_orientation(rng, 2)
        built = povm.build_povm("trine", angles, 2)
        u0 = povm.rotation_matrix(angles[0])
        u1 = povm.rotation_matrix(angles[1])
        base = povm.family_operators("trine")
        legs0 = np.stack([u0 @ op @ u0.conj().T for op in base])
        legs1 = np.stack([u1 @ op @ u1.conj().T for op in base])
        for y0 in range(3):
            for y1 in range(3):
                assert np.abs(built.outcomes[3 * y0 + y1] - np.kron(legs0[y0], legs1[y1])).max() < 1e-12

    def test_angles_canonicalized(self):
        built = povm.build_povm("sic", np.array([-np.pi, 5 * np.pi, 0.0]), 1)
        assert np.all(built.angles >= 0.0) and np.all(built.angles < 2 * np.pi)

    def test_non_finite_angles_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            povm.build_povm("sic", np.array([np.nan, 0.0, 0.0]), 1)

    @pytest.mark.parametrize("axis", [0, 1, 2])
    def test_single_axis_rotation_equivariance(self, axis, rng):
        # born(U rho U^H, povm(theta + g on one axis)) == born(rho, povm(theta)).
        for _ in range(20):
            rho = qcore.random_state("mixed-hs", 2, rng)
            theta, g = rng.uniform(0, 2 * np.pi, size=2)
            base_angles = np.zeros(3)
            base_angles[axis] = theta
            shifted = base_angles.copy()
            shifted[axis] = theta + g
            gate_angles = np.zeros(3)
            gate_angles[axis] = g
            u = povm.rotation_matrix(gate_angles)
            lhs = qcore.born_probabilities(u @ rho @ u.conj().T, povm.build_povm("trine", shifted, 1))
            rhs = qcore.born_probabilities(rho, povm.build_povm("trine", base_angles, 1))
            assert lhs == pytest.approx(rhs, abs=1e-9)


class TestRandomOrientation:
    def test_reproducible(self):
        a = povm.random_orientation(np.random.default_rng(9), 2)
        b = povm.random_orientation(np.random.default_rng(9), 2)
        assert np.array_equal(a, b)

    def test_uniform_cosine_mean(self):
        rng = np.random.default_rng(4)
        angles = povm.random_orientation(rng, 1)
        draws = rng.uniform(0, 2 * np.pi, size=10**5)
        assert abs(np.mean(np.cos(draws))) < 0.02
        assert angles.shape == (1, 3)

    def test_resulting_povms_valid(self, rng):
        for _ in range(50):
            built = povm.build_povm("six", povm.random_orientation(rng, 2), 2)
            assert np.abs(built.outcomes.sum(axis=0) - np.eye(4)).max() < 1e-10


class TestMeasurementRecord:
    def test_arity_mismatch_rejected(self, rng):
        built = povm.build_povm("sic", np.zeros((2, 3)), 2)
        with pytest.raises(ValueError, match="arity"):
            povm.MeasurementRecord(built, np.zeros(4))

    def test_negative_counts_rejected(self):
        built = povm.build_povm("basis", np.zeros(3), 1)
        with pytest.raises(ValueError, match="nonnegative"):
            povm.MeasurementRecord(built, np.array([3, -1]))

    def test_frequencies(self):
        built = povm.build_povm("basis", np.zeros(3), 1)
        rec = povm.MeasurementRecord(built, np.array([3, 1]))
        assert rec.total == 4
        assert rec.frequencies == pytest.approx([0.75, 0.25])
