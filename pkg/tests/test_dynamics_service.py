# test_dynamics_service.py
import unittest
import sys
import os

import numpy as np
from numpy.testing import assert_allclose
from scipy.linalg import expm

# Add the parent directory to the path to import our modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from dynamics_service import (
    ControlField, IDENTITY, PropagationError, SIGMA_X, SystemParams, fidelity, hamiltonian,
    objective_two_slot, ordered_product, step_propagator, step_stack, total_propagator,
    transfer_fidelity, zero_field,
)


class TestSystemParams(unittest.TestCase):
    def test_t_min_is_pi_over_gap(self):
        """Test the speed limit for a few gaps."""
        self.assertAlmostEqual(SystemParams(1.0).t_min(), np.pi)
        self.assertAlmostEqual(SystemParams(2.0).t_min(), np.pi / 2)

    def test_rejects_non_positive_gap(self):
        """Test that a zero or negative gap is refused."""
        for gap in (0.0, -1.0, float("nan")):
            with self.assertRaises(ValueError):
                SystemParams(gap)


class TestControlField(unittest.TestCase):
    def test_slot_width(self):
        """Test dt = T / N_ts."""
        field = ControlField([0.1, 0.2, 0.3, 0.4], 2.0)
        self.assertEqual(field.n_ts, 4)
        self.assertEqual(field.dt, 0.5)

    def test_amplitudes_are_read_only(self):
        """Test that a field cannot be mutated after construction."""
        field = ControlField([0.1, 0.2], 1.0)
        with self.assertRaises(ValueError):
            field.amplitudes[0] = 5.0

    def test_input_array_is_copied(self):
        """Test that changing the source array leaves the field alone."""
        source = np.array([1.0, 2.0])
        field = ControlField(source, 1.0)
        source[0] = 9.0
        self.assertEqual(field.amplitudes[0], 1.0)

    def test_invalid_fields(self):
        """Test empty amplitude lists and non-positive durations."""
        with self.assertRaises(ValueError):
            ControlField([], 1.0)
        with self.assertRaises(ValueError):
            ControlField([0.0], 0.0)
        with self.assertRaises(ValueError):
            ControlField([0.0], -1.0)

    def test_equality_and_hash(self):
        """Test value semantics."""
        a = ControlField([0.1, 0.2], 1.0)
        b = ControlField(np.array([0.1, 0.2]), 1.0)
        self.assertEqual(a, b)
        self.assertEqual(hash(a), hash(b))
        self.assertNotEqual(a, ControlField([0.1, 0.2], 2.0))

    def test_transformations(self):
        """Test negation, time reversal and refinement."""
        field = ControlField([1.0, -2.0, 3.0], 1.5)
        assert_allclose(field.negated().amplitudes, [-1.0, 2.0, -3.0])
        assert_allclose(field.time_reversed().amplitudes, [3.0, -2.0, 1.0])
        refined = field.refined()
        self.assertEqual(refined.n_ts, 6)
        self.assertEqual(refined.duration, 1.5)
        assert_allclose(refined.amplitudes, [1.0, 1.0, -2.0, -2.0, 3.0, 3.0])


class TestHamiltonian(unittest.TestCase):
    def setUp(self):
        self.params = SystemParams(1.0)

    def test_zero_field(self):
        """Test H(0) = (gap/2) sigma_x."""
        assert_allclose(hamiltonian(0.0, self.params), [[0.0, 0.5], [0.5, 0.0]])

    def test_substitution(self):
        """Test H(2) for gap 1."""
        assert_allclose(hamiltonian(2.0, self.params), [[2.0, 0.5], [0.5, -2.0]])

    def test_sign_flip_is_sigma_x_conjugation(self):
        """Test H(-e) = sigma_x H(e) sigma_x."""
        e = np.e
        assert_allclose(
            hamiltonian(-e, self.params), SIGMA_X @ hamiltonian(e, self.params) @ SIGMA_X
        )


class TestStepPropagator(unittest.TestCase):
    def setUp(self):
        self.params = SystemParams(1.0)

    def test_pi_rotation(self):
        """Test that eps=0, dt=pi gives -i sigma_x."""
        assert_allclose(step_propagator(0.0, np.pi, self.params), -1j * SIGMA_X, atol=1e-15)

    def test_zero_time_is_identity(self):
        """Test dt = 0."""
        assert_allclose(step_propagator(1.7, 0.0, self.params), IDENTITY, atol=0)

    def test_matches_dense_exponential(self):
        """Test the closed form against scipy's matrix exponential."""
        expected = expm(-1j * hamiltonian(0.5, self.params) * 1.0)
        assert_allclose(step_propagator(0.5, 1.0, self.params), expected, atol=1e-12)

    def test_random_slots_match_dense_exponential(self):
        """Test many random slots against an eigendecomposition oracle."""
        rng = np.random.default_rng(11)
        eps = rng.uniform(-20, 20, size=200)
        dt = 0.37
        stack = step_stack(eps, dt, self.params)
        for k, e in enumerate(eps):
            lam, vecs = np.linalg.eigh(hamiltonian(e, self.params))
            oracle = vecs @ np.diag(np.exp(-1j * lam * dt)) @ vecs.T
            assert_allclose(stack[k], oracle, atol=1e-12)

    def test_unitarity(self):
        """Test U^dagger U = I over 10^4 random (eps, dt) draws."""
        rng = np.random.default_rng(3)
        eps = rng.uniform(-50, 50, size=10_000)
        for dt in rng.uniform(0, 10, size=5):
            stack = step_stack(eps, dt, self.params)
            products = np.conj(np.swapaxes(stack, -1, -2)) @ stack
            self.assertLess(np.max(np.abs(products - IDENTITY)), 1e-12)

    def test_negative_dt_is_refused(self):
        """Test that dt < 0 is a usage error."""
        with self.assertRaises(ValueError):
            step_propagator(0.0, -0.1, self.params)


class TestTotalPropagator(unittest.TestCase):
    def setUp(self):
        self.params = SystemParams(1.0)
        self.rng = np.random.default_rng(5)

    def test_two_slots_compose_in_time_order(self):
        """Test U = S(a2) S(a1) for a two-slot field."""
        a1, a2, T = 0.3, -1.1, 2.0
        expected = step_propagator(a2, T / 2, self.params) @ step_propagator(a1, T / 2, self.params)
        assert_allclose(total_propagator(ControlField([a1, a2], T), self.params), expected, atol=1e-14)

    def test_ordered_product_matches_sequential_product(self):
        """Test the pairwise reduction against a left-to-right loop for odd and even lengths."""
        for n in (1, 2, 3, 7, 16, 33):
            stack = step_stack(self.rng.uniform(-2, 2, n), 0.2, self.params)
            expected = IDENTITY
            for step in stack:
                expected = step @ expected
            assert_allclose(ordered_product(stack), expected, atol=1e-13)

    def test_zero_field_at_speed_limit(self):
        """Test that zero slots over T = pi compose into -i sigma_x."""
        field = zero_field(10, np.pi)
        assert_allclose(total_propagator(field, self.params), -1j * SIGMA_X, atol=1e-13)

    def test_refinement_invariance(self):
        """Test that splitting every slot in two leaves U unchanged."""
        field = ControlField(self.rng.uniform(-1, 1, 25), 1.7 * np.pi)
        assert_allclose(
            total_propagator(field.refined(), self.params),
            total_propagator(field, self.params),
            atol=1e-11,
        )

    def test_unitarity_of_long_products(self):
        """Test unitarity for a thousand slots."""
        field = ControlField(self.rng.uniform(-5, 5, 1000), 3 * np.pi)
        u = total_propagator(field, self.params)
        assert_allclose(np.conj(u.T) @ u, IDENTITY, atol=1e-11)


class TestFidelity(unittest.TestCase):
    def setUp(self):
        self.params = SystemParams(1.0)
        self.rng = np.random.default_rng(7)

    def test_speed_limit_identity(self):
        """Test J = 1 for the zero field at T = pi / gap."""
        for gap in (0.5, 1.0, 3.0):
            params = SystemParams(gap)
            self.assertAlmostEqual(fidelity(zero_field(4, params.t_min()), params), 1.0, delta=1e-12)

    def test_zero_field_closed_form(self):
        """Test J = sin^2(gap T / 2) for 100 random durations."""
        for T in self.rng.uniform(1e-3, 4 * np.pi, 100):
            self.assertAlmostEqual(
                fidelity(zero_field(3, T), self.params), np.sin(T / 2) ** 2, delta=1e-12
            )

    def test_zero_field_below_speed_limit(self):
        """Test the T = 0.7 pi value."""
        self.assertAlmostEqual(fidelity(zero_field(1, 0.7 * np.pi), self.params), 0.79389, places=5)

    def test_vanishing_duration(self):
        """Test that J goes to 0 as T goes to 0."""
        self.assertLess(fidelity(ControlField([0.4, -0.2], 1e-9), self.params), 1e-16)

    def test_sign_and_time_reversal_symmetry(self):
        """Test J(eps) = J(-eps) = J(reversed eps) on 10^4 random fields."""
        for _ in range(10_000):
            n = int(self.rng.integers(1, 12))
            field = ControlField(self.rng.uniform(-3, 3, n), self.rng.uniform(0.1, 4 * np.pi))
            j = fidelity(field, self.params)
            self.assertAlmostEqual(fidelity(field.negated(), self.params), j, delta=1e-12)
            self.assertAlmostEqual(fidelity(field.time_reversed(), self.params), j, delta=1e-12)

    def test_refinement_invariance(self):
        """Test that doubling N_ts by duplication keeps J."""
        field = ControlField(self.rng.uniform(-1, 1, 40), 2.3)
        self.assertAlmostEqual(fidelity(field.refined(), self.params), fidelity(field, self.params), delta=1e-11)

    def test_round_off_is_clamped(self):
        """Test that tiny excursions above 1 are clamped."""
        self.assertEqual(transfer_fidelity(np.sqrt(1.0 + 5e-13)), 1.0)

    def test_large_excursion_raises(self):
        """Test that a non-unitary amplitude is reported."""
        with self.assertRaises(PropagationError):
            transfer_fidelity(1.01)

    def test_elementwise_on_arrays(self):
        """Test that arrays of amplitudes give arrays of fidelities."""
        values = transfer_fidelity(np.array([0.0, 0.5j, 1.0]))
        assert_allclose(values, [0.0, 0.25, 1.0])


class TestObjectiveTwoSlot(unittest.TestCase):
    def setUp(self):
        self.params = SystemParams(1.0)

    def test_origin_at_speed_limit(self):
        """Test J(0, 0, pi) = 1."""
        self.assertAlmostEqual(objective_two_slot(0.0, 0.0, np.pi, self.params), 1.0, delta=1e-12)

    def test_swap_and_negation_symmetries(self):
        """Test J(a1, a2) = J(a2, a1) = J(-a1, -a2)."""
        rng = np.random.default_rng(2)
        for a1, a2, T in zip(rng.uniform(-3, 3, 50), rng.uniform(-3, 3, 50), rng.uniform(0.5, 10, 50)):
            j = objective_two_slot(a1, a2, T, self.params)
            self.assertAlmostEqual(objective_two_slot(a2, a1, T, self.params), j, delta=1e-12)
            self.assertAlmostEqual(objective_two_slot(-a1, -a2, T, self.params), j, delta=1e-12)

    def test_matches_fidelity(self):
        """Test the convenience entry point against fidelity()."""
        field = ControlField([0.4, -0.9], 2.5)
        self.assertEqual(objective_two_slot(0.4, -0.9, 2.5, self.params), fidelity(field, self.params))


if __name__ == '__main__':
    unittest.main()
