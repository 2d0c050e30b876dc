import unittest

import numpy as np
import pytest

from meanfield_psro.game import PolicySet, constant_policies
from meanfield_psro.games import biased_rps
from meanfield_psro.regret.compression import RegretTrace, compress_ce, compress_cce, noisy_compression_gap
from meanfield_psro.regret.device import CorrelationDevice
from meanfield_psro.regret.protocol import run_regret_loop


class TestRegretTrace(unittest.TestCase):
    """Class to test the regret trace."""

    def setUp(self):
        """Two iterates over two policies."""
        self.trace = RegretTrace(2)
        self.trace.append(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        self.trace.append(np.array([0.5, 0.5]), np.array([2.0, 0.0]))

    def test_external(self):
        """Test external regrets against the played mixture."""
        np.testing.assert_allclose(self.trace.external, [[0.0, 1.0], [1.0, -1.0]])

    def test_internal(self):
        """Test swap regrets weighted by the recommendation probability."""
        internal = self.trace.internal
        self.assertEqual(internal.shape, (2, 2, 2))
        np.testing.assert_allclose(internal[0], [[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(internal[1], [[0.0, -1.0], [1.0, 0.0]])

    def test_append_shape(self):
        """Test rows that do not match the policy set."""
        self.assertRaises(ValueError, self.trace.append, np.ones(3) / 3, np.zeros(3))

    def test_dict_round_trip(self):
        """Test serialisation of the trace."""
        restored = RegretTrace.from_dict(self.trace.to_dict())
        np.testing.assert_equal(restored.iterates, self.trace.iterates)
        np.testing.assert_equal(restored.payoffs, self.trace.payoffs)

    def test_empty_trace(self):
        """Test compressing an empty trace."""
        self.assertRaises(ValueError, compress_cce, RegretTrace(2))
        self.assertRaises(ValueError, compress_ce, RegretTrace(2))


class TestCompression:
    """Class to test trace compression on regret-matching traces of biased RPS."""

    @pytest.fixture(scope="class")
    def trace(self):
        """A 300-step regret-matching trace."""
        game = biased_rps()
        policy_set = PolicySet(game, constant_policies(game))
        return run_regret_loop(game, policy_set, "external", t_max=300, target_regret=-np.inf, compress_every=300).trace

    def test_cce_compression_dominates_uniform(self, trace):
        """The compressed regret is never above the uniform average."""
        solution = compress_cce(trace)
        assert solution.value <= trace.external.mean(axis=0).max() + 1e-12

    def test_cce_compression_is_sparse(self, trace):
        """At most n iterates keep positive weight."""
        device = CorrelationDevice.from_weights(compress_cce(trace).rho, trace.iterates)
        assert device.n_atoms <= 3

    def test_ce_compression_dominates_uniform(self, trace):
        """The compressed swap regret is never above the uniform average."""
        solution = compress_ce(trace)
        assert solution.value <= trace.internal.mean(axis=0).max() + 1e-12
        assert np.count_nonzero(solution.rho) <= 9

    def test_compressed_value_matches_weights(self, trace):
        """The reported value is the maximal weighted regret."""
        solution = compress_cce(trace)
        assert solution.value == pytest.approx(float((solution.rho @ trace.external).max()))


class TestNoisyCompression:
    """Class to test compression of noisy regret matrices."""

    def test_gap_within_bound(self):
        """The optimality loss lies in [0, 4 ||eps||_inf]."""
        matrix = np.random.default_rng(0).normal(size=(30, 4))
        gaps, bounds = noisy_compression_gap(matrix, 0.1, range(20))
        assert np.all(gaps >= -1e-9)
        assert np.all(gaps <= bounds + 1e-9)

    def test_value_continuity_over_many_draws(self):
        """Across 1000 matrix and noise draws the optimality loss never leaves [0, 4 ||eps||_inf]."""
        rng = np.random.default_rng(12)
        violations = 0
        for draw in range(50):
            matrix = rng.normal(size=(int(rng.integers(2, 15)), int(rng.integers(2, 6))))
            sigma = float(rng.choice([1e-3, 1e-2, 1e-1, 1.0]))
            gaps, bounds = noisy_compression_gap(matrix, sigma, range(20 * draw, 20 * draw + 20))
            violations += int(np.sum((gaps < -1e-9) | (gaps > bounds + 1e-9)))
        assert violations == 0

    def test_no_noise(self):
        """Without noise the compression is exact."""
        matrix = np.random.default_rng(1).normal(size=(10, 3))
        gaps, _ = noisy_compression_gap(matrix, 0.0, range(3))
        np.testing.assert_allclose(gaps, 0.0, atol=1e-12)

    def test_negative_sigma(self):
        """Test a negative noise level."""
        with pytest.raises(ValueError):
            noisy_compression_gap(np.zeros((2, 2)), -1.0, [0])


class TestDevicePruning:
    """Class to test how compressed weights become a device."""

    def test_rounding_recommendation_dropped(self):
        """An atom whose only policy has a rounding-size marginal is removed."""
        device = CorrelationDevice.from_weights(np.array([1.0 - 2.6e-13, 2.6e-13]), np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert device.n_atoms == 1
        np.testing.assert_allclose(device.marginal(), [0.0, 1.0])

    def test_rounding_entries_zeroed(self):
        """Mixture entries of unrecommended policies are zeroed and the conditionals of the rest kept."""
        mixtures = np.array([[1.0 - 2e-11, 2e-11, 0.0], [0.0, 0.0, 1.0]])
        device = CorrelationDevice.from_weights(np.array([0.5, 0.5]), mixtures)
        assert device.marginal()[1] == 0.0
        np.testing.assert_equal(device.recommended(), [0, 2])
        np.testing.assert_allclose(device.mixtures[0], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(device.conditional(2), [0.0, 1.0])

    def test_small_atoms_dropped(self):
        """Weights at or below the cutoff are removed and the rest renormalised."""
        device = CorrelationDevice.from_weights(np.array([0.6, 1e-16, 0.4]), np.eye(3), cutoff=1e-15)
        np.testing.assert_allclose(device.weights, [0.6, 0.4])
        np.testing.assert_equal(device.recommended(), [0, 2])
