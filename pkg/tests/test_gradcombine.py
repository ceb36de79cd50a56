"""
Tests for gradient combination.
"""
import math
import unittest

import torch

from gradcombine import clip_norm, combine_gradients, config_combine, norm_combine, sum_combine
from utils.errors import NumericalError


def _vec(*values):
    return torch.tensor(values, dtype=torch.float64)


class TestSumCombine(unittest.TestCase):
    """Test cases for the weighted sum."""

    def test_unit_weights(self):
        torch.testing.assert_close(sum_combine([_vec(1, 2), _vec(3, -1)]), _vec(4, 1))

    def test_weights(self):
        torch.testing.assert_close(sum_combine([_vec(1, 2), _vec(3, -1)], [1.0, 0.5]), _vec(2.5, 1.5))

    def test_mismatched_inputs(self):
        with self.assertRaises(ValueError):
            sum_combine([_vec(1, 2), _vec(1, 2, 3)])
        with self.assertRaises(ValueError):
            sum_combine([_vec(1, 2)], [1.0, 2.0])
        with self.assertRaises(ValueError):
            sum_combine([])


class TestConfigCombine(unittest.TestCase):
    """Test cases for the conflict-free combination."""

    def _unit_projections(self, grads, combined):
        direction = combined / torch.linalg.vector_norm(combined)
        return [torch.dot(g / torch.linalg.vector_norm(g), direction).item() for g in grads]

    def test_identical_gradients(self):
        g = _vec(3, 4)
        torch.testing.assert_close(config_combine([g, g]), 2 * g)

    def test_orthogonal_gradients_use_bisector(self):
        combined = config_combine([_vec(1, 0), _vec(0, 2)])
        torch.testing.assert_close(combined, _vec(1.5, 1.5))

    def test_opposed_pair_has_equal_projections(self):
        angle = 2 * math.pi / 3
        grads = [_vec(1, 0), _vec(2 * math.cos(angle), 2 * math.sin(angle))]
        projections = self._unit_projections(grads, config_combine(grads))
        self.assertAlmostEqual(projections[0], 0.5, places=12)
        self.assertAlmostEqual(projections[1], 0.5, places=12)

    def test_random_gradients_have_equal_projections(self):
        generator = torch.Generator().manual_seed(0)
        for _ in range(10):
            grads = list(torch.randn(3, 20, generator=generator, dtype=torch.float64))
            projections = self._unit_projections(grads, config_combine(grads))
            for p in projections:
                self.assertGreaterEqual(p, 0.0)
                self.assertAlmostEqual(p, projections[0], delta=1e-10)

    def test_zero_gradient_is_ignored(self):
        torch.testing.assert_close(config_combine([_vec(0, 0), _vec(0, 2)]), _vec(0, 2))

    def test_all_zero(self):
        with self.assertRaises(NumericalError):
            config_combine([_vec(0, 0), _vec(0, 0)])


class TestNormCombine(unittest.TestCase):
    """Test cases for the norm-matched combination."""

    def test_rescales_to_reference(self):
        combined = norm_combine([_vec(1, 0), _vec(0, 2)])
        torch.testing.assert_close(combined, _vec(1, 1) / math.sqrt(2))

    def test_result_has_reference_norm(self):
        generator = torch.Generator().manual_seed(1)
        grads = list(torch.randn(4, 30, generator=generator, dtype=torch.float64))
        combined = norm_combine(grads, [1.0, 0.5, 0.5, 0.5])
        self.assertAlmostEqual(torch.linalg.vector_norm(combined).item(),
                               torch.linalg.vector_norm(grads[0]).item(), places=12)

    def test_invariant_to_scale_of_other_gradients(self):
        generator = torch.Generator().manual_seed(2)
        g0, g1 = torch.randn(2, 10, generator=generator, dtype=torch.float64)
        torch.testing.assert_close(norm_combine([g0, g1]), norm_combine([g0, 7.0 * g1]))

    def test_zero_reference(self):
        with self.assertRaises(NumericalError):
            norm_combine([_vec(0, 0), _vec(1, 0)])

    def test_cancelling_gradients(self):
        with self.assertRaises(NumericalError):
            norm_combine([_vec(1, 0), _vec(-3, 0)])


class TestClipNorm(unittest.TestCase):
    """Test cases for gradient clipping."""

    def test_long_vector_is_clipped(self):
        clipped = clip_norm(_vec(6, 8), 5.0)
        torch.testing.assert_close(clipped, _vec(3, 4))

    def test_short_vector_is_unchanged(self):
        g = _vec(1.8, 2.4)
        self.assertIs(clip_norm(g, 5.0), g)

    def test_zero_vector(self):
        torch.testing.assert_close(clip_norm(_vec(0, 0), 5.0), _vec(0, 0))

    def test_idempotent(self):
        once = clip_norm(_vec(30, -40, 12), 5.0)
        torch.testing.assert_close(clip_norm(once, 5.0), once)
        self.assertLessEqual(torch.linalg.vector_norm(once).item(), 5.0 + 1e-12)


class TestCombineGradients(unittest.TestCase):
    """Test cases for scheme dispatch."""

    def setUp(self):
        self.grads = {"data": _vec(1, 0), "phy": _vec(0, 2)}
        self.weights = {"data": 1.0, "phy": 0.5}

    def test_dispatch(self):
        torch.testing.assert_close(combine_gradients("sum", self.grads, self.weights), _vec(1, 1))
        torch.testing.assert_close(combine_gradients("config", self.grads, self.weights), _vec(1.5, 1.5))
        expected = _vec(1, 0.5) / math.sqrt(1.25)
        torch.testing.assert_close(combine_gradients("norm", self.grads, self.weights), expected)

    def test_reference_falls_back_to_first_active_loss(self):
        grads = {"phy": _vec(0, 2), "ic": _vec(3, 0)}
        combined = combine_gradients("norm", grads, {"phy": 1.0, "ic": 1.0})
        self.assertAlmostEqual(torch.linalg.vector_norm(combined).item(), 2.0, places=12)

    def test_zero_gradient_is_dropped_with_warning(self):
        grads = {"data": _vec(1, 0), "phy": _vec(0, 0)}
        with self.assertLogs(level="WARNING") as logs:
            combined = combine_gradients("sum", grads, self.weights)
        self.assertIn("phy", logs.output[0])
        torch.testing.assert_close(combined, _vec(1, 0))

    def test_all_zero_gradients_give_zero_direction(self):
        grads = {"data": _vec(0, 0, 0), "phy": _vec(0, 0, 0)}
        for scheme in ("sum", "config", "norm"):
            with self.subTest(scheme=scheme):
                with self.assertLogs(level="WARNING"):
                    combined = combine_gradients(scheme, grads, self.weights)
                torch.testing.assert_close(combined, _vec(0, 0, 0))

    def test_unknown_scheme(self):
        with self.assertRaises(ValueError):
            combine_gradients("pcgrad", self.grads, self.weights)


if __name__ == '__main__':
    unittest.main()
