"""
Tests for the model module.
"""
import math
import os
import tempfile
import unittest

import torch

from datagen.sampling import to_net_state
from dynamics import integrate_step, load_params
from model import (
    ModelConfig, activation, init_params, load_checkpoint, model_state, renormalize_yaw, save_checkpoint,
)
from tests.stubs import FlowStub
from utils.errors import CheckpointError, ConfigError, NumericalError
from utils.helpers import get_file_hash


def _zero_output(model):
    with torch.no_grad():
        model.output.weight.zero_()
        model.output.bias.zero_()
    return model


def _random_inputs(batch=5, seed=0):
    generator = torch.Generator().manual_seed(seed)
    states = torch.rand(batch, 8, generator=generator, dtype=torch.float64) * 2.0 - 1.0
    states[:, 3] *= math.pi
    controls = torch.rand(batch, 4, generator=generator, dtype=torch.float64)
    return to_net_state(states), controls


class TestActivation(unittest.TestCase):
    """Test cases for the adaptive activations."""

    def test_values_at_zero(self):
        beta = torch.tensor(2.0, dtype=torch.float64)
        x = torch.tensor(0.0, dtype=torch.float64)
        self.assertEqual(activation(x, beta, "adaptive_tanh").item(), 0.0)
        self.assertAlmostEqual(activation(x, beta, "adaptive_softplus").item(), math.log(2.0) / 2.0, places=15)

    def test_softplus_does_not_overflow(self):
        value = activation(torch.tensor(100.0, dtype=torch.float64), torch.tensor(1.0, dtype=torch.float64),
                           "adaptive_softplus")
        self.assertTrue(math.isfinite(value.item()))
        self.assertAlmostEqual(value.item(), 100.0, places=10)
        value = activation(torch.tensor(1000.0, dtype=torch.float64), torch.tensor(3.0, dtype=torch.float64),
                           "adaptive_softplus")
        self.assertAlmostEqual(value.item(), 1000.0, places=8)

    def test_derivatives_match_finite_differences(self):
        generator = torch.Generator().manual_seed(1)
        h = 1e-6
        for kind in ("adaptive_tanh", "adaptive_softplus"):
            for _ in range(10):
                x = (torch.rand((), generator=generator, dtype=torch.float64) * 4.0 - 2.0).requires_grad_()
                beta = (torch.rand((), generator=generator, dtype=torch.float64) + 0.5).requires_grad_()
                dx, dbeta = torch.autograd.grad(activation(x, beta, kind), (x, beta))
                with torch.no_grad():
                    fd_x = (activation(x + h, beta, kind) - activation(x - h, beta, kind)) / (2 * h)
                    fd_beta = (activation(x, beta + h, kind) - activation(x, beta - h, kind)) / (2 * h)
                self.assertAlmostEqual(dx.item(), fd_x.item(), delta=1e-8)
                self.assertAlmostEqual(dbeta.item(), fd_beta.item(), delta=1e-8)


class TestModelConfig(unittest.TestCase):
    """Test cases for the architecture settings."""

    def test_invalid_values_rejected(self):
        with self.assertRaises(ConfigError):
            ModelConfig(n_layers=0)
        with self.assertRaises(ConfigError):
            ModelConfig(n_hidden=0)
        with self.assertRaises(ConfigError):
            ModelConfig(activation="relu")
        with self.assertRaises(ConfigError):
            ModelConfig.from_dict({"width": 32})

    def test_dict_round_trip(self):
        config = ModelConfig(n_layers=2, n_hidden=8, activation="adaptive_tanh", residual_connection=False)
        self.assertEqual(ModelConfig.from_dict(config.to_dict()), config)


class TestInitParams(unittest.TestCase):
    """Test cases for deterministic initialization."""

    def test_parameter_count(self):
        # 14*32+32+1, 32*32+32+1+64, 32*32+32+1, 32*32+32+1+64, 32*9+9
        model = init_params(ModelConfig(n_layers=4, n_hidden=32))
        self.assertEqual(model.parameter_count(), 4077)
        model = init_params(ModelConfig(n_layers=4, n_hidden=32, layer_norm_every_2nd=False))
        self.assertEqual(model.parameter_count(), 4077 - 128)

    def test_initial_values(self):
        model = init_params(ModelConfig())
        for layer in model.hidden:
            self.assertEqual(layer.activation.beta.item(), 1.0)
            self.assertTrue(bool((layer.linear.bias == 0).all()))
            if layer.norm is not None:
                self.assertTrue(bool((layer.norm.weight == 1).all()))
                self.assertTrue(bool((layer.norm.bias == 0).all()))
        self.assertEqual([layer.norm is not None for layer in model.hidden], [False, True, False, True])
        bound = math.sqrt(6.0 / (14 + 32))
        self.assertLessEqual(model.hidden[0].linear.weight.abs().max().item(), bound)

    def test_same_seed_same_params(self):
        a = init_params(ModelConfig(), seed=3)
        b = init_params(ModelConfig(), seed=3)
        c = init_params(ModelConfig(), seed=4)
        for pa, pb in zip(a.parameters(), b.parameters()):
            torch.testing.assert_close(pa, pb, rtol=0.0, atol=0.0)
        self.assertFalse(torch.equal(a.hidden[0].linear.weight, c.hidden[0].linear.weight))

    def test_all_parameters_are_double(self):
        for p in init_params(ModelConfig(n_layers=2, n_hidden=8)).parameters():
            self.assertEqual(p.dtype, torch.float64)


class TestForward(unittest.TestCase):
    """Test cases for the residual network and the planar rotation."""

    def setUp(self):
        self.ns0, self.u0 = _random_inputs()

    def test_residual_identity(self):
        model = _zero_output(init_params(ModelConfig()))
        for t in (0.0, 0.03, 0.08, 1.0):
            torch.testing.assert_close(model(self.ns0, self.u0, t), self.ns0, rtol=0.0, atol=0.0)

    def test_ablation_returns_raw_increment(self):
        model = _zero_output(init_params(ModelConfig(residual_connection=False)))
        out = model(self.ns0, self.u0, 0.08)
        torch.testing.assert_close(out, torch.zeros_like(out), rtol=0.0, atol=0.0)

    def test_rotation_at_quarter_turn(self):
        model = _zero_output(init_params(ModelConfig(n_layers=2, n_hidden=8)))
        with torch.no_grad():
            model.output.bias.copy_(torch.tensor([1.0, 0, 0, -1.0, 1.0, 0, 0, 0, 0], dtype=torch.float64))
        ns0 = torch.tensor([0.5, -0.5, 0, 1.0, 0.0, 0, 0, 0, 0], dtype=torch.float64)
        out = model(ns0, torch.zeros(4, dtype=torch.float64), 0.08)
        self.assertEqual(out[0].item(), 0.5)
        self.assertEqual(out[1].item(), 0.5)
        self.assertEqual(out[3].item(), 0.0)
        self.assertEqual(out[4].item(), 1.0)

    def test_rotation_preserves_planar_length(self):
        model = init_params(ModelConfig(n_layers=2, n_hidden=16), seed=5)
        ns0 = self.ns0
        raw = model.trunk(model._trunk_input(ns0, self.u0, 0.08))
        out = model(ns0, self.u0, 0.08)
        world = torch.linalg.vector_norm(out[:, :2] - ns0[:, :2], dim=-1)
        body = torch.linalg.vector_norm(raw[:, :2], dim=-1)
        torch.testing.assert_close(world, body, rtol=0.0, atol=1e-12)

    def test_layer_norm_statistics(self):
        model = init_params(ModelConfig(n_layers=4, n_hidden=32, layer_norm_eps=0.0), seed=2)
        z = model._trunk_input(self.ns0, self.u0, 0.05)
        for layer in model.hidden:
            if layer.norm is not None:
                normed = layer.pre_activation(z)
                torch.testing.assert_close(normed.mean(dim=-1), torch.zeros(5, dtype=torch.float64),
                                           rtol=0.0, atol=1e-10)
                torch.testing.assert_close(normed.var(dim=-1, unbiased=False), torch.ones(5, dtype=torch.float64),
                                           rtol=0.0, atol=1e-10)
            z = layer(z)

    def test_continuous_in_time(self):
        model = init_params(ModelConfig(), seed=6)
        for t in (0.0, 0.02, 0.05, 0.08):
            delta = model(self.ns0, self.u0, t + 1e-9) - model(self.ns0, self.u0, t)
            self.assertLessEqual(delta.abs().max().item(), 1e-6)

    def test_per_sample_times(self):
        model = init_params(ModelConfig(n_layers=2, n_hidden=8))
        times = torch.tensor([0.0, 0.01, 0.02, 0.03, 0.04], dtype=torch.float64)
        batched = model(self.ns0, self.u0, times)
        for i in range(5):
            torch.testing.assert_close(batched[i], model(self.ns0[i], self.u0[i], times[i].item()),
                                       rtol=0.0, atol=1e-14)

    def test_non_finite_output_names_layer(self):
        model = init_params(ModelConfig(n_layers=2, n_hidden=8))
        with torch.no_grad():
            model.hidden[1].linear.weight[0, 0] = float("nan")
        with self.assertRaises(NumericalError) as ctx:
            model(self.ns0, self.u0, 0.08)
        self.assertEqual(ctx.exception.get("layer"), "hidden_2")


class TestPredictAndRollout(unittest.TestCase):
    """Test cases for one-step prediction and autoregressive rollout."""

    def setUp(self):
        self.model = init_params(ModelConfig(n_layers=2, n_hidden=16), seed=1)
        self.ns0, _ = _random_inputs(batch=3)
        generator = torch.Generator().manual_seed(9)
        self.controls = torch.rand(3, 6, 4, generator=generator, dtype=torch.float64)

    def test_predict_step_is_forward_at_period(self):
        u = self.controls[:, 0]
        torch.testing.assert_close(self.model.predict_step(self.ns0, u, 0.08), self.model(self.ns0, u, 0.08),
                                   rtol=0.0, atol=0.0)

    def test_predict_step_accepts_physical_state(self):
        state = torch.tensor([0.1, 0.2, 0.3, 0.4, 0.5, 0.0, 0.1, 0.0], dtype=torch.float64)
        u = self.controls[0, 0]
        torch.testing.assert_close(self.model.predict_step(state, u, 0.08),
                                   self.model.predict_step(to_net_state(state), u, 0.08), rtol=0.0, atol=0.0)

    def test_zero_period_with_zero_trunk(self):
        model = _zero_output(init_params(ModelConfig()))
        torch.testing.assert_close(model.predict_step(self.ns0, self.controls[:, 0], 0.0), self.ns0,
                                   rtol=0.0, atol=0.0)

    def test_flow_stub_matches_simulator(self):
        params = load_params()
        stub = FlowStub(params)
        state = torch.tensor([0.0, 0.0, 0.0, 0.7, 0.4, -0.3, 0.25, 0.2], dtype=torch.float64)
        u = torch.tensor([1.0, 0.05, 2.0, 0.02], dtype=torch.float64)
        predicted = stub.predict_step(state, u, 0.08)
        expected = to_net_state(integrate_step(state, u, 0.08, params))
        torch.testing.assert_close(predicted.detach(), expected, rtol=0.0, atol=1e-8)

    def test_single_step_rollout(self):
        rolled = self.model.rollout(self.ns0, self.controls[:, :1], 0.08)
        self.assertEqual(rolled.shape, (3, 1, 9))
        torch.testing.assert_close(rolled[:, 0], self.model.predict_step(self.ns0, self.controls[:, 0], 0.08),
                                   rtol=0.0, atol=0.0)

    def test_zero_increment_rollout(self):
        model = _zero_output(init_params(ModelConfig()))
        rolled = model.rollout(self.ns0, self.controls, 0.08)
        torch.testing.assert_close(rolled, self.ns0.unsqueeze(1).expand(3, 6, 9), rtol=0.0, atol=0.0)

    def test_rollout_equals_chained_steps(self):
        rolled = self.model.rollout(self.ns0, self.controls, 0.08)
        state = self.ns0
        for k in range(6):
            state = self.model.predict_step(state, self.controls[:, k], 0.08)
            torch.testing.assert_close(rolled[:, k], state, rtol=0.0, atol=0.0)

    def test_renormalized_rollout_feeds_unit_yaw(self):
        model = init_params(ModelConfig(n_layers=2, n_hidden=16, renormalize_yaw_on_rollout=True), seed=1)
        rolled = model.rollout(self.ns0, self.controls, 0.08)
        state = self.ns0
        for k in range(6):
            state = model(state, self.controls[:, k], 0.08)
            torch.testing.assert_close(rolled[:, k], state, rtol=0.0, atol=0.0)
            state = renormalize_yaw(state)
            torch.testing.assert_close(state[:, 3] ** 2 + state[:, 4] ** 2, torch.ones(3, dtype=torch.float64),
                                       rtol=0.0, atol=1e-12)

    def test_empty_rollout_rejected(self):
        with self.assertRaises(ValueError):
            self.model.rollout(self.ns0, self.controls[:, :0], 0.08)

    def test_divergence_carries_step(self):
        model = _zero_output(init_params(ModelConfig(n_layers=2, n_hidden=8, rotate_planar_increments=False)))
        with torch.no_grad():
            model.output.bias[0] = 1e308
        with self.assertRaises(NumericalError) as ctx:
            model.rollout(self.ns0, self.controls, 0.08)
        self.assertEqual(ctx.exception.get("step"), 1)


class TestCheckpoint(unittest.TestCase):
    """Test cases for JSON checkpoints."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.model = init_params(ModelConfig(n_layers=3, n_hidden=8), seed=4)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_byte_identical(self):
        first = os.path.join(self.tmp.name, "a.json")
        second = os.path.join(self.tmp.name, "b.json")
        save_checkpoint(self.model, first)
        save_checkpoint(load_checkpoint(first), second)
        self.assertEqual(get_file_hash(first), get_file_hash(second))

    def test_loaded_model_predicts_identically(self):
        path = os.path.join(self.tmp.name, "model.json")
        save_checkpoint(self.model, path, metadata={"epoch": 3})
        loaded = load_checkpoint(path, expected_config=self.model.config)
        ns0, u0 = _random_inputs()
        torch.testing.assert_close(loaded(ns0, u0, 0.08), self.model(ns0, u0, 0.08), rtol=0.0, atol=0.0)

    def test_layer_records(self):
        state = model_state(self.model)
        self.assertEqual(state["parameter_ordering"], "layerwise-w-b-beta-ln/v1")
        self.assertEqual([layer["name"] for layer in state["layers"]], ["hidden_1", "hidden_2", "hidden_3", "output"])
        self.assertIn("ln_gain", state["layers"][1])
        self.assertNotIn("ln_gain", state["layers"][0])
        self.assertEqual(state["layers"][0]["weight"]["shape"], [8, 14])

    def test_architecture_mismatch(self):
        path = os.path.join(self.tmp.name, "model.json")
        save_checkpoint(self.model, path)
        with self.assertRaises(CheckpointError):
            load_checkpoint(path, expected_config=ModelConfig(n_layers=3, n_hidden=16))

    def test_missing_and_corrupt_files(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(os.path.join(self.tmp.name, "missing.json"))
        path = os.path.join(self.tmp.name, "bad.json")
        with open(path, "w") as f:
            f.write("{not json")
        with self.assertRaises(CheckpointError):
            load_checkpoint(path)


if __name__ == '__main__':
    unittest.main()
