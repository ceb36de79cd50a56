"""
Tests for the evaluation metrics and the full report.
"""
import os
import tempfile
import unittest

import numpy as np
import torch

from datagen import GenerationConfig, InputSpec, generate_dataset
from dynamics import load_params
from evaluation import (
    EVAL_SPLITS, EvalConfig, EvalReport, VPTStats, build_eval_sets, eval_period, full_report,
    one_step_mse, position_errors, valid_steps, vpt, vpt_suite,
)
from losses import Batch
from model import ModelConfig, init_params
from utils.errors import ConfigError, DatasetError
from utils.helpers import load_json, save_json
from tests.stubs import FlowStub, StepErrorStub

T = 0.08


def _sine_config(n_traj=3, n_steps=21, seed=4):
    return GenerationConfig(n_traj=n_traj, n_steps=n_steps, seed=seed,
                            inputs=InputSpec(kind="sine", amplitude=3.0))


class TestValidSteps(unittest.TestCase):
    """Test cases for the leading run of valid steps."""

    def test_strict_prefix(self):
        errors = torch.tensor([[0.01, 0.06, 0.01, 0.0], [0.0, 0.05, 0.02, 0.049], [0.2, 0.0, 0.0, 0.0]])
        self.assertEqual(valid_steps(errors, 0.05).tolist(), [1, 4, 0])

    def test_non_finite_errors_end_the_run(self):
        errors = torch.tensor([0.0, float("inf"), 0.0])
        self.assertEqual(valid_steps(errors, 0.05).item(), 1)

    def test_from_values_uses_population_std(self):
        stats = VPTStats.from_values([0.0, 1.0, 2.0, 3.0])
        self.assertEqual(stats.mean_s, 1.5)
        self.assertAlmostEqual(stats.std_s, np.sqrt(1.25), places=14)
        self.assertEqual(stats.per_traj, [0.0, 1.0, 2.0, 3.0])


class TestVPT(unittest.TestCase):
    """Test cases for the valid prediction time."""

    def setUp(self):
        self.params = load_params()
        self.dataset = generate_dataset(_sine_config(), self.params)
        self.targets = Batch.from_dataset(self.dataset).states

    def _vpt(self, errors, index=0):
        trajectory = self.dataset.trajectories[index]
        stub = StepErrorStub(self.targets[index:index + 1], errors)
        return vpt(stub, trajectory)

    def test_perfect_predictor_reaches_horizon(self):
        self.assertAlmostEqual(self._vpt([0.0] * 20), 20 * T, places=12)

    def test_first_step_failure(self):
        self.assertEqual(self._vpt([0.06] + [0.0] * 19), 0.0)

    def test_growing_error(self):
        errors = [0.004 * k for k in range(1, 21)]
        self.assertAlmostEqual(self._vpt(errors), 12 * T, places=12)

    def test_recovery_does_not_count(self):
        errors = [0.0, 0.0, 0.1] + [0.0] * 17
        self.assertAlmostEqual(self._vpt(errors), 2 * T, places=12)

    def test_nan_state_is_invalid(self):
        errors = [0.0, 0.0, 0.0, float("nan")] + [0.0] * 16
        self.assertAlmostEqual(self._vpt(errors), 3 * T, places=12)

    def test_horizon(self):
        trajectory = self.dataset.trajectories[1]
        stub = StepErrorStub(self.targets[1:2], [0.0] * 20)
        self.assertAlmostEqual(vpt(stub, trajectory, horizon=5), 5 * T, places=12)

    def test_suite_statistics(self):
        late = [torch.tensor([0.0, 0.1 if k >= 5 else 0.0, 0.1]) for k in range(20)]
        stats = vpt_suite(StepErrorStub(self.targets, late), self.dataset)
        expected = [20 * T, 5 * T, 0.0]
        for got, want in zip(stats.per_traj, expected):
            self.assertAlmostEqual(got, want, places=12)
        self.assertAlmostEqual(stats.mean_s, float(np.mean(expected)), places=12)
        self.assertAlmostEqual(stats.std_s, float(np.std(expected)), places=12)

    def test_exact_dynamics(self):
        stats = vpt_suite(FlowStub(self.params), self.dataset)
        for value in stats.per_traj:
            self.assertAlmostEqual(value, 20 * T, places=12)

    def test_diverging_network(self):
        model = init_params(ModelConfig(n_layers=1, n_hidden=4, rotate_planar_increments=False))
        with torch.no_grad():
            model.output.bias.fill_(1e308)
        with self.assertLogs(level="WARNING"):
            errors = position_errors(model, self.dataset)
        self.assertEqual(tuple(errors.shape), (3, 20))
        self.assertTrue(torch.isinf(errors[:, 1:]).all())
        self.assertEqual(vpt_suite(model, self.dataset).mean_s, 0.0)


class TestEvalSets(unittest.TestCase):
    """Test cases for the dev and test sets."""

    def test_periods_and_seeds(self):
        base = _sine_config(n_traj=2, n_steps=6, seed=10)
        sets = build_eval_sets(base, load_params())
        self.assertEqual(tuple(sets), EVAL_SPLITS)
        self.assertEqual([sets[s].T for s in EVAL_SPLITS], [0.08, 0.06, 0.1])
        for split in EVAL_SPLITS:
            self.assertEqual(sets[split].n_steps, 6)
            self.assertEqual(len(sets[split]), 2)
        self.assertEqual([sets[s].manifest["seed"] for s in EVAL_SPLITS], [10, 11, 12])

    def test_eval_period(self):
        self.assertEqual(eval_period(0.08, "interp"), 0.06)
        self.assertEqual(eval_period(0.08, "extrap"), 0.1)
        self.assertEqual(eval_period(0.08, "dev"), 0.08)

    def test_requires_sine_inputs(self):
        with self.assertRaises(ConfigError):
            build_eval_sets(GenerationConfig(n_traj=1, n_steps=3), load_params())

    def test_eval_config(self):
        with self.assertRaises(ConfigError):
            EvalConfig(threshold=0.0)
        with self.assertRaises(ConfigError):
            EvalConfig.from_dict({"horizon": 3})
        self.assertEqual(EvalConfig.from_dict({"threshold": 0.1}).threshold, 0.1)


class TestFullReport(unittest.TestCase):
    """Test cases for the full evaluation report."""

    def setUp(self):
        self.params = load_params()
        self.sets = build_eval_sets(_sine_config(n_traj=2, n_steps=12, seed=20), self.params)

    def test_exact_dynamics(self):
        config = EvalConfig(n_pred=3)
        report = full_report(FlowStub(self.params), self.sets, self.params, config, config_echo={"run": "flow"})
        self.assertLess(report.L1, -9.0)
        self.assertLess(report.L2, -9.0)
        self.assertLess(report.L3, -6.0)
        for value in (report.L1, report.L2, report.L3, report.L4, report.L5):
            self.assertGreaterEqual(value, -12.0)
        self.assertAlmostEqual(report.VPT1.mean_s, 11 * 0.08, places=12)
        self.assertAlmostEqual(report.VPT2.mean_s, 11 * 0.06, places=12)
        self.assertAlmostEqual(report.VPT3.mean_s, 11 * 0.1, places=12)
        self.assertAlmostEqual(report.horizon_s, 11 * 0.08, places=12)
        self.assertEqual(report.threshold_m, 0.05)
        self.assertEqual(report.config_echo, {"run": "flow"})

    def test_untrained_network_is_worse(self):
        model = init_params(ModelConfig(n_layers=2, n_hidden=8))
        report = full_report(model, self.sets, self.params, EvalConfig(n_pred=3))
        self.assertGreater(report.L1, full_report(FlowStub(self.params), self.sets, self.params,
                                                  EvalConfig(n_pred=3)).L1)
        self.assertGreater(one_step_mse(model, self.sets["dev"]), 0.0)

    def test_json_round_trip(self):
        report = full_report(FlowStub(self.params), self.sets, self.params, EvalConfig(n_pred=2))
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "report.json")
            save_json(report.to_dict(), path)
            self.assertEqual(EvalReport.from_dict(load_json(path)), report)

    def test_missing_split(self):
        sets = {"dev": self.sets["dev"]}
        with self.assertRaises(DatasetError):
            full_report(FlowStub(self.params), sets, self.params)


if __name__ == '__main__':
    unittest.main()
