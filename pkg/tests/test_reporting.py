"""
Tests for the reporting module.
"""
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd

from database import RunStore
from datagen import GenerationConfig, InputSpec, generate_dataset
from dynamics import load_params
from evaluation import EvalReport, VPTStats
from reporting.report_generator import ReportGenerator
from trainer import EpochRecord, TrainHistory
from utils.helpers import load_json
from tests.stubs import FlowStub


def _report():
    stats = VPTStats.from_values([0.4, 0.8])
    return EvalReport(L1=-5.0, L2=-4.0, L3=-6.0, L4=-5.5, L5=-4.5, VPT1=stats, VPT2=stats, VPT3=stats,
                      threshold_m=0.05, horizon_s=0.4, config_echo={"seed": 0})


class TestReportGenerator(unittest.TestCase):
    """Test cases for the ReportGenerator class."""

    @classmethod
    def setUpClass(cls):
        cls.params = load_params()
        config = GenerationConfig(n_traj=3, n_steps=6, seed=2, inputs=InputSpec(kind="sine", amplitude=3.0))
        cls.dataset = generate_dataset(config, cls.params)
        cls.model = FlowStub(cls.params)

    def setUp(self):
        """Set up an output directory."""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.reporter = ReportGenerator(os.path.join(self.temp_dir.name, "out"))

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_creates_output_directory(self):
        self.assertTrue(os.path.isdir(self.reporter.output_dir))

    def test_write_report(self):
        path = self.reporter.write_report(_report(), "eval.json")
        self.assertEqual(os.path.basename(path), "eval.json")
        self.assertEqual(EvalReport.from_dict(load_json(path)), _report())

    def test_position_error_frame(self):
        frame = self.reporter.position_error_frame(self.model, {"dev": self.dataset, "again": self.dataset})
        self.assertEqual(list(frame.columns), ["split", "traj", "step", "t", "error_m"])
        self.assertEqual(len(frame), 2 * 3 * 5)
        self.assertEqual(frame["step"].min(), 1)
        self.assertEqual(frame["step"].max(), 5)
        np.testing.assert_allclose(frame["t"], frame["step"] * 0.08)
        self.assertLess(frame["error_m"].max(), 1e-6)

    def test_write_position_errors(self):
        path = self.reporter.write_position_errors(self.model, {"dev": self.dataset})
        frame = pd.read_csv(path)
        self.assertEqual(len(frame), 15)
        self.assertEqual(set(frame["split"]), {"dev"})

    def test_rollout_frame(self):
        frame = self.reporter.rollout_frame(self.model, self.dataset, 1)
        self.assertEqual(len(frame), 6)
        self.assertEqual(list(frame.columns),
                         ["t", "x", "x_pred", "y", "y_pred", "z", "z_pred", "psi", "psi_pred"])
        for name in ("x", "y", "z"):
            self.assertEqual(frame[f"{name}_pred"].iloc[0], frame[name].iloc[0])
            np.testing.assert_allclose(frame[f"{name}_pred"], frame[name], atol=1e-6)

    def test_write_rollouts(self):
        paths = self.reporter.write_rollouts(self.model, self.dataset, 10)
        self.assertEqual([os.path.basename(p) for p in paths],
                         ["rollout_0000.csv", "rollout_0001.csv", "rollout_0002.csv"])
        self.assertEqual(self.reporter.write_rollouts(self.model, self.dataset, 0), [])

    def test_plot_training_curves(self):
        history = TrainHistory()
        for epoch in range(3):
            history.append(EpochRecord(epoch=epoch, losses={"data": 10.0 ** -epoch, "phy": 0.5},
                                       dev_loss=0.1, lr=8e-3, seconds=float(epoch)))
        path = self.reporter.plot_training_curves(history.to_dataframe())
        self.assertTrue(os.path.exists(path))

    def test_plot_training_curves_without_metrics(self):
        with self.assertLogs(level="WARNING"):
            self.assertIsNone(self.reporter.plot_training_curves(TrainHistory().to_dataframe()))

    def test_plot_rollouts(self):
        self.assertIsNone(self.reporter.plot_rollouts(self.model, self.dataset, 0))
        path = self.reporter.plot_rollouts(self.model, self.dataset, 2)
        self.assertTrue(os.path.exists(path))

    def test_plot_position_errors(self):
        frame = self.reporter.position_error_frame(self.model, {"dev": self.dataset})
        frame["error_m"] += 1e-3
        path = self.reporter.plot_position_errors(frame, 0.05)
        self.assertTrue(os.path.exists(path))
        self.assertIsNone(self.reporter.plot_position_errors(frame.iloc[0:0], 0.05))

    def test_plot_grid_summary(self):
        store = RunStore(os.path.join(self.temp_dir.name, "runs.sqlite"))
        try:
            store.record_run("failed_cell", "failed", 0.0, error="boom")
            with self.assertLogs(level="WARNING"):
                self.assertIsNone(self.reporter.plot_grid_summary(store.to_dataframe()))
            store.record_run("a", "ok", 1.0, report=_report())
            store.record_run("b", "ok", 1.0, report=_report())
            path = self.reporter.plot_grid_summary(store.to_dataframe())
            self.assertTrue(os.path.exists(path))
        finally:
            store.engine.dispose()

    @patch("matplotlib.pyplot.savefig", side_effect=OSError("disk full"))
    def test_plot_errors_are_logged_and_raised(self, mock_savefig):
        with self.assertLogs(level="ERROR") as logs:
            with self.assertRaises(OSError):
                self.reporter.plot_rollouts(self.model, self.dataset, 1)
        self.assertTrue(any("plot_rollouts" in line for line in logs.output))
        mock_savefig.assert_called_once()


if __name__ == '__main__':
    unittest.main()
