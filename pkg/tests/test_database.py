"""
Tests for the database module.
"""
import os
import tempfile
import unittest

import pandas as pd
import sqlalchemy as sa

from database import SUMMARY_COLUMNS, GridRun, RunStore
from evaluation import EvalReport, VPTStats


def _report(l1=-3.0):
    return EvalReport(
        L1=l1, L2=-2.5, L3=-4.0, L4=-2.9, L5=-2.7,
        VPT1=VPTStats.from_values([0.8, 1.6]),
        VPT2=VPTStats.from_values([0.6, 0.6]),
        VPT3=VPTStats.from_values([0.0, 1.0]),
        threshold_m=0.05, horizon_s=5.2,
    )


class TestRunStore(unittest.TestCase):
    """Test cases for the RunStore class."""

    def setUp(self):
        """Set up a registry in a temporary file."""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.db_path = os.path.join(self.temp_dir.name, "runs.sqlite")
        self.store = RunStore(self.db_path)

    def tearDown(self):
        self.store.engine.dispose()
        self.temp_dir.cleanup()

    def test_record_successful_run(self):
        run_id = self.store.record_run("data_only", "ok", 12.5, overrides={"train": {"losses": ["data"]}},
                                       report=_report())
        self.assertEqual(run_id, 1)
        runs = self.store.list_runs()
        self.assertEqual(len(runs), 1)
        run = runs[0]
        self.assertEqual(run["cell"], "data_only")
        self.assertEqual(run["L1"], -3.0)
        self.assertAlmostEqual(run["VPT1_mean_s"], 1.2, places=12)
        self.assertAlmostEqual(run["VPT1_std_s"], 0.4, places=12)
        self.assertEqual(run["VPT2_std_s"], 0.0)
        self.assertEqual(run["overrides"], {"train": {"losses": ["data"]}})
        self.assertIsNone(run["error"])

    def test_record_failed_run(self):
        self.store.record_run("bad", "failed", 0.0, error="train.grad_scheme: expected one of ...")
        run = self.store.list_runs()[0]
        self.assertEqual(run["status"], "failed")
        self.assertIsNone(run["L1"])
        self.assertIn("grad_scheme", run["error"])
        self.assertEqual(run["overrides"], {})

    def test_summary_frame(self):
        self.store.record_run("a", "ok", 1.0, report=_report(-3.0))
        self.store.record_run("b", "failed", 2.0, error="boom")
        self.store.record_run("c", "ok", 3.0, report=_report(-4.0))
        frame = self.store.to_dataframe()
        self.assertEqual(list(frame.columns), SUMMARY_COLUMNS)
        self.assertEqual(frame["cell"].tolist(), ["a", "b", "c"])
        self.assertTrue(pd.isna(frame.loc[1, "L1"]))
        self.assertEqual(frame.loc[2, "L1"], -4.0)

    def test_empty_registry(self):
        frame = self.store.to_dataframe()
        self.assertTrue(frame.empty)
        self.assertEqual(list(frame.columns), SUMMARY_COLUMNS)

    def test_registry_persists(self):
        self.store.record_run("a", "ok", 1.0, report=_report())
        reopened = RunStore(self.db_path)
        try:
            self.assertEqual([r["cell"] for r in reopened.list_runs()], ["a"])
        finally:
            reopened.engine.dispose()

    def test_session_rolls_back_on_error(self):
        with self.assertLogs(level="ERROR"):
            with self.assertRaises(RuntimeError):
                with self.store.get_session() as session:
                    session.add(GridRun(cell="partial", status="ok", seconds=1.0))
                    session.flush()
                    raise RuntimeError("interrupted")
        self.assertEqual(self.store.list_runs(), [])

    def test_invalid_row_is_logged_and_raised(self):
        with self.assertLogs(level="ERROR") as logs:
            with self.assertRaises(sa.exc.IntegrityError):
                self.store.record_run(None, "ok", 1.0)
        self.assertTrue(any("record_run" in line for line in logs.output))

    def test_url_connection_string(self):
        store = RunStore("sqlite://")
        try:
            store.record_run("memory", "ok", 0.5)
            self.assertEqual(store.list_runs()[0]["cell"], "memory")
        finally:
            store.engine.dispose()


if __name__ == '__main__':
    unittest.main()
