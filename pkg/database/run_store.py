"""
Run registry for experiment grids.

Every grid cell is stored with its status, wall time, overrides and the
evaluation summary so the grid summary can be rebuilt from the registry.
"""

import logging
import os
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd
import sqlalchemy as sa
from sqlalchemy.orm import declarative_base, sessionmaker

from evaluation.suite import EvalReport
from utils.helpers import handle_exceptions

Base = declarative_base()

SUMMARY_COLUMNS = [
    "cell", "status", "seconds",
    "L1", "L2", "L3", "L4", "L5",
    "VPT1_mean_s", "VPT1_std_s", "VPT2_mean_s", "VPT2_std_s", "VPT3_mean_s", "VPT3_std_s",
    "error",
]


class GridRun(Base):
    """Model representing one grid cell run."""

    __tablename__ = "grid_runs"

    id = sa.Column(sa.Integer, primary_key=True)
    cell = sa.Column(sa.String(200), nullable=False, index=True)
    status = sa.Column(sa.String(20), nullable=False)  # ok|failed
    seconds = sa.Column(sa.Float)
    overrides = sa.Column(sa.JSON)
    L1 = sa.Column(sa.Float)
    L2 = sa.Column(sa.Float)
    L3 = sa.Column(sa.Float)
    L4 = sa.Column(sa.Float)
    L5 = sa.Column(sa.Float)
    VPT1_mean_s = sa.Column(sa.Float)
    VPT1_std_s = sa.Column(sa.Float)
    VPT2_mean_s = sa.Column(sa.Float)
    VPT2_std_s = sa.Column(sa.Float)
    VPT3_mean_s = sa.Column(sa.Float)
    VPT3_std_s = sa.Column(sa.Float)
    error = sa.Column(sa.Text)
    created_at = sa.Column(sa.DateTime, default=datetime.now)

    def __repr__(self):
        return f"<GridRun(id={self.id}, cell='{self.cell}', status='{self.status}')>"

    def to_dict(self) -> Dict[str, Any]:
        data = {column: getattr(self, column) for column in SUMMARY_COLUMNS}
        data["overrides"] = self.overrides
        return data


class RunStore:
    """SQLite-backed registry of grid runs."""

    def __init__(self, db_path: str):
        """
        Initialize the run store.

        Args:
            db_path: SQLite file (created when missing) or a full SQLAlchemy URL.
        """
        self.conn_string = db_path if "://" in db_path else f"sqlite:///{os.path.abspath(db_path)}"
        self.engine = sa.create_engine(self.conn_string)
        self.Session = sessionmaker(bind=self.engine)
        Base.metadata.create_all(self.engine)
        logging.debug(f"Run registry at {self.conn_string}")

    @contextmanager
    def get_session(self):
        """Get a database session using context manager for automatic cleanup."""
        session = self.Session()
        try:
            yield session
            session.commit()
        except Exception as e:
            session.rollback()
            logging.error(f"Database error: {str(e)}")
            raise
        finally:
            session.close()

    @handle_exceptions
    def record_run(self, cell: str, status: str, seconds: float,
                   overrides: Optional[Dict[str, Any]] = None,
                   report: Optional[EvalReport] = None,
                   error: Optional[str] = None) -> int:
        """
        Store one grid cell.

        Returns:
            Row id of the stored run.
        """
        run = GridRun(cell=cell, status=status, seconds=seconds, overrides=overrides or {}, error=error)
        if report is not None:
            for label in ("L1", "L2", "L3", "L4", "L5"):
                setattr(run, label, getattr(report, label))
            for label in ("VPT1", "VPT2", "VPT3"):
                stats = getattr(report, label)
                setattr(run, f"{label}_mean_s", stats.mean_s)
                setattr(run, f"{label}_std_s", stats.std_s)
        with self.get_session() as session:
            session.add(run)
            session.flush()
            run_id = run.id
        logging.info(f"Recorded grid cell '{cell}' ({status})")
        return run_id

    def list_runs(self) -> List[Dict[str, Any]]:
        with self.get_session() as session:
            return [run.to_dict() for run in session.query(GridRun).order_by(GridRun.id).all()]

    def to_dataframe(self) -> pd.DataFrame:
        """Grid summary table, one row per recorded cell."""
        return pd.DataFrame(self.list_runs(), columns=SUMMARY_COLUMNS)
