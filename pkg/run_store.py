#!/usr/bin/env python3
"""
Run Store for reward-learning experiments
Persists experiments, training runs and eval curves in SQLite and exports
per-experiment CSV files
"""

import csv
import json
import logging
import sqlite3
import uuid
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from reward_trainer import RunReport

logger = logging.getLogger(__name__)

CSV_HEADERS = ["seed", "scale_or_ratio", "epoch", "oracle_ce", "id_acc", "ood_acc"]


class RunStore:
    def __init__(self, db_path: Union[str, Path] = "runs.db"):
        """
        Initialize the run store with a SQLite database

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = str(db_path)
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._init_database()

    def _init_database(self):
        """Create tables if they don't exist"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS experiments (
                    id TEXT PRIMARY KEY,
                    name TEXT,
                    kind TEXT,
                    config TEXT,
                    summary TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id TEXT PRIMARY KEY,
                    experiment_id TEXT,
                    run_index INTEGER,
                    setting TEXT,
                    seed TEXT,
                    system TEXT,
                    FOREIGN KEY (experiment_id) REFERENCES experiments(id)
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS eval_points (
                    run_id TEXT,
                    epoch INTEGER,
                    oracle_ce REAL,
                    id_acc REAL,
                    ood_acc REAL,
                    FOREIGN KEY (run_id) REFERENCES runs(id)
                )
            """)

            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_runs_experiment
                ON runs(experiment_id, run_index)
            """)
            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_eval_points_run
                ON eval_points(run_id, epoch)
            """)
            conn.commit()

    def create_experiment(self, name: str, kind: str, config: Dict[str, Any]) -> str:
        """
        Register a new experiment

        Args:
            name: Experiment name from the config file
            kind: granularity, tied_ratio, rademacher or softlabel
            config: JSON-ready experiment configuration

        Returns:
            Experiment ID
        """
        experiment_id = str(uuid.uuid4())
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                INSERT INTO experiments (id, name, kind, config, created_at)
                VALUES (?, ?, ?, ?, ?)
            """, (experiment_id, name, kind, json.dumps(config, sort_keys=True),
                  datetime.now().isoformat()))
            conn.commit()

        logger.info("Created experiment %s (%s)", experiment_id, name)
        return experiment_id

    def save_run(self, experiment_id: str, setting: str, report: RunReport) -> str:
        """
        Save one training run and its eval curve

        Args:
            experiment_id: Experiment ID
            setting: scale name or tied ratio the run belongs to
            report: RunReport from reward_trainer.train

        Returns:
            Run ID
        """
        run_id = str(uuid.uuid4())
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("""
                SELECT COALESCE(MAX(run_index), 0) + 1
                FROM runs
                WHERE experiment_id = ?
            """, (experiment_id,))
            run_index = cursor.fetchone()[0]

            # seeds can exceed SQLite's signed 64-bit integers
            cursor.execute("""
                INSERT INTO runs (id, experiment_id, run_index, setting, seed, system)
                VALUES (?, ?, ?, ?, ?, ?)
            """, (run_id, experiment_id, run_index, setting, str(report.seed), report.system))
            cursor.executemany("""
                INSERT INTO eval_points (run_id, epoch, oracle_ce, id_acc, ood_acc)
                VALUES (?, ?, ?, ?, ?)
            """, [(run_id, p.epoch, p.oracle_ce, p.id_accuracy, p.ood_accuracy)
                  for p in report.curve])
            conn.commit()

        logger.debug("Saved run %s (%s, seed %s)", run_id, setting, report.seed)
        return run_id

    def save_summary(self, experiment_id: str, summary: Dict[str, Any]):
        """Attach the summary JSON to an experiment"""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                UPDATE experiments SET summary = ? WHERE id = ?
            """, (json.dumps(summary, sort_keys=True), experiment_id))
            conn.commit()

    def get_experiment(self, experiment_id: str) -> Optional[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            row = conn.execute("SELECT * FROM experiments WHERE id = ?",
                               (experiment_id,)).fetchone()
        if row is None:
            return None
        record = dict(row)
        record["config"] = json.loads(record["config"]) if record["config"] else None
        record["summary"] = json.loads(record["summary"]) if record["summary"] else None
        return record

    def list_experiments(self) -> List[Dict[str, Any]]:
        """All experiments, newest first"""
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            rows = conn.execute("""
                SELECT id, name, kind, created_at FROM experiments
                ORDER BY created_at DESC
            """).fetchall()
        return [dict(row) for row in rows]

    def get_eval_rows(self, experiment_id: str) -> List[tuple]:
        """(seed, setting, epoch, oracle_ce, id_acc, ood_acc) in run order"""
        with sqlite3.connect(self.db_path) as conn:
            rows = conn.execute("""
                SELECT r.seed, r.setting, e.epoch, e.oracle_ce, e.id_acc, e.ood_acc
                FROM runs r
                JOIN eval_points e ON r.id = e.run_id
                WHERE r.experiment_id = ?
                ORDER BY r.run_index, e.epoch
            """, (experiment_id,)).fetchall()
        return [(int(seed), *rest) for seed, *rest in rows]

    def export_csv(self, experiment_id: str, path: Union[str, Path]) -> Path:
        """
        Write the eval curves of one experiment as CSV

        Args:
            experiment_id: Experiment ID
            path: Output CSV path

        Returns:
            The written path
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADERS)
            for row in self.get_eval_rows(experiment_id):
                writer.writerow(row)
        logger.info("Exported experiment %s to %s", experiment_id, path)
        return path

    def get_experiment_stats(self, experiment_id: str) -> Dict[str, Any]:
        """
        Run counts and final-epoch means per setting

        Args:
            experiment_id: Experiment ID

        Returns:
            Dictionary with statistics
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("""
                SELECT COUNT(*) FROM runs WHERE experiment_id = ?
            """, (experiment_id,))
            total_runs = cursor.fetchone()[0]

            cursor.execute("""
                SELECT r.setting, COUNT(*), AVG(e.oracle_ce), AVG(e.id_acc), AVG(e.ood_acc)
                FROM runs r
                JOIN eval_points e ON r.id = e.run_id
                WHERE r.experiment_id = ?
                AND e.epoch = (SELECT MAX(epoch) FROM eval_points WHERE run_id = r.id)
                GROUP BY r.setting
                ORDER BY MIN(r.run_index)
            """, (experiment_id,))
            per_setting = {
                setting: {"runs": count, "oracle_ce": ce, "id_acc": id_acc, "ood_acc": ood_acc}
                for setting, count, ce, id_acc, ood_acc in cursor.fetchall()
            }

        return {"total_runs": total_runs, "settings": per_setting}

    def get_database_size(self) -> int:
        """Get database file size in bytes"""
        return Path(self.db_path).stat().st_size if Path(self.db_path).exists() else 0


def get_run_store(output_dir: Union[str, Path] = ".",
                  db_path: Optional[Union[str, Path]] = None) -> RunStore:
    """
    Run store at db_path (Settings.db_path from ORDFB_DB_PATH), or
    <output_dir>/runs.db when none is set
    """
    return RunStore(db_path or Path(output_dir) / "runs.db")
