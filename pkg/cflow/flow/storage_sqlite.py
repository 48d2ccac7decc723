import sqlite3
import threading
import uuid
from datetime import datetime
from typing import Any, Dict, List, Optional

import pytz

from cflow.flow.state import DiagnosticsRecord


def _now() -> str:
    return datetime.now(pytz.timezone("UTC")).isoformat()


class RunHistoryDB:
    """One row per CLI run plus one row per monitor point, behind a single lock."""

    def __init__(self, db_path=":memory:"):
        self.connection = sqlite3.connect(db_path, check_same_thread=False)
        self._lock = threading.Lock()
        self._create_tables()

    def _create_tables(self):
        with self._lock:
            with self.connection:
                self.connection.execute(
                    """
                    CREATE TABLE IF NOT EXISTS runs (
                        id TEXT PRIMARY KEY,
                        command TEXT,
                        config_hash TEXT,
                        exit_reason TEXT,
                        exit_code INTEGER,
                        started_at DATETIME,
                        finished_at DATETIME
                    )
                """
                )
                self.connection.execute(
                    """
                    CREATE TABLE IF NOT EXISTS diagnostics (
                        run_id TEXT,
                        step INTEGER,
                        t REAL,
                        energy REAL,
                        dissipation_integral REAL,
                        grad_norm REAL,
                        identity_residual REAL
                    )
                """
                )

    def start_run(self, command: str, config_hash: str, started_at: Optional[str] = None) -> str:
        run_id = str(uuid.uuid4())
        with self._lock:
            with self.connection:
                self.connection.execute(
                    """
                    INSERT INTO runs (id, command, config_hash, started_at)
                    VALUES (?, ?, ?, ?)
                """,
                    (run_id, command, config_hash, started_at or _now()),
                )
        return run_id

    def finish_run(self, run_id: str, exit_reason: str, exit_code: int):
        with self._lock:
            with self.connection:
                self.connection.execute(
                    "UPDATE runs SET exit_reason = ?, exit_code = ?, finished_at = ? WHERE id = ?",
                    (exit_reason, int(exit_code), _now(), run_id),
                )

    def add_records(self, run_id: str, records: List[DiagnosticsRecord]):
        rows = [
            (run_id, r.step, r.t, r.energy, r.dissipation_integral, r.grad_norm, r.identity_residual)
            for r in records
        ]
        with self._lock:
            with self.connection:
                self.connection.executemany(
                    """
                    INSERT INTO diagnostics (run_id, step, t, energy, dissipation_integral, grad_norm, identity_residual)
                    VALUES (?, ?, ?, ?, ?, ?, ?)
                """,  # noqa: E501
                    rows,
                )

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        with self._lock:
            row = self.connection.execute(
                """
                SELECT id, command, config_hash, exit_reason, exit_code, started_at, finished_at
                FROM runs WHERE id = ?
            """,
                (run_id,),
            ).fetchone()
        if row is None:
            return None
        keys = ("id", "command", "config_hash", "exit_reason", "exit_code", "started_at", "finished_at")
        return dict(zip(keys, row))

    def get_records(self, run_id: str) -> List[Dict[str, Any]]:
        with self._lock:
            cursor = self.connection.execute(
                """
                SELECT step, t, energy, dissipation_integral, grad_norm, identity_residual
                FROM diagnostics
                WHERE run_id = ?
                ORDER BY step ASC
            """,
                (run_id,),
            )
            rows = cursor.fetchall()
        return [
            {
                "step": row[0],
                "t": row[1],
                "energy": row[2],
                "dissipation_integral": row[3],
                "grad_norm": row[4],
                "identity_residual": row[5],
            }
            for row in rows
        ]

    def close(self):
        with self._lock:
            self.connection.close()
