#!/usr/bin/env python3
"""
Pulse Library
=============

sqlite store of optimized pulses:
1. Records every optimization report with its parameter pair and seed
2. Looks up the best stored pulse for a (target, k, horizon, eta_max) request
3. Summarizes and exports the stored pulses
"""

import hashlib
import json
import logging
import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.sim_config import SimulationConfig
from optimizer import OptimizationReport


class PulseLibrary:
    """
    Persistent store of optimized block-amplitude vectors
    """

    def __init__(self, db_path: str = SimulationConfig.PULSE_DB_PATH):
        self.db_path = db_path
        self.logger = logging.getLogger(__name__)

        # Ensure data directory exists
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)

        self._init_database()

    def _init_database(self):
        """Create the pulse table and its lookup index"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                CREATE TABLE IF NOT EXISTS pulses (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    pulse_hash TEXT NOT NULL,
                    target TEXT NOT NULL,
                    k REAL NOT NULL,
                    horizon INTEGER NOT NULL,
                    eta_max REAL NOT NULL,
                    seed INTEGER NOT NULL,
                    amplitudes_json TEXT NOT NULL,
                    best_theta REAL,
                    fidelity_order2 REAL NOT NULL,
                    fidelity_exact REAL,
                    evaluations INTEGER,
                    report_json TEXT NOT NULL,
                    created_at DATETIME DEFAULT CURRENT_TIMESTAMP
                )
            ''')
            cursor.execute('CREATE INDEX IF NOT EXISTS idx_pulse_pair ON pulses(target, horizon, k)')
            cursor.execute('CREATE UNIQUE INDEX IF NOT EXISTS idx_pulse_hash ON pulses(pulse_hash)')
            conn.commit()

    @staticmethod
    def _pulse_hash(target: str, k: float, horizon: int, eta_max: float, seed: int) -> str:
        key = json.dumps([target, repr(float(k)), int(horizon), repr(float(eta_max)), int(seed)])
        return hashlib.sha256(key.encode()).hexdigest()

    def record_pulse(self, report: OptimizationReport, target: str) -> int:
        """
        Store an optimization report, replacing an earlier run with the same
        parameters and seed

        Args:
            report: optimizer output
            target: target label (e.g. "fock2")

        Returns:
            row id of the stored pulse
        """
        problem = report.problem
        k, horizon = float(problem["k"]), int(problem["n_blocks"])
        eta_max, seed = float(problem["eta_max"]), int(problem["seed"])
        pulse_hash = self._pulse_hash(target, k, horizon, eta_max, seed)

        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('DELETE FROM pulses WHERE pulse_hash = ?', (pulse_hash,))
            cursor.execute('''
                INSERT INTO pulses
                (pulse_hash, target, k, horizon, eta_max, seed, amplitudes_json, best_theta,
                 fidelity_order2, fidelity_exact, evaluations, report_json)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            ''', (pulse_hash, target, k, horizon, eta_max, seed, json.dumps(report.best_amplitudes),
                  report.best_theta, report.achieved_fidelity_order2, report.achieved_fidelity_exact,
                  report.evaluations, report.to_json()))
            pulse_id = cursor.lastrowid
            conn.commit()

        print(f"💾 Stored pulse {pulse_id}: {target}, k={k:.5f}, horizon={horizon}, "
              f"F2={report.achieved_fidelity_order2:.4f}")
        return pulse_id

    def find_pulse(self, target: str, k: float, horizon: int, eta_max: Optional[float] = None,
                   tol: float = 1e-9) -> Optional[OptimizationReport]:
        """Best stored pulse (exact fidelity first, then order-2) for a parameter pair"""
        query = '''
            SELECT report_json FROM pulses
            WHERE target = ? AND horizon = ? AND ABS(k - ?) <= ?
        '''
        values: List[Any] = [target, int(horizon), float(k), tol]
        if eta_max is not None:
            query += ' AND ABS(eta_max - ?) <= ?'
            values += [float(eta_max), tol]
        query += ' ORDER BY COALESCE(fidelity_exact, fidelity_order2) DESC, id ASC LIMIT 1'

        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute(query, values)
            row = cursor.fetchone()

        if row is None:
            self.logger.info(f"No stored pulse for {target}, k={k}, horizon={horizon}")
            return None
        return OptimizationReport.from_dict(json.loads(row[0]))

    def list_pulses(self, target: Optional[str] = None) -> List[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            query = '''
                SELECT id, target, k, horizon, eta_max, seed, fidelity_order2, fidelity_exact,
                       evaluations, created_at
                FROM pulses
            '''
            if target:
                cursor.execute(query + ' WHERE target = ? ORDER BY horizon, k, id', (target,))
            else:
                cursor.execute(query + ' ORDER BY target, horizon, k, id')
            return [
                {
                    'id': row[0],
                    'target': row[1],
                    'k': row[2],
                    'horizon': row[3],
                    'eta_max': row[4],
                    'seed': row[5],
                    'fidelity_order2': row[6],
                    'fidelity_exact': row[7],
                    'evaluations': row[8],
                    'created_at': row[9],
                }
                for row in cursor.fetchall()
            ]

    def get_statistics(self) -> Dict[str, Any]:
        """Counts and best fidelities per target"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('SELECT COUNT(*) FROM pulses')
            total = cursor.fetchone()[0]
            cursor.execute('''
                SELECT target, COUNT(*), MAX(fidelity_order2), MAX(fidelity_exact)
                FROM pulses GROUP BY target ORDER BY target
            ''')
            per_target = {
                row[0]: {'count': row[1], 'best_order2': row[2], 'best_exact': row[3]}
                for row in cursor.fetchall()
            }
        return {'total_pulses': total, 'targets': per_target}

    def export_pulses(self, output_file: Optional[str] = None) -> List[Dict[str, Any]]:
        """All stored reports, optionally written to a JSON file"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('SELECT id, target, report_json FROM pulses ORDER BY id')
            exported = [
                {'id': row[0], 'target': row[1], 'report': json.loads(row[2])}
                for row in cursor.fetchall()
            ]

        if output_file:
            Path(output_file).parent.mkdir(parents=True, exist_ok=True)
            with open(output_file, 'w') as f:
                json.dump(exported, f, indent=2)
            print(f"📁 Exported {len(exported)} pulses to: {output_file}")
        return exported

    def clear_pulses(self, confirm: bool = False):
        """Delete every stored pulse (use with caution!)"""
        if not confirm:
            raise ValueError("Must confirm to clear the pulse library")

        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('DELETE FROM pulses')
            conn.commit()
            print("🗑️ All stored pulses cleared")
