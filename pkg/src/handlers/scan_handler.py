"""
Parameter scans over (eps, lam, m, beta): certify once, evaluate the requested routes per row,
write one CSV row per point in scan order.
"""
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from defaults import CSV_COLUMNS, DEFAULTS, SCAN_ROUTES

from config.lab_config import LAM_RULES, LabConfigManager
from core.dyson import RegimeThresholds, transition_report
from core.exceptions import AssumptionError, ConfigError, LabError, LeakageError
from core.kato import KatoTransport, transport
from core.oracle import OracleConfig, discretize, evolve
from core.quadrature import ordered_map
from core.reservoir import ReservoirModel, check_A4
from core.system import TwoLevelSystem, check_assumptions

logger = logging.getLogger(__name__)

ORACLE_COLUMNS = ["p_oracle", "leakage"]


@dataclass
class ScanSpec:
    """Scan axes and routes.

    `m` is the decay exponent of the reservoir; at finite beta the form factor uses mu = m + 1.
    """

    eps_list: List[float]
    m_list: List[float]
    beta_list: List[float] = field(default_factory=lambda: [math.inf])
    lam_rule: str = "power"
    lam_list: List[float] = field(default_factory=list)
    lam_coefficient: float = 1.0
    lam_exponent: float = 0.5
    t_final: float = 1.0
    routes: Tuple[str, ...] = ("free", "leading", "dyson1")
    output_path: Optional[str] = "scan.csv"

    def __post_init__(self):
        self.routes = tuple(self.routes)
        errors = self.validate()
        if errors:
            raise ConfigError("Invalid scan: " + "; ".join(errors))

    def validate(self) -> List[str]:
        errors = []
        if not self.eps_list:
            errors.append("no eps values")
        errors.extend(f"eps {e} outside (0, 1)" for e in self.eps_list if not 0 < e < 1)
        if self.lam_rule not in LAM_RULES:
            errors.append(f"lam_rule must be one of {LAM_RULES}, got '{self.lam_rule}'")
        elif self.lam_rule == "list" and not self.lam_list:
            errors.append("explicit lam list is empty")
        errors.extend(f"lam {v} is negative" for v in self.lam_list if v < 0)
        if self.lam_rule == "power" and self.lam_coefficient < 0:
            errors.append("lam_coefficient must be nonnegative")
        if not self.m_list:
            errors.append("no m values")
        errors.extend(f"m {v} must be positive" for v in self.m_list if v <= 0)
        errors.extend(f"beta {v} must lie in (0, inf]" for v in self.beta_list if not v > 0)
        if not 0 <= self.t_final <= 1:
            errors.append(f"t_final {self.t_final} outside [0, 1]")
        if not self.routes:
            errors.append("routes must be nonempty")
        unknown = [r for r in self.routes if r not in SCAN_ROUTES]
        if unknown:
            errors.append(f"unknown routes: {', '.join(unknown)}")
        return errors

    @classmethod
    def from_config(cls, manager: LabConfigManager, output_path: Optional[str] = None) -> "ScanSpec":
        scan = manager.scan
        return cls(
            eps_list=list(scan.eps),
            m_list=list(scan.m),
            beta_list=list(scan.beta) or [math.inf],
            lam_rule=scan.lam_rule,
            lam_list=list(scan.lam),
            lam_coefficient=scan.lam_coefficient,
            lam_exponent=scan.lam_exponent,
            t_final=scan.t_final,
            routes=tuple(scan.routes),
            output_path=output_path or scan.output_path,
        )

    def lam_values(self, eps: float) -> List[float]:
        if self.lam_rule == "list":
            return list(self.lam_list)
        return [self.lam_coefficient * eps**self.lam_exponent]

    def points(self) -> List[Tuple[float, float, float, float]]:
        """(eps, lam, m, beta) in scan order: m, then beta, then eps, then lam"""
        out = []
        for m, beta, eps in itertools.product(self.m_list, self.beta_list, self.eps_list):
            out.extend((eps, lam, m, beta) for lam in self.lam_values(eps))
        return out

    @property
    def columns(self) -> List[str]:
        columns = list(CSV_COLUMNS)
        if "oracle" in self.routes:
            columns[columns.index("runtime_ms"):columns.index("runtime_ms")] = ORACLE_COLUMNS
        return columns


def reservoir_for(manager: LabConfigManager, m: float, beta: float) -> ReservoirModel:
    """Reservoir of the config with decay exponent m at inverse temperature beta"""
    exponent = m if math.isinf(beta) else m + 1.0
    return ReservoirModel.from_config(manager.reservoir, exponent=exponent, beta=beta)


class ScanHandler:
    """Runs scans against one configured system"""

    def __init__(self, manager: LabConfigManager, threads: int = 1):
        self.manager = manager
        self.threads = max(1, int(threads))
        self.system = TwoLevelSystem.from_config(manager.system)
        self.thresholds = RegimeThresholds.from_config(manager.regimes)
        self._transport: Optional[KatoTransport] = None

    def certify_system(self) -> None:
        """Raise AssumptionError unless A.1-A.3 and the projector algebra hold"""
        report = check_assumptions(self.system)
        if not report.passed:
            names = ", ".join(c.name for c in report.failures())
            raise AssumptionError(f"System assumptions failed: {names}", report)

    def certify_reservoir(self, model: ReservoirModel, m: float) -> None:
        report = check_A4(model, m)
        if not report.passed:
            raise AssumptionError(
                f"A.4 fails for m={m:g}, beta={model.beta:g}: growth ratio {report.growth_ratio:.3g}",
                report,
            )

    @property
    def kato(self) -> KatoTransport:
        if self._transport is None:
            cfg = self.manager.kato
            self._transport = transport(
                self.system,
                step=cfg.step,
                unitarity_tol=cfg.unitarity_tol,
                intertwine_tol=cfg.intertwine_tol,
                analytic=cfg.analytic_generator,
            )
        return self._transport

    def _kernel_options(self) -> Dict[str, Any]:
        phases = self.manager.phases
        return {"table_step": phases.thermal_table_step, "points_per_eps": phases.table_points_per_eps}

    def evaluate_point(self, model: ReservoirModel, eps: float, lam: float, t: float,
                       routes: Sequence[str], threads: int = 1) -> Dict[str, Any]:
        """One row: the report fields, plus oracle columns when requested"""
        report = transition_report(
            self.kato, model, self.system, eps, lam, t,
            routes=tuple(routes),
            thresholds=self.thresholds,
            dyson_options=self.manager.dyson.options(),
            kernel_options=self._kernel_options(),
            panel_max=self.manager.phases.panel_max,
            threads=threads,
        )
        row = report.to_dict()
        if "oracle" in routes:
            row.update(self.run_oracle(model, eps, lam, t))
        return row

    def run_oracle(self, model: ReservoirModel, eps: float, lam: float, t: float) -> Dict[str, Any]:
        cfg = OracleConfig.from_config(self.manager.oracle, beta=model.beta)
        result = evolve(self.system, discretize(model, cfg), cfg, eps, lam, t)
        return {"p_oracle": result.p12, "leakage": result.leakage}

    def _row(self, spec: ScanSpec, models: Dict[Tuple[float, float], ReservoirModel],
             point: Tuple[float, float, float, float]) -> Dict[str, Any]:
        eps, lam, m, beta = point
        row: Dict[str, Any] = {"eps": eps, "lam": lam, "m": m, "beta": beta, "t": spec.t_final}
        start = time.perf_counter()
        try:
            row.update(self.evaluate_point(models[(m, beta)], eps, lam, spec.t_final, spec.routes))
            row["status"] = "ok"
        except LeakageError as e:
            logger.error(f"Scan row eps={eps:g}, lam={lam:g}, m={m:g}, beta={beta:g} failed: {e}")
            row["leakage"] = e.leakage
            row["status"] = f"{type(e).__name__}: {e}"
        except (LabError, ValueError) as e:
            logger.error(f"Scan row eps={eps:g}, lam={lam:g}, m={m:g}, beta={beta:g} failed: {e}")
            row["status"] = f"{type(e).__name__}: {e}"
        row["runtime_ms"] = 1000.0 * (time.perf_counter() - start)
        return row

    def run_scan(self, spec: ScanSpec) -> pd.DataFrame:
        """Evaluate every scan point; rows come back in point order for any thread count"""
        self.certify_system()
        models = {}
        for m, beta in itertools.product(spec.m_list, spec.beta_list):
            model = reservoir_for(self.manager, m, beta)
            self.certify_reservoir(model, m)
            models[(m, beta)] = model
        self.kato  # built before the worker threads read it

        points = spec.points()
        logger.info(f"Scan: {len(points)} rows, routes {', '.join(spec.routes)}, {self.threads} threads")
        rows = ordered_map(lambda p: self._row(spec, models, p), points, self.threads)
        frame = pd.DataFrame(rows).reindex(columns=spec.columns)
        failed = int((frame["status"] != "ok").sum())
        logger.info(f"Scan finished: {len(rows) - failed} ok, {failed} failed")
        return frame


def write_csv(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, float_format=DEFAULTS["CSV_FLOAT_FORMAT"])


def run_scan(spec: ScanSpec, manager: Optional[LabConfigManager] = None, threads: int = 1) -> pd.DataFrame:
    """Run a scan and write its CSV report to spec.output_path (if set)"""
    handler = ScanHandler(manager or LabConfigManager(), threads=threads)
    frame = handler.run_scan(spec)
    if spec.output_path:
        write_csv(frame, spec.output_path)
        logger.info(f"Wrote {len(frame)} rows to {spec.output_path}")
    return frame
