"""
Human-readable report of the system assumptions A.1-A.3 and the reservoir decay assumption A.4
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

from config.lab_config import LabConfigManager
from core.reservoir import A4Report, ReservoirModel, check_A4, decay_exponent
from core.system import AssumptionReport, TwoLevelSystem, check_assumptions

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    system: AssumptionReport
    reservoirs: List[A4Report]

    @property
    def passed(self) -> bool:
        return self.system.passed and all(r.passed for r in self.reservoirs)


def _mark(passed: bool) -> str:
    return "PASS" if passed else "FAIL"


def run_check(manager: LabConfigManager, m_values: Optional[List[float]] = None) -> CheckResult:
    """Check the configured system, and A.4 of the configured reservoir for each target m (default: the scan's)"""
    system = TwoLevelSystem.from_config(manager.system)
    model = ReservoirModel.from_config(manager.reservoir)
    targets = list(m_values) if m_values else list(manager.scan.m) or [decay_exponent(model)]
    logger.info(f"Checking A.1-A.3 and A.4 for m in {targets}")
    reports = [check_A4(model, m) for m in targets]
    return CheckResult(system=check_assumptions(system), reservoirs=reports)


def format_report(result: CheckResult) -> str:
    lines = ["System assumptions"]
    for check in result.system.checks:
        line = f"  [{_mark(check.passed)}] {check.name}"
        if check.witness_t is not None:
            line += f"  witness t={check.witness_t:.6g}"
        if check.witness_value is not None:
            line += f"  value={check.witness_value:.6g}"
        lines.append(line)
    lines.append("Reservoir decay (A.4)")
    for report in result.reservoirs:
        lines.append(
            f"  [{_mark(report.passed)}] m={report.m_target:g}"
            f"  decay {_mark(report.decay_passed)} (growth ratio {report.growth_ratio:.4g}, witness x={report.witness_x:.4g})"
            f"  spectral {_mark(report.spectral_passed)} (gamma0={report.gamma0:.6g}, exponent {report.spectral_exponent:.4g})"
        )
    lines.append(f"Overall: {_mark(result.passed)}")
    return "\n".join(lines)
