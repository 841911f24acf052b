"""
Laboratory configuration: one dataclass per section of a flat `section.key = value` file
"""
import json
import math
import os
import typing
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values

from defaults import REFERENCE_CONFIG, REQUIRED_FIELDS, SCAN_ROUTES

from core.exceptions import ConfigError
from core.expressions import ScalarFunction, parse_number

LAM_RULES = ("list", "power")


def _split(text: Any) -> List[str]:
    if isinstance(text, (list, tuple)):
        return [str(item).strip() for item in text if str(item).strip()]
    return [item.strip() for item in str(text).split(",") if item.strip()]


def _coerce(section: str, key: str, value: Any, kind: Any) -> Any:
    """Convert a raw config value to the declared field type"""
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: '{value}'")
        if kind is int:
            number = parse_number(value)
            if not number.is_integer():
                raise ValueError(f"not an integer: '{value}'")
            return int(number)
        if kind is float:
            return parse_number(value)
        if kind is str:
            return str(value).strip()
        if typing.get_origin(kind) in (list, List):
            (item_kind,) = typing.get_args(kind)
            return [_coerce(section, key, item, item_kind) for item in _split(value)]
    except (ValueError, ConfigError) as e:
        raise ConfigError(f"{section}.{key}: {e}")
    raise ConfigError(f"{section}.{key}: unsupported field type {kind}")


class _Section:
    """Shared dict conversion for the section dataclasses"""

    NAME = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "_Section":
        """Coerce values; keys missing from data fall back to the reference configuration"""
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"Unknown keys in section '{cls.NAME}': {', '.join(unknown)}")
        hints = typing.get_type_hints(cls)
        reference = REFERENCE_CONFIG[cls.NAME]
        values = {}
        for name in known:
            raw = data[name] if name in data else reference[name]
            values[name] = _coerce(cls.NAME, name, raw, hints[name])
        return cls(**values)


@dataclass
class SystemSection(_Section):
    """Gap, mean energy and coupling weights are sympy expressions in t"""

    NAME = "system"
    e21: str
    e_mean: str
    theta_max: float
    profile_order: int
    t_flat: float
    b1: str
    b2: str
    delta: float


@dataclass
class ReservoirSection(_Section):
    NAME = "reservoir"
    g0: float
    exponent: float
    omega_D: float
    beta: float
    dispersion: str
    mass: float


@dataclass
class KatoSection(_Section):
    NAME = "kato"
    step: float
    unitarity_tol: float
    intertwine_tol: float
    analytic_generator: bool


@dataclass
class PhasesSection(_Section):
    NAME = "phases"
    panel_max: float
    thermal_table_step: float
    table_points_per_eps: int


@dataclass
class DysonSection(_Section):
    NAME = "dyson"
    panel_eps_fraction: float
    max_phase_per_panel: float
    dyson3_node_budget: int

    def options(self) -> Dict[str, Any]:
        """Keyword arguments for the Dyson routines"""
        return {
            "panel_eps_fraction": self.panel_eps_fraction,
            "max_phase_per_panel": self.max_phase_per_panel,
            "dyson3_node_budget": self.dyson3_node_budget,
        }


@dataclass
class OracleSection(_Section):
    NAME = "oracle"
    n_modes: int
    omega_max: float
    n_excitations: int
    dt: float


@dataclass
class RegimeSection(_Section):
    NAME = "regimes"
    negligible_ratio: float
    balanced_ratio: float
    window_ratio: float


@dataclass
class PointSection(_Section):
    """Single (eps, lam, t) used by the dyson1 and oracle commands"""

    NAME = "point"
    eps: float
    lam: float
    t: float


@dataclass
class ScanSection(_Section):
    """Scan axes; lam is an explicit list when lam_rule = list, else lam = c * eps^a"""

    NAME = "scan"
    eps: List[float]
    lam_rule: str
    lam: List[float]
    lam_coefficient: float
    lam_exponent: float
    m: List[float]
    beta: List[float]
    t_final: float
    routes: List[str]
    output_path: str


SECTIONS = {
    cls.NAME: cls
    for cls in (
        SystemSection, ReservoirSection, KatoSection, PhasesSection, DysonSection,
        OracleSection, RegimeSection, PointSection, ScanSection,
    )
}


def parse_flat(entries: Dict[str, Optional[str]]) -> Dict[str, Dict[str, Any]]:
    """Group `section.key` entries into nested dictionaries"""
    grouped: Dict[str, Dict[str, Any]] = {}
    for dotted, value in entries.items():
        section, sep, key = dotted.partition(".")
        if not sep or not key:
            raise ConfigError(f"Config key '{dotted}' is not of the form section.key")
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section '{section}'")
        if value is None:
            raise ConfigError(f"Config key '{dotted}' has no value")
        grouped.setdefault(section, {})[key] = value
    return grouped


class LabConfigManager:
    """Loads, validates and exports the laboratory configuration"""

    def __init__(self, config_file: Optional[str] = None):
        """Load config_file, or the reference configuration when None"""
        self.config_file = config_file
        self.sections: Dict[str, _Section] = {}
        self._load_config()

    def _load_config(self) -> None:
        raw: Dict[str, Dict[str, Any]] = {}
        if self.config_file is not None:
            if not os.path.exists(self.config_file):
                raise ConfigError(f"Config file not found: {self.config_file}")
            raw = parse_flat(dotenv_values(self.config_file, interpolate=False))
        self._apply(raw)

    def _apply(self, raw: Dict[str, Dict[str, Any]]) -> None:
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown config sections: {', '.join(unknown)}")
        self.sections = {name: cls.from_dict(raw.get(name, {})) for name, cls in SECTIONS.items()}

    @property
    def system(self) -> SystemSection:
        return self.sections["system"]

    @property
    def reservoir(self) -> ReservoirSection:
        return self.sections["reservoir"]

    @property
    def kato(self) -> KatoSection:
        return self.sections["kato"]

    @property
    def phases(self) -> PhasesSection:
        return self.sections["phases"]

    @property
    def dyson(self) -> DysonSection:
        return self.sections["dyson"]

    @property
    def oracle(self) -> OracleSection:
        return self.sections["oracle"]

    @property
    def regimes(self) -> RegimeSection:
        return self.sections["regimes"]

    @property
    def point(self) -> PointSection:
        return self.sections["point"]

    @property
    def scan(self) -> ScanSection:
        return self.sections["scan"]

    def update(self, section: str, **values) -> None:
        """Override keys of one section, re-coercing every value"""
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section '{section}'")
        merged = self.sections[section].to_dict()
        merged.update(values)
        self.sections[section] = SECTIONS[section].from_dict(merged)

    def validate(self) -> List[str]:
        """Validate the configuration and return a list of errors"""
        errors = []

        for section, keys in REQUIRED_FIELDS.items():
            data = self.sections[section].to_dict()
            for key in keys:
                value = data.get(key)
                if value is None or value == "" or value == []:
                    errors.append(f"{section}.{key} is required")

        system = self.system
        for key in ("e21", "e_mean", "b1", "b2"):
            try:
                ScalarFunction(getattr(system, key))
            except ConfigError as e:
                errors.append(f"system.{key}: {e}")
        if system.profile_order < 5:
            errors.append("system.profile_order must be >= 5")
        if not 0 <= system.t_flat < 1:
            errors.append("system.t_flat must lie in [0, 1)")
        if system.delta <= 0:
            errors.append("system.delta must be positive")

        reservoir = self.reservoir
        if reservoir.g0 < 0:
            errors.append("reservoir.g0 must be nonnegative")
        if reservoir.exponent <= 0:
            errors.append("reservoir.exponent must be positive")
        if reservoir.omega_D <= 0:
            errors.append("reservoir.omega_D must be positive")
        if not reservoir.beta > 0:
            errors.append("reservoir.beta must lie in (0, inf]")

        if self.kato.step <= 0:
            errors.append("kato.step must be positive")
        if self.oracle.n_modes < 1:
            errors.append("oracle.n_modes must be >= 1")
        if self.oracle.n_excitations < 0:
            errors.append("oracle.n_excitations must be >= 0")
        if self.dyson.dyson3_node_budget < 1:
            errors.append("dyson.dyson3_node_budget must be positive")

        point = self.point
        if not 0 < point.eps < 1:
            errors.append("point.eps must lie in (0, 1)")
        if point.lam < 0:
            errors.append("point.lam must be nonnegative")
        if not 0 <= point.t <= 1:
            errors.append("point.t must lie in [0, 1]")

        scan = self.scan
        errors.extend(f"scan.eps value {e} outside (0, 1)" for e in scan.eps if not 0 < e < 1)
        if scan.lam_rule not in LAM_RULES:
            errors.append(f"scan.lam_rule must be one of {LAM_RULES}")
        elif scan.lam_rule == "list" and not scan.lam:
            errors.append("scan.lam list is empty")
        errors.extend(f"scan.lam value {v} is negative" for v in scan.lam if v < 0)
        errors.extend(f"scan.m value {v} must be positive" for v in scan.m if v <= 0)
        errors.extend(f"scan.beta value {v} must lie in (0, inf]" for v in scan.beta if not v > 0)
        bad_routes = [r for r in scan.routes if r not in SCAN_ROUTES]
        if bad_routes:
            errors.append(f"Unknown scan routes: {', '.join(bad_routes)}")

        return errors

    def require_valid(self) -> None:
        errors = self.validate()
        if errors:
            raise ConfigError("Invalid configuration: " + "; ".join(errors))

    def export_config(self) -> str:
        """Export configuration as JSON string"""
        return json.dumps({name: section.to_dict() for name, section in self.sections.items()}, indent=2)

    def import_config(self, json_data: str) -> None:
        """Replace the configuration with a JSON export"""
        try:
            data = json.loads(json_data)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Cannot import configuration: {e}")
        self._apply(data)

    def to_flat(self) -> str:
        """The configuration as `section.key = value` lines"""
        lines = []
        for name, section in self.sections.items():
            for key, value in section.to_dict().items():
                if isinstance(value, list):
                    value = ", ".join(_format(v) for v in value)
                lines.append(f"{name}.{key} = {_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value: Any) -> str:
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)
