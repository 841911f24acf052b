"""
Default configuration values for the adiabatic dephasing lab.
These values are used as fallbacks when no user configuration is provided.
"""

import os

# Default configuration values
DEFAULTS = {
    # Logging configuration
    "LOG_LEVEL": os.getenv("LAB_LOG_LEVEL", "INFO"),
    "LOG_FORMAT": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",

    # Application configuration
    "APP_NAME": "Dephasing Lab",
    "APP_DESCRIPTION": "Adiabatic transitions of a driven two-level system coupled to a bosonic reservoir",
    "CONFIG_PATH": "reference.conf",
    "THREADS": 1,

    # Assumption checks
    "GAP_GRID_POINTS": 2048,
    "GAP_INFLATION": 1.5,
    "FLATNESS_STEP": 1e-3,
    "FLATNESS_TOL": 1e-6,
    "ALGEBRA_TOL": 1e-12,

    # Kato transport
    "KATO_MAX_STEP": 1.0 / 1024,
    "KATO_THETA_RESOLUTION": 0.1,
    "UNITARITY_TOL": 1e-10,
    "INTERTWINE_TOL": 1e-8,

    # Reservoir quadratures
    "OMEGA_MAX_FACTOR": 40.0,
    "GL_NODES": 8,
    "A4_GRID": (1e-1, 1e2, 31),
    "A4_GROWTH_TOL": 2.0,
    "TAIL_WINDOW": (1.0, 100.0),

    # Phase kernels
    "PHASE_PANEL_MAX": 1.0 / 256,
    "THERMAL_TABLE_STEP": 1.0 / 32,
    "TABLE_POINTS_PER_EPS": 16,

    # Dyson quadrature
    "PANEL_EPS_FRACTION": 0.5,
    "OSCILLATION_NODES": 10,
    "MAX_PHASE_PER_PANEL": 0.7853981633974483,
    "DYSON3_NODE_BUDGET": 200_000,

    # Oracle
    "ORACLE_STEPS_PER_PERIOD": 20,
    "NORM_DRIFT_TOL": 1e-8,
    "LEAKAGE_TOL": 0.05,

    # Reports
    "CSV_FLOAT_FORMAT": "%.17g",
}

# Reference parameter set, used section by section when a key is absent from the config file
REFERENCE_CONFIG = {
    "system": {
        "e21": "1",
        "e_mean": "0",
        "theta_max": "pi/3",
        "profile_order": 9,
        "t_flat": 0.02,
        "b1": "1",
        "b2": "0",
        "delta": 0.5,
    },
    "reservoir": {
        "g0": 0.1,
        "exponent": 2.0,
        "omega_D": 1.0,
        "beta": "inf",
        "dispersion": "photonic",
        "mass": 1.0,
    },
    "kato": {
        "step": 1.0 / 1024,
        "unitarity_tol": 1e-10,
        "intertwine_tol": 1e-8,
        "analytic_generator": True,
    },
    "phases": {
        "panel_max": 1.0 / 256,
        "thermal_table_step": 1.0 / 32,
        "table_points_per_eps": 16,
    },
    "dyson": {
        "panel_eps_fraction": 0.5,
        "max_phase_per_panel": 0.7853981633974483,
        "dyson3_node_budget": 200_000,
    },
    "oracle": {
        "n_modes": 48,
        "omega_max": 10.0,
        "n_excitations": 2,
        "dt": 0.0,
    },
    "regimes": {
        "negligible_ratio": 0.3,
        "balanced_ratio": 3.0,
        "window_ratio": 1.0,
    },
    "point": {
        "eps": 0.1,
        "lam": 0.1,
        "t": 1.0,
    },
    "scan": {
        "eps": "0.05, 0.025, 0.0125",
        "lam_rule": "power",
        "lam": "",
        "lam_coefficient": 1.0,
        "lam_exponent": 0.5,
        "m": "2.0",
        "beta": "inf",
        "t_final": 1.0,
        "routes": "free, leading, dyson1",
        "output_path": "scan.csv",
    },
}

# Required fields for validation
REQUIRED_FIELDS = {
    "system": ["e21", "theta_max", "profile_order", "b1", "b2", "delta"],
    "reservoir": ["g0", "exponent", "omega_D", "beta"],
    "scan": ["eps", "routes"],
}

# Scan routes and the CSV columns they fill
SCAN_ROUTES = {
    "free": ["p_free"],
    "leading": ["p_free", "p_correction"],
    "dyson1": ["p_dyson1"],
    "dyson3": ["omega3"],
    "oracle": ["p_oracle", "leakage"],
}

CSV_COLUMNS = [
    "eps", "lam", "m", "beta", "t",
    "p_free", "p_correction", "p_dyson1", "omega3", "residual",
    "regime", "runtime_ms", "status",
]
