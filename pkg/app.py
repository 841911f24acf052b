"""
Command-line entry point of the dephasing lab: check | scan | dyson1 | oracle | regimes
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from defaults import DEFAULTS
from config.lab_config import LabConfigManager
from config.settings import AppConfig
from core.dyson import RegimeThresholds, classify_regime
from core.exceptions import ConfigError, LabError
from core.oracle import OracleConfig, discretize, discretized_correlation, evolve
from core.reservoir import ReservoirModel
from handlers.check_handler import format_report, run_check
from handlers.scan_handler import ScanHandler, ScanSpec, run_scan

logger = logging.getLogger("dephasing-lab")

COMMANDS = ("check", "scan", "dyson1", "oracle", "regimes")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="app.py", description=DEFAULTS["APP_DESCRIPTION"])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=AppConfig.CONFIG_PATH, help="Flat section.key = value config file.")
    parser.add_argument("--out", default=None, help="Output path (CSV for scan, JSON for dyson1/oracle).")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for scans and panel sums.")
    parser.add_argument("--seed", type=int, default=None, help="Reserved; every computation is deterministic.")
    parser.add_argument("--eps", type=float, default=None, help="Override point.eps.")
    parser.add_argument("--lam", type=float, default=None, help="Override point.lam.")
    parser.add_argument("--t", type=float, default=None, help="Override point.t.")
    return parser.parse_args(argv)


def load_manager(args: argparse.Namespace) -> LabConfigManager:
    manager = LabConfigManager(args.config)
    overrides = {key: getattr(args, key) for key in ("eps", "lam", "t") if getattr(args, key) is not None}
    if overrides:
        manager.update("point", **overrides)
    manager.require_valid()
    return manager


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
        logger.info(f"Wrote {out}")
    print(text)


def cmd_check(manager: LabConfigManager, args: argparse.Namespace) -> int:
    result = run_check(manager)
    print(format_report(result))
    return 0 if result.passed else 3


def cmd_scan(manager: LabConfigManager, args: argparse.Namespace) -> int:
    spec = ScanSpec.from_config(manager, output_path=args.out)
    frame = run_scan(spec, manager, threads=args.threads)
    failed = int((frame["status"] != "ok").sum())
    print(f"{len(frame)} rows written to {spec.output_path} ({failed} failed)")
    return 0


def cmd_dyson1(manager: LabConfigManager, args: argparse.Namespace) -> int:
    point = manager.point
    handler = ScanHandler(manager, threads=args.threads)
    handler.certify_system()
    model = ReservoirModel.from_config(manager.reservoir)
    row = handler.evaluate_point(model, point.eps, point.lam, point.t, ("free", "leading", "dyson1"),
                                 threads=args.threads)
    _emit(row, args.out)
    return 0


def cmd_oracle(manager: LabConfigManager, args: argparse.Namespace) -> int:
    point = manager.point
    handler = ScanHandler(manager)
    handler.certify_system()
    model = ReservoirModel.from_config(manager.reservoir)
    cfg = OracleConfig.from_config(manager.oracle, beta=model.beta)
    modes = discretize(model, cfg)
    result = evolve(handler.system, modes, cfg, point.eps, point.lam, point.t)
    payload = {"eps": point.eps, "lam": point.lam, "t": point.t, **result.to_dict()}
    payload["gamma_N0"] = float(discretized_correlation(modes, 0.0).real)
    _emit(payload, args.out)
    return 0


def cmd_regimes(manager: LabConfigManager, args: argparse.Namespace) -> int:
    spec = ScanSpec.from_config(manager)
    thresholds = RegimeThresholds.from_config(manager.regimes)
    for eps, lam, m, beta in spec.points():
        label = classify_regime(eps, lam, m, thresholds)
        print(f"eps={eps:<10.6g} lam={lam:<10.6g} m={m:<6g} beta={beta:<6g} {label}")
    return 0


HANDLERS = {
    "check": cmd_check,
    "scan": cmd_scan,
    "dyson1": cmd_dyson1,
    "oracle": cmd_oracle,
    "regimes": cmd_regimes,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        AppConfig.validate()
    except ValueError as e:
        logging.basicConfig(format=DEFAULTS["LOG_FORMAT"])
        logger.error(str(e))
        return ConfigError.exit_code
    logging.basicConfig(level=getattr(logging, AppConfig.LOG_LEVEL), format=AppConfig.LOG_FORMAT)
    if args.threads is None:
        args.threads = AppConfig.threads()
    if args.seed is not None:
        logger.debug(f"--seed {args.seed} ignored: no computation draws random numbers")

    try:
        manager = load_manager(args)
        return HANDLERS[args.command](manager, args)
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
