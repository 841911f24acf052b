import math

import numpy as np
import pandas as pd
import pytest

from config.lab_config import LabConfigManager
from core.exceptions import AssumptionError, ConfigError
from core.reservoir import decay_exponent
from handlers.scan_handler import ORACLE_COLUMNS, ScanHandler, ScanSpec, reservoir_for, run_scan, write_csv
from defaults import CSV_COLUMNS


def _spec(**kwargs):
    args = dict(eps_list=[0.2, 0.1], m_list=[2.0], lam_rule="list", lam_list=[0.1], routes=("free",), output_path=None)
    args.update(kwargs)
    return ScanSpec(**args)


@pytest.fixture
def manager():
    return LabConfigManager()


def test_points_follow_scan_order():
    spec = _spec(m_list=[1.0, 2.0], beta_list=[math.inf, 4.0], lam_list=[0.0, 0.3])
    points = spec.points()
    assert len(points) == 2 * 2 * 2 * 2
    assert points[:3] == [(0.2, 0.0, 1.0, math.inf), (0.2, 0.3, 1.0, math.inf), (0.1, 0.0, 1.0, math.inf)]
    assert points[4] == (0.2, 0.0, 1.0, 4.0)
    assert points[-1] == (0.1, 0.3, 2.0, 4.0)


def test_power_rule_couples_lam_to_eps():
    spec = _spec(lam_rule="power", lam_list=[], lam_coefficient=2.0, lam_exponent=0.5)
    assert spec.lam_values(0.04) == [pytest.approx(0.4)]
    assert [p[1] for p in spec.points()] == [pytest.approx(2 * math.sqrt(0.2)), pytest.approx(2 * math.sqrt(0.1))]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"eps_list": [0.1, 1.5]},
        {"eps_list": []},
        {"lam_list": []},
        {"lam_list": [-0.1]},
        {"lam_rule": "geometric"},
        {"m_list": [0.0]},
        {"beta_list": [0.0]},
        {"t_final": 1.5},
        {"routes": ("free", "exact")},
        {"routes": ()},
    ],
)
def test_invalid_scans_are_rejected_before_computation(kwargs):
    with pytest.raises(ConfigError):
        _spec(**kwargs)


def test_columns_include_oracle_only_when_requested():
    assert _spec().columns == CSV_COLUMNS
    columns = _spec(routes=("free", "oracle")).columns
    assert columns[-4:] == ORACLE_COLUMNS + ["runtime_ms", "status"]


def test_spec_from_config(manager):
    manager.update("scan", eps="0.1", lam_rule="list", lam="0, 0.2", m="1, 2", beta="", routes="free")
    spec = ScanSpec.from_config(manager, output_path="out.csv")
    assert spec.eps_list == [0.1]
    assert spec.lam_list == [0.0, 0.2]
    assert spec.beta_list == [math.inf]
    assert spec.routes == ("free",)
    assert spec.output_path == "out.csv"


def test_reservoir_for_adds_a_power_at_finite_temperature(manager):
    assert reservoir_for(manager, 2.0, math.inf).exponent == 2.0
    thermal = reservoir_for(manager, 2.0, 4.0)
    assert thermal.exponent == 3.0
    assert thermal.beta == 4.0
    assert decay_exponent(thermal) == decay_exponent(reservoir_for(manager, 2.0, math.inf)) == 2.0


def test_free_route_without_coupling(manager):
    frame = ScanHandler(manager).run_scan(_spec(lam_list=[0.0]))
    assert list(frame.columns) == CSV_COLUMNS
    assert (frame["status"] == "ok").all()
    assert (frame["p_correction"] == 0.0).all()
    assert frame["p_dyson1"].isna().all()
    assert (frame["p_free"] >= 0.0).all()
    assert list(frame["regime"]) == ["negligible-coupling"] * 2


def test_scan_is_independent_of_thread_count(manager, tmp_path):
    spec = _spec(lam_list=[0.1, 0.3], routes=("free", "leading", "dyson1"))
    texts = []
    for threads in (1, 4):
        frame = ScanHandler(manager, threads=threads).run_scan(spec)
        path = tmp_path / f"scan_{threads}.csv"
        write_csv(frame.drop(columns=["runtime_ms"]), str(path))
        texts.append(path.read_text())
    assert texts[0] == texts[1]
    assert len(texts[0].splitlines()) == 5


def test_row_failures_are_reported_in_status(manager):
    frame = ScanHandler(manager).run_scan(_spec(eps_list=[0.2], beta_list=[2.0], routes=("free", "oracle")))
    assert len(frame) == 1
    status = frame["status"].iloc[0]
    assert status.startswith("ConfigError")
    assert np.isnan(frame["p_oracle"].iloc[0])
    assert frame["p_free"].isna().iloc[0]


def test_failing_system_aborts_the_scan(manager):
    manager.update("system", e21="1 - t")
    with pytest.raises(AssumptionError):
        ScanHandler(manager).run_scan(_spec())


def test_run_scan_writes_csv(manager, tmp_path):
    path = tmp_path / "scan.csv"
    frame = run_scan(_spec(eps_list=[0.2], output_path=str(path)), manager)
    written = pd.read_csv(path)
    assert list(written.columns) == CSV_COLUMNS
    assert written["p_free"].iloc[0] == frame["p_free"].iloc[0]
    assert written["status"].iloc[0] == "ok"
