import math
import os

import pytest

from conftest import ROOT
from config.lab_config import LabConfigManager, parse_flat
from config.settings import AppConfig
from core.exceptions import ConfigError

REFERENCE_FILE = os.path.join(ROOT, "reference.conf")


def _write(tmp_path, text, name="lab.conf"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_reference_configuration_is_valid():
    manager = LabConfigManager()
    assert manager.validate() == []
    assert manager.system.theta_max == pytest.approx(math.pi / 3)
    assert manager.system.profile_order == 9
    assert math.isinf(manager.reservoir.beta)


def test_reference_file_matches_builtin_defaults():
    from_file = LabConfigManager(REFERENCE_FILE)
    builtin = LabConfigManager()
    assert from_file.sections == builtin.sections
    assert from_file.scan.eps == [0.05, 0.025, 0.0125]
    assert from_file.scan.lam == []
    assert from_file.scan.routes == ["free", "leading", "dyson1"]
    assert from_file.kato.analytic_generator is True
    assert from_file.dyson.max_phase_per_panel == pytest.approx(math.pi / 4)


def test_partial_file_falls_back_to_reference(tmp_path):
    path = _write(tmp_path, "# override two keys\nsystem.e21 = 1 + 0.1*t\npoint.eps = 0.05\nscan.beta = inf, 2\n")
    manager = LabConfigManager(path)
    assert manager.system.e21 == "1 + 0.1*t"
    assert manager.point.eps == 0.05
    assert manager.scan.beta == [math.inf, 2.0]
    assert manager.reservoir.g0 == 0.1
    assert manager.validate() == []


@pytest.mark.parametrize(
    "text",
    [
        "system.colour = blue\n",
        "bath.g0 = 0.1\n",
        "eps = 0.1\n",
        "system.profile_order = 7.5\n",
        "kato.analytic_generator = maybe\n",
        "reservoir.g0 = lots\n",
    ],
)
def test_malformed_files_raise(tmp_path, text):
    with pytest.raises(ConfigError):
        LabConfigManager(_write(tmp_path, text))


def test_missing_file_raises(tmp_path):
    with pytest.raises(ConfigError):
        LabConfigManager(str(tmp_path / "absent.conf"))


def test_parse_flat_groups_sections():
    grouped = parse_flat({"system.e21": "2", "system.b1": "1", "point.t": "0.5"})
    assert grouped == {"system": {"e21": "2", "b1": "1"}, "point": {"t": "0.5"}}
    with pytest.raises(ConfigError):
        parse_flat({"point.t": None})


def test_validation_collects_every_error(tmp_path):
    text = "system.profile_order = 3\nscan.eps = 0.1, 1.5\nscan.routes = free, quantum\nsystem.b1 = x + t\n"
    manager = LabConfigManager(_write(tmp_path, text))
    errors = manager.validate()
    assert "system.profile_order must be >= 5" in errors
    assert any("1.5" in e for e in errors)
    assert any("quantum" in e for e in errors)
    assert any(e.startswith("system.b1") for e in errors)
    with pytest.raises(ConfigError):
        manager.require_valid()


def test_list_rule_needs_values(tmp_path):
    manager = LabConfigManager(_write(tmp_path, "scan.lam_rule = list\n"))
    assert "scan.lam list is empty" in manager.validate()


def test_update_recoerces_values():
    manager = LabConfigManager()
    manager.update("point", eps="pi/100", lam=0)
    assert manager.point.eps == pytest.approx(math.pi / 100)
    assert manager.point.lam == 0.0
    assert manager.point.t == 1.0
    with pytest.raises(ConfigError):
        manager.update("plot", eps=0.1)
    with pytest.raises(ConfigError):
        manager.update("point", s=0.1)


def test_json_export_and_import():
    manager = LabConfigManager()
    manager.update("scan", m="1, 2", beta="inf, 4")
    restored = LabConfigManager()
    restored.import_config(manager.export_config())
    assert restored.sections == manager.sections
    with pytest.raises(ConfigError):
        restored.import_config("{not json")


def test_flat_export_reloads(tmp_path):
    manager = LabConfigManager()
    manager.update("system", e21="1 - 0.2*t", theta_max="pi/4")
    reloaded = LabConfigManager(_write(tmp_path, manager.to_flat()))
    assert reloaded.sections == manager.sections


def test_app_config_validation(monkeypatch):
    assert AppConfig.validate()
    monkeypatch.setattr(AppConfig, "THREADS", "0")
    with pytest.raises(ValueError):
        AppConfig.validate()
    monkeypatch.setattr(AppConfig, "THREADS", "two")
    with pytest.raises(ValueError):
        AppConfig.validate()
    monkeypatch.setattr(AppConfig, "THREADS", "2")
    assert AppConfig.threads() == 2
    monkeypatch.setattr(AppConfig, "LOG_LEVEL", "LOUD")
    with pytest.raises(ValueError):
        AppConfig.validate()


def test_app_config_rejects_missing_config_path(monkeypatch, tmp_path):
    monkeypatch.setattr(AppConfig, "CONFIG_PATH", str(tmp_path / "nowhere.conf"))
    with pytest.raises(ValueError):
        AppConfig.validate()
