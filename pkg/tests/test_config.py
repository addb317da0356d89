import math

import pytest

from resfluor.config import ConfigError, load_config
from resfluor.physics import DriveParams, saturation_parameter


def test_builtin_profile_values():
    cfg = load_config()
    assert cfg.molecule.gamma0 == 16.4
    assert cfg.molecule.gamma == 17.0
    assert cfg.molecule.lambda21 == 590.0
    assert cfg.molecule.alpha_dw == 0.25
    assert cfg.fpc.fsr == 356.0
    assert cfg.fpc.fwhm == 14.0
    assert cfg.fpc.peak_transmission == 0.15
    assert cfg.detector.dark_rate == 150.0
    assert cfg.power_calibration.p_at_s1 == 350.0
    assert cfg.geometry.dipole_angle == pytest.approx(math.pi / 4.0)
    assert len(cfg.qwp_angles) == 5
    assert cfg.drive.psi == pytest.approx(math.pi / 2.0)


def test_unknown_profile_rejected():
    with pytest.raises(ConfigError):
        load_config(profile="no-such-profile")


def test_overrides_and_power_to_rabi():
    cfg = load_config(overrides={"drive": {"power_pw": 350.0}})
    s = saturation_parameter(cfg.molecule, cfg.drive)
    assert s == pytest.approx(1.0, rel=1e-12)
    cfg2 = load_config(overrides={"drive": {"power_pw": 1400.0}})
    assert saturation_parameter(cfg2.molecule, cfg2.drive) == pytest.approx(4.0, rel=1e-12)


def test_unknown_override_key_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides={"drive": {"rabbi": 5.0}})
    with pytest.raises(ConfigError):
        load_config(overrides={"laser": {"rabi": 5.0}})


def test_ini_file_round_trip(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("""
[molecule]
gamma = 18.5   # broadened line
[simulate]
noise = true
points = 99
[run]
seed = 77
""")
    cfg = load_config(str(p))
    assert cfg.molecule.gamma == 18.5
    assert cfg.simulate["noise"] is True
    assert cfg.simulate["points"] == 99
    assert cfg.seed == 77


def test_ini_errors_name_section_and_key(tmp_path):
    bad_key = tmp_path / "a.ini"
    bad_key.write_text("[molecule]\ngama = 17\n")
    with pytest.raises(ConfigError, match="gama"):
        load_config(str(bad_key))

    bad_val = tmp_path / "b.ini"
    bad_val.write_text("[molecule]\ngamma = broad\n")
    with pytest.raises(ConfigError, match=r"\[molecule\] gamma"):
        load_config(str(bad_val))

    bad_sec = tmp_path / "c.ini"
    bad_sec.write_text("[laser]\nrabi = 1\n")
    with pytest.raises(ConfigError, match="laser"):
        load_config(str(bad_sec))


def test_physical_validation_is_config_error(tmp_path):
    p = tmp_path / "d.ini"
    p.write_text("[molecule]\ngamma = 10.0\n")  # below gamma0 = 16.4
    with pytest.raises(ConfigError, match=r"\[molecule\]"):
        load_config(str(p))


def test_missing_file_is_config_error():
    with pytest.raises(ConfigError):
        load_config("/no/such/file.ini")
