"""Run configuration: flat INI-style sections with '#' comments, parsed
strictly (unknown sections or keys are errors, so typos cannot pass
silently).  Angles are degrees in the file and radians internally.

The read-only built-in profile ``dbatt-paper`` carries the published
constants of the DBATT system: gamma0 = 16.4 MHz (9.7 ns lifetime),
gamma = 17 MHz, lambda = 590 nm, alpha_DW = 0.25, alpha_FC = 0.3,
FPC 356 / 14 MHz at 15% transmission, 150 cps dark counts and
P_sat = 350 pW.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

from .measurement import DetectorParams, PowerCalibration
from .physics import DriveParams, MoleculeParams, rabi_for_saturation
from .polarization import SeparationGeometry
from .spectra import FpcParams


class ConfigError(ValueError):
    """Configuration problem, addressed by section and field."""


DBATT_PAPER_PROFILE = {
    "molecule": {
        "gamma0": "16.4",
        "gamma": "17.0",
        "lambda21": "590.0",
        "alpha_dw": "0.25",
        "alpha_fc": "0.3",
    },
    "drive": {
        "rabi": "0.0",
        "detuning": "0.0",
        "psi_deg": "90.0",
        "incident_rate": "127550.0",
        "incident_unit": "cps",
        "p_sat_pw": "350.0",
    },
    "detector": {
        "dark_rate": "150.0",
        "quantum_efficiency": "1.0",
        "integration_time": "0.16",
    },
    "fpc": {
        "fsr": "356.0",
        "fwhm": "14.0",
        "peak_transmission": "0.15",
    },
    "geometry": {
        "dipole_angle_deg": "45.0",
        "polarizer_angle_deg": "80.0",
        "polarizer_extinction_ratio": "0.0",
        "qwp_angles_deg": "0, 36, 72, 108, 144",
    },
    "simulate": {
        "grid_min": "-150.0",
        "grid_max": "150.0",
        "points": "301",
        "noise": "false",
        "extinction_a": "0.0",
        "extinction_b_dip": "0.115",
        "emission_scale": "1.0",
        "laser_background_rate": "0.0",
        "tau_max_ns": "400.0",
        "tau_points": "801",
        "plateau_coincidences": "10000",
        "power_min_pw": "5.0",
        "power_max_pw": "10000.0",
        "power_points": "25",
    },
    "output": {
        "dir": "out",
        "formats": "csv,json",
    },
    "run": {
        "seed": "1",
        "threads": "1",
    },
}

PROFILES = {"dbatt-paper": DBATT_PAPER_PROFILE}


def _parse_value(section, key, raw, kind):
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is bool:
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "float_list":
            return [float(x) for x in raw.split(",") if x.strip()]
        return raw
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}"
        ) from None


_SCHEMA = {
    "molecule": {"gamma0": float, "gamma": float, "lambda21": float,
                 "alpha_dw": float, "alpha_fc": float},
    "drive": {"rabi": float, "detuning": float, "psi_deg": float,
              "incident_rate": float, "incident_unit": str,
              "power_pw": float, "p_sat_pw": float},
    "detector": {"dark_rate": float, "quantum_efficiency": float,
                 "integration_time": float},
    "fpc": {"fsr": float, "fwhm": float, "peak_transmission": float},
    "geometry": {"dipole_angle_deg": float, "polarizer_angle_deg": float,
                 "polarizer_extinction_ratio": float,
                 "qwp_angles_deg": "float_list"},
    "simulate": {"grid_min": float, "grid_max": float, "points": int,
                 "noise": bool, "extinction_a": float, "extinction_b_dip": float,
                 "emission_scale": float, "laser_background_rate": float,
                 "tau_max_ns": float, "tau_points": int,
                 "plateau_coincidences": float,
                 "power_min_pw": float, "power_max_pw": float,
                 "power_points": int},
    "output": {"dir": str, "formats": str},
    "run": {"seed": int, "threads": int},
}


@dataclass
class RunConfig:
    molecule: MoleculeParams
    drive: DriveParams
    detector: DetectorParams
    fpc: FpcParams
    geometry: SeparationGeometry
    qwp_angles: list
    power_calibration: PowerCalibration
    simulate: dict
    out_dir: str
    formats: list
    seed: int
    threads: int
    raw: dict = field(default_factory=dict)


def _merged_raw(path: Optional[str], profile: str = "dbatt-paper") -> dict:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    merged = {s: dict(kv) for s, kv in PROFILES[profile].items()}
    if path is None:
        return merged
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key, val in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key [{section}] {key} in {path}")
            merged[section][key] = val
    return merged


def load_config(path: Optional[str] = None, profile: str = "dbatt-paper",
                overrides: Optional[dict] = None) -> RunConfig:
    """Build a validated RunConfig from the profile, an optional INI file
    and programmatic overrides (section -> key -> string value)."""
    raw = _merged_raw(path, profile)
    if overrides:
        for section, kv in overrides.items():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}] in overrides")
            for key, val in kv.items():
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key [{section}] {key} in overrides")
                raw[section][key] = str(val)

    def get(section, key):
        return _parse_value(section, key, raw[section][key], _SCHEMA[section][key])

    try:
        mol = MoleculeParams(
            gamma0=get("molecule", "gamma0"),
            gamma=get("molecule", "gamma"),
            lambda21=get("molecule", "lambda21"),
            alpha_dw=get("molecule", "alpha_dw"),
            alpha_fc=get("molecule", "alpha_fc"),
        )
    except ValueError as exc:
        raise ConfigError(f"[molecule]: {exc}") from exc

    cal = PowerCalibration(get("drive", "p_sat_pw"))
    rabi = get("drive", "rabi")
    if "power_pw" in raw["drive"]:
        s = cal.saturation(get("drive", "power_pw"))
        rabi = rabi_for_saturation(mol, s)
    try:
        drive = DriveParams(
            rabi=rabi,
            detuning=get("drive", "detuning"),
            psi=math.radians(get("drive", "psi_deg")),
            incident_rate=get("drive", "incident_rate"),
            incident_unit=get("drive", "incident_unit"),
        )
    except ValueError as exc:
        raise ConfigError(f"[drive]: {exc}") from exc

    try:
        det = DetectorParams(
            dark_rate=get("detector", "dark_rate"),
            quantum_efficiency=get("detector", "quantum_efficiency"),
            integration_time=get("detector", "integration_time"),
        )
    except ValueError as exc:
        raise ConfigError(f"[detector]: {exc}") from exc

    try:
        fpc = FpcParams(
            fsr=get("fpc", "fsr"),
            fwhm=get("fpc", "fwhm"),
            peak_transmission=get("fpc", "peak_transmission"),
        )
    except ValueError as exc:
        raise ConfigError(f"[fpc]: {exc}") from exc

    geo = SeparationGeometry(
        dipole_angle=math.radians(get("geometry", "dipole_angle_deg")),
        polarizer_angle=math.radians(get("geometry", "polarizer_angle_deg")),
        polarizer_extinction_ratio=get("geometry", "polarizer_extinction_ratio"),
    )
    qwp = [math.radians(a) for a in get("geometry", "qwp_angles_deg")]

    sim = {k: get("simulate", k) for k in _SCHEMA["simulate"] if k in raw["simulate"]}

    return RunConfig(
        molecule=mol,
        drive=drive,
        detector=det,
        fpc=fpc,
        geometry=geo,
        qwp_angles=qwp,
        power_calibration=cal,
        simulate=sim,
        out_dir=get("output", "dir"),
        formats=[f.strip() for f in get("output", "formats").split(",") if f.strip()],
        seed=get("run", "seed"),
        threads=get("run", "threads"),
        raw=raw,
    )
