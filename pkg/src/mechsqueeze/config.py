"""Scenario configuration: a flat JSON object with unit-suffixed keys.

Frequencies ending in ``_khz`` are ordinary frequencies (multiplied by
``2 pi`` internally) except ``gamma_khz``, which is the Rabi-flopping decay
rate in 1/ms.  The squeeze is given either as ``r`` or through the trap pair
``trap_freq_khz`` / ``jump_freq_khz``; the inhomogeneous spread either as
``sigma_omega_khz`` or as ``target_decay_us``, the 1/e time of the echo
envelope.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .gaussian import RB85_MASS, OscillatorConfig
from .protocol import ENSEMBLE_METHODS, MAX_HERMITE_ORDER, InhomogeneityModel
from .spectroscopy import SidebandModel

AMU = 1.66053906660e-27

DEFAULTS: dict = {
    "mass_amu": RB85_MASS / AMU,
    "trap_freq_khz": 125.0,
    "relative_phase_rad": math.pi / 2,
    "nbar0": 0.06,
    "rabi_01_khz": 1.5,
    "lamb_dicke": 0.13,
    "gamma_khz": 10.36,
    "pulse_ms": 0.17,
    "decay_uncoupled": False,
    "ensemble_order": 21,
    "ensemble_method": "fourier",
    "n_max": 25,
    "l_cap": 50,
    "truncation_gate": 1e-3,
    "widths_t_max_us": 8.0,
    "widths_steps": 161,
    "ratio_r_max": 1.5,
    "ratio_steps": 31,
    "echo_tau_max_us": 200.0,
    "echo_steps": 800,
    "wigner_bound": 6.0,
    "wigner_resolution": 101,
    "wigner_time_us": 0.0,
    "velocimetry_noise": 0.02,
    "velocimetry_points": 41,
    "velocimetry_pulse_ms": 0.1,
    "velocimetry_convolve": True,
    "raman_wavelength_nm": 795.0,
    "seed": 0,
    "out_dir": "out",
    "formats": ["csv", "json"],
}

OPTIONAL = ("r", "jump_freq_khz", "sigma_omega_khz", "target_decay_us")
# fields that only steer where and how artifacts are written
OUTPUT_ONLY = ("out_dir", "formats")

_POSITIVE = (
    "mass_amu", "trap_freq_khz", "jump_freq_khz", "rabi_01_khz", "lamb_dicke", "widths_t_max_us",
    "ratio_r_max", "echo_tau_max_us", "wigner_bound", "raman_wavelength_nm", "target_decay_us",
)
_NONNEGATIVE = ("r", "nbar0", "gamma_khz", "pulse_ms", "sigma_omega_khz", "truncation_gate", "velocimetry_noise",
                "velocimetry_pulse_ms", "wigner_time_us")
_COUNTS = {"ensemble_order": 1, "n_max": 1, "l_cap": 2, "widths_steps": 2, "ratio_steps": 2, "echo_steps": 8,
           "wigner_resolution": 3, "velocimetry_points": 8}
_BOOLS = ("decay_uncoupled", "velocimetry_convolve")


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario.  ``values`` holds every key with defaults filled in."""

    values: dict
    source: str | None = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.values["trap_freq_khz"] * 1e3

    @property
    def r(self) -> float:
        if "r" in self.values:
            return float(self.values["r"])
        return math.log(self.values["trap_freq_khz"] / self.values["jump_freq_khz"])

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def oscillator(self) -> OscillatorConfig:
        return OscillatorConfig(mass=self.values["mass_amu"] * AMU, omega=self.omega,
                                omega_prime=self.omega * math.exp(-self.r))

    def sideband(self) -> SidebandModel:
        v = self.values
        return SidebandModel(
            rabi_01=2 * math.pi * v["rabi_01_khz"] * 1e3,
            lamb_dicke=v["lamb_dicke"],
            gamma=v["gamma_khz"] * 1e3,
            pulse_duration=v["pulse_ms"] * 1e-3,
            decay_uncoupled=v["decay_uncoupled"],
        )

    def inhomogeneity(self) -> InhomogeneityModel:
        v = self.values
        kw = dict(ensemble_size=v["ensemble_order"], method=v["ensemble_method"], seed=self.seed)
        if "target_decay_us" in v:
            return InhomogeneityModel.from_decay_time(v["target_decay_us"] * 1e-6, **kw)
        return InhomogeneityModel(sigma_omega=2 * math.pi * v.get("sigma_omega_khz", 0.0) * 1e3, **kw)

    @property
    def k_eff(self) -> float:
        return 2 * (2 * math.pi / (self.values["raman_wavelength_nm"] * 1e-9))

    def canonical(self) -> str:
        """Canonical JSON of the fields that affect results."""
        return json.dumps({k: v for k, v in self.values.items() if k not in OUTPUT_ONLY}, sort_keys=True)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"--set {item!r}: expected key=value")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _check(values: dict, text: str | None, where: dict) -> dict:
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}" + (f" (from {where[key]})" if key in where else ""),
                          line=None if key in where else _line_of(text, key))

    known = set(DEFAULTS) | set(OPTIONAL)
    for key in values:
        if key not in known:
            fail(key, "unknown key")
    out = dict(DEFAULTS)
    out.update(values)

    for key in out:
        val = out[key]
        if key in _BOOLS:
            if not isinstance(val, bool):
                fail(key, f"expected true or false, got {val!r}")
        elif key in _COUNTS:
            if isinstance(val, bool) or not isinstance(val, int) and not (isinstance(val, float) and val.is_integer()):
                fail(key, f"expected an integer, got {val!r}")
            out[key] = int(val)
            if out[key] < _COUNTS[key]:
                fail(key, f"must be at least {_COUNTS[key]}")
        elif key == "seed":
            if isinstance(val, bool) or not isinstance(val, int) or val < 0:
                fail(key, f"expected a nonnegative integer, got {val!r}")
        elif key in ("out_dir", "ensemble_method"):
            if not isinstance(val, str) or not val:
                fail(key, "expected a non-empty string")
        elif key == "formats":
            if not isinstance(val, list) or not val or any(f not in ("csv", "json") for f in val):
                fail(key, 'expected a non-empty list drawn from ["csv", "json"]')
            out[key] = sorted(set(val))
        else:
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                fail(key, f"expected a finite number, got {val!r}")
            out[key] = float(val)
            if key in _POSITIVE and not out[key] > 0:
                fail(key, f"must be positive, got {val!r}")
            if key in _NONNEGATIVE and not out[key] >= 0:
                fail(key, f"must be nonnegative, got {val!r}")

    if ("r" in out) == ("jump_freq_khz" in out):
        fail("r" if "r" in out else "jump_freq_khz", "give exactly one of r or jump_freq_khz")
    if "sigma_omega_khz" in out and "target_decay_us" in out:
        fail("target_decay_us", "sigma_omega_khz and target_decay_us are mutually exclusive")
    if out["ensemble_method"] not in ENSEMBLE_METHODS:
        fail("ensemble_method", "expected one of " + ", ".join(f'"{m}"' for m in ENSEMBLE_METHODS))
    if out["ensemble_method"] == "gauss-hermite" and out["ensemble_order"] > MAX_HERMITE_ORDER:
        fail("ensemble_order", f"gauss-hermite order is limited to {MAX_HERMITE_ORDER}")
    if not out["lamb_dicke"] < 1:
        fail("lamb_dicke", "must be below 1")
    if "jump_freq_khz" in out and out["jump_freq_khz"] > out["trap_freq_khz"]:
        fail("jump_freq_khz", "must not exceed trap_freq_khz (the jump lowers the trap frequency)")
    if out["n_max"] > 2000:
        fail("n_max", "above the supported cap of 2000")
    return out


def load_config(path: str | Path | None, overrides=(), *, seed: int | None = None) -> ScenarioConfig:
    """Read, override and validate a scenario; errors are :class:`ConfigError`.

    ``overrides`` are ``key=value`` strings whose value is parsed as JSON
    (bare words fall back to strings); ``key=null`` removes the key.
    """
    text = None
    values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}") from None
        try:
            values = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno) from None
        if not isinstance(values, dict):
            raise ConfigError("top level must be a JSON object", line=1)
    where = {}
    for item in overrides:
        key, val = _parse_override(item)
        where[key] = f"--set {item}"
        if val is None:
            values.pop(key, None)
        else:
            values[key] = val
    if seed is not None:
        values["seed"] = seed
        where["seed"] = "--seed"
    return ScenarioConfig(_check(values, text, where), None if path is None else str(path))


def validate_config(path: str | Path | None, overrides=(), *, seed: int | None = None) -> dict:
    """Validate without running anything and report derived quantities."""
    cfg = load_config(path, overrides, seed=seed)
    osc = cfg.oscillator()
    inhom = cfg.inhomogeneity()
    return {
        "valid": True,
        "config_sha256": cfg.sha256,
        "r": cfg.r,
        "r_source": "r" if "r" in cfg.values else "ln(trap_freq_khz / jump_freq_khz)",
        "jump_freq_khz": osc.omega_prime / (2 * math.pi) / 1e3,
        "squeezing_db": 20 * cfg.r / math.log(10),
        "dx0_nm": osc.dx0 * 1e9,
        "dv0_cm_s": osc.dv0 * 100,
        "sigma_omega_khz": inhom.sigma_omega / (2 * math.pi) / 1e3,
        "echo_decay_us": inhom.decay_time * 1e6 if inhom.sigma_omega else None,
        "k_eff_per_um": cfg.k_eff * 1e-6,
        "seed": cfg.seed,
    }
