"""INI experiment configuration.

Sections and keys (defaults in brackets)::

    [profile]      kind, M [1], p, gamma, zeta_c, zeta_d [0], tail_policy, I_tail,
                   samples_s, samples_P, diffusivity [1]
    [constitutive] Lambda, probe_points [200]
    [geometry]     kind [radial], N [3], L [1], m [128]
    [solver]       epsilon, eps_list, scheme [implicit], dt [auto], T,
                   snapshot_stride [1], workers [1]
    [data]         g [bump|sine|zero], bump_center, bump_radius, bump_height,
                   sine_amplitude [1], phi_max [0], t_ramp [1]
    [degiorgi]     R, Rprime, tol [1e-6], x0 [0], n_max [8], S
    [estimates]    samples [10000], seed [0], theta_inner, theta_outer,
                   energy_bound [0.05], t_start [0]
    [output]       dir [out]

Overrides use ``section.key=value``.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import profiles
from .errors import ConfigError
from .solver import Bump, Geometry, Ramp, SineMode, SolverConfig

SECTIONS = ("profile", "constitutive", "geometry", "solver", "data", "degiorgi",
            "estimates", "output")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    parser: configparser.ConfigParser
    source: str

    # -- raw access -----------------------------------------------------------
    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def get(self, section: str, key: str, default=None) -> str:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if default is None:
            raise ConfigError(f"missing key [{section}] {key} in {self.source}")
        return default

    def num(self, section: str, key: str, default: Optional[float] = None) -> float:
        raw = self.get(section, key, None if default is None else repr(default))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None

    def integer(self, section: str, key: str, default: Optional[int] = None) -> int:
        v = self.num(section, key, default)
        if v != int(v):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(v)

    # -- provenance -----------------------------------------------------------
    def canonical(self) -> str:
        lines = []
        for sec in sorted(self.parser.sections()):
            lines.append(f"[{sec}]")
            for key, val in sorted(self.parser.items(sec)):
                lines.append(f"{key} = {val.strip()}")
        return "\n".join(lines) + "\n"

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def echo(self) -> dict:
        return {sec: dict(sorted(self.parser.items(sec))) for sec in sorted(self.parser.sections())}

    # -- builders -------------------------------------------------------------
    @property
    def is_calibration(self) -> bool:
        return self.get("profile", "kind") == "calibration"

    def profile(self) -> profiles.DegeneracyProfile:
        kind = self.get("profile", "kind")
        M = self.num("profile", "M", 1.0)
        tail = float(self.get("profile", "I_tail")) if self.has("profile", "I_tail") else None
        try:
            if kind == "power":
                policy = self.get("profile", "tail_policy", "closed-form")
                return profiles.power(self.num("profile", "p"), M, policy, tail)
            if kind == "exp-inverse":
                return profiles.exp_inverse(self.num("profile", "gamma"), M, tail)
            if kind in ("zeta-bounded", "zeta-unbounded"):
                z = profiles.zeta_loglinear(self.num("profile", "zeta_c"),
                                            self.num("profile", "zeta_d", 0.0), M)
                if kind == "zeta-bounded":
                    return profiles.zeta_bounded(z, M, tail)
                return profiles.zeta_unbounded(z, None, M, tail)
            if kind == "tabulated":
                return profiles.tabulated(_floats(self.get("profile", "samples_s")),
                                          _floats(self.get("profile", "samples_P")),
                                          M if self.has("profile", "M") else None, tail)
            if kind == "calibration":
                return profiles.calibration(self.num("profile", "diffusivity", 1.0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[profile] invalid parameters: {exc}") from None
        raise ConfigError(f"[profile] unknown kind {kind!r}")

    @property
    def Lambda(self) -> float:
        return self.num("constitutive", "Lambda")

    def geometry(self) -> Geometry:
        kind = self.get("geometry", "kind", "radial")
        L = self.num("geometry", "L", 1.0)
        m = self.integer("geometry", "m", 128)
        try:
            if kind == "radial":
                return Geometry.radial(self.integer("geometry", "N", 3), L, m)
            if kind == "interval":
                return Geometry.interval(L, m)
        except ValueError as exc:
            raise ConfigError(f"[geometry] {exc}") from None
        raise ConfigError(f"[geometry] unknown kind {kind!r}")

    def initial_data(self):
        g = self.get("data", "g", "zero")
        if g == "zero":
            return None
        if g == "bump":
            return Bump(self.num("data", "bump_center"), self.num("data", "bump_radius"),
                        self.num("data", "bump_height"))
        if g == "sine":
            return SineMode(self.num("data", "sine_amplitude", 1.0))
        raise ConfigError(f"[data] unknown g {g!r}")

    def boundary_data(self) -> Ramp:
        return Ramp(self.num("data", "phi_max", 0.0), self.num("data", "t_ramp", 1.0))

    def eps_list(self) -> list[float]:
        if self.has("solver", "eps_list"):
            vals = _floats(self.get("solver", "eps_list"))
        else:
            vals = [self.num("solver", "epsilon")]
        if not vals:
            raise ConfigError("[solver] eps_list is empty")
        return vals

    @property
    def epsilon(self) -> float:
        if self.has("solver", "epsilon"):
            return self.num("solver", "epsilon")
        return min(self.eps_list())

    def solver_config(self, eps: Optional[float] = None) -> SolverConfig:
        dt_raw = self.get("solver", "dt", "auto")
        dt = None if dt_raw == "auto" else self.num("solver", "dt")
        g = self.initial_data()
        inner = 0.0
        if self.parser.has_section("degiorgi") and self.has("degiorgi", "R"):
            inner = self.num("degiorgi", "R")
        try:
            return SolverConfig(
                epsilon=self.epsilon if eps is None else eps,
                T=self.num("solver", "T"),
                scheme=self.get("solver", "scheme", "implicit"),
                dt=dt, g=g, phi=self.boundary_data(),
                snapshot_stride=self.integer("solver", "snapshot_stride", 1),
                inner_radius=inner,
            )
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None

    def validate(self) -> None:
        """Cross-field checks: radii ordering and a clean centre."""
        for sec in self.parser.sections():
            if sec not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}]")
        self.get("profile", "kind")
        if self.parser.has_section("geometry"):
            self.geometry()
        if self.parser.has_section("solver"):
            self.eps_list()
            self.solver_config()
        if not self.parser.has_section("degiorgi"):
            return
        R = self.num("degiorgi", "R")
        Rp = self.num("degiorgi", "Rprime")
        if not 0 < Rp < R:
            raise ConfigError("[degiorgi] need 0 < Rprime < R")
        g = self.initial_data()
        clean = getattr(g, "clean_radius", math.inf) if g is not None else math.inf
        if R > clean + 1e-12:
            raise ConfigError(f"[degiorgi] R = {R} exceeds the data-free radius {clean}")
        if self.num("degiorgi", "x0", 0.0) != 0.0 and self.get("geometry", "kind", "radial") == "radial":
            raise ConfigError("[degiorgi] radial runs are centred at x0 = 0")

    @property
    def out_dir(self) -> Path:
        return Path(self.get("output", "dir", "out"))


def load_config(path, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read an INI file and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        parser.read_string(text, source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override {ov!r} is not section.key=value")
        lhs, val = ov.split("=", 1)
        sec, key = lhs.split(".", 1)
        if not parser.has_section(sec):
            parser.add_section(sec)
        parser.set(sec.strip(), key.strip(), val.strip())
    cfg = ExperimentConfig(parser, str(p))
    cfg.validate()
    return cfg
