"""Physical constants, reference profiles, boundary data and run configuration.

The configuration file is plain sectioned ``key = value`` text::

    [physics]
    mode = nondimensional
    eps2 = 1e-3

    [grid]
    nx = 32

Every key has a default that depends on ``physics.mode``; the fully resolved
set is printed by ``moistpe --dump-defaults`` in the same format, so the dump
is itself a valid configuration file.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

MODES = ("nondimensional", "physical")


class ConfigError(ValueError):
    """Malformed configuration file or violated parameter invariant."""


def _f(section: str, default: Any = dataclasses.MISSING, key: str | None = None):
    return dataclasses.field(default=default, metadata={"section": section, "key": key})


@dataclasses.dataclass(frozen=True)
class PhysParams:
    mode: str = _f("physics", "nondimensional")
    R: float = _f("physics", 1.0)
    R_v: float = _f("physics", 1.608)
    c_p: float = _f("physics", 3.5)
    L: float = _f("physics", 29.0)
    g: float = _f("physics", 1.0)
    f0: float = _f("physics", 1.0)
    gamma: float = _f("physics", 1.4)
    k1: float = _f("physics", 1e-3)
    k2: float = _f("physics", 2.2)
    k3: float = _f("physics", 1e-3)
    q_vs: float = _f("physics", 0.02)
    q_crit: float = _f("physics", 5e-4)
    V_t: float = _f("physics", 5.0)
    mu_v: float = _f("physics", 1.0)
    mu_T: float = _f("physics", 1.0)
    mu_q: float = _f("physics", 1.0)
    nu_T: float = _f("physics", 1.0)
    nu_q: float = _f("physics", 1.0)
    eps1: float = _f("physics", 0.0)
    eps2: float = _f("physics", 1e-3)
    T_star_lo: float = _f("physics", 0.5)
    T_star_hi: float = _f("physics", 1.2)
    use_F_plus: bool = _f("physics", True)
    sources: bool = _f("physics", True)
    p0: float = _f("physics", 0.1)
    p1: float = _f("physics", 1.0)

    def validate(self) -> None:
        _check(self.mode in MODES, "physics.mode", f"must be one of {MODES}")
        _check(self.p0 > 0 and self.p1 > 0, "physics.p0/p1", "must be > 0")
        _check(self.p0 < self.p1, "physics.p0", "p0 < p1 violated")
        _check(self.eps2 > 0, "physics.eps2", "eps2 > 0 violated")
        _check(self.eps1 >= 0, "physics.eps1", "eps1 >= 0 violated")
        _check(self.T_star_lo < self.T_star_hi, "physics.T_star_lo", "T_star_lo < T_star_hi violated")
        _check(self.T_star_lo > 0, "physics.T_star_lo", "must be > 0")
        for name in ("k1", "k2", "k3", "V_t", "mu_v", "mu_T", "mu_q", "nu_T", "nu_q"):
            _check(getattr(self, name) >= 0, f"physics.{name}", "must be >= 0")
        for name in ("R", "R_v", "c_p", "L", "g", "gamma"):
            _check(getattr(self, name) > 0, f"physics.{name}", "must be > 0")
        _check(0 < self.q_vs < 1, "physics.q_vs", "q_vs in (0, 1) violated")
        _check(0 <= self.q_crit < 1, "physics.q_crit", "q_crit in [0, 1) violated")


@dataclasses.dataclass(frozen=True)
class ReferenceProfiles:
    """Reference profiles, each ``a + b * ln(p / p1)``; constant when ``b = 0``."""

    T_bar: float = _f("profiles", 1.0)
    T_bar_dlnp: float = _f("profiles", 0.0)
    theta_bar: float = _f("profiles", 1.0)
    theta_bar_dlnp: float = _f("profiles", 0.0)
    theta_h: float = _f("profiles", 1.0)
    theta_h_dlnp: float = _f("profiles", 0.0)
    p_ref: float = _f("profiles", 1.0)

    def _eval(self, a: float, b: float, p):
        return a + b * np.log(np.asarray(p, dtype=float) / self.p_ref)

    def T_bar_at(self, p):
        return self._eval(self.T_bar, self.T_bar_dlnp, p)

    def theta_bar_at(self, p):
        return self._eval(self.theta_bar, self.theta_bar_dlnp, p)

    def theta_h_at(self, p):
        return self._eval(self.theta_h, self.theta_h_dlnp, p)

    def dtheta_h_dp(self, p):
        return self.theta_h_dlnp / np.asarray(p, dtype=float)

    def validate(self, phys: PhysParams) -> None:
        p = np.linspace(phys.p0, phys.p1, 257)
        for name in ("T_bar", "theta_bar", "theta_h"):
            vals = getattr(self, name + "_at")(p)
            _check(bool(np.all(vals > 0)) and bool(np.all(np.isfinite(vals))),
                   f"profiles.{name}", "profile must be strictly positive on [p0, p1]")


@dataclasses.dataclass(frozen=True)
class BoundaryData:
    """Robin targets: ``*_star`` on the bottom face, ``*_bl`` on the lateral walls.

    Programmatic callers may substitute arrays (``(nx, ny)`` for surface
    targets, anything broadcastable to the ghost slab for lateral ones).
    """

    T_star: Any = _f("boundary", 1.0)
    qv_star: Any = _f("boundary", 0.015)
    qc_star: Any = _f("boundary", 0.0)
    qr_star: Any = _f("boundary", 0.0)
    T_bl: Any = _f("boundary", 1.0)
    qv_bl: Any = _f("boundary", 0.015)
    qc_bl: Any = _f("boundary", 0.0)
    qr_bl: Any = _f("boundary", 0.0)

    def surface(self, name: str):
        return getattr(self, f"{name}_star")

    def lateral(self, name: str):
        return getattr(self, f"{name}_bl")

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            val = np.asarray(getattr(self, f.name), dtype=float)
            _check(bool(np.all(np.isfinite(val))), f"boundary.{f.name}", "must be finite")
            _check(bool(np.all(val >= 0)), f"boundary.{f.name}", "targets must be >= 0")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    nx: int = _f("grid", 32)
    ny: int = _f("grid", 32)
    nlev: int = _f("grid", 16, key="np")
    Lx: float = _f("grid", 1.0)
    Ly: float = _f("grid", 1.0)
    dt: float = _f("time", 0.0)
    cfl_safety: float = _f("time", 0.5)
    t_end: float = _f("time", 0.01)
    steps: int = _f("time", 0)
    scheme: str = _f("time", "rk2")
    moisture_advection: str = _f("time", "upwind")
    momentum_advection: str = _f("time", "centered")
    projection_solver: str = _f("time", "direct")
    initial: str = _f("initial", "warm_bubble", key="kind")
    amplitude: float = _f("initial", 0.1)
    radius: float = _f("initial", 0.2)
    noise: float = _f("initial", 1e-3)
    qv_peak: float = _f("initial", 0.2)
    seed: int = _f("initial", 0)
    forcing: str = _f("forcing", "zero", key="kind")
    forcing_amplitude: float = _f("forcing", 0.0, key="amplitude")
    forcing_center: str = _f("forcing", "0.5,0.5,0.7", key="center")
    forcing_width: float = _f("forcing", 0.1, key="width")
    out_dir: str = _f("output", "output", key="dir")
    every: int = _f("output", 50)
    snapshots: bool = _f("output", True)
    figures: bool = _f("output", True)
    monitor_bounds: bool = _f("output", True)
    monitor_energy: bool = _f("output", True)

    def validate(self) -> None:
        for name in ("nx", "ny", "nlev"):
            _check(getattr(self, name) >= 4, f"grid.{'np' if name == 'nlev' else name}",
                   f"{'np' if name == 'nlev' else name} >= 4 violated")
        _check(self.Lx > 0 and self.Ly > 0, "grid.Lx/Ly", "must be > 0")
        _check(self.dt > 0 or 0 < self.cfl_safety <= 1, "time.cfl_safety",
               "dt > 0 or cfl_safety in (0, 1] required")
        _check(self.dt >= 0, "time.dt", "must be >= 0 (0 = adaptive)")
        _check(self.t_end >= 0, "time.t_end", "must be >= 0")
        _check(self.steps >= 0, "time.steps", "must be >= 0")
        _check(self.scheme in ("rk2", "euler"), "time.scheme", "must be rk2 or euler")
        for name in ("moisture_advection", "momentum_advection"):
            _check(getattr(self, name) in ("upwind", "centered"), f"time.{name}",
                   "must be upwind or centered")
        _check(self.projection_solver in ("direct", "cg"), "time.projection_solver",
               "must be direct or cg")
        _check(self.initial in INITIAL_KINDS, "initial.kind", f"must be one of {INITIAL_KINDS}")
        _check(self.forcing in ("zero", "constant", "gaussian"), "forcing.kind",
               "must be zero, constant or gaussian")
        _check(self.qv_peak >= 0, "initial.qv_peak", "must be >= 0")
        _check(self.every >= 1, "output.every", "must be >= 1")
        try:
            center = self.forcing_center_xyz
        except ValueError:
            center = ()
        _check(len(center) == 3, "forcing.center", "must be three comma-separated numbers")

    @property
    def forcing_center_xyz(self) -> tuple[float, ...]:
        return tuple(float(s) for s in self.forcing_center.split(","))


INITIAL_KINDS = ("rest", "warm_bubble", "saturated_blob", "decay")


class Config(NamedTuple):
    phys: PhysParams
    profiles: ReferenceProfiles
    bdata: BoundaryData
    run: RunConfig

    def replace(self, **sections) -> "Config":
        """Return a copy with per-object field overrides, revalidated.

        ``cfg.replace(phys={"eps2": 1e-2}, run={"steps": 10})``
        """
        parts = self._asdict()
        for name, changes in sections.items():
            parts[name] = dataclasses.replace(parts[name], **changes)
        out = Config(**parts)
        validate(out)
        return out


_PHYSICAL = {
    "physics": dict(
        R=287.0, R_v=461.5, c_p=1004.0, L=2.5e6, g=9.81, f0=1e-4, gamma=1.4,
        k1=1e-3, k2=2.2, k3=1e-3, q_vs=0.02, q_crit=5e-4, V_t=5.0,
        mu_v=1e5, mu_T=1e5, mu_q=1e5, nu_T=1.0, nu_q=1.0, eps1=0.0, eps2=1e-3,
        T_star_lo=150.0, T_star_hi=340.0, p0=1e4, p1=1e5,
    ),
    "profiles": dict(T_bar=300.0, theta_bar=300.0, theta_h=300.0, p_ref=1e5),
    "boundary": dict(T_star=300.0, T_bl=300.0),
    "grid": dict(Lx=2e6, Ly=2e6),
    "time": dict(t_end=86400.0),
    "initial": dict(radius=4e5),
}

_OBJECTS = (("phys", PhysParams), ("profiles", ReferenceProfiles),
            ("bdata", BoundaryData), ("run", RunConfig))


def _check(ok: bool, field: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"{field}: {msg}")


def _key(f: dataclasses.Field) -> tuple[str, str]:
    return f.metadata["section"], f.metadata["key"] or f.name


def default_mapping(mode: str = "nondimensional") -> dict[str, dict[str, Any]]:
    """Resolved defaults for ``mode`` as ``{section: {key: value}}``."""
    if mode not in MODES:
        raise ConfigError(f"physics.mode: must be one of {MODES}")
    out: dict[str, dict[str, Any]] = {}
    for _, cls in _OBJECTS:
        for f in dataclasses.fields(cls):
            sec, key = _key(f)
            out.setdefault(sec, {})[key] = f.default
    out["physics"]["mode"] = mode
    if mode == "physical":
        for sec, vals in _PHYSICAL.items():
            out[sec].update(vals)
    return out


def _convert(text: str, like: Any, where: str):
    try:
        if isinstance(like, bool):
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            val = float(text)
            if not math.isfinite(val):
                raise ValueError(text)
            return val
        return text.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {type(like).__name__}") from None


def from_mapping(raw: dict[str, dict[str, str]], overrides: dict[str, str] | None = None) -> Config:
    """Build and validate a :class:`Config` from string-valued sections.

    ``overrides`` holds dotted ``section.key`` -> value text and is applied
    after ``raw``.
    """
    raw = {sec.lower(): dict(vals) for sec, vals in raw.items()}
    for dotted, val in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r}: expected section.key=value")
        sec, key = dotted.split(".", 1)
        raw.setdefault(sec, {})[key] = val
    mode = raw.get("physics", {}).get("mode", "nondimensional").strip()
    resolved = default_mapping(mode)
    for sec, vals in raw.items():
        if sec not in resolved:
            raise ConfigError(f"[{sec}]: unknown section")
        for key, text in vals.items():
            if key not in resolved[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
            resolved[sec][key] = _convert(str(text), resolved[sec][key], f"{sec}.{key}")
    parts = {}
    for name, cls in _OBJECTS:
        kwargs = {}
        for f in dataclasses.fields(cls):
            sec, key = _key(f)
            kwargs[f.name] = resolved[sec][key]
        parts[name] = cls(**kwargs)
    cfg = Config(**parts)
    validate(cfg)
    return cfg


def validate(cfg: Config) -> None:
    cfg.phys.validate()
    cfg.profiles.validate(cfg.phys)
    cfg.bdata.validate()
    cfg.run.validate()


def parse_text(text: str, source: str = "<string>") -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (R vs R_v, T_star ...)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        # configparser messages carry the offending line number
        raise ConfigError(f"{source}: parse error: {exc}") from None
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> Config:
    """Read a configuration file (or pure defaults when ``path`` is None)."""
    if path is None:
        return from_mapping({}, overrides)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such configuration file")
    return from_mapping(parse_text(path.read_text(), str(path)), overrides)


def to_mapping(cfg: Config) -> dict[str, dict[str, Any]]:
    out: dict[str, dict[str, Any]] = {}
    for (name, cls), obj in zip(_OBJECTS, cfg):
        for f in dataclasses.fields(cls):
            sec, key = _key(f)
            out.setdefault(sec, {})[key] = getattr(obj, f.name)
    return out


def _fmt(val: Any) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, np.ndarray):
        raise ConfigError("array-valued boundary data cannot be serialized to a config file")
    return str(val)


def serialize(cfg: Config) -> str:
    lines = []
    for sec, vals in to_mapping(cfg).items():
        lines.append(f"[{sec}]")
        lines.extend(f"{key} = {_fmt(val)}" for key, val in vals.items())
        lines.append("")
    return "\n".join(lines)
