"""Run configuration: one JSON document, every field optional.

Units: hbar = c = 1; masses are multiples of the electron mass.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Malformed or out-of-regime configuration."""


@dataclass(frozen=True)
class GridConfig:
    n_radial: int = 1
    n_angular: int = 8


@dataclass(frozen=True)
class SolverConfig:
    m: int = 8  # eigenpairs requested
    m_strict: int = 4  # leading pairs that must meet the residual tolerance
    tol: float = 1e-11
    cluster_tol: float | None = None  # default max(1e-10, 1e-3 g^2 delta)
    dense_threshold: int = 2500


@dataclass(frozen=True)
class OutputConfig:
    svg: bool = False
    stem: str = "scan"


@dataclass(frozen=True)
class ScanConfig:
    m_el: float = 1.0
    m_n: float = 1.0
    g: float = 0.01
    P3: float = 0.0
    Lambda: float = 1.0
    beta_c1: float = 4e-4
    sigma0: float | None = None  # default g^2 / beta_c1
    sigma: float | None = None  # single-point commands; default sigma0
    kappa: float = 0.5
    steps: int = 4
    eta: float | None = None  # default delta_lower_bound(p_c) * beta_c1
    p_c: float = 0.1
    n_max: int = 2
    n_int: int = 2
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def total_mass(self) -> float:
        return self.m_el + self.m_n

    @property
    def sigma_start(self) -> float:
        if self.sigma0 is not None:
            return self.sigma0
        return self.g * self.g / self.beta_c1

    @property
    def sigma_point(self) -> float:
        return self.sigma if self.sigma is not None else self.sigma_start

    def sigmas(self) -> list[float]:
        return [self.sigma_start * self.kappa**n for n in range(self.steps + 1)]

    def resolved_eta(self) -> float:
        if self.eta is not None:
            return self.eta
        from .fock import Masses
        from .feshbach import delta_lower_bound

        return delta_lower_bound(self.p_c, self.Lambda, Masses(self.m_el, self.m_n)) * self.beta_c1

    def nested(self) -> bool:
        """Dyadic kappa keeps successive grids nested."""
        k = math.log2(1.0 / self.kappa)
        return abs(k - round(k)) < 1e-12 and round(k) >= 1

    def validate(self) -> ScanConfig:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.m_el > 0 and self.m_n > 0, "masses must be positive")
        need(self.g >= 0, "g must be non-negative")
        need(self.Lambda > 0, "Lambda must be positive")
        need(0 <= self.p_c < self.total_mass, "need 0 <= p_c < M")
        need(abs(self.P3) < self.total_mass / 2, "|P3| must be below M/2")
        need(0 < self.kappa < 1, "kappa must lie in (0, 1)")
        need(self.steps >= 0, "steps must be non-negative")
        need(self.beta_c1 > 0, "beta_c1 must be positive")
        need(0 < self.sigma_start <= self.Lambda, "sigma0 must lie in (0, Lambda]")
        if self.sigma is not None:
            need(0 < self.sigma <= self.Lambda, "sigma must lie in (0, Lambda]")
        if self.eta is not None:
            need(0 < 4 * self.eta <= self.kappa, "need 0 < 4 eta <= kappa")
        need(self.n_max >= 1, "n_max must be at least 1")
        need(1 <= self.n_int <= 3, "n_int must be 1, 2 or 3")
        need(self.grid.n_radial >= 1, "grid.n_radial must be >= 1")
        t = math.isqrt(max(self.grid.n_angular // 2, 0))
        need(
            self.grid.n_angular in (8, 12) or (self.grid.n_angular == 2 * t * t and t >= 3),
            "grid.n_angular must be 8, 12 or 2 t^2 with t >= 3",
        )
        need(self.solver.m >= 4, "solver.m must be at least 4")
        need(1 <= self.solver.m_strict <= self.solver.m, "solver.m_strict must lie in [1, m]")
        need(self.solver.tol > 0, "solver.tol must be positive")
        return self

    def to_json(self) -> dict:
        return asdict(self)


_SECTIONS = {"grid": GridConfig, "solver": SolverConfig, "output": OutputConfig}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names - ({"masses"} if cls is ScanConfig else set())
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, val in data.items():
        if cls is ScanConfig and key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], val, key)
        elif key == "masses":
            if not isinstance(val, dict) or set(val) - {"m_el", "m_n"}:
                raise ConfigError("masses must be an object with m_el and/or m_n")
            kwargs.update(val)
        else:
            kwargs[key] = val
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> ScanConfig:
    cfg = _build(ScanConfig, data, "")
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            continue
        if val is not None and (isinstance(val, bool) or not isinstance(val, (int, float))):
            raise ConfigError(f"{f.name} must be a number")
        if f.name in ("steps", "n_max", "n_int") and not isinstance(val, int):
            raise ConfigError(f"{f.name} must be an integer")
    return cfg.validate()


def load_config(path: str | Path | None) -> ScanConfig:
    if path is None:
        return ScanConfig().validate()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)
