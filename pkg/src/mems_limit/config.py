"""Run configuration: INI-style file with sections, strict keys.

See docs/config.md for the grammar. Every key has a default; which defaults
apply to ``eps``, ``lam`` and the grid depends on the experiment kind.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .beam import ModelParams
from .grids import ConfigurationError, IntervalGrid, RectGrid

EXPERIMENTS = ("prop2", "stationary", "evolve", "pullin")

# key -> section; the dataclass field name equals the key
SECTIONS = {
    "experiment": "run",
    "out_dir": "run",
    "threads": "run",
    "nx_nodes": "grid",
    "neta_nodes": "grid",
    "beta": "model",
    "tau": "model",
    "a": "model",
    "gamma": "model",
    "lam": "model",
    "eps": "sweep",
    "profile_amplitude": "sweep",
    "kappa": "sweep",
    "nu": "sweep",
    "sigmas": "sweep",
    "floor_factor": "sweep",
    "alpha_prime": "evolve",
    "T": "evolve",
    "dt": "evolve",
    "n_snapshots": "evolve",
    "u0_amplitude": "evolve",
    "kappa_stop": "evolve",
    "newton_tol": "solver",
    "pullin_tol": "solver",
    "lam_guess": "solver",
    "dense_scan": "solver",
}

PER_EXPERIMENT = {
    "prop2": dict(eps=(0.2, 0.1, 0.05, 0.025, 0.0125), lam=0.0, nx_nodes=257, neta_nodes=129),
    "stationary": dict(eps=(0.1, 0.05, 0.025), lam=0.05, nx_nodes=257, neta_nodes=129),
    "evolve": dict(eps=(0.1, 0.05, 0.025), lam=0.2, nx_nodes=65, neta_nodes=33),
    "pullin": dict(eps=(0.0,), lam=0.0, nx_nodes=129, neta_nodes=33),
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "prop2"
    out_dir: str = "out"
    threads: int = 1
    nx_nodes: int = 257
    neta_nodes: int = 129
    beta: float = 1.0
    tau: float = 0.0
    a: float = 0.0
    gamma: float = 0.0
    lam: float = 0.0
    eps: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025, 0.0125)
    profile_amplitude: float = 0.3
    kappa: float = 0.1
    nu: float = 0.3
    sigmas: tuple[float, ...] = (0.0, 0.25)
    floor_factor: float = 10.0
    alpha_prime: float = 0.1
    T: float = 1.0
    dt: float = 0.0
    n_snapshots: int = 11
    u0_amplitude: float = 0.1
    kappa_stop: float = 0.01
    newton_tol: float = 1e-10
    pullin_tol: float = 1e-3
    lam_guess: float = 10.0
    dense_scan: bool = True

    def __post_init__(self):
        validate(self)

    def params(self, eps: float = 0.0) -> ModelParams:
        return ModelParams(self.beta, self.tau, self.a, self.gamma, self.lam, eps)

    def interval_grid(self) -> IntervalGrid:
        return IntervalGrid(self.nx_nodes - 1)

    def rect_grid(self) -> RectGrid:
        return RectGrid.from_nodes(self.nx_nodes, self.neta_nodes)

    @property
    def n_eta(self) -> int:
        return self.neta_nodes - 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps)
        d["sigmas"] = list(self.sigmas)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("eps", "sigmas"):
            if key in data:
                data[key] = tuple(float(x) for x in data[key])
        return cls(**data)


def _require(cond, msg):
    if not cond:
        raise ConfigurationError(msg)


def validate(cfg: RunConfig):
    _require(cfg.experiment in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    _require(cfg.threads >= 1, f"threads must be >= 1, got {cfg.threads}")
    _require(cfg.nx_nodes >= 9, f"nx_nodes must be >= 9, got {cfg.nx_nodes}")
    _require(cfg.neta_nodes >= 5, f"neta_nodes must be >= 5, got {cfg.neta_nodes}")
    cfg.params()  # range checks on the model constants
    _require(len(cfg.eps) >= 1, "eps list must not be empty")
    _require(all(0 <= e < 1 for e in cfg.eps), f"eps values must lie in [0, 1), got {cfg.eps}")
    _require(all(a > b for a, b in zip(cfg.eps, cfg.eps[1:])), f"eps list must be strictly decreasing, got {cfg.eps}")
    _require(0 <= cfg.profile_amplitude < 1, f"profile_amplitude must lie in [0, 1), got {cfg.profile_amplitude}")
    _require(0 <= cfg.u0_amplitude < 1, f"u0_amplitude must lie in [0, 1), got {cfg.u0_amplitude}")
    _require(0 < cfg.kappa < 1, f"kappa must lie in (0, 1), got {cfg.kappa}")
    _require(0 < cfg.nu < 0.5, f"nu must lie in (0, 0.5), got {cfg.nu}")
    _require(all(0 <= s < 1 for s in cfg.sigmas), f"sigmas must lie in [0, 1), got {cfg.sigmas}")
    _require(cfg.floor_factor > 0, f"floor_factor must be > 0, got {cfg.floor_factor}")
    upper = 0.25 if cfg.gamma > 0 else 0.5
    _require(0 < cfg.alpha_prime < upper or (cfg.gamma == 0 and cfg.alpha_prime == 0.5),
             f"alpha_prime must lie in (0, {upper}) for gamma {'>' if cfg.gamma > 0 else '='} 0, got {cfg.alpha_prime}")
    _require(cfg.T > 0, f"T must be > 0, got {cfg.T}")
    _require(cfg.dt >= 0, f"dt must be >= 0 (0 selects the default), got {cfg.dt}")
    _require(cfg.n_snapshots >= 2, f"n_snapshots must be >= 2, got {cfg.n_snapshots}")
    _require(0 < cfg.kappa_stop < 1, f"kappa_stop must lie in (0, 1), got {cfg.kappa_stop}")
    for name in ("newton_tol", "pullin_tol", "lam_guess"):
        _require(getattr(cfg, name) > 0, f"{name} must be > 0, got {getattr(cfg, name)}")


def _convert(name: str, raw: str):
    ftype = {f.name: f.type for f in fields(RunConfig)}[name]
    raw = raw.strip()
    try:
        if ftype.startswith("tuple"):
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
    except ValueError:
        raise ConfigurationError(f"cannot parse {name} = {raw!r} as {ftype}") from None
    return raw


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config does not parse: {exc}") from None
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if SECTIONS.get(key) != section:
                where = f"[{SECTIONS[key]}]" if key in SECTIONS else "any section"
                raise ConfigurationError(f"unknown key {key!r} in [{section}] (expected in {where})")
            values[key] = _convert(key, raw)
    experiment = values.get("experiment", "prop2")
    if experiment not in PER_EXPERIMENT:
        raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    merged = dict(PER_EXPERIMENT[experiment])
    merged.update(values)
    return RunConfig(**merged)


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def config_to_text(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    by_section: dict[str, list[str]] = {}
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            txt = ", ".join(repr(float(x)) for x in val)
        elif isinstance(val, float):
            txt = repr(val)
        elif isinstance(val, bool):
            txt = "true" if val else "false"
        else:
            txt = str(val)
        by_section.setdefault(SECTIONS[f.name], []).append(f"{f.name} = {txt}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in by_section.items())


def default_config(experiment: str = "prop2") -> RunConfig:
    return parse_config_text(f"[run]\nexperiment = {experiment}\n")
