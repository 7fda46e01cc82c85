"""Experiment configuration read from INI files.

Mesh sizes are relative to the domain side: ``fine_exponent = p`` gives
``2**p`` fine elements per side and ``coarse_exponents = q1, q2`` give
``2**q`` coarse elements per side.  Numbers may be written as ``2^-8`` or
``5/512``.
See ``configs/`` for complete examples.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    pass


_POW = re.compile(r"^\s*([-+]?\d+(?:\.\d*)?)\s*\^\s*([-+]?\d+)\s*$")


def parse_number(text: str) -> float:
    text = str(text).strip()
    m = _POW.match(text)
    if m:
        return float(m.group(1)) ** int(m.group(2))
    if "/" in text:
        num, den = text.split("/", 1)
        return parse_number(num) / parse_number(den)
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text: str, kind=float) -> list:
    if text is None or not str(text).strip():
        return []
    vals = [v for v in re.split(r"[,\s]+", str(text).strip()) if v]
    if kind is int:
        return [int(v) for v in vals]
    return [parse_number(v) for v in vals]


def parse_params(text: str) -> dict:
    """``alpha=2, k=24`` -> ``{"alpha": 2.0, "k": 24.0}``."""
    out = {}
    if not text or not text.strip():
        return out
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part.strip()!r}")
        k, v = part.split("=", 1)
        v = v.strip()
        try:
            out[k.strip()] = parse_number(v)
        except ConfigError:
            out[k.strip()] = v
    return out


@dataclass
class SpeciesConfig:
    kappa: str = "constant"
    kappa_params: dict = field(default_factory=dict)
    velocity: str = "zero"
    velocity_params: dict = field(default_factory=dict)
    modulation: str = "one"
    initial: str = "zero"
    initial_params: dict = field(default_factory=dict)
    boundary: float = 0.0


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)
    fine_exponent: int = 6
    coarse_exponents: list = field(default_factory=lambda: [3])
    levels: list = field(default_factory=lambda: [1])
    dt: float = 2.0**-8
    T: float = 2.0**-8
    mode: str = "refresh"
    backend: str = "auto"
    contour_nodes: int = 16
    reference_substeps: int = 1
    reaction: str = "allen_cahn"
    reaction_params: dict = field(default_factory=dict)
    species: list = field(default_factory=lambda: [SpeciesConfig()])
    output_dir: str = "out"
    table: str = "table.csv"
    snapshot_times: list = field(default_factory=list)
    vtk: bool = False
    cache_dir: str = ".edgems-cache"
    seed: int = 0
    prune_tol: float = 1e-12
    workers: int = 1
    source_path: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def n_fine(self) -> int:
        return 2**self.fine_exponent

    def n_coarse(self, q: int) -> int:
        return 2**q

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def validate(self):
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("domain bounds must satisfy x1 > x0 and y1 > y0")
        for q in self.coarse_exponents:
            if q < 1 or q >= self.fine_exponent:
                raise ConfigError(f"coarse exponent {q} must lie in [1, fine_exponent)")
            for lvl in self.levels:
                if lvl < 0 or lvl > self.fine_exponent - q:
                    raise ConfigError(f"level {lvl} needs at least 2^{lvl} fine cells per coarse edge (H=2^-{q})")
        if self.dt <= 0 or self.T < 0:
            raise ConfigError("dt must be positive and T non-negative")
        k = self.T / self.dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ConfigError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        for ts in self.snapshot_times:
            k = ts / self.dt
            if abs(k - round(k)) > 1e-9 * max(1.0, k) or ts > self.T + 1e-12 or ts < 0:
                raise ConfigError(f"snapshot time {ts} is not a step instant in [0, T]")
        if self.mode not in ("refresh", "frozen"):
            raise ConfigError("mode must be 'refresh' or 'frozen'")
        if self.backend not in ("auto", "pade", "contour"):
            raise ConfigError("backend must be auto, pade or contour")
        if len(self.species) not in (1, 2):
            raise ConfigError("one or two species are supported")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.source_path is not None:
            p = Path(self.source_path).parent / p
        return p

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source_path")
        return d

    def fine_subconfig(self) -> dict:
        """Everything the reference solution depends on."""
        d = self.to_dict()
        keep = ("bounds", "fine_exponent", "dt", "T", "reference_substeps", "reaction", "reaction_params",
                "species", "seed", "snapshot_times")
        sub = {k: d[k] for k in keep}
        for s in sub["species"]:
            if s["kappa"] == "raster":
                # hash the raster content, not its path
                path = self.resolve(s["kappa_params"]["path"])
                s["kappa_params"] = dict(s["kappa_params"], path=hashlib.sha256(path.read_bytes()).hexdigest())
        return sub

    def fine_hash(self) -> str:
        blob = json.dumps(self.fine_subconfig(), sort_keys=True, default=_jsonable).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def full_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=_jsonable).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def _value(text: str):
    """Number, list of numbers, or the raw string."""
    try:
        vals = parse_list(text)
    except ConfigError:
        return text.strip()
    return vals[0] if len(vals) == 1 else vals


def _species(sec) -> SpeciesConfig:
    kappa = sec.get("kappa", "constant").strip()
    kparams = parse_params(sec.get("kappa_params", ""))
    if kappa.startswith("raster:"):
        kparams["path"] = kappa.split(":", 1)[1].strip()
        kappa = "raster"
    return SpeciesConfig(
        kappa=kappa,
        kappa_params=kparams,
        velocity=sec.get("velocity", "zero").strip(),
        velocity_params=parse_params(sec.get("velocity_params", "")),
        modulation=sec.get("modulation", "one").strip(),
        initial=sec.get("initial", "zero").strip(),
        initial_params=parse_params(sec.get("initial_params", "")),
        boundary=parse_number(sec.get("boundary", "0")),
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path}")
    return config_from_parser(cp, str(path), overrides)


def loads_config(text: str, overrides: dict | None = None, source_path: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    return config_from_parser(cp, source_path, overrides)


def config_from_parser(cp: configparser.ConfigParser, source_path=None, overrides=None) -> ExperimentConfig:
    g = lambda s, k, d=None: cp.get(s, k, fallback=d)
    try:
        species_secs = [s for s in ("species1", "species2") if cp.has_section(s)]
        if not species_secs and cp.has_section("species"):
            species_secs = ["species"]
        species = [_species(cp[s]) for s in species_secs] or [SpeciesConfig()]
        kw = dict(
            name=g("experiment", "name", "experiment").strip(),
            bounds=tuple(parse_list(g("domain", "bounds", "0, 1, 0, 1"))),
            fine_exponent=int(g("domain", "fine_exponent", "6")),
            coarse_exponents=parse_list(g("domain", "coarse_exponents", "3"), int),
            levels=parse_list(g("domain", "levels", "1"), int),
            dt=parse_number(g("time", "dt", "2^-8")),
            T=parse_number(g("time", "T", "2^-8")),
            mode=g("time", "mode", "refresh").strip(),
            backend=g("time", "backend", "auto").strip(),
            contour_nodes=int(g("time", "contour_nodes", "16")),
            reference_substeps=int(g("time", "reference_substeps", "1")),
            reaction=g("reaction", "model", "allen_cahn").strip(),
            reaction_params={k: _value(v) for k, v in cp.items("reaction") if k != "model"}
            if cp.has_section("reaction") else {},
            species=species,
            output_dir=g("output", "directory", "out").strip(),
            table=g("output", "table", "table.csv").strip(),
            snapshot_times=parse_list(g("output", "snapshots", "")),
            vtk=cp.getboolean("output", "vtk", fallback=False),
            cache_dir=g("output", "cache", ".edgems-cache").strip(),
            seed=int(g("run", "seed", "0")),
            prune_tol=parse_number(g("run", "prune_tol", "1e-12")),
            workers=int(g("run", "workers", "1")),
            source_path=source_path,
        )
    except (configparser.Error, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if overrides:
        kw.update(overrides)
    if len(kw["bounds"]) != 4:
        raise ConfigError("bounds needs four numbers: x0, x1, y0, y1")
    return ExperimentConfig(**kw)
