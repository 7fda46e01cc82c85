"""Experiment driver: fine setup, cached reference, multiscale sweeps and reports."""
from __future__ import annotations

import csv
import io
import logging
import platform
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from filelock import FileLock

from .. import __version__
from ..assembly import FineOperators, VelocityField
from ..grid import build_decomposition, build_grid
from ..integrate import (SpeciesSystem, backward_euler_reference, make_reaction, run_exponential)
from ..msspace import build_multiscale_space, project_initial
from ..pou import assemble_pou
from .config import ExperimentConfig
from .fields import initial_condition, make_kappa
from .metrics import EnergyFunctional, compute_errors, convergence_rate, full_field
from .output import atomic_write, csv_text, fmt, round4, unfmt, write_json, write_vtk

log = logging.getLogger(__name__)


@dataclass
class FineSetup:
    grid: object
    kappas: list
    velocities: list
    operators: list
    coords: tuple
    u0: list
    lifts: list
    reaction: object

    @property
    def free(self):
        return self.grid.free_nodes

    @property
    def n_species(self):
        return len(self.operators)

    def reduced(self, s: int):
        return self.operators[s].reduced()


def build_setup(cfg: ExperimentConfig) -> FineSetup:
    n = cfg.n_fine
    grid = build_grid(cfg.bounds, n, n)
    free = grid.free_nodes
    xy = grid.node_coords[free]
    coords = (xy[:, 0], xy[:, 1])
    kappas, vels, ops, u0, lifts = [], [], [], [], []
    for k, sc in enumerate(cfg.species):
        kappa = make_kappa(sc.kappa, sc.kappa_params, grid, seed=cfg.seed + k, resolve=cfg.resolve)
        vel = VelocityField(sc.velocity, dict(sc.velocity_params), sc.modulation)
        kappas.append(kappa)
        vels.append(vel)
        ops.append(FineOperators.build(grid, kappa, vel))
        u0.append(initial_condition(sc.initial, *coords, **sc.initial_params) - sc.boundary)
        lifts.append(sc.boundary)
    reaction = make_reaction(cfg.reaction, **dict(cfg.reaction_params)) if cfg.reaction != "none" else None
    return FineSetup(grid, kappas, vels, ops, coords, u0, lifts, reaction)


def _modulation(vel: VelocityField):
    if vel.is_zero:
        return 0.0
    return vel.g if vel.time_dependent else float(vel.g(0.0))


def snapshot_steps(cfg: ExperimentConfig) -> list[int]:
    return sorted({int(round(t / cfg.dt)) for t in cfg.snapshot_times})


# one lock per cache file inside this process; the file lock covers other processes
_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


@dataclass
class Reference:
    final: list
    snapshots: dict
    wall: float
    cached: bool


def compute_reference(cfg: ExperimentConfig, setup: FineSetup) -> Reference:
    t0 = time.perf_counter()
    M = setup.reduced(0)[0]
    stiff = [setup.reduced(s)[1] for s in range(setup.n_species)]
    conv = [setup.reduced(s)[2] for s in range(setup.n_species)]
    gs = [_modulation(v) for v in setup.velocities]
    steps = snapshot_steps(cfg)
    res = backward_euler_reference(M, stiff, conv, gs, setup.reaction, setup.u0, cfg.dt, cfg.T, setup.coords,
                                   lifts=setup.lifts, stride=0, substeps=cfg.reference_substeps, save_steps=steps)
    snaps = {}
    for t, f in zip(res.times, res.fields):
        k = int(round(t / cfg.dt))
        if k in steps:
            snaps[k] = f
    return Reference(res.final, snaps, time.perf_counter() - t0, False)


def get_reference(cfg: ExperimentConfig, setup: FineSetup, use_cache: bool = True) -> Reference:
    """Reference solution, computed once per fine sub-configuration and cached as ``.npz``."""
    if not use_cache:
        return compute_reference(cfg, setup)
    cache = Path(cfg.cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"reference-{cfg.fine_hash()}.npz"
    with _locks_guard:
        lock = _locks.setdefault(str(path), threading.Lock())
    with lock, FileLock(str(path) + ".lock"):
        if path.exists():
            data = np.load(path)
            S = int(data["n_species"])
            final = [data[f"final_{s}"] for s in range(S)]
            steps = [int(k) for k in data["steps"]]
            snaps = {k: [data[f"snap_{k}_{s}"] for s in range(S)] for k in steps}
            return Reference(final, snaps, float(data["wall"]), True)
        ref = compute_reference(cfg, setup)
        arrays = {f"final_{s}": f for s, f in enumerate(ref.final)}
        for k, fs in ref.snapshots.items():
            arrays.update({f"snap_{k}_{s}": f for s, f in enumerate(fs)})
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, n_species=len(ref.final), steps=np.array(sorted(ref.snapshots), dtype=int),
                 wall=ref.wall, **arrays)
        tmp.replace(path)
        return ref


@dataclass
class CellResult:
    eps0: float | None = None
    eps1: float | None = None
    dim: int | None = None
    error: str = ""


@dataclass
class ErrorReport:
    """Errors per ``(coarse exponent q, level, species)``; ``timings`` are not part of the table."""

    name: str
    coarse_exponents: list
    levels: list
    n_species: int
    cells: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict, compare=False)
    traces: dict = field(default_factory=dict, compare=False)

    def errors(self, level: int, species: int = 0, which: str = "eps0") -> list:
        return [getattr(self.cells.get((q, level, species), CellResult()), which) for q in self.coarse_exponents]

    def rates(self, level: int, species: int = 0, which: str = "eps0") -> list:
        errs = self.errors(level, species, which)
        return convergence_rate(errs) if len(errs) >= 2 else [None] * len(errs)

    def header(self) -> list[str]:
        h = ["species", "H"]
        for lvl in self.levels:
            h += [f"eps0_l{lvl}", f"CR0_l{lvl}", f"eps1_l{lvl}", f"CR1_l{lvl}", f"dim_l{lvl}", f"error_l{lvl}"]
        return h

    def rows(self) -> list[list[str]]:
        rows = []
        for s in range(self.n_species):
            rates = {(lvl, w): self.rates(lvl, s, w) for lvl in self.levels for w in ("eps0", "eps1")}
            for k, q in enumerate(self.coarse_exponents):
                row = [str(s + 1), f"2^-{q}"]
                for lvl in self.levels:
                    c = self.cells.get((q, lvl, s), CellResult(error="missing"))
                    row += [fmt(c.eps0), fmt(rates[(lvl, "eps0")][k]), fmt(c.eps1), fmt(rates[(lvl, "eps1")][k]),
                            "" if c.dim is None else str(c.dim), c.error]
                rows.append(row)
        return rows

    def to_csv(self) -> str:
        return csv_text(self.header(), self.rows())

    def rounded(self) -> "ErrorReport":
        cells = {k: CellResult(round4(c.eps0), round4(c.eps1), c.dim, c.error) for k, c in self.cells.items()}
        return ErrorReport(self.name, list(self.coarse_exponents), list(self.levels), self.n_species, cells)

    @classmethod
    def from_csv(cls, text: str, name: str = "experiment") -> "ErrorReport":
        rd = list(csv.reader(io.StringIO(text)))
        header, body = rd[0], rd[1:]
        levels = [int(h[len("eps0_l"):]) for h in header if h.startswith("eps0_l")]
        qs, cells, species = [], {}, set()
        for row in body:
            rec = dict(zip(header, row))
            s = int(rec["species"]) - 1
            q = int(rec["H"].split("^-")[1])
            species.add(s)
            if q not in qs:
                qs.append(q)
            for lvl in levels:
                if rec[f"error_l{lvl}"] == "missing":
                    continue
                dim = rec[f"dim_l{lvl}"]
                cells[(q, lvl, s)] = CellResult(unfmt(rec[f"eps0_l{lvl}"]), unfmt(rec[f"eps1_l{lvl}"]),
                                                int(dim) if dim else None, rec[f"error_l{lvl}"])
        return cls(name, qs, levels, len(species), cells)


@dataclass
class CellRun:
    result: list
    trajectory: object
    systems: list
    wall: float
    traces: dict = field(default_factory=dict)


def run_cell(cfg: ExperimentConfig, setup: FineSetup, reference: Reference | None, decomp, pous, level: int,
             diagnostics: bool = False, stride: int | None = None) -> CellRun:
    """Build the multiscale space(s) for one ``(H, level)`` and integrate."""
    t0 = time.perf_counter()
    systems, c0 = [], []
    dims = []
    for s in range(setup.n_species):
        space = build_multiscale_space(decomp, setup.kappas[s], setup.velocities[s], level, pous[s],
                                       setup.operators[s], prune_tol=cfg.prune_tol)
        systems.append(SpeciesSystem.from_space(space, setup.velocities[s], lift=setup.lifts[s]))
        c0.append(project_initial(space, setup.u0[s]))
        dims.append(space.dim)
    hooks, traces = [], {}
    steps = set(snapshot_steps(cfg))
    snaps = {}

    def capture(state, systems_):
        if state.n in steps:
            snaps[state.n] = [sy.field(c) for sy, c in zip(systems_, state.coeffs)]

    hooks.append(capture)
    if diagnostics:
        traces = {"t": [], "max": []}
        energy = None
        if cfg.reaction == "allen_cahn":
            energy = EnergyFunctional(setup.grid, float(cfg.reaction_params.get("eps", 0.1)))
            traces["energy"] = []

        def diag(state, systems_):
            u = systems_[0].field(state.coeffs[0])
            traces["t"].append(state.t)
            traces["max"].append(max(float(np.abs(u).max()), abs(systems_[0].lift)))
            if energy is not None:
                traces["energy"].append(energy(full_field(setup.grid, u, systems_[0].lift)))

        hooks.append(diag)
    traj = run_exponential(systems, setup.reaction, c0, cfg.dt, cfg.T, setup.coords, hooks=hooks,
                           stride=stride or max(cfg.n_steps, 1), mode=cfg.mode, backend=cfg.backend,
                           contour_nodes=cfg.contour_nodes)
    traj.snapshots = snaps
    results = []
    for s, sy in enumerate(systems):
        if reference is None:
            results.append(CellResult(dim=dims[s]))
            continue
        M, A, _ = setup.reduced(s)
        u_ms = sy.field(traj.final.coeffs[s]) - sy.lift
        u_ref = reference.final[s] - setup.lifts[s]
        e0, e1 = compute_errors(u_ref, u_ms, M, A)
        results.append(CellResult(e0, e1, dims[s]))
    return CellRun(results, traj, systems, time.perf_counter() - t0, traces)


def _versions() -> dict:
    return {"edgems": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_suite(cfg: ExperimentConfig, out_dir=None, use_cache: bool = True, write: bool = True,
              diagnostics: bool = False) -> ErrorReport:
    """All ``(H, level)`` cells of a configuration against one shared reference.

    A failing cell is recorded in the report and does not stop the others.
    With ``diagnostics`` the per-step max-norm (and energy, for Allen-Cahn)
    traces of every cell are kept in ``report.traces[(q, level)]``.
    """
    out = Path(out_dir or cfg.output_dir)
    t_start = time.perf_counter()
    setup = build_setup(cfg)
    ref = get_reference(cfg, setup, use_cache)
    report = ErrorReport(cfg.name, list(cfg.coarse_exponents), list(cfg.levels), setup.n_species)
    report.timings["reference"] = {"wall": ref.wall, "cached": ref.cached}

    prepared = {}
    for q in cfg.coarse_exponents:
        coarse = build_grid(cfg.bounds, 2**q, 2**q)
        decomp = build_decomposition(coarse, cfg.n_fine // 2**q)
        pous = [assemble_pou(decomp, setup.kappas[s], setup.operators[s].stiffness) for s in range(setup.n_species)]
        prepared[q] = (decomp, pous)

    def work(q, lvl):
        try:
            run = run_cell(cfg, setup, ref, *prepared[q], lvl, diagnostics=diagnostics)
        except Exception as exc:  # the cell is reported, the sweep goes on
            log.exception("cell H=2^-%d level=%d failed", q, lvl)
            return q, lvl, None, f"{type(exc).__name__}: {exc}"
        return q, lvl, run, ""

    tasks = [(q, lvl) for q in cfg.coarse_exponents for lvl in cfg.levels]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(lambda a: work(*a), tasks))
    else:
        done = [work(*a) for a in tasks]

    for q, lvl, run, err in done:
        if run is None:
            for s in range(setup.n_species):
                report.cells[(q, lvl, s)] = CellResult(error=err)
            continue
        for s, c in enumerate(run.result):
            report.cells[(q, lvl, s)] = c
        report.timings[f"H=2^-{q},l={lvl}"] = run.wall
        if diagnostics:
            report.traces[(q, lvl)] = run.traces
        if write and cfg.vtk:
            _write_cell_vtk(out, cfg, setup, ref, q, lvl, run)
    report.timings["total"] = time.perf_counter() - t_start
    if write:
        atomic_write(out / cfg.table, report.to_csv())
        write_json(out / "manifest.json", {
            "name": cfg.name, "config_hash": cfg.full_hash(), "fine_hash": cfg.fine_hash(),
            "versions": _versions(), "timings": report.timings, "config": cfg.to_dict(),
            "failed_cells": [f"H=2^-{q},l={lvl}: {e}" for q, lvl, r, e in done if r is None],
        })
    return report


def _write_cell_vtk(out: Path, cfg, setup, ref, q, lvl, run: CellRun):
    for k, fields in sorted(run.trajectory.snapshots.items()):
        for s, u in enumerate(fields):
            lift = setup.lifts[s]
            data = {"multiscale": full_field(setup.grid, u, lift)}
            if k in ref.snapshots:
                data["reference"] = full_field(setup.grid, ref.snapshots[k][s], lift)
                data["error"] = data["reference"] - data["multiscale"]
            write_vtk(out / "vtk" / f"{cfg.name}_H{q}_l{lvl}_s{s + 1}_n{k:05d}.vtk", setup.grid, data,
                      f"{cfg.name} H=2^-{q} l={lvl} species {s + 1} t={k * cfg.dt:.6g}")
