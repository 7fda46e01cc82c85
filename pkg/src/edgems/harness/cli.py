"""Command line interface: ``edgems {run,converge,reference,basis,selftest}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from ..grid import build_decomposition, build_grid
from ..msspace import build_multiscale_space
from ..pou import assemble_pou
from .config import ConfigError, load_config
from .metrics import full_field
from .output import atomic_write, csv_text, fmt, write_json, write_vtk
from .selftest import run_selftest
from .suite import build_setup, get_reference, run_cell, run_suite


def _pick(cfg, q, level):
    q = cfg.coarse_exponents[0] if q is None else q
    level = cfg.levels[0] if level is None else level
    return q, level


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    q, level = _pick(cfg, args.coarse, args.level)
    out = Path(args.out or cfg.output_dir)
    setup = build_setup(cfg)
    ref = None if args.no_reference else get_reference(cfg, setup)
    decomp = build_decomposition(build_grid(cfg.bounds, 2**q, 2**q), cfg.n_fine // 2**q)
    pous = [assemble_pou(decomp, setup.kappas[s], setup.operators[s].stiffness) for s in range(setup.n_species)]
    run = run_cell(cfg, setup, ref, decomp, pous, level, diagnostics=True)
    for s, c in enumerate(run.result):
        line = f"species {s + 1}: H=2^-{q} level={level} dim={c.dim}"
        if c.eps0 is not None:
            line += f" eps0={fmt(c.eps0)} eps1={fmt(c.eps1)}"
        print(line)
    tr = run.traces
    cols = ["t", "max"] + (["energy"] if "energy" in tr else [])
    rows = [[fmt(v) if k != "t" else f"{v:.10g}" for k, v in zip(cols, vals)] for vals in zip(*(tr[c] for c in cols))]
    atomic_write(out / f"{cfg.name}_H{q}_l{level}_diagnostics.csv", csv_text(cols, rows))
    if cfg.vtk:
        final = run.trajectory.final
        for s, sy in enumerate(run.systems):
            data = {"multiscale": full_field(setup.grid, sy.field(final.coeffs[s]), sy.lift)}
            if ref is not None:
                data["reference"] = full_field(setup.grid, ref.final[s], sy.lift)
            write_vtk(out / f"{cfg.name}_H{q}_l{level}_s{s + 1}_final.vtk", setup.grid, data)
    write_json(out / f"{cfg.name}_H{q}_l{level}_manifest.json",
               {"config_hash": cfg.full_hash(), "wall": run.wall, "dims": [c.dim for c in run.result]})
    print(f"wall {run.wall:.2f} s; diagnostics written to {out}")
    return 0


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    report = run_suite(cfg, out_dir=args.out, use_cache=not args.no_cache)
    print(report.to_csv(), end="")
    failed = [k for k, c in report.cells.items() if c.error]
    return 1 if failed else 0


def cmd_reference(args) -> int:
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    ref = get_reference(cfg, build_setup(cfg))
    state = "loaded from cache" if ref.cached else "computed"
    print(f"reference {cfg.fine_hash()} {state} in {time.perf_counter() - t0:.2f} s")
    return 0


def cmd_basis(args) -> int:
    cfg = load_config(args.config)
    q, level = _pick(cfg, args.coarse, args.level)
    setup = build_setup(cfg)
    decomp = build_decomposition(build_grid(cfg.bounds, 2**q, 2**q), cfg.n_fine // 2**q)
    if not 0 <= args.node < decomp.coarse.n_nodes:
        raise ConfigError(f"node {args.node} outside 0..{decomp.coarse.n_nodes - 1}")
    s = args.species - 1
    pou = assemble_pou(decomp, setup.kappas[s], setup.operators[s].stiffness)
    space = build_multiscale_space(decomp, setup.kappas[s], setup.velocities[s], level, pou, setup.operators[s],
                                   nodes=[args.node], prune=False)
    fields = {"chi": pou.function(args.node)}
    for k in range(space.dim):
        fields[f"basis_{k:03d}"] = full_field(setup.grid, space.basis[:, k].toarray().ravel())
    out = Path(args.out or cfg.output_dir) / f"{cfg.name}_basis_node{args.node}_H{q}_l{level}.vtk"
    write_vtk(out, setup.grid, fields, f"basis functions of coarse node {args.node}")
    print(f"{space.dim} basis functions written to {out}")
    return 0


def cmd_selftest(args) -> int:
    ok = True
    for name, passed, detail in run_selftest(seed=args.seed):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgems", description="Edge multiscale experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cell=True):
        sp.add_argument("config", help="INI experiment file")
        sp.add_argument("--out", help="output directory (default: [output] directory)")
        if cell:
            sp.add_argument("--coarse", type=int, help="coarse exponent q (H = 2^-q); default: first listed")
            sp.add_argument("--level", type=int, help="edge level; default: first listed")

    r = sub.add_parser("run", help="one (H, level) run with energy/max-norm diagnostics")
    common(r)
    r.add_argument("--no-reference", action="store_true", help="skip the reference and error computation")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("converge", help="error table over all H and levels")
    common(c, cell=False)
    c.add_argument("--workers", type=int, default=0)
    c.add_argument("--no-cache", action="store_true")
    c.set_defaults(func=cmd_converge)
    f = sub.add_parser("reference", help="compute and cache the reference solution")
    common(f, cell=False)
    f.set_defaults(func=cmd_reference)
    b = sub.add_parser("basis", help="export the basis functions of one coarse node as VTK")
    common(b)
    b.add_argument("--node", type=int, required=True)
    b.add_argument("--species", type=int, default=1)
    b.set_defaults(func=cmd_basis)
    s = sub.add_parser("selftest", help="quick property checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
