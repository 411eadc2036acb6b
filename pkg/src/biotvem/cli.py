"""Command line interface: ``biotvem run``, ``biotvem mesh gen-cube``, ``biotvem mesh check``."""

from __future__ import annotations

import argparse
import logging
import sys

from .exceptions import BiotVemError
from .harness import parse_config, run_study
from .mesh import check_regularity, export_mesh, generate_cube_mesh, import_mesh


def _cmd_run(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    if args.out:
        cfg.output_dir = args.out
    run_study(cfg)


def _cmd_gen_cube(args):
    mesh = generate_cube_mesh(args.n)
    with open(args.out, "w") as fh:
        export_mesh(mesh, fh)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_faces} faces, {mesh.n_cells} cells")


def _cmd_check(args):
    with open(args.path) as fh:
        mesh = import_mesh(fh)
    mesh.validate()
    rep = check_regularity(mesh)
    print(f"ok: {mesh.n_vertices} vertices, {mesh.n_edges} edges, {mesh.n_faces} faces, {mesh.n_cells} cells, "
          f"h = {mesh.h:.4g}")
    for w in rep.warnings():
        print(f"warning: {w}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="biotvem", description="VEM solver for coupled Stokes / Biot plate problems")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study from a key = value config file")
    run.add_argument("config")
    run.add_argument("--out", help="override output.dir")
    run.set_defaults(func=_cmd_run)

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("gen-cube", help="write an n x n x n hexahedral mesh of the unit cube")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen_cube)
    chk = msub.add_parser("check", help="validate a mesh file")
    chk.add_argument("path")
    chk.set_defaults(func=_cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except BiotVemError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
