"""Benchmark driver: builds the refinement family, assembles the operator
pair, evaluates the requested preconditioners and emits condition-number
tables (CSV or markdown), mirroring the structure of the reference tables.

Also hosts ``calderon-bench verify``, a quick self-check of the library
invariants with one pass/fail line per property.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import boundary_operators as bops
from . import duals as duals_mod
from .geometry import make_geometry, total_length
from .gram import lumped_matrix, mass_matrix, scaled_basis
from .fespace import build_space, reference_basis
from .mesh import (corner_schedule, dump_mesh, initial_mesh, is_conforming,
                   neighbor_ratios, uniform_refine)
from .precond import (jacobi_precond, lumped_precond, mass_precond,
                      richardson_precond, richardson_weight)
from .quadrature import gauss_rule, pair_rule
from .spectral import kappa


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: str = "square"
    scale: float = 0.5
    ellipse_ratio: float = 2.0
    degree: int = 1
    levels: int = 4
    refine: str = "corner"            # corner | uniform
    panels_per_chart: int = 0         # 0 = geometry default
    marking_rounds: int = 4           # local rounds per level are this * k
    preconds: tuple = ("lumped", "mass")
    alpha: float = 0.05
    quad_n: int = 12
    inner_product: str = "exact"      # exact | mesh-averaged
    fmt: str = "csv"
    output: str = ""
    dump_matrices: str = ""
    omega_override: float = 0.0       # 0 = use the reference-element weight
    seed: int = 0

    # the operator order is pinned by the shipped kernel pair
    s_order = 0.5


@dataclass(frozen=True)
class ReportRow:
    level: int
    h_min: float
    h_max: float
    dofs: int
    kappas: dict


def _parse_precond_names(spec):
    names = tuple(x.strip() for x in spec.split(",") if x.strip())
    for name in names:
        base = name.split(":")[0]
        if base not in ("lumped", "mass", "jacobi", "richardson"):
            raise ValueError(f"unknown preconditioner {name!r}")
        if base == "richardson":
            int(name.split(":")[1])
    return names


def _build_precond(name, B, M, D, omega):
    if name == "lumped":
        return lumped_precond(B, D)
    if name == "mass":
        return mass_precond(B, M)
    if name == "jacobi":
        return jacobi_precond(B, M)
    k = int(name.split(":")[1])
    return richardson_precond(B, M, D, k, omega)


def level_mesh(cfg: ExperimentConfig, g, k):
    ppc = cfg.panels_per_chart or (2 if g.kind == "square" else 8)
    if cfg.refine == "corner":
        return corner_schedule(g, k, panels_per_chart=ppc,
                               rounds_per_level=cfg.marking_rounds)
    m = initial_mesh(g, ppc)
    for _ in range(k):
        m = uniform_refine(m)
    return m


def run_experiment(cfg: ExperimentConfig):
    """Evaluate every requested preconditioner on every refinement level."""
    g = make_geometry(cfg.geometry, cfg.scale, cfg.ellipse_ratio)
    names = cfg.preconds if isinstance(cfg.preconds, tuple) else _parse_precond_names(cfg.preconds)
    omega = cfg.omega_override or richardson_weight(1, cfg.degree)[2]
    rows = []
    for k in range(1, cfg.levels + 1):
        try:
            m = level_mesh(cfg, g, k)
            s = build_space(m, cfg.degree)
            A, B = bops.assemble_operator_pair(s, cfg.quad_n, cfg.alpha)
            M = mass_matrix(s, cfg.inner_product, n_quad=cfg.quad_n)
            D = lumped_matrix(s, cfg.inner_product, n_quad=cfg.quad_n)
            kappas = {}
            for name in names:
                G = _build_precond(name, B, M, D, omega)
                kappas[name] = kappa(G, A)
        except Exception as exc:
            raise RuntimeError(f"level {k}: {exc}") from exc
        rows.append(ReportRow(k, m.h_min, m.h_max, s.ndof, kappas))
        if cfg.dump_matrices:
            os.makedirs(cfg.dump_matrices, exist_ok=True)
            pre = f"{cfg.dump_matrices}/level{k}_"
            bops.write_dense_matrix(A, pre + "A.txt")
            bops.write_dense_matrix(B, pre + "B.txt")
            bops.write_dense_matrix(M, pre + "M.txt")
            bops.write_diagonal(D, pre + "D.txt")
            dump_mesh(m, pre + "mesh.txt")
    return rows


def emit_table(rows, fmt="csv", path=None, cfg: ExperimentConfig | None = None):
    """Render report rows; returns the text and optionally writes it."""
    names = list(rows[0].kappas) if rows else (
        list(cfg.preconds) if cfg and isinstance(cfg.preconds, tuple) else [])

    def sci(x):
        return f"{x:.3e}"

    if fmt == "csv":
        lines = ["level,h_min,h_max,dofs," + ",".join(names)]
        for r in rows:
            vals = [str(r.level), sci(r.h_min), sci(r.h_max), str(r.dofs)]
            vals += [sci(r.kappas[n]) for n in names]
            lines.append(",".join(vals))
        text = "\n".join(lines) + "\n"
    elif fmt == "md":
        header = []
        if cfg is not None:
            header = [
                f"Spectral condition numbers kappa_S(G A) on the {cfg.geometry} "
                f"(degree {cfg.degree}, s = {cfg.s_order}, alpha = {cfg.alpha}, "
                f"{cfg.inner_product} product, {cfg.refine} refinement).",
                "",
            ]
        cols = ["level", "h_min", "h_max", "dofs"] + names
        lines = header + [
            "| " + " | ".join(cols) + " |",
            "|" + "|".join("---" for _ in cols) + "|",
        ]
        for r in rows:
            vals = [str(r.level), sci(r.h_min), sci(r.h_max), str(r.dofs)]
            vals += [sci(r.kappas[n]) for n in names]
            lines.append("| " + " | ".join(vals) + " |")
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# configuration plumbing

_FIELD_TYPES = {
    "geometry": str, "scale": float, "ellipse_ratio": float, "degree": int,
    "levels": int, "refine": str, "panels_per_chart": int, "marking_rounds": int,
    "preconds": str, "alpha": float, "quad_n": int, "inner_product": str,
    "fmt": str, "output": str, "dump_matrices": str, "omega_override": float,
    "seed": int,
}


def read_config(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _FIELD_TYPES[key](val)
    return out


def config_from_args(args) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(read_config(args.config))
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "preconds" in values and isinstance(values["preconds"], str):
        values["preconds"] = _parse_precond_names(values["preconds"])
    return ExperimentConfig(**values)


def _add_run_flags(p):
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--geometry", choices=["square", "circle", "ellipse"], default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--ellipse-ratio", dest="ellipse_ratio", type=float, default=None)
    p.add_argument("--degree", type=int, choices=[1, 3], default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--refine", choices=["corner", "uniform"], default=None)
    p.add_argument("--panels-per-chart", dest="panels_per_chart", type=int, default=None)
    p.add_argument("--marking-rounds", dest="marking_rounds", type=int, default=None)
    p.add_argument("--precond", dest="preconds", default=None,
                   help="comma list: lumped,mass,richardson:2,jacobi")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--quad-n", dest="quad_n", type=int, default=None)
    p.add_argument("--inner-product", dest="inner_product",
                   choices=["exact", "mesh-averaged"], default=None)
    p.add_argument("--format", dest="fmt", choices=["csv", "md"], default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--dump-matrices", dest="dump_matrices", default=None)
    p.add_argument("--omega-override", dest="omega_override", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)


def cmd_run(args):
    cfg = config_from_args(args)
    rows = run_experiment(cfg)
    text = emit_table(rows, cfg.fmt, cfg.output or None, cfg)
    if not cfg.output:
        sys.stdout.write(text)
    else:
        print(f"wrote {cfg.output}")
    return 0


# ---------------------------------------------------------------------------
# verify: quick invariant suite


def _verify_checks():
    ge = make_geometry("ellipse", 0.5, 2.0)
    gs = make_geometry("square", 0.5)

    def geometry_lengths():
        ellipse_len = total_length(ge)
        return (abs(ellipse_len - 1.2110560275684594) < 1e-10
                and abs(total_length(gs) - 2.0) < 1e-12)

    def gauss_exactness():
        g = gauss_rule(16)
        return abs(np.dot(g.weights, g.nodes ** 15) - 1 / 16) < 1e-14

    def singular_rules():
        r = pair_rule("identical", 16)
        v1 = np.dot(r.weights, np.log(np.abs(r.tnodes - r.unodes)))
        ra = pair_rule("adjacent", 16)
        v2 = np.dot(ra.weights, np.log(np.abs(ra.tnodes - 1.0 - ra.unodes)))
        return (abs(v1 / -1.5 - 1) < 1e-10
                and abs(v2 / (2 * np.log(2) - 1.5) - 1) < 1e-9)

    def mesh_invariants():
        ok = True
        for g, k in ((gs, 3), (ge, 2)):
            m = corner_schedule(g, k)
            ok &= is_conforming(m)
            ok &= abs(m.total_length() / total_length(g) - 1) < 1e-12
            ok &= neighbor_ratios(m, normalized=True).max() <= 2 * (1 + 1e-9)
        return bool(ok)

    def lumping_identity():
        ok = True
        for ell in (1, 3):
            s = build_space(corner_schedule(ge, 1), ell)
            for kind in ("exact", "mesh-averaged"):
                M = mass_matrix(s, kind)
                D = lumped_matrix(s, kind)
                ok &= np.allclose(M.sum(1), D, rtol=1e-12, atol=0)
                ok &= abs(D.sum() / s.mesh.total_length() - 1) < 1e-12
        return bool(ok)

    def partition_of_unity():
        xs = np.linspace(0, 1, 101)
        return all(
            np.abs(reference_basis(ell, xs).sum(0) - 1).max() < 1e-12 for ell in (1, 3)
        )

    def richardson_weights():
        checks = [
            (richardson_weight(1, 1)[2], 1.5, 1e-12),
            (richardson_weight(2, 1)[2], 1.6, 1e-12),
            (richardson_weight(3, 1)[2], 5 / 3, 1e-12),
            (richardson_weight(2, 3)[2], 0.836, 1.1e-3),
        ]
        return all(abs(v - ref) <= tol * max(1, abs(ref)) for v, ref, tol in checks)

    def kappa_identities():
        s = build_space(initial_mesh(gs, 2), 1)
        A, B = bops.assemble_operator_pair(s)
        D = lumped_matrix(s)
        G = lumped_precond(B, D)
        k1 = kappa(G, A)
        k2 = kappa(A, G.matrix)          # kappa(AG) via the swapped pencil
        k3 = kappa(scaled_basis(B, D), scaled_basis(A, D))
        return abs(k1 / k2 - 1) < 1e-8 and abs(k1 / k3 - 1) < 1e-8

    def duals_quick():
        s = build_space(corner_schedule(gs, 1), 1)
        b = duals_mod.build_bubbles(s)
        d = duals_mod.build_dual_basis(s, b)
        bio = np.abs(d.pairing - np.diag(d.lumped)).max()
        return bio < 1e-10 and duals_mod.eval_dual_sum(d) < 1e-10

    return [
        ("geometry arc lengths", geometry_lengths),
        ("gauss rule exactness", gauss_exactness),
        ("singular pair rules", singular_rules),
        ("mesh tiling/conformity/K-mesh", mesh_invariants),
        ("lumping identity", lumping_identity),
        ("partition of unity", partition_of_unity),
        ("richardson reference weights", richardson_weights),
        ("kappa coincidence and scaling", kappa_identities),
        ("dual basis biorthogonality", duals_quick),
    ]


def cmd_verify(_args):
    failures = 0
    for name, check in _verify_checks():
        try:
            ok = check()
        except Exception as exc:  # noqa: BLE001 - report, do not crash the suite
            ok = False
            name = f"{name} ({exc})"
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += not ok
    return 1 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="calderon-bench",
        description="Opposite-order preconditioning benchmark on closed curves",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a benchmark experiment")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)
    p_ver = sub.add_parser("verify", help="run the invariant self-checks")
    p_ver.set_defaults(func=cmd_verify)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
