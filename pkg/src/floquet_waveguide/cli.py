"""Command line driver: ``floquet-waveguide --config run.yaml --subcommand verify``.

Every run writes ``<subcommand>.json`` (or ``.csv``) plus ``metadata.json``
into the output directory.  Outputs carry no timestamps so repeated runs
with one config are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .charvals import band_rectangle, count_by_contour, normalize_re, verify_disk_localization
from .config import RunConfig, load_config
from .cross_section import BCKind, BoundaryCondition
from .exceptions import FloquetError
from .halfguide import TraceOperatorSpec, assemble_F, dtn_matrix, monodromy
from .modes import check_estimates, evaluate_mode, flux, mode_to_dict, modes_from_chain, translation_matrix
from .problem import Analysis, analyze

__all__ = ["main", "run", "verify_suites", "sweep_point"]

SUBCOMMANDS = ("charvals", "modes", "verify", "dtn", "sweep")
FMT = "%.12e"


def _num(x: float) -> str:
    return FMT % x


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """Make numpy scalars and complex numbers JSON-ready."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def charval_rows(an: Analysis) -> list:
    return [
        {
            "re_xi": float(cv.xi.real),
            "im_xi": float(cv.xi.imag),
            "cluster_size": cv.cluster_size,
            "partial_null_multiplicities": list(cv.partial_null_multiplicities),
            "residual": float(cv.residual),
        }
        for cv, _ in an.charvals
    ]


# --- verify ---------------------------------------------------------------


def _multiset_match(a, b):
    """Largest periodic distance in a greedy nearest matching of two point sets (inf if sizes differ)."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        return math.inf
    worst = 0.0
    for z in a:
        d = [abs(normalize_re(z - w)) for w in b]
        j = int(np.argmin(d))
        worst = max(worst, d[j])
        b.pop(j)
    return worst


def _suite(name, fn):
    try:
        ok, detail = fn()
    except FloquetError as exc:
        ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    except ValueError as exc:
        ok, detail = None, {"skipped": str(exc)}
    return {"suite": name, "passed": ok, "detail": _clean(detail)}


def verify_suites(an: Analysis, spec: TraceOperatorSpec, seed: int = 0) -> list:
    """Run all consistency suites.  ``passed`` is None for suites that do not apply."""
    cell, cover, fam, tol = an.cell, an.cover, an.family, an.problem.tol
    out = []

    def rect_count():
        if cover is None:
            raise ValueError("no disk cover at this truncation")
        rect, expected, gap_ok = band_rectangle(cell, cover)
        if not gap_ok:
            raise ValueError("kappa gap condition fails; rectangle count not predicted")
        counts = []
        for mu in (0.0, 0.25, 0.5, 0.75, 1.0):
            c = count_by_contour(cell, rect, omega2=mu * cell.omega2, tol=tol)
            counts.append({"mu": mu, "count": c.count, "defect": c.defect})
        ok = all(c["count"] == expected and c["defect"] < 1e-3 for c in counts)
        return ok, {"expected": expected, "half_height": rect.im_max, "counts": counts}

    def localization():
        if cover is None:
            raise ValueError("no disk cover at this truncation")
        rep = verify_disk_localization(an.raws, cover, cell, tol=tol)
        margins = [m for _, m, req in rep.margins if req]
        return rep.ok, {
            "N": cover.N,
            "components": len(cover.components),
            "min_margin": min(margins) if margins else None,
            "counts": rep.counts,
        }

    def estimates():
        if cover is None:
            raise ValueError("no disk cover at this truncation")
        rep = check_estimates(fam, cover, count=5)
        if not rep.rows:
            raise ValueError("no evanescent mode inside the cover")
        return rep.ok(), {"modes_checked": len(rep.rows), "margin": rep.margin, "constants": rep.constants}

    def symmetry():
        bc = an.problem.bc
        if bc.kind is BCKind.QUASI_PERIODIC and not bc.symmetric_beta:
            raise ValueError("spectral symmetry needs beta in {0, pi}")
        h = 0.9 * an.problem.strip_height(cell)
        pts = [r.xi for r in an.raws if abs(r.xi.imag) < h]
        d1 = _multiset_match(pts, [-z.conjugate() for z in pts])
        d2 = _multiset_match(pts, [z.conjugate() for z in pts])
        scale = max(1.0, max(abs(z) for z in pts))
        return max(d1, d2) <= 1e-8 * scale, {"reflect": d1, "conjugate": d2, "points": len(pts)}

    def evenness():
        return fam.real_mode_count == 2 * fam.n_bar, {"real_modes": fam.real_mode_count, "n_bar": fam.n_bar}

    def q_gram():
        prop = fam.propagating
        if not prop:
            return True, {"propagating": 0}
        G = np.array([[flux(vb, va) for va in prop] for vb in prop])
        target = np.diag([1j] * len(fam.plus) + [-1j] * len(fam.minus))
        err = float(np.max(np.abs(G - target)))
        return err <= 1e-8, {"propagating": len(prop), "max_error": err}

    def jordan():
        blocks, worst = [], 0.0
        x1 = np.linspace(0.0, 1.0, 5)
        x2 = np.linspace(0.0, an.problem.L, 7)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        for cv, chains in an.charvals:
            if cv.algebraic_multiplicity < 2:
                continue
            ms = modes_from_chain(cv, chains, cell)
            T = translation_matrix(ms)
            for m in range(len(ms)):
                lhs = evaluate_mode(ms[m], X1 + 1.0, X2)
                rhs = sum(T.raw[j, m] * evaluate_mode(ms[j], X1, X2) for j in range(len(ms)))
                worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs)))))
            blocks.append({"xi": cv.xi, "eigenvalue": T.eigenvalue, "block_sizes": list(T.block_sizes),
                           "partial_null_multiplicities": list(cv.partial_null_multiplicities)})
        ok = worst <= 1e-8 and all(sorted(b["block_sizes"]) == sorted(b["partial_null_multiplicities"]) for b in blocks)
        return ok, {"blocks": blocks, "translation_error": worst}

    def mono():
        F = assemble_F(fam.family, spec)
        mf = monodromy(fam, spec, F, seed=seed)
        radius_ok = math.isnan(mf.expected_radius) or abs(mf.spectral_radius_evanescent - mf.expected_radius) <= 1e-6
        return mf.verification_error <= 1e-7 and radius_ok and mf.powers_ok, {
            "verification_error": mf.verification_error,
            "spectral_radius": mf.spectral_radius_evanescent,
            "expected_radius": mf.expected_radius,
            "powers_ok": mf.powers_ok,
            "jordan_blocks": [{"eigenvalue": lam, "size": r} for lam, r in mf.jordan_blocks],
        }

    def invertible():
        F = assemble_F(fam.family, spec)
        return True, {"sigma_min": F.sigma_min, "cond": F.cond}

    for name, fn in (
        ("rectangle_count", rect_count),
        ("localization", localization),
        ("estimates", estimates),
        ("symmetry", symmetry),
        ("evenness", evenness),
        ("q_gram", q_gram),
        ("jordan", jordan),
        ("monodromy", mono),
        ("trace_invertible", invertible),
    ):
        out.append(_suite(name, fn))
    return out


# --- sweep ----------------------------------------------------------------


def sweep_point(args) -> dict:
    """One band-diagram point; module level so that worker processes can pickle it."""
    problem, parameter, value = args
    if parameter == "omega2":
        problem = problem.with_omega2(value)
    else:
        problem = replace(problem, bc=BoundaryCondition.quasi_periodic(value))
    row = {"parameter": parameter, "value": value}
    try:
        an = analyze(problem, modes=False)
    except FloquetError as exc:
        return {**row, "error": f"{type(exc).__name__}: {exc}"}
    real = [cv for cv, _ in an.charvals if cv.is_real(problem.tol)]
    n_real = sum(cv.algebraic_multiplicity for cv in real)
    decaying = sorted(cv.xi.imag for cv, _ in an.charvals if cv.xi.imag > problem.tol.real)
    return {
        **row,
        "n_real": n_real,
        "n_bar": n_real // 2,
        "real_xi": sorted(float(cv.xi.real) for cv in real for _ in range(cv.algebraic_multiplicity)),
        "decay_rate": decaying[0] if decaying else None,
    }


def run_sweep(cfg: RunConfig, jobs: int = 1) -> list:
    if cfg.sweep is None:
        raise FloquetError("sweep subcommand needs physics.sweep in the config")
    tasks = [(cfg.problem, cfg.sweep.parameter, v) for v in cfg.sweep.values()]
    if jobs <= 1:
        return [sweep_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(sweep_point, tasks))


# --- driver ---------------------------------------------------------------


def _grid(cfg: RunConfig):
    (a1, b1, n1), (a2, b2, n2) = cfg.grid
    return np.meshgrid(np.linspace(a1, b1, n1), np.linspace(a2, b2, n2), indexing="ij")


def run(cfg: RunConfig, subcommand: str, out_dir, jobs: int = 1, seed: int = 0) -> int:
    """Execute one subcommand and write its artifacts.  Returns the exit status."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    files = {}
    fmt = cfg.out_format

    if subcommand == "sweep":
        rows = run_sweep(cfg, jobs)
        if fmt == "csv":
            files["sweep.csv"] = _csv_text(
                ["parameter", "value", "n_real", "n_bar", "decay_rate", "real_xi"],
                [
                    [r["parameter"], float(r["value"]), r.get("n_real", ""), r.get("n_bar", ""),
                     float(r["decay_rate"]) if r.get("decay_rate") is not None else "",
                     " ".join(_num(x) for x in r.get("real_xi", []))]
                    for r in rows
                ],
            )
        else:
            files["sweep.json"] = _json_text(_clean(rows))
    else:
        an = analyze(cfg.problem, modes=subcommand != "charvals", n_family=cfg.N_tr if subcommand != "charvals" else None)
        if subcommand == "charvals":
            rows = charval_rows(an)
            if fmt == "csv":
                files["charvals.csv"] = _csv_text(
                    ["re_xi", "im_xi", "cluster_size", "partial_null_multiplicities", "residual"],
                    [[r["re_xi"], r["im_xi"], r["cluster_size"], " ".join(map(str, r["partial_null_multiplicities"])),
                      r["residual"]] for r in rows],
                )
            else:
                files["charvals.json"] = _json_text(rows)
        elif subcommand == "modes":
            fam = an.family
            files["modes.json"] = _json_text(_clean({"n_bar": fam.n_bar, "modes": [mode_to_dict(v) for v in fam.family]}))
            X1, X2 = _grid(cfg)
            header = ["x1", "x2"]
            cols = [X1.ravel(), X2.ravel()]
            for i, v in enumerate(fam.family):
                val = evaluate_mode(v, X1, X2).ravel()
                header += [f"re_v{i + 1}", f"im_v{i + 1}"]
                cols += [val.real, val.imag]
            files["fields.csv"] = _csv_text(header, [[float(c[k]) for c in cols] for k in range(X1.size)])
        elif subcommand == "verify":
            suites = verify_suites(an, cfg.trace, seed)
            status = 1 if any(s["passed"] is False for s in suites) else 0
            files["verify.json"] = _json_text({"passed": status == 0, "suites": suites})
        elif subcommand == "dtn":
            D = dtn_matrix(an.family)
            if fmt == "csv":
                rows = [[i, j, float(D[i, j].real), float(D[i, j].imag)] for i in range(D.shape[0]) for j in range(D.shape[1])]
                files["dtn.csv"] = _csv_text(["row", "col", "re", "im"], rows)
            else:
                files["dtn.json"] = _json_text({"re": D.real.tolist(), "im": D.imag.tolist()})
        else:
            raise FloquetError(f"unknown subcommand {subcommand!r}")

    files["metadata.json"] = _json_text(
        {
            "version": __version__,
            "subcommand": subcommand,
            "config_sha256": cfg.config_hash,
            "tolerances": cfg.tolerances.as_dict(),
            "seed": seed,
            "exit_status": status,
            "outputs": sorted(files),
        }
    )
    for name, text in files.items():
        (out_dir / name).write_text(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floquet-waveguide", description="Floquet modes of semi-infinite periodic waveguides")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--subcommand", choices=SUBCOMMANDS, default="charvals")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        status = run(cfg, args.subcommand, args.out, jobs=max(1, args.jobs), seed=args.seed)
    except FloquetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.subcommand == "verify":
        report = json.loads((Path(args.out) / "verify.json").read_text())
        for s in report["suites"]:
            tag = {True: "PASS", False: "FAIL", None: "SKIP"}[s["passed"]]
            print(f"{tag:4s}  {s['suite']}")
    return status
