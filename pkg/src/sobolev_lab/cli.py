"""Command-line front end: compute, verify, sweep, and export.

Subcommands
    ball       C_p of the unit ball plus profile and constant tables
    domain     extremal of a planar domain on a masked grid
    verify     full reverse Holder verification report
    table      sweep over domains x p x q with per-row caching
    rearrange  decreasing rearrangement of a stored field file

Exit codes: 0 success, 2 usage or admissibility, 3 solver failure,
4 verification failure.  All commands are deterministic for fixed
flags; outputs embed the run configuration and a format version.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .chiti import khat, verify_reverse_holder
from .core import AdmissibilityError, DomainSpec, GridError, SolverError, VerificationError
from .elliptic import build_grid, minimize_quotient
from .formats import (FORMAT_VERSION, canonical_json, read_field,
                      report_to_json, report_to_table, write_field,
                      write_radial_profile, write_volume_profile)
from .radial import unit_ball_profile
from .rearrange import decreasing_rearrangement

CACHE_ENV = "SOBOLEV_LAB_CACHE"


def _fmt(x: float) -> str:
    return f"{x:g}"


def _spec_from_arg(text: str) -> DomainSpec:
    """Accept either a path to a spec JSON file or an inline JSON object."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return DomainSpec.from_json(stripped)
    with open(text, encoding="utf-8") as fh:
        return DomainSpec.from_json(fh.read())


def _spec_slug(spec: DomainSpec) -> str:
    parts = [spec.shape.replace("-", "")]
    for key in sorted(spec.params):
        val = spec.params[key]
        if isinstance(val, list):
            parts.append(f"{key}{len(val)}")
        else:
            parts.append(f"{key}{val:g}")
    if spec.scale != 1.0:
        parts.append(f"scale{spec.scale:g}")
    return "_".join(parts)


def _h_slug(h: float) -> str:
    inv = 1.0 / h
    if abs(inv - round(inv)) < 1e-9:
        return f"h{int(round(inv))}"
    return f"h{h:g}"


def _run_config(args: argparse.Namespace, command: str) -> dict:
    cfg = {"command": command, "format_version": FORMAT_VERSION}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "out", "tol_default") or val is None:
            continue
        cfg[key] = val
    return cfg


# ---------------------------------------------------------------- ball

def cmd_ball(args: argparse.Namespace) -> int:
    prof = unit_ball_profile(args.n, args.p, tol=args.tol,
                             allow_supercritical=args.experimental_supercritical)
    print(f"C_p(B) = {prof.cp_ball!r}   (n={args.n}, p={_fmt(args.p)})")
    print(f"Lambda  = {prof.Lambda!r}")
    print(f"phi(0)  = {float(prof.phi_samples[0])!r}")
    os.makedirs(args.out, exist_ok=True)
    cfg = _run_config(args, "ball")
    ppath = os.path.join(args.out, f"ball_n{args.n}_p{_fmt(args.p)}.profile.csv")
    write_radial_profile(ppath, prof, config=cfg)
    print(f"profile -> {ppath}")
    if args.q:
        kpath = os.path.join(args.out, f"khat_n{args.n}_p{_fmt(args.p)}.csv")
        lines = [canonical_json({"format": "sobolev-lab/khat",
                                 "version": FORMAT_VERSION, "config": cfg}),
                 "q,khat"]
        for q in sorted(set(args.q)):
            if q < args.p:
                raise AdmissibilityError(f"q = {_fmt(q)} is below p = {_fmt(args.p)}")
            lines.append(f"{q!r},{khat(args.n, args.p, q, tol=args.tol)!r}")
        with open(kpath, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"khat    -> {kpath}")
    return 0


# -------------------------------------------------------------- domain

def _solve_domain(spec: DomainSpec, p: float, h: float, tol: float,
                  max_iter: int, supercritical: bool):
    grid = build_grid(spec, h)
    return minimize_quotient(grid, p, tol=tol, max_iter=max_iter,
                             allow_supercritical=supercritical)


def cmd_domain(args: argparse.Namespace) -> int:
    spec = _spec_from_arg(args.spec)
    res = _solve_domain(spec, args.p, args.h, args.tol, args.max_iter,
                        args.experimental_supercritical)
    print(f"C_p(Omega) = {res.cp!r}   ({spec.describe()}, p={_fmt(args.p)}, "
          f"h={args.h:g})")
    print(f"iterations = {res.iterations}   residual = {res.residual:.3e}")
    os.makedirs(args.out, exist_ok=True)
    fpath = os.path.join(
        args.out, f"{_spec_slug(spec)}_p{_fmt(args.p)}_{_h_slug(args.h)}.field.csv")
    write_field(fpath, res.field, p=args.p, cp=res.cp,
                config=_run_config(args, "domain"))
    print(f"field -> {fpath}")
    return 0


# -------------------------------------------------------------- verify

def cmd_verify(args: argparse.Namespace) -> int:
    if not (1.0 <= args.p <= 2.0):
        raise AdmissibilityError(
            f"the reverse Holder theorem requires 1 <= p <= 2, got p = {_fmt(args.p)}")
    if not args.q:
        raise AdmissibilityError("verify needs at least one -q exponent")
    if min(args.q) < args.p:
        raise AdmissibilityError(
            f"every q must be >= p = {_fmt(args.p)}, got q = {_fmt(min(args.q))}")
    spec = _spec_from_arg(args.spec)
    res = _solve_domain(spec, args.p, args.h, args.tol, args.max_iter, False)
    report = verify_reverse_holder(res, args.q, band=args.band)
    cfg = _run_config(args, "verify")
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out,
                        f"report_{_spec_slug(spec)}_p{_fmt(args.p)}_{_h_slug(args.h)}")
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report, config=cfg) + "\n")
    table = report_to_table(report)
    with open(stem + ".txt", "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    print(report_to_json(report, config=cfg) if args.format == "json" else table)
    print(f"report -> {stem}.json, {stem}.txt")
    if not report.passed():
        print("verification failed: margins or crossing out of tolerance",
              file=sys.stderr)
        return 4
    return 0


# --------------------------------------------------------------- table

def _row_key(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()

def _cache_path(key: str) -> str | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    os.makedirs(root, exist_ok=True)
    return os.path.join(root, key + ".json")


def _table_group(task: dict) -> list[dict]:
    """Solve one (domain, p) pair and emit its q rows; errors become rows."""
    spec = DomainSpec.from_json(task["spec"])
    rows = []
    base = {"domain": task["label"], "p": task["p"], "h": task["h"]}
    try:
        res = _solve_domain(spec, task["p"], task["h"], task["tol"],
                            task["max_iter"], False)
        report = verify_reverse_holder(res, [q for q in task["qs"] if q >= task["p"]])
        by_q = {row.q: row for row in report.rows}
    except Exception as exc:  # per-row failure contract: record, continue
        for q in task["qs"]:
            rows.append({**base, "q": q, "error": f"{type(exc).__name__}: {exc}"})
        return rows
    for q in task["qs"]:
        if q < task["p"]:
            rows.append({**base, "q": q,
                         "error": f"q = {q:g} below p = {task['p']:g}"})
            continue
        row = by_q[q]
        rows.append({**base, "q": q, "cp": report.cp, "rho": report.rho,
                     "khat": row.khat, "K": row.K, "lhs": row.lhs,
                     "rhs": row.rhs, "margin": row.margin, "error": ""})
    return rows


TABLE_COLUMNS = ["domain", "p", "q", "h", "cp", "rho", "khat", "K",
                 "lhs", "rhs", "margin", "error"]


def _render_row(row: dict) -> str:
    out = []
    for col in TABLE_COLUMNS:
        val = row.get(col, "")
        if isinstance(val, float):
            out.append(repr(val))
        else:
            out.append(str(val))
    return ",".join(out)


def cmd_table(args: argparse.Namespace) -> int:
    specs = [_spec_from_arg(s) for s in args.spec]
    ps = sorted(set(args.p))
    qs = sorted(set(args.q))
    n_rows = len(specs) * len(ps) * len(qs)
    if n_rows > args.max_rows:
        raise AdmissibilityError(
            f"sweep of {n_rows} rows exceeds --max-rows {args.max_rows}")
    tasks = []
    for spec in specs:
        label = _spec_slug(spec)
        for p in ps:
            tasks.append({"spec": spec.to_json(), "label": label, "p": p,
                          "qs": qs, "h": args.h, "tol": args.tol,
                          "max_iter": args.max_iter})
    tasks.sort(key=lambda t: (t["label"], t["p"]))

    results: dict[int, list[dict]] = {}
    pending: list[tuple[int, dict]] = []
    for i, task in enumerate(tasks):
        key = _row_key({**task, "version": FORMAT_VERSION})
        cpath = _cache_path(key)
        if cpath and os.path.exists(cpath):
            with open(cpath, encoding="utf-8") as fh:
                results[i] = json.load(fh)
        else:
            pending.append((i, task))

    if pending:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                fresh = list(pool.map(_table_group, [t for _, t in pending]))
        else:
            fresh = [_table_group(t) for _, t in pending]
        for (i, task), rows in zip(pending, fresh):
            results[i] = rows
            cpath = _cache_path(_row_key({**task, "version": FORMAT_VERSION}))
            if cpath:
                with open(cpath, "w", encoding="utf-8") as fh:
                    json.dump(rows, fh, sort_keys=True)

    flat = [row for i in range(len(tasks)) for row in results[i]]
    flat.sort(key=lambda r: (r["domain"], r["p"], r["q"]))
    cfg = _run_config(args, "table")
    lines = [canonical_json({"format": "sobolev-lab/sweep",
                             "version": FORMAT_VERSION, "config": cfg}),
             ",".join(TABLE_COLUMNS)]
    lines += [_render_row(r) for r in flat]
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        tpath = os.path.join(args.out, "sweep.csv")
        with open(tpath, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"sweep -> {tpath}")
    else:
        sys.stdout.write(text)
    failures = sum(1 for r in flat if r.get("error"))
    if failures:
        print(f"warning: {failures} of {len(flat)} rows failed", file=sys.stderr)
    return 0


# ----------------------------------------------------------- rearrange

def cmd_rearrange(args: argparse.Namespace) -> int:
    header, fld = read_field(args.field)
    u_star = decreasing_rearrangement(fld)
    meta = {"n": 2, "p": header.get("p"), "cp": header.get("cp"),
            "source": os.path.basename(args.field)}
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.field))[0]
    if stem.endswith(".field"):
        stem = stem[: -len(".field")]
    opath = os.path.join(args.out, stem + ".ustar.csv")
    write_volume_profile(opath, u_star, meta=meta,
                         config=_run_config(args, "rearrange"))
    print(f"u* -> {opath}  (cells={u_star.values.size}, "
          f"|Omega|={u_star.total_volume!r})")
    return 0


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sobolev-lab",
        description="Extremal Sobolev functions, sharp constants, and "
                    "reverse Holder verification on balls and planar domains.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, with_grid=True):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--tol", type=float, default=None,
                        help="solver tolerance (module default if omitted)")
        if with_grid:
            sp.add_argument("--h", type=float, default=1.0 / 128,
                            help="grid spacing (default 1/128)")
            sp.add_argument("--max-iter", type=int, default=300)

    b = sub.add_parser("ball", help="unit-ball constant and extremal profile")
    b.add_argument("-n", type=int, required=True, help="dimension")
    b.add_argument("-p", type=float, required=True)
    b.add_argument("-q", type=float, action="append", default=[],
                   help="also tabulate khat(n,p,q); repeatable")
    b.add_argument("--experimental-supercritical", action="store_true")
    common(b, with_grid=False)
    b.set_defaults(func=cmd_ball, tol_default=1e-12)

    d = sub.add_parser("domain", help="extremal on a planar domain")
    d.add_argument("--spec", required=True,
                   help="domain spec: JSON file path or inline JSON")
    d.add_argument("-p", type=float, required=True)
    d.add_argument("--experimental-supercritical", action="store_true")
    common(d)
    d.set_defaults(func=cmd_domain, tol_default=1e-8)

    v = sub.add_parser("verify", help="reverse Holder verification report")
    v.add_argument("--spec", required=True)
    v.add_argument("-p", type=float, required=True)
    v.add_argument("-q", type=float, action="append", default=[],
                   help="target exponent, q >= p; repeatable")
    v.add_argument("--band", type=float, default=None,
                   help="crossing suppression band (default: auto)")
    v.add_argument("--format", choices=("table", "json"), default="table")
    common(v)
    v.set_defaults(func=cmd_verify, tol_default=1e-8)

    t = sub.add_parser("table", help="sweep domains x p x q to CSV")
    t.add_argument("--spec", action="append", required=True,
                   help="domain spec (repeatable)")
    t.add_argument("-p", type=float, action="append", required=True)
    t.add_argument("-q", type=float, action="append", required=True)
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--max-rows", type=int, default=1000)
    common(t)
    t.set_defaults(func=cmd_table, tol_default=1e-8)
    t.set_defaults(out=None)

    r = sub.add_parser("rearrange", help="decreasing rearrangement of a field file")
    r.add_argument("--field", required=True, help="field file to rearrange")
    common(r, with_grid=False)
    r.set_defaults(func=cmd_rearrange)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "tol", None) is None:
        args.tol = getattr(args, "tol_default", 1e-12)
    try:
        return args.func(args)
    except (AdmissibilityError, GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        if exc.trajectory:
            tail = ", ".join(f"{c:.8g}" for c in exc.trajectory[-5:])
            print(f"cp trajectory tail: {tail}", file=sys.stderr)
        return 3
    except VerificationError as exc:
        stage = getattr(exc, "stage", None)
        tag = f" [stage: {stage}]" if stage else ""
        print(f"verification error{tag}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
