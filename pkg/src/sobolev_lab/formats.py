"""File formats: JSON-headed CSVs, field files, and report rendering.

Every writer emits a single JSON header line followed by plain CSV rows,
so files stay greppable and diff-friendly while carrying their own
metadata.  Floats are written with repr, which round-trips exactly and
keeps reruns byte-identical.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

import numpy as np

from .core import DomainSpec
from .elliptic import GriddedField
from .radial import RadialProfile, VolumeProfile

__all__ = [
    "FORMAT_VERSION",
    "canonical_json",
    "write_radial_profile",
    "write_volume_profile",
    "read_profile",
    "write_field",
    "read_field",
    "report_to_dict",
    "report_to_json",
    "report_to_table",
]

FORMAT_VERSION = 1


def canonical_json(obj: Any) -> str:
    """Deterministic single-line JSON: sorted keys, minimal separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _header(kind: str, fields: Mapping[str, Any],
            config: Mapping[str, Any] | None) -> str:
    head = {"format": f"sobolev-lab/{kind}", "version": FORMAT_VERSION}
    head.update(fields)
    if config is not None:
        head["config"] = dict(config)
    return canonical_json(head)


def write_radial_profile(path: str, prof: RadialProfile,
                         config: Mapping[str, Any] | None = None) -> None:
    """Profile CSV: JSON header line, then `r,phi` rows."""
    fields = {
        "kind": "radial",
        "n": prof.n,
        "p": prof.p,
        "Lambda": prof.Lambda,
        "cp_ball": prof.cp_ball,
        "normalization": float(prof.phi_samples[0]),
        "samples": int(prof.r.size),
    }
    lines = [_header("profile", fields, config), "r,phi"]
    lines += [f"{float(r)!r},{float(v)!r}"
              for r, v in zip(prof.r, prof.phi_samples)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_volume_profile(path: str, vp: VolumeProfile,
                         meta: Mapping[str, Any] | None = None,
                         config: Mapping[str, Any] | None = None) -> None:
    """Volume-profile CSV: JSON header line, then `s,value` rows.

    Step profiles write one row per cell (left breakpoint, value); the
    closing breakpoint is the total_volume header field.  Sampled
    profiles write their nodes one to one.
    """
    fields: dict[str, Any] = {
        "kind": "volume",
        "step": vp.step,
        "total_volume": vp.total_volume,
        "samples": int(vp.values.size),
    }
    if meta:
        fields.update(meta)
    s = vp.s[:-1] if vp.step else vp.s
    lines = [_header("profile", fields, config), "s,value"]
    lines += [f"{float(a)!r},{float(v)!r}" for a, v in zip(s, vp.values)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile(path: str) -> tuple[dict, np.ndarray, np.ndarray]:
    """Read a profile CSV back: (header, first column, second column).

    For step volume profiles the first column holds left breakpoints;
    rebuild the full breakpoint vector by appending total_volume.
    """
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        label = fh.readline().strip()
        if label not in ("r,phi", "s,value"):
            raise ValueError(f"unrecognized profile column row: {label!r}")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, body[:, 0], body[:, 1]


def read_volume_profile(path: str) -> tuple[dict, VolumeProfile]:
    """Reconstruct a VolumeProfile from a profile CSV written here."""
    header, s, v = read_profile(path)
    if header.get("kind") != "volume":
        raise ValueError("not a volume-profile file")
    if header["step"]:
        breaks = np.append(s, float(header["total_volume"]))
        return header, VolumeProfile(s=breaks, values=v, step=True)
    return header, VolumeProfile(s=s, values=v, step=False)


def write_field(path: str, field: GriddedField, p: float | None = None,
                cp: float | None = None,
                config: Mapping[str, Any] | None = None) -> None:
    """Field file: JSON header {nx, ny, h, origin, p, cp, domain} then
    row-major CSV of node values with NaN outside the mask."""
    fields: dict[str, Any] = {
        "nx": field.nx,
        "ny": field.ny,
        "h": field.h,
        "origin": [field.origin[0], field.origin[1]],
        "p": p,
        "cp": cp,
        "domain": None if field.spec is None else field.spec.to_json(),
    }
    grid = np.where(field.mask, field.values, np.nan)
    lines = [_header("field", fields, config)]
    lines += [",".join(f"{float(v)!r}" for v in row) for row in grid]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path: str) -> tuple[dict, GriddedField]:
    """Read a field file back into a GriddedField (mask from NaN)."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        grid = np.loadtxt(fh, delimiter=",", ndmin=2)
    ny, nx = int(header["ny"]), int(header["nx"])
    if grid.shape != (ny, nx):
        raise ValueError(f"field body is {grid.shape}, header says {(ny, nx)}")
    mask = ~np.isnan(grid)
    spec = None
    if header.get("domain"):
        spec = DomainSpec.from_json(header["domain"])
    field = GriddedField(nx=nx, ny=ny, h=float(header["h"]),
                         origin=(float(header["origin"][0]),
                                 float(header["origin"][1])),
                         mask=mask, values=np.where(mask, grid, 0.0),
                         spec=spec)
    return header, field


def report_to_dict(report) -> dict:
    """Flatten a ReverseHolderReport into JSON-ready primitives."""
    cr = report.crossing
    return {
        "format": "sobolev-lab/report",
        "version": FORMAT_VERSION,
        "domain": None if report.domain is None else dict(report.domain),
        "n": report.n,
        "p": report.p,
        "h": report.h,
        "cp": report.cp,
        "rho": report.rho,
        "omega_volume": report.omega_volume,
        "bstar_volume": report.bstar_volume,
        "equality_case": report.equality_case,
        "crossing": {
            "identical": cr.identical,
            "count": cr.crossing_count,
            "s1": cr.s1,
            "band": cr.band,
            "max_abs_difference": float(np.max(np.abs(cr.difference))),
        },
        "dominance_min": report.dominance_min,
        "tau_margin": report.tau_margin,
        "tau_dominance": report.tau_dominance,
        "rows": [
            {"q": r.q, "khat": r.khat, "K": r.K,
             "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin}
            for r in report.rows
        ],
        "passed": report.passed(),
    }


def report_to_json(report, config: Mapping[str, Any] | None = None) -> str:
    payload = report_to_dict(report)
    if config is not None:
        payload["config"] = dict(config)
    return canonical_json(payload)


def report_to_table(report) -> str:
    """Aligned-column text rendering of a verification report."""
    d = report_to_dict(report)
    cr = d["crossing"]
    if cr["identical"]:
        crossing_line = (f"identical within band {cr['band']:.3e} "
                         f"(max|phi*-u*| = {cr['max_abs_difference']:.3e})")
    else:
        crossing_line = (f"count={cr['count']}  s1={cr['s1']:.6f}  "
                         f"band={cr['band']:.3e}")
    if d["domain"] is None:
        label = "(unspecified)"
    else:
        label = DomainSpec.from_json(d["domain"]).describe()
    lines = [
        f"domain        {label}",
        f"exponents     n={d['n']}  p={d['p']:g}  h={d['h']:.8g}",
        f"C_p(Omega)    {d['cp']:.8f}",
        f"ball B*       rho={d['rho']:.6f}  |B*|={d['bstar_volume']:.6f}"
        f"  |Omega|={d['omega_volume']:.6f}",
        f"crossing      {crossing_line}",
        f"dominance     min I(s) = {d['dominance_min']:+.3e}"
        f"  (tau_I = {d['tau_dominance']:.3e})",
        f"equality      {'yes (ball)' if d['equality_case'] else 'no'}",
        "",
        f"{'q':>8}  {'khat':>12}  {'K':>12}  {'|u|_p':>12}  "
        f"{'K|u|_q':>12}  {'margin':>12}",
    ]
    for r in d["rows"]:
        lines.append(
            f"{r['q']:>8g}  {r['khat']:>12.8f}  {r['K']:>12.8f}  "
            f"{r['lhs']:>12.8f}  {r['rhs']:>12.8f}  {r['margin']:>+12.3e}"
        )
    lines.append("")
    lines.append(f"result        {'PASS' if d['passed'] else 'FAIL'}")
    return "\n".join(lines)
