"""Ball extremals by shooting on the radial ODE y'' + (n-1)/r y' + y^(p-1) = 0.

The normalized extremal phi on the unit ball satisfies
Delta phi + Lambda phi^(p-1) = 0 with ||phi||_Lp = 1, and Lambda equals the
sharp constant C_p(B) under that normalization.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .core import AdmissibilityError, SolverError, admissible, unit_ball_volume

__all__ = [
    "RawShot",
    "RadialProfile",
    "VolumeProfile",
    "shoot",
    "normalize_to_unit_ball",
    "cp_unit_ball",
    "cp_ball",
    "unit_ball_profile",
    "volume_profile",
    "verify_integro_differential",
]

SERIES_RADIUS = 1e-6   # series start; avoids the (n-1)/r singularity at r = 0
ZERO_TOL = 1e-12       # bisection width for the first zero
DEFAULT_GRID = 2049    # stored profile samples
QUAD_GRID = 65537      # dense-output grid for normalization quadrature


def _check_exponents(n: int, p: float, allow_supercritical: bool):
    if not admissible(n, p):
        bound = "any p >= 1" if n == 2 else f"1 <= p < 2n/(n-2) = {2.0 * n / (n - 2.0):g}"
        raise AdmissibilityError(f"(n, p) = ({n}, {p}) is not admissible; need {bound}")
    if p > 2.0 and not allow_supercritical:
        raise AdmissibilityError(
            f"p = {p} > 2 is gated as experimental; pass allow_supercritical=True to lift"
        )


@dataclass(frozen=True, eq=False)
class RawShot:
    """Un-normalized shot: y(0) = 1, y'(0) = 0, first zero at R0.

    y is strictly decreasing on [0, R0]; `dense` evaluates y anywhere on
    that interval (series below SERIES_RADIUS, ODE dense output above).
    """

    n: int
    p: float
    R0: float
    r_samples: np.ndarray
    y_samples: np.ndarray
    dense: Callable[[np.ndarray], np.ndarray]
    dense_derivative: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Normalized unit-ball extremal phi(r) on [0, 1] with ||phi||_Lp = 1."""

    n: int
    p: float
    r: np.ndarray
    phi_samples: np.ndarray
    Lambda: float
    cp_ball: float
    phi: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class VolumeProfile:
    """Non-increasing profile over set volume s in [0, total_volume].

    Two sampling semantics share the type:

    * ``step=False``: point samples of a continuous profile, linear
      interpolation between them (radial rearrangements phi*).
    * ``step=True``: ``s`` holds len(values)+1 breakpoints and the profile
      is constant on each cell (discrete rearrangements u*).  Power
      integrals are then exact cell sums, which is the trapezoid rule on
      the step representation.
    """

    s: np.ndarray
    values: np.ndarray
    step: bool = False
    total_volume: float | None = None  # derived from s unless given

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "values", v)
        if self.total_volume is None:
            object.__setattr__(self, "total_volume", float(s[-1]) if s.size else 0.0)
        expected = s.size - 1 if self.step else s.size
        if v.size != expected or s.size < 2:
            raise ValueError("sample-count mismatch between s and values")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("s must increase strictly from 0")
        scale = float(np.max(np.abs(v))) if v.size else 0.0
        if np.any(np.diff(v) > 1e-10 * max(scale, 1.0)):
            raise ValueError("profile values must be non-increasing")
        if np.any(v < -1e-10 * max(scale, 1.0)):
            raise ValueError("profile values must be non-negative")

    def evaluate(self, s_query):
        """Profile value at s_query; step profiles use left-cell values."""
        sq = np.asarray(s_query, dtype=float)
        if self.step:
            idx = np.searchsorted(self.s, sq, side="right") - 1
            idx = np.clip(idx, 0, self.values.size - 1)
            return self.values[idx]
        return np.interp(sq, self.s, self.values)

    def power_integral(self, power: float = 1.0) -> float:
        """Integral of values**power over [0, total_volume]."""
        if self.step:
            return float(np.sum(np.diff(self.s) * self.values**power))
        return float(np.trapezoid(self.values**power, self.s))

    def cumulative_power(self, power: float = 1.0):
        """Nodes and cumulative integral of values**power, piecewise linear."""
        if self.step:
            cum = np.concatenate(([0.0], np.cumsum(np.diff(self.s) * self.values**power)))
            return self.s, cum
        cum = cumulative_trapezoid(self.values**power, self.s, initial=0.0)
        return self.s, cum

    def cumulative_at(self, s_query, power: float = 1.0):
        nodes, cum = self.cumulative_power(power)
        return np.interp(np.asarray(s_query, dtype=float), nodes, cum)


def shoot(n: int, p: float, tol: float = 1e-12, allow_supercritical: bool = False,
          r_max: float = 100.0) -> RawShot:
    """Integrate the radial ODE from a series start until y first hits zero.

    The zero R0 is bracketed by the final accepted step and polished by
    bisection on the dense output to ZERO_TOL.
    """
    _check_exponents(n, p, allow_supercritical)
    if not (0 < tol <= 1e-6):
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    eps = SERIES_RADIUS

    def rhs(r, y):
        # max(., 0) keeps fractional powers real if a trial step undershoots
        head = max(y[0], 0.0) ** (p - 1.0)
        return (y[1], -(n - 1.0) / r * y[1] - head)

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    y0 = (1.0 - eps**2 / (2.0 * n), -eps / n)
    sol = solve_ivp(rhs, (eps, r_max), y0, method="DOP853", rtol=tol,
                    atol=tol * 1e-2, dense_output=True, events=[hit_zero])
    if sol.t_events[0].size == 0:
        raise SolverError(f"no zero found on ({eps:g}, {r_max:g}) for (n, p) = ({n}, {p})")

    def y_of(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < eps
        out[small] = 1.0 - r[small] ** 2 / (2.0 * n)
        if np.any(~small):
            out[~small] = sol.sol(r[~small])[0]
        return out

    def dy_of(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < eps
        out[small] = -r[small] / n
        if np.any(~small):
            out[~small] = sol.sol(r[~small])[1]
        return out

    # bisection on the bracketing step
    lo = sol.t[-2] if sol.t.size >= 2 else eps
    hi = float(sol.t_events[0][0])
    if y_of(np.array([hi]))[0] > 0.0:
        hi = hi + max(1e-9 * hi, 1e-12)
    while hi - lo > ZERO_TOL:
        mid = 0.5 * (lo + hi)
        if y_of(np.array([mid]))[0] > 0.0:
            lo = mid
        else:
            hi = mid
    R0 = 0.5 * (lo + hi)

    r_grid = np.linspace(0.0, R0, DEFAULT_GRID)
    return RawShot(n=n, p=p, R0=R0, r_samples=r_grid, y_samples=y_of(r_grid),
                   dense=y_of, dense_derivative=dy_of)


def _norm_integral(shot: RawShot, power: float) -> float:
    """n * omega_n * int_0^R0 y^power r^(n-1) dr on the fine dense grid."""
    n = shot.n
    t = np.linspace(0.0, shot.R0, QUAD_GRID)
    y = np.clip(shot.dense(t), 0.0, None)
    return n * unit_ball_volume(n) * float(np.trapezoid(y**power * t ** (n - 1), t))


def normalize_to_unit_ball(shot: RawShot, radius: float = 1.0) -> RadialProfile:
    """Rescale a shot to the ball of the given radius and normalize ||phi||_Lp = 1.

    phi(r) = A y(R0 r / radius) with A = (1/I_radius)^(1/p), where
    I_radius = (radius/R0)^n * n omega_n int_0^R0 y^p t^(n-1) dt, and
    Lambda = (R0/radius)^2 A^(2-p).
    """
    if not (radius > 0):
        raise ValueError(f"radius must be positive, got {radius}")
    n, p, R0 = shot.n, shot.p, shot.R0
    I1 = _norm_integral(shot, p)
    I_r = (radius / R0) ** n * I1
    A = float(I_r ** (-1.0 / p))
    Lambda = float((R0 / radius) ** 2 * A ** (2.0 - p))

    def phi(r):
        r = np.asarray(r, dtype=float)
        return A * np.clip(shot.dense(r * (R0 / radius)), 0.0, None)

    r_grid = np.linspace(0.0, 1.0, DEFAULT_GRID) * radius
    return RadialProfile(n=n, p=p, r=r_grid, phi_samples=phi(r_grid),
                         Lambda=Lambda, cp_ball=Lambda, phi=phi)


@functools.lru_cache(maxsize=64)
def _cached_unit_profile(n: int, p: float, tol: float) -> RadialProfile:
    return normalize_to_unit_ball(shoot(n, p, tol=tol, allow_supercritical=True))


def unit_ball_profile(n: int, p: float, tol: float = 1e-12,
                      allow_supercritical: bool = False) -> RadialProfile:
    """Normalized unit-ball extremal; memoized on (n, p, tol)."""
    _check_exponents(n, p, allow_supercritical)
    return _cached_unit_profile(int(n), float(p), float(tol))


def cp_unit_ball(n: int, p: float, tol: float = 1e-12,
                 allow_supercritical: bool = False) -> float:
    """Sharp constant C_p of the unit ball in R^n."""
    return unit_ball_profile(n, p, tol, allow_supercritical).cp_ball


def cp_ball(n: int, p: float, radius: float = 1.0, tol: float = 1e-12,
            allow_supercritical: bool = False) -> float:
    """C_p of the radius-r ball, by forcing the shot's zero at r via rescaling."""
    _check_exponents(n, p, allow_supercritical)
    shot = shoot(n, p, tol=tol, allow_supercritical=True)
    return normalize_to_unit_ball(shot, radius=radius).Lambda


def volume_profile(profile: RadialProfile, radius: float = 1.0,
                   num: int = DEFAULT_GRID) -> VolumeProfile:
    """Rearrangement phi*(s) of the ball extremal, s = omega_n |x|^n.

    The radius-rho extremal is phi_rho(x) = rho^(-n/p) phi(x/rho); the
    profile lives on [0, omega_n rho^n] and keeps ||phi_rho||_Lp = 1.
    """
    if not (radius > 0):
        raise ValueError(f"radius must be positive, got {radius}")
    if num < 2:
        raise ValueError("need at least two samples")
    n, p = profile.n, profile.p
    omega = unit_ball_volume(n)
    total = omega * radius**n
    s = np.linspace(0.0, total, num)
    r = (s / omega) ** (1.0 / n) / radius
    vals = radius ** (-n / p) * np.clip(profile.phi(np.clip(r, 0.0, 1.0)), 0.0, None)
    vals[-1] = 0.0  # phi vanishes on the boundary by construction
    return VolumeProfile(s=s, values=vals, total_volume=total, step=False)


def verify_integro_differential(vp: VolumeProfile, cp: float, n: int, p: float,
                                s_min: float | None = None) -> float:
    """Residual of the profile identity

        (phi*)'(s) = -cp n^-2 omega_n^(-2/n) s^(-2+2/n) int_0^s (phi*)^(p-1) dt,

    max |LHS - RHS| over s >= s_min, with LHS by one-sided backward
    differences and RHS by cumulative trapezoid.  The default s_min is
    max(1% of the total volume, two grid cells) for n <= 2 and 10% for
    n >= 3: ball profiles behave like max - const*s^(2/n) near s = 0,
    so for n >= 3 the curvature blows up at the origin and first-order
    differences need a wider berth from the singular prefactor.
    """
    if vp.step:
        # operate on cell midpoints so backward differences are well defined
        s = 0.5 * (vp.s[:-1] + vp.s[1:])
        v = vp.values
    else:
        s, v = vp.s, vp.values
    if s_min is None:
        frac = 0.01 if n <= 2 else 0.10
        s_min = max(frac * vp.total_volume, 2.0 * float(np.max(np.diff(s))))
    if np.all(v == 0.0):
        return 0.0
    omega = unit_ball_volume(n)
    lhs = np.diff(v) / np.diff(s)
    cum = cumulative_trapezoid(v ** (p - 1.0), s, initial=0.0)
    mid = s[1:]
    rhs = -cp * n**-2.0 * omega ** (-2.0 / n) * mid ** (-2.0 + 2.0 / n) * cum[1:]
    keep = mid >= s_min
    if not np.any(keep):
        raise ValueError("s_min excludes every sample")
    return float(np.max(np.abs(lhs[keep] - rhs[keep])))
