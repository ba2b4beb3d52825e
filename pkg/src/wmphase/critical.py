"""Critical points where the postselected or averaged amplitude vanishes.

The postselected line is solved analytically: on it A = -pi d cos(theta), Z is
real and tau = i b, and cosh tau + Z sinh(tau)/tau = 0 reduces to
sin b / b = 1/(pi sin theta) with cos b < 0 and C = sqrt(pi^2 sin^2 theta - b^2).
The averaged points are found by scanning |[exp G]_11| on a (C, theta) grid and
polishing local minima with Newton's method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .averaged import limit_amplitude
from .errors import NoConvergence, ParameterError
from .numerics import solve_complex_zero_2d, solve_scalar_root
from .postselected import _quantized, closed_form, critical_residual

log = logging.getLogger(__name__)

BRANCHES = ("postselected", "averaged_first", "averaged_second")
A0 = math.pi * math.sqrt(3) / 2
_POLISH_TOL = 1e-10
_SAME_POINT = 1e-6


@dataclass(frozen=True)
class CriticalPoint:
    c_crit: float
    a_crit: float
    theta_crit: float
    branch: str
    d: int = 1
    b: Optional[float] = None

    def row(self) -> dict:
        return dict(branch=self.branch, theta_crit=self.theta_crit,
                    a_crit=self.a_crit, c_crit=self.c_crit)


@lru_cache(maxsize=None)
def b_c() -> float:
    """Largest admissible b: the root of sin b / b = 1/pi on [pi/2, pi]."""
    return solve_scalar_root(lambda b: math.sin(b) / b - 1 / math.pi, math.pi / 2, math.pi)


def solve_b(theta: float) -> float:
    """Root of sin b / b = 1/(pi sin theta) on [pi/2, b_c]; needs sin theta >= 1/2."""
    s = math.sin(theta)
    target = 1 / (math.pi * s) if s > 0 else math.inf
    if target > 2 / math.pi + 1e-15:
        raise ParameterError(f"no critical b for theta={theta} (sin theta < 1/2)")
    target = min(target, 2 / math.pi)
    return solve_scalar_root(lambda b: math.sin(b) / b - target, math.pi / 2, b_c())


def postselected_point(theta: float, d: int = 1) -> CriticalPoint:
    """The postselected critical point whose theta_crit is ``theta``."""
    b = solve_b(theta)
    c = math.sqrt(max((math.pi * math.sin(theta)) ** 2 - b * b, 0.0))
    return CriticalPoint(c, -math.pi * d * math.cos(theta), theta, "postselected", d, b)


def postselected_point_at_a(a: float, d: int = 1) -> Optional[CriticalPoint]:
    """Critical point of the postselected amplitude at asymmetry ``a``, or None if |a| > A0."""
    if abs(a) > A0:
        return None
    theta = math.acos(max(-1.0, min(1.0, -a / (math.pi * d))))
    return postselected_point(theta, d)


def postselected_critical_line(d: int = 1, n_points: int = 200,
                               negative_a: bool = False) -> list[CriticalPoint]:
    """Sampled postselected critical line ordered by theta_crit.

    With ``negative_a=False`` only the A >= 0 half is returned: theta_crit in
    [pi/2, 5pi/6] for d=+1 and its mirror [pi/6, pi/2] for d=-1. The A < 0 half
    follows from amplitude(C, -A, theta, -d) = conj amplitude(C, A, theta, d).
    """
    if n_points < 2:
        raise ParameterError("n_points must be >= 2")
    if d not in (1, -1):
        raise ParameterError(f"direction d must be +1 or -1, got {d}")
    lo, hi = (math.pi / 6, 5 * math.pi / 6) if negative_a else (math.pi / 2, 5 * math.pi / 6)
    thetas = np.linspace(lo, hi, n_points)
    if d == -1:
        thetas = np.sort(math.pi - thetas)
    return [postselected_point(float(t), d) for t in thetas]


def verify_critical_point(p: CriticalPoint) -> float:
    """|cosh tau + Z sinh(tau)/tau| for postselected points, |[exp G]_11| for averaged ones."""
    if p.branch == "postselected":
        return critical_residual(p.c_crit, p.a_crit, p.theta_crit, p.d)
    return abs(limit_amplitude(p.c_crit, p.a_crit, p.theta_crit, p.d))


def _local_minima(mag: np.ndarray) -> list[tuple[int, int]]:
    """Grid cells not larger than any of their (up to 8) neighbours."""
    padded = np.pad(mag, 1, constant_values=np.inf)
    core = padded[1:-1, 1:-1]
    is_min = np.ones(mag.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            shifted = padded[1 + di: padded.shape[0] - 1 + di, 1 + dj: padded.shape[1] - 1 + dj]
            is_min &= core <= shifted
    return [tuple(ix) for ix in np.argwhere(is_min)]


@dataclass(frozen=True)
class ZeroScan:
    points: list
    failures: int
    seeds: int


def scan_zeros(batch: Callable, point: Callable, xs: np.ndarray, ys: np.ndarray,
               x_bounds: tuple, y_bounds: tuple, seed_cutoff: float = 0.25,
               max_seeds: int = 64, tol: float = _POLISH_TOL) -> ZeroScan:
    """Zeros of a complex function of two real variables inside a box.

    ``batch(X, Y)`` evaluates on meshgrid arrays, ``point(x, y)`` at one point.
    Grid local minima of |f| below ``seed_cutoff`` seed Newton polishing; the
    polished zeros outside the bounds or duplicated within 1e-6 are dropped.
    """
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    mag = np.abs(batch(X, Y))
    seeds = [(mag[i, j], xs[i], ys[j]) for i, j in _local_minima(mag) if mag[i, j] < seed_cutoff]
    seeds.sort()
    seeds = seeds[:max_seeds]
    found, failures = [], 0
    for _, x0, y0 in seeds:
        try:
            x, y = solve_complex_zero_2d(point, (x0, y0), tol=tol)
        except NoConvergence:
            failures += 1
            continue
        if not (x_bounds[0] - 1e-9 <= x <= x_bounds[1] + 1e-9 and y_bounds[0] <= y <= y_bounds[1]):
            continue
        if any(abs(x - u) < _SAME_POINT and abs(y - v) < _SAME_POINT for u, v in found):
            continue
        found.append((x, y))
    return ZeroScan(found, failures, len(seeds))


def _theta_grid(n_theta: int) -> np.ndarray:
    return np.linspace(0, math.pi, n_theta + 1)[1:-1]


def averaged_critical_points(a: float, d: int = 1, c_max: float = 8.0, c_step: float = 0.05,
                             n_theta: int = 256) -> list[CriticalPoint]:
    """All zeros of [exp G]_11 in (C, theta) at fixed A, sorted by theta_crit.

    Points with the smallest C are tagged ``averaged_first``, the others
    ``averaged_second``.
    """
    if d not in (1, -1):
        raise ParameterError(f"direction d must be +1 or -1, got {d}")
    cs = np.arange(0.0, c_max + 0.5 * c_step, c_step)
    scan = scan_zeros(lambda C, T: limit_amplitude(C, a, T, d),
                      lambda c, t: limit_amplitude(c, a, t, d) if c >= 0 and 0 <= t <= math.pi else 1.0,
                      cs, _theta_grid(n_theta), (0.0, c_max), (0.0, math.pi))
    if scan.failures:
        log.warning("averaged_critical_points(A=%g, d=%d): %d of %d seeds did not converge",
                    a, d, scan.failures, scan.seeds)
    if not scan.points:
        return []
    c_first = min(c for c, _ in scan.points)
    pts = [CriticalPoint(max(c, 0.0), a, t,
                         "averaged_first" if c - c_first < 1e-6 else "averaged_second", d)
           for c, t in scan.points]
    return sorted(pts, key=lambda p: p.theta_crit)


def averaged_threshold(lo: float = 3.3, hi: float = 3.8, tol: float = 1e-3, d: int = 1,
                       **scan_opts) -> float:
    """Largest A with averaged critical points, by bisection on their existence."""
    if not averaged_critical_points(lo, d, **scan_opts):
        raise ParameterError(f"no averaged critical points at the lower bracket A={lo}")
    if averaged_critical_points(hi, d, **scan_opts):
        raise ParameterError(f"averaged critical points still present at the upper bracket A={hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if averaged_critical_points(mid, d, **scan_opts):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def postselected_zero_scan(a: float, d: int = 1, c_max: float = 8.0, c_step: float = 0.05,
                           n_theta: int = 256) -> list[CriticalPoint]:
    """Numerical (C, theta) zero search of the postselected amplitude at fixed A.

    Used to confirm that the analytic line is the only critical set.
    """
    cs = np.arange(0.0, c_max + 0.5 * c_step, c_step)
    scan = scan_zeros(lambda C, T: closed_form(C, a, T, d),
                      lambda c, t: complex(closed_form(c, a, t, d))
                      if c >= 0 and 0 <= t <= math.pi else 1.0,
                      cs, _theta_grid(n_theta), (0.0, c_max), (0.0, math.pi))
    return sorted((CriticalPoint(max(c, 0.0), a, t, "postselected", d) for c, t in scan.points),
                  key=lambda p: p.theta_crit)


@dataclass(frozen=True)
class Singularity:
    c: float
    a: float
    probability: float
    grid_c: float
    grid_a: float


def postselected_singularity(theta: float, d: int = 1, c_range=(0.0, 4.0), a_range=(0.0, 4.0),
                             steps: int = 201) -> Singularity:
    """Minimum of P over a (C, A) grid at fixed theta, polished to a zero of the amplitude."""
    cs = np.linspace(*c_range, steps)
    as_ = np.linspace(*a_range, steps)
    C, A = np.meshgrid(cs, as_, indexing="ij")
    P = np.abs(closed_form(C, A, theta, d)) ** 2
    i, j = np.unravel_index(int(np.argmin(P)), P.shape)
    f = lambda c, a: complex(closed_form(c, a, theta, d))
    c, a = solve_complex_zero_2d(f, (cs[i], as_[j]), tol=1e-12)
    return Singularity(c, a, abs(f(c, a)) ** 2, float(cs[i]), float(as_[j]))


def loop_winding(f: Callable[[float, float], complex], center: tuple, radius: float,
                 n_points: int = 256) -> int:
    """Winding number of f along a counterclockwise circle in its two real arguments."""
    t = np.linspace(0, 2 * math.pi, n_points + 1)
    vals = np.array([f(center[0] + radius * math.cos(s), center[1] + radius * math.sin(s)) for s in t])
    steps = np.angle(vals[1:] / vals[:-1])
    if np.max(np.abs(steps)) > math.pi / 2:
        raise ParameterError("loop sampling too coarse to follow the phase")
    return _quantized(float(np.sum(steps)), 2 * math.pi)
