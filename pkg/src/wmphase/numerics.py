"""Small dense complex linear algebra and root finding.

Everything here works on plain numpy arrays. ``mat_exp_4`` accepts a single
4x4 matrix or a stack of them with shape ``(..., 4, 4)`` so that grid scans
can exponentiate thousands of generators in one call.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import NoConvergence, NonFinite, NoSignChange

DEFAULT_EXPM_TOL = 1e-10
DEFAULT_ROOT_TOL = 1e-12


def wrap_phase(x):
    """Reduce angles to the principal interval (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y <= -np.pi, y + 2 * np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def principal_arg(z) -> float:
    """``arg z`` in (-pi, pi]."""
    a = math.atan2(z.imag, z.real)
    return math.pi if a == -math.pi else a


def mat_exp_4(G, tol: float = DEFAULT_EXPM_TOL) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    The squaring depth is the smallest ``s`` with ``||G||_1 / 2**s <= 0.5``;
    for a stack of matrices the largest depth in the stack is used for all of
    them. Series terms are summed until their magnitude drops below
    ``min(1e-18, 1e-8 * tol)`` relative to the partial sum.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    G = np.asarray(G, dtype=complex)
    if G.shape[-2:] != (4, 4):
        raise ValueError(f"expected (..., 4, 4), got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise NonFinite("matrix exponential of a non-finite matrix")

    norm = float(np.max(np.sum(np.abs(G), axis=-2))) if G.size else 0.0
    s = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    X = G / (2.0 ** s)

    eye = np.broadcast_to(np.eye(4, dtype=complex), G.shape)
    result = eye.copy()
    term = eye.copy()
    eps = min(1e-18, 1e-8 * tol)
    for k in range(1, 60):
        term = term @ X / k
        result = result + term
        if np.max(np.abs(term)) < eps:
            break
    for _ in range(s):
        result = result @ result
    return result


def solve_scalar_root(f: Callable[[float], float], lo: float, hi: float,
                      tol: float = DEFAULT_ROOT_TOL) -> float:
    """Root of ``f`` bracketed by ``[lo, hi]`` (Brent's method)."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if tol <= 0:
        raise ValueError("tol must be positive")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NoSignChange(f"f({lo})={flo:.3e} and f({hi})={fhi:.3e} have the same sign")
    return optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_complex_zero_2d(f: Callable[[float, float], complex], seed_point,
                          tol: float = 1e-10, max_iter: int = 200,
                          step: float = 1e-7) -> tuple[float, float]:
    """Zero of a complex function of two real variables.

    Damped Newton iteration on ``(Re f, Im f)`` with a forward-difference
    Jacobian. Each Newton step is halved until ``|f|`` decreases.
    """
    x = np.array(seed_point, dtype=float)
    fx = complex(f(x[0], x[1]))
    for _ in range(max_iter):
        if not (math.isfinite(fx.real) and math.isfinite(fx.imag)):
            break
        if abs(fx) <= tol:
            return float(x[0]), float(x[1])
        J = np.empty((2, 2))
        for j in range(2):
            h = step * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            df = (complex(f(xp[0], xp[1])) - fx) / h
            J[0, j], J[1, j] = df.real, df.imag
        try:
            dx = np.linalg.solve(J, [-fx.real, -fx.imag])
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-6:
            xn = x + lam * dx
            fn = complex(f(xn[0], xn[1]))
            if abs(fn) < abs(fx):
                break
            lam *= 0.5
        else:
            break
        x, fx = xn, fn
    if abs(fx) <= tol:
        return float(x[0]), float(x[1])
    raise NoConvergence(f"no zero found from seed {tuple(seed_point)} (|f|={abs(fx):.3e})")
