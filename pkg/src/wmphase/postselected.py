"""Postselected all-zeros amplitude sqrt(P) exp(i chi) and its winding number."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NotQuantized, UndefinedAtCriticalPoint
from .measurement import ProtocolParams, delta_r, kraus_pair
from .numerics import principal_arg, wrap_phase

_TAU_SERIES = 1e-4


@dataclass(frozen=True)
class PhaseResult:
    amplitude: complex
    phase: float
    magnitude: float

    @classmethod
    def from_amplitude(cls, z) -> "PhaseResult":
        z = complex(z)
        return cls(z, principal_arg(z), abs(z))

    @property
    def probability(self) -> float:
        return self.magnitude ** 2


@dataclass(frozen=True)
class PhaseCurve:
    thetas: np.ndarray
    values: np.ndarray
    unwrapped_phase: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def rows(self) -> list[dict]:
        return [dict(theta=float(t), re=float(v.real), im=float(v.imag),
                     phase_unwrapped=float(p), magnitude=float(abs(v)))
                for t, v, p in zip(self.thetas, self.values, self.unwrapped_phase)]


def closed_form(c, a, theta, d, tau_sign: int = 1):
    """Vectorised N -> infinity amplitude.

    e^{i pi d (cos t - 1) - Z} (cosh tau + Z sinh(tau)/tau) with
    Z = C + iA + i pi d cos t and tau^2 = Z^2 - pi^2 sin^2 t, evaluated as
    (1/2)[e^{tau-Z}(1 + Z/tau) + e^{-tau-Z}(1 - Z/tau)] so that large C does
    not overflow. Small |tau| uses the even series instead.
    """
    c, a, theta = np.broadcast_arrays(np.asarray(c, float), np.asarray(a, float),
                                      np.asarray(theta, float))
    d = np.asarray(d)
    ct, st = np.cos(theta), np.sin(theta)
    Z = c + 1j * a + 1j * np.pi * d * ct
    tau = tau_sign * np.sqrt(Z * Z - (np.pi * st) ** 2 + 0j)
    small = np.abs(tau) < _TAU_SERIES
    safe_tau = np.where(small, 1.0, tau)
    with np.errstate(over="ignore", invalid="ignore"):
        big = 0.5 * (np.exp(safe_tau - Z) * (1 + Z / safe_tau)
                     + np.exp(-safe_tau - Z) * (1 - Z / safe_tau))
    t2 = tau * tau
    series = np.exp(-Z) * (1 + t2 / 2 + t2 * t2 / 24 + Z * (1 + t2 / 6 + t2 * t2 / 120))
    core = np.where(small, series, big)
    out = np.exp(1j * np.pi * d * (ct - 1)) * core
    return out if out.ndim else complex(out)


def critical_residual(c: float, a: float, theta: float, d: int) -> float:
    """|cosh tau + Z sinh(tau)/tau|, the factor whose zeros are critical points."""
    z = complex(closed_form(c, a, theta, d))
    Z = complex(c, a + math.pi * d * math.cos(theta))
    return abs(z) / abs(np.exp(-Z))


def amplitude_closed_form(pp: ProtocolParams) -> PhaseResult:
    return PhaseResult.from_amplitude(closed_form(pp.c, pp.a, pp.theta, pp.d))


def amplitude_finite_n(pp: ProtocolParams, model: str = "scaled") -> PhaseResult:
    """(1 0) dR (M0 dR)^N (1 0)^T for the N-measurement all-zeros sequence."""
    dR = delta_r(pp)
    M0, _ = kraus_pair(pp, model)
    step = M0 @ dR
    prod = dR @ np.linalg.matrix_power(step, int(pp.n))
    return PhaseResult.from_amplitude(prod[0, 0])


def symmetric_components(c: float, a: float, theta: float) -> dict:
    """Direction-symmetric and antisymmetric parts of chi and P."""
    zp = complex(closed_form(c, a, theta, 1))
    zm = complex(closed_form(c, a, theta, -1))
    chi_p, chi_m = principal_arg(zp), principal_arg(zm)
    Pp, Pm = abs(zp) ** 2, abs(zm) ** 2
    return dict(chi_s=chi_p + chi_m, chi_a=chi_p - chi_m,
                P_s=math.sqrt(Pp * Pm), P_a=math.sqrt(Pp / Pm) if Pm > 0 else math.inf)


def trace_phase(func: Callable[[float], complex], grid_hint: int = 64,
                lo: float = 0.0, hi: float = math.pi,
                max_step: float = math.pi / 2, mag_trigger: float = 1e-6,
                min_interval: float = 1e-9, mag_floor: float = 1e-12,
                max_nodes: int = 200_000) -> PhaseCurve:
    """Sample ``func`` on an adaptive grid and unwrap its argument.

    An interval is bisected when the principal phase step across it exceeds
    ``max_step``, when either end has magnitude below ``mag_trigger``, or when
    the complex values at its ends differ by more than half the smaller
    magnitude (which bounds the phase change between the nodes). Intervals
    that still fail the phase-step test at ``min_interval``, or whose ends
    have magnitude below ``mag_floor``, signal a zero of ``func`` on the path.
    """
    if grid_hint < 2:
        raise ValueError("grid_hint must be at least 2")
    thetas = list(np.linspace(lo, hi, grid_hint))
    values = [complex(func(t)) for t in thetas]

    pending = list(range(len(thetas) - 1))
    while pending:
        splits = set()
        for i in pending:
            t0, t1 = thetas[i], thetas[i + 1]
            v0, v1 = values[i], values[i + 1]
            m = min(abs(v0), abs(v1))
            step = abs(wrap_phase(principal_arg(v1) - principal_arg(v0))) if m > 0 else math.pi
            wants = step > max_step or m < mag_trigger or abs(v1 - v0) > 0.5 * m
            if not wants:
                continue
            if t1 - t0 <= min_interval:
                if step > max_step or m < mag_floor:
                    raise UndefinedAtCriticalPoint(
                        f"amplitude vanishes near theta={0.5 * (t0 + t1):.10f} (|f|={m:.2e})")
                continue
            splits.add(i)
        if not splits:
            break
        merged_t, merged_v, next_pending = [], [], []
        for i in range(len(thetas)):
            merged_t.append(thetas[i])
            merged_v.append(values[i])
            if i in splits:
                tm = 0.5 * (thetas[i] + thetas[i + 1])
                next_pending.extend([len(merged_t) - 1, len(merged_t)])
                merged_t.append(tm)
                merged_v.append(complex(func(tm)))
        thetas, values, pending = merged_t, merged_v, next_pending
        if len(thetas) > max_nodes:
            raise UndefinedAtCriticalPoint("adaptive phase grid exceeded its node budget")

    thetas = np.array(thetas)
    values = np.array(values)
    args = np.angle(values)
    steps = wrap_phase(np.diff(args))
    unwrapped = np.concatenate([[0.0], np.cumsum(steps)])
    return PhaseCurve(thetas, values, unwrapped)


def phase_curve(c: float, a: float, d: int, grid_hint: int = 64) -> PhaseCurve:
    """chi(theta) on [0, pi] along its continuous branch with chi(0) = 0."""
    if grid_hint < 16:
        raise ValueError("grid_hint must be >= 16")
    return trace_phase(lambda t: closed_form(c, a, t, d), grid_hint)


def _quantized(total: float, period: float) -> int:
    k = round(total / period)
    if abs(total / period - k) > 1e-3:
        raise NotQuantized(f"phase change {total:.6f} is not a multiple of {period:.6f}")
    return int(k)


def winding_number(curve: PhaseCurve) -> int:
    return _quantized(curve.unwrapped_phase[-1] - curve.unwrapped_phase[0], 2 * math.pi)


def winding_at(c: float, a: float, d: int = 1, grid_hint: int = 64) -> int:
    return winding_number(phase_curve(c, a, d, grid_hint))
