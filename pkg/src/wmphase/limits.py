"""Asymptotic expansions (large A, large C), the exact C = 0 case, and the
finite-detector scaling study."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominator, ParameterError
from .measurement import DetectorParams, ProtocolParams, kraus_finite
from .numerics import principal_arg, wrap_phase
from .postselected import PhaseResult
from .trajectories import ReadoutSequence, Trajectory, evolve_with

PROTOCOLS = ("postselected", "averaged")
VARIANTS = ("corrected", "printed")


@dataclass(frozen=True)
class ExpansionResult:
    """Truncated series for the phase and for ln|amplitude|.

    For the postselected protocol ``phase_approx`` is chi and ``logmag_approx``
    is ln sqrt(P); for the averaged one they are chibar and -alpha.
    """

    phase_approx: float
    logmag_approx: float
    order: int


def _check_protocol(which: str, variant: str) -> None:
    if which not in PROTOCOLS:
        raise ParameterError(f"protocol must be one of {PROTOCOLS}, got {which!r}")
    if variant not in VARIANTS:
        raise ParameterError(f"variant must be one of {VARIANTS}, got {variant!r}")


def large_a_expansion(pp: ProtocolParams, which: str = "postselected",
                      variant: str = "corrected") -> ExpansionResult:
    """Expansion to O(A^-2) around the Berry phase pi d (cos theta - 1).

    The A^-2 phase term is -(pi^2 sin^2 t / 4A^2)[e^-2C sin(2A + 2 pi d cos t) + 2 pi d cos t].
    ``variant="printed"`` uses -2 pi d cos t inside the bracket instead, which
    leaves an O(A^-2) residual against the exact amplitude.
    """
    _check_protocol(which, variant)
    if pp.a == 0:
        raise ParameterError("the large-A expansion needs A != 0")
    c, a, d = pp.c, pp.a, pp.d
    ct, s2 = math.cos(pp.theta), math.sin(pp.theta) ** 2
    arg = 2 * a + 2 * math.pi * d * ct
    shift = 2 * math.pi * d * ct if variant == "corrected" else -2 * math.pi * d * ct
    phase = (math.pi * d * (ct - 1) + math.pi ** 2 * s2 / (2 * a)
             - math.pi ** 2 * s2 / (4 * a * a) * (math.exp(-2 * c) * math.sin(arg) + shift))
    log_p = -math.pi ** 2 * s2 / (2 * a * a) * (1 + 2 * c - math.exp(-2 * c) * math.cos(arg))
    # P and exp(-alpha) coincide at this order; ln sqrt(P) is half of it
    logmag = 0.5 * log_p if which == "postselected" else log_p
    return ExpansionResult(phase, logmag, 2)


def large_c_expansion(pp: ProtocolParams, which: str = "postselected",
                      variant: str = "corrected") -> ExpansionResult:
    """Expansion to O(C^-2) around the Pancharatnam phase pi d (cos theta - 1).

    In the averaged phase the C^-2 bracket is
    x + pi^2 sin^2 t (sin 4x - 4x) / 16x^2 with x = A + pi d cos t;
    ``variant="printed"`` subtracts that correction instead.
    """
    _check_protocol(which, variant)
    if pp.c <= 0:
        raise ParameterError("the large-C expansion needs C > 0")
    c, d = pp.c, pp.d
    ct, s2 = math.cos(pp.theta), math.sin(pp.theta) ** 2
    x = pp.a + math.pi * d * ct
    base_phase = math.pi * d * (ct - 1)
    log_p = -math.pi ** 2 * s2 / c * (1 - 1 / (2 * c))
    if which == "postselected":
        phase = base_phase + math.pi ** 2 * s2 / (2 * c * c) * x
        return ExpansionResult(phase, 0.5 * log_p, 2)

    if abs(x) < 1e-8:
        raise DegenerateDenominator(
            f"A + pi d cos(theta) = {x:.2e} in the averaged large-C correction {pp.describe()}")
    extra = math.pi ** 2 * s2 * (math.sin(4 * x) - 4 * x) / (16 * x * x)
    if variant == "printed":
        extra = -extra
    phase = base_phase + math.pi ** 2 * s2 / (2 * c * c) * (x + extra)
    sinc = math.sin(2 * x) / (2 * x)
    logmag = log_p + math.pi ** 4 * s2 * s2 / (2 * c * c) * sinc * sinc
    return ExpansionResult(phase, logmag, 2)


@dataclass(frozen=True)
class CZeroResult:
    amplitude: complex
    geometric: float
    dynamical: float

    def __iter__(self):
        return iter((self.amplitude, self.geometric, self.dynamical))


def c_zero_exact(a: float, theta: float, d: int) -> CZeroResult:
    """Exact N -> infinity amplitude at C = 0 and its geometric/dynamical split."""
    x = a + math.pi * d * math.cos(theta)
    s2 = math.sin(theta) ** 2
    zeta = math.sqrt(x * x + math.pi ** 2 * s2)
    Z = 1j * x
    if zeta < 1e-8:
        sinc, dyn_bracket = 1.0, 0.0
    else:
        sinc = math.sin(zeta) / zeta
        dyn_bracket = 1 - math.sin(2 * zeta) / (2 * zeta)
    amp = -np.exp(-1j * a) * (math.cos(zeta) + Z * sinc)
    dyn = -a * math.pi ** 2 * s2 / zeta ** 2 * dyn_bracket if zeta >= 1e-8 else 0.0
    geo = principal_arg(amp * np.exp(-1j * dyn))
    return CZeroResult(complex(amp), geo, wrap_phase(dyn))


@dataclass(frozen=True)
class ScalingStudy:
    """All-zeros run of finite detectors with g = C' n^-a, theta_D = pi/2 - A' n^-b.

    ``c`` and ``a`` are the induced C = C'^2/4 and A = -A'C'/2, which are the
    scaled-model parameters when a = b = 1/2.
    """

    trajectory: Trajectory
    result: PhaseResult
    detector: DetectorParams
    c: float
    a: float

    def __iter__(self):
        return iter((self.trajectory, self.result))


def scaling_study(a_exp: float, b_exp: float, c_prime: float, a_prime: float,
                  theta: float, d: int, n: int) -> ScalingStudy:
    if a_exp < 0 or b_exp < 0:
        raise ParameterError("scaling exponents must be >= 0")
    if n < 100:
        raise ParameterError(f"the scaling study needs n >= 100, got {n}")
    if d not in (1, -1):
        raise ParameterError(f"direction d must be +1 or -1, got {d}")
    if not 0 <= theta <= math.pi:
        raise ParameterError(f"theta must lie in [0, pi], got {theta}")
    det = DetectorParams(g=c_prime * n ** (-a_exp), theta_d=math.pi / 2 - a_prime * n ** (-b_exp))
    kraus = (kraus_finite(det, 0), kraus_finite(det, 1))
    traj = evolve_with(theta, d, kraus, ReadoutSequence.all_zeros(n))
    return ScalingStudy(traj, PhaseResult.from_amplitude(traj.amplitude), det,
                        c_prime ** 2 / 4, -a_prime * c_prime / 2)
