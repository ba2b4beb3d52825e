"""Exit intensities of the two interferometric setups and the mirrored-arm identity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .averaged import averaged_finite_n_value, sequence_amplitudes
from .errors import ParameterError, TooLargeForExactS
from .measurement import (SIGMA_X, DetectorParams, MeasurementAxis, ProtocolParams,
                          _require_finite_n, delta_r, initial_state, kraus_finite, kraus_pair,
                          rotation)
from .postselected import amplitude_finite_n
from .trajectories import ReadoutSequence, evolve, lab_kraus_stack

BRUTE_FORCE_S_MAX_N = 14
EXACT_S_MAX_N = 10_000


@dataclass(frozen=True)
class IntensityPair:
    i1: float
    i2: float
    i0: float

    @property
    def interference(self) -> float:
        """(I1 - I2)/I0, the real part of the interference term."""
        return (self.i1 - self.i2) / self.i0

    @property
    def transmitted(self) -> float:
        return (self.i1 + self.i2) / self.i0


def surviving_weight(pp: ProtocolParams, model: str = "complete", method: str = "auto") -> float:
    """S = sum over readouts with r_{N+1} = 0 of |<psi_0|M_N..M_1|psi_0>|^2.

    ``transfer`` uses the chain sum_r (M_r x conj M_r)(dR x conj dR).
    """
    n = _require_finite_n(pp)
    if n > EXACT_S_MAX_N:
        raise TooLargeForExactS(f"N={n} exceeds {EXACT_S_MAX_N} {pp.describe()}")
    if method == "auto":
        method = "bruteforce" if n <= BRUTE_FORCE_S_MAX_N else "transfer"
    if method == "bruteforce":
        return float(np.sum(np.abs(sequence_amplitudes(pp, model)) ** 2))
    if method != "transfer":
        raise ParameterError(f"unknown method {method!r}")
    dR = delta_r(pp)
    dR4 = np.kron(dR, dR.conj())
    T = sum(np.kron(M, M.conj()) for M in kraus_pair(pp, model)) @ dR4
    return float((dR4 @ np.linalg.matrix_power(T, n))[0, 0].real)


def _check_i0(i0: float) -> None:
    if not i0 > 0:
        raise ParameterError(f"input intensity must be positive, got {i0}")


def intensities_postselected(pp: ProtocolParams, i0: float = 1.0,
                             model: str = "complete") -> IntensityPair:
    """Setup with the measurements in one arm only; interference term sqrt(P) e^{i chi}."""
    _check_i0(i0)
    s = surviving_weight(pp, model)
    amp = amplitude_finite_n(pp, model).amplitude
    base = 0.5 + 0.5 * s
    return IntensityPair(0.5 * i0 * (base + amp.real), 0.5 * i0 * (base - amp.real), i0)


def intensities_averaged(pp: ProtocolParams, i0: float = 1.0,
                         model: str = "complete") -> IntensityPair:
    """Setup with shared detectors and a flipped lower arm; interference term sum amp^2."""
    _check_i0(i0)
    s = surviving_weight(pp, model)
    z = averaged_finite_n_value(pp, "transfer", model)
    return IntensityPair(0.5 * i0 * (s + z.real), 0.5 * i0 * (s - z.real), i0)


def kraus_mirrored(p: DetectorParams, r: int) -> np.ndarray:
    """Back-action in the lower arm: the adjoint of the upper-arm matrix."""
    return kraus_finite(p, r).conj().T


def flip_operator(theta: float) -> np.ndarray:
    """sigma_x in the frame of the first measurement axis, R^-1(n_0) sigma_x R(n_0)."""
    R = rotation(MeasurementAxis(theta, 0.0))
    return R.conj().T @ SIGMA_X @ R


def lower_arm_amplitude(pp: ProtocolParams, seq: ReadoutSequence, model: str = "scaled") -> complex:
    """<psi_0| F Mt_N..Mt_1 F |psi_0> with Mt_k = R_k^-1 sigma_x M^dag sigma_x R_k."""
    M0, M1 = kraus_pair(pp, model)
    mirrored = [SIGMA_X @ M.conj().T @ SIGMA_X for M in (M0, M1)]
    steps = lab_kraus_stack(pp.theta, pp.d, mirrored, seq.bits)
    F = flip_operator(pp.theta)
    psi0 = initial_state(pp.theta)
    v = F @ psi0
    for K in steps:
        v = K @ v
    return complex(np.vdot(psi0, F @ v))


def verify_arm_identity(pp: ProtocolParams, seq: ReadoutSequence, model: str = "scaled") -> float:
    """|lower-arm amplitude - conj(upper-arm amplitude)|."""
    upper = evolve(pp, seq, model)
    upper_amp = complex(np.vdot(initial_state(pp.theta), upper.states[-1]))
    return abs(lower_arm_amplitude(pp, seq, model) - upper_amp.conjugate())
