"""Readout-averaged phase factor exp(2i chibar - alpha) via the 4x4 transfer matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooLargeForBruteForce, UndefinedPhase
from .measurement import ProtocolParams, delta_r, kraus_pair
from .numerics import mat_exp_4, principal_arg
from .postselected import PhaseCurve, _quantized, trace_phase

BRUTE_FORCE_MAX_N = 20
_UNDEFINED_BELOW = 1e-14


@dataclass(frozen=True)
class AveragedResult:
    amplitude: complex
    chi_bar: float
    alpha: float

    @classmethod
    def from_amplitude(cls, z) -> "AveragedResult":
        z = complex(z)
        mag = abs(z)
        if mag < _UNDEFINED_BELOW:
            raise UndefinedPhase(f"|exp(2i chibar - alpha)| = {mag:.2e}: dephasing diverges")
        chi = 0.5 * principal_arg(z)
        # principal_arg is in (-pi, pi], so chi is already in (-pi/2, pi/2]
        return cls(z, chi, -math.log(mag))


def generator_batch(c, a, theta, d) -> np.ndarray:
    """Generator G of the large-N transfer matrix, M = I + G/N + O(1/N^2).

    Broadcasts over its arguments and returns shape ``(..., 4, 4)``.
    """
    c, a, theta, d = np.broadcast_arrays(np.asarray(c, float), np.asarray(a, float),
                                         np.asarray(theta, float), np.asarray(d, float))
    G = np.zeros(c.shape + (4, 4), dtype=complex)
    off = -1j * np.pi * d * np.sin(theta)
    diag_mid = -2 * (c + 1j * a)
    G[..., 0, 0] = 2j * np.pi * d * np.cos(theta)
    G[..., 1, 1] = diag_mid
    G[..., 2, 2] = diag_mid
    G[..., 3, 3] = -2j * np.pi * d * np.cos(theta) - 4j * a
    for i, j in ((0, 1), (0, 2), (1, 3), (2, 3)):
        G[..., i, j] = off
        G[..., j, i] = off
    return G


def generator(pp: ProtocolParams) -> np.ndarray:
    return generator_batch(pp.c, pp.a, pp.theta, pp.d)


def limit_amplitude(c, a, theta, d):
    """[exp G]_11 without any checks; vectorised."""
    out = mat_exp_4(generator_batch(c, a, theta, d))[..., 0, 0]
    return out if out.ndim else complex(out)


def averaged_amplitude(pp: ProtocolParams) -> AveragedResult:
    return AveragedResult.from_amplitude(limit_amplitude(pp.c, pp.a, pp.theta, pp.d))


def transfer_matrix(pp: ProtocolParams, model: str = "scaled") -> np.ndarray:
    """sum_r (M_r x M_r)(dR x dR) at finite N."""
    dR = delta_r(pp)
    dR4 = np.kron(dR, dR)
    return sum(np.kron(M, M) for M in kraus_pair(pp, model)) @ dR4


def _transfer_value(pp: ProtocolParams, model: str) -> complex:
    dR = delta_r(pp)
    dR4 = np.kron(dR, dR)
    T = transfer_matrix(pp, model)
    return complex((dR4 @ np.linalg.matrix_power(T, int(pp.n)))[0, 0])


def sequence_amplitudes(pp: ProtocolParams, model: str = "scaled") -> np.ndarray:
    """<psi0|M_N..M_1|psi0> for all 2^N readout sequences.

    Entry ``j`` corresponds to the readouts given by the bits of ``j``, with
    r_1 as the most significant bit.
    """
    n = int(pp.n)
    if n > BRUTE_FORCE_MAX_N:
        raise TooLargeForBruteForce(f"2^{n} sequences is too many {pp.describe()}")
    dR = delta_r(pp)
    M0, M1 = kraus_pair(pp, model)
    steps = (dR @ M0, dR @ M1)
    vecs = dR[:, 0][None, :]
    for _ in range(n):
        vecs = np.stack([vecs @ steps[0].T, vecs @ steps[1].T], axis=1).reshape(-1, 2)
    return vecs[:, 0]


def _brute_force_value(pp: ProtocolParams, model: str) -> complex:
    amps = sequence_amplitudes(pp, model)
    return complex(np.sum(amps * amps))


def averaged_finite_n(pp: ProtocolParams, method: str = "transfer",
                      model: str = "scaled") -> AveragedResult:
    """Finite-N sum over readout sequences of <psi0|M..M|psi0>^2."""
    if method == "bruteforce":
        z = _brute_force_value(pp, model)
    elif method == "transfer":
        z = _transfer_value(pp, model)
    else:
        raise ValueError(f"unknown method {method!r}")
    return AveragedResult.from_amplitude(z)


def averaged_finite_n_value(pp: ProtocolParams, method: str = "transfer",
                            model: str = "scaled") -> complex:
    """Like :func:`averaged_finite_n` but returns the raw complex sum."""
    if method == "bruteforce":
        return _brute_force_value(pp, model)
    return _transfer_value(pp, model)


def averaged_phase_curve(c: float, a: float, d: int, grid_hint: int = 64) -> PhaseCurve:
    """Continuous branch of 2*chibar(theta) = arg [exp G]_11 on [0, pi]."""
    if grid_hint < 16:
        raise ValueError("grid_hint must be >= 16")
    return trace_phase(lambda t: limit_amplitude(c, a, t, d), grid_hint)


def averaged_winding(curve: PhaseCurve) -> int:
    """nbar = (chibar(pi) - chibar(0))/pi, read off the unwrapped 2*chibar branch."""
    return _quantized(curve.unwrapped_phase[-1] - curve.unwrapped_phase[0], 2 * math.pi)


def averaged_winding_at(c: float, a: float, d: int = 1, grid_hint: int = 64) -> int:
    return averaged_winding(averaged_phase_curve(c, a, d, grid_hint))
