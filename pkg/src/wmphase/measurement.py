"""Kraus back-action of the two-state detector and the measurement protocol.

States are length-2 complex numpy arrays in the ``{|0>_s, |1>_s}`` basis. They
are kept unnormalized so that products of Kraus matrices carry the probability
amplitude along with the direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadReadout, IndexOutOfRange, InfiniteN, NullState, ParameterError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KRAUS_MODELS = ("scaled", "complete")


@dataclass(frozen=True)
class DetectorParams:
    g: float
    theta_d: float
    phi_d: float = -math.pi / 2


@dataclass(frozen=True)
class MeasurementAxis:
    theta_s: float
    phi_s: float

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta_s)
        return np.array([st * math.cos(self.phi_s), st * math.sin(self.phi_s),
                         math.cos(self.theta_s)])


@dataclass(frozen=True)
class ProtocolParams:
    """One run of the parallel-circling protocol.

    ``n=None`` stands for the quasicontinuous limit N -> infinity.
    """

    c: float
    a: float
    theta: float
    d: int = 1
    n: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.c) and math.isfinite(self.a) and math.isfinite(self.theta)):
            raise ParameterError(f"non-finite parameters in {self}")
        if self.c < 0:
            raise ParameterError(f"measurement strength C must be >= 0, got {self.c}")
        if not 0.0 <= self.theta <= math.pi:
            raise ParameterError(f"theta must lie in [0, pi], got {self.theta}")
        if self.d not in (1, -1):
            raise ParameterError(f"direction d must be +1 or -1, got {self.d}")
        if self.n is not None and (int(self.n) != self.n or self.n < 0):
            raise ParameterError(f"N must be a non-negative integer or None, got {self.n}")

    @property
    def finite(self) -> bool:
        return self.n is not None

    def with_(self, **changes) -> "ProtocolParams":
        fields = dict(c=self.c, a=self.a, theta=self.theta, d=self.d, n=self.n)
        fields.update(changes)
        return ProtocolParams(**fields)

    def describe(self) -> str:
        n = "inf" if self.n is None else str(self.n)
        return f"(C={self.c:g}, A={self.a:g}, theta={self.theta:.10g}, d={self.d:+d}, N={n})"


def _require_finite_n(pp: ProtocolParams) -> int:
    if pp.n is None:
        raise InfiniteN(f"a finite number of measurements is required {pp.describe()}")
    return int(pp.n)


def _check_readout(r) -> int:
    if r not in (0, 1):
        raise BadReadout(f"readout must be 0 or 1, got {r!r}")
    return int(r)


def kraus_finite(p: DetectorParams, r: int) -> np.ndarray:
    """Back-action matrix of one finite-strength measurement along z."""
    r = _check_readout(r)
    g, td, pd = p.g, p.theta_d, p.phi_d
    if r == 0:
        return np.array([[1, 0], [0, math.cos(g) + 1j * math.sin(g) * math.cos(td)]])
    m = 1j * math.sin(g) * math.sin(td) * complex(math.cos(pd), math.sin(pd))
    return np.array([[0, 0], [0, m]], dtype=complex)


def kraus_scaled(pp: ProtocolParams, r: int, model: str = "scaled") -> np.ndarray:
    """Per-step back-action in the C, A scaling regime.

    ``model="scaled"`` keeps the leading-order entries exactly as printed,
    ``M1 = sqrt(4C/N)``, which leaves an O(1/N^2) completeness defect.
    ``model="complete"`` replaces it by ``sqrt(1 - exp(-4C/N))`` so that
    ``M0^dag M0 + M1^dag M1 = I`` holds exactly; the two differ at O(N^-3/2).
    """
    r = _check_readout(r)
    n = _require_finite_n(pp)
    if model not in KRAUS_MODELS:
        raise ParameterError(f"unknown Kraus model {model!r}")
    if n == 0:
        return np.eye(2, dtype=complex) if r == 0 else np.zeros((2, 2), dtype=complex)
    if r == 0:
        return np.array([[1, 0], [0, np.exp(-2 * (pp.c + 1j * pp.a) / n)]], dtype=complex)
    if model == "scaled":
        m = math.sqrt(4 * pp.c / n)
    else:
        m = math.sqrt(-math.expm1(-4 * pp.c / n))
    return np.array([[0, 0], [0, m]], dtype=complex)


def kraus_pair(pp: ProtocolParams, model: str = "scaled") -> tuple[np.ndarray, np.ndarray]:
    return kraus_scaled(pp, 0, model), kraus_scaled(pp, 1, model)


def scaled_detector_params(c: float, a: float, n: int) -> DetectorParams:
    """Finite-model detector settings g = sqrt(4C/N), theta_D = pi/2 + A/sqrt(CN)."""
    if c <= 0:
        raise ParameterError("the detector mapping needs C > 0")
    return DetectorParams(g=math.sqrt(4 * c / n), theta_d=math.pi / 2 + a / math.sqrt(c * n))


def rotation(ax: MeasurementAxis) -> np.ndarray:
    """Unitary R(n) taking the eigenbasis of n.sigma to the z basis."""
    c, s = math.cos(ax.theta_s / 2), math.sin(ax.theta_s / 2)
    e = complex(math.cos(ax.phi_s), -math.sin(ax.phi_s))
    return np.array([[c, s * e], [s, -c * e]], dtype=complex)


def rotations(theta: float, phis: np.ndarray) -> np.ndarray:
    """Stack of ``rotation`` matrices for one polar angle and many azimuths."""
    phis = np.asarray(phis, dtype=float)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    e = np.exp(-1j * phis)
    R = np.empty(phis.shape + (2, 2), dtype=complex)
    R[..., 0, 0] = c
    R[..., 0, 1] = s * e
    R[..., 1, 0] = s
    R[..., 1, 1] = -c * e
    return R


def kraus_along(M: np.ndarray, ax: MeasurementAxis) -> np.ndarray:
    """Kraus operator of the same measurement class along axis ``ax``: R^-1 M R."""
    R = rotation(ax)
    return R.conj().T @ M @ R


def axis_sequence(pp: ProtocolParams, k: int) -> MeasurementAxis:
    n = _require_finite_n(pp)
    if not 0 <= k <= n + 1:
        raise IndexOutOfRange(f"measurement index {k} outside 0..{n + 1}")
    return MeasurementAxis(pp.theta, 2 * math.pi * k * pp.d / (n + 1))


def initial_state(theta: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), math.sin(theta / 2)], dtype=complex)


def delta_r(pp: ProtocolParams) -> np.ndarray:
    """Step rotation R(n_k) R^-1(n_{k-1}) between consecutive axes."""
    n = _require_finite_n(pp)
    e = np.exp(-2j * math.pi * pp.d / (n + 1))
    c2, s2 = math.cos(pp.theta / 2) ** 2, math.sin(pp.theta / 2) ** 2
    off = 0.5 * (1 - e) * math.sin(pp.theta)
    return np.array([[c2 + s2 * e, off], [off, s2 + c2 * e]], dtype=complex)


def born_probability(state: np.ndarray, kraus: np.ndarray) -> float:
    state = np.asarray(state, dtype=complex)
    norm2 = float(np.vdot(state, state).real)
    if norm2 == 0.0:
        raise NullState("Born probability of a null state")
    out = kraus @ state
    return float(np.vdot(out, out).real) / norm2


def bloch_vector(state: np.ndarray) -> np.ndarray:
    a, b = complex(state[0]), complex(state[1])
    norm2 = abs(a) ** 2 + abs(b) ** 2
    if norm2 == 0.0:
        raise NullState("Bloch vector of a null state")
    ab = a.conjugate() * b
    return np.array([2 * ab.real, 2 * ab.imag, abs(a) ** 2 - abs(b) ** 2]) / norm2
