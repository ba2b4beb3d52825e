"""Explicit state trajectories, their Pancharatnam phase and dynamical part."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import OrthogonalNeighbors, ParameterError
from .measurement import (ProtocolParams, _check_readout, initial_state, kraus_pair,
                          rotations)
from .numerics import principal_arg, wrap_phase
from .postselected import PhaseCurve, _quantized, trace_phase

# a state whose norm drops below this fraction of its predecessor is treated as null
_NULL_RATIO = 1e-14
_ORTHOGONAL = 1e-12


@dataclass(frozen=True)
class ReadoutSequence:
    bits: tuple
    final_projective: int = 0

    def __post_init__(self):
        bits = tuple(_check_readout(int(b)) for b in self.bits)
        if not bits:
            raise ParameterError("a readout sequence needs at least one weak readout")
        object.__setattr__(self, "bits", bits)
        _check_readout(self.final_projective)

    @classmethod
    def all_zeros(cls, n: int) -> "ReadoutSequence":
        return cls((0,) * int(n))

    @classmethod
    def parse(cls, text: str, final_projective: int = 0) -> "ReadoutSequence":
        """Build from a string of 0/1 characters, e.g. ``"00100"``."""
        return cls(tuple(int(ch) for ch in text.strip()), final_projective)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class Trajectory:
    """Unnormalized states psi_0 .. psi_N of one run.

    ``null_index`` is the first k with psi_k = 0 (an r=1 readout on a state
    orthogonal to the jump direction); later states are zero as well.
    """

    theta: float
    states: np.ndarray
    final_projective: int = 0
    null_index: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.states) - 1

    @property
    def reference(self) -> np.ndarray:
        """State the final projective readout selects: psi_0 for r=0, its partner for r=1."""
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        if self.final_projective == 0:
            return np.array([c, s], dtype=complex)
        return np.array([s, -c], dtype=complex)

    @property
    def amplitude(self) -> complex:
        """<ref|psi_N>, i.e. <psi_0|M_N..M_1|psi_0> when the last readout is 0."""
        return complex(np.vdot(self.reference, self.states[-1]))

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def bloch_points(self) -> np.ndarray:
        """Unit Bloch vectors of the non-null states, shape (m, 3)."""
        live = self.states if self.null_index is None else self.states[: self.null_index]
        a, b = live[:, 0], live[:, 1]
        n2 = np.abs(a) ** 2 + np.abs(b) ** 2
        ab = np.conj(a) * b
        return np.stack([2 * ab.real, 2 * ab.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=1) / n2[:, None]


def lab_kraus_stack(theta: float, d: int, kraus: Sequence[np.ndarray], bits) -> np.ndarray:
    """R^-1(n_k) M^(r_k) R(n_k) for k = 1..N, shape (N, 2, 2)."""
    bits = np.asarray(bits, dtype=int)
    n = len(bits)
    phis = 2 * np.pi * d * np.arange(1, n + 1) / (n + 1)
    R = rotations(theta, phis)
    Rh = np.conj(np.swapaxes(R, -1, -2))
    M = np.stack([np.asarray(kraus[0], complex), np.asarray(kraus[1], complex)])[bits]
    return Rh @ M @ R


def evolve_with(theta: float, d: int, kraus: Sequence[np.ndarray],
                seq: ReadoutSequence) -> Trajectory:
    """Apply the lab-frame Kraus matrices of ``seq`` one after another.

    ``kraus`` holds the axis-frame pair (M0, M1); any model can be used.
    """
    steps = lab_kraus_stack(theta, d, kraus, seq.bits).tolist()
    psi0 = initial_state(theta)
    a, b = complex(psi0[0]), complex(psi0[1])
    out = np.zeros((len(steps) + 1, 2), dtype=complex)
    out[0] = a, b
    null_at = None
    norm = 1.0
    for k, ((m00, m01), (m10, m11)) in enumerate(steps, start=1):
        a, b = m00 * a + m01 * b, m10 * a + m11 * b
        new_norm = math.hypot(abs(a), abs(b))
        if new_norm <= _NULL_RATIO * norm:
            null_at = k
            break
        norm = new_norm
        out[k] = a, b
    return Trajectory(theta, out, seq.final_projective, null_at)


def evolve(pp: ProtocolParams, seq: ReadoutSequence, model: str = "scaled") -> Trajectory:
    if pp.n is None or int(pp.n) != len(seq):
        raise ParameterError(f"sequence length {len(seq)} does not match N {pp.describe()}")
    return evolve_with(pp.theta, pp.d, kraus_pair(pp, model), seq)


def _normalized_overlaps(traj: Trajectory) -> tuple[np.ndarray, complex]:
    if traj.null_index is not None:
        raise OrthogonalNeighbors(f"trajectory becomes null at step {traj.null_index}")
    u = traj.states / traj.norms[:, None]
    steps = np.sum(np.conj(u[1:]) * u[:-1], axis=1)
    closing = complex(np.vdot(traj.reference, u[-1]))
    return steps, closing


def pancharatnam_product(traj: Trajectory) -> complex:
    """<ref|psi_N><psi_N|psi_N-1>...<psi_1|psi_0> over normalized states."""
    steps, closing = _normalized_overlaps(traj)
    return complex(np.prod(steps) * closing)


def pancharatnam_phase(traj: Trajectory) -> float:
    """Geometric phase arg <psi_0|P_N..P_1|psi_0> of the geodesically closed trajectory."""
    steps, closing = _normalized_overlaps(traj)
    smallest = float(np.min(np.abs(steps))) if len(steps) else 1.0
    if smallest < _ORTHOGONAL or abs(closing) < _ORTHOGONAL:
        raise OrthogonalNeighbors(
            f"neighbouring states are orthogonal (min overlap {min(smallest, abs(closing)):.2e})")
    # summing the arguments avoids underflow of the product for long chains
    total = float(np.sum(np.angle(steps))) + principal_arg(closing)
    return wrap_phase(total)


def dynamical_component(pp: ProtocolParams, seq: ReadoutSequence, model: str = "scaled") -> float:
    """arg <psi_0|M..M|psi_0> minus the Pancharatnam phase."""
    traj = evolve(pp, seq, model)
    geo = pancharatnam_phase(traj)
    return wrap_phase(principal_arg(traj.amplitude) - geo)


def phase_split(traj: Trajectory) -> dict:
    """Total, geometric and dynamical phase of one trajectory."""
    geo = pancharatnam_phase(traj)
    total = principal_arg(traj.amplitude)
    return dict(total=total, geometric=geo, dynamical=wrap_phase(total - geo))


def geometric_phase_curve(c: float, a: float, d: int, theta_grid: int = 64, n: int = 1000,
                          model: str = "scaled") -> PhaseCurve:
    """Continuous branch over theta of the closed all-zeros trajectory's Pancharatnam phase."""
    seq = ReadoutSequence.all_zeros(n)

    def value(theta):
        pp = ProtocolParams(c, a, float(theta), d, n)
        return pancharatnam_product(evolve(pp, seq, model))

    return trace_phase(value, theta_grid)


def family_winding_classifier(c: float, a: float, d: int, theta_grid: int = 64,
                              n: int = 1000, model: str = "scaled") -> int:
    """Winding of the geometric phase over the family of closed trajectories.

    Nonzero exactly when the family of trajectories wraps the Bloch sphere.
    """
    if n < 1000:
        raise ParameterError(f"need n >= 1000 measurements, got {n}")
    if theta_grid < 64:
        raise ParameterError(f"need theta_grid >= 64, got {theta_grid}")
    curve = geometric_phase_curve(c, a, d, theta_grid, n, model)
    return _quantized(curve.unwrapped_phase[-1] - curve.unwrapped_phase[0], 2 * math.pi)
