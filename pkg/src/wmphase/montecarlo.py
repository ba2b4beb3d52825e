"""Monte Carlo sampling of readout sequences and the estimator of exp(2i chibar - alpha).

Sample ``i`` reads uniforms from block ``i`` of a Philox stream keyed by the
seed, so any subset of samples can be regenerated (or computed by another
worker) without drawing the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .measurement import ProtocolParams, _require_finite_n, initial_state, kraus_pair
from .trajectories import ReadoutSequence, lab_kraus_stack

SEED_MAX = 2 ** 64 - 1
_BLOCK = 4  # 64-bit words per Philox counter increment


def _check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= seed <= SEED_MAX:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def substream_uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniforms for samples ``start .. start+count-1``, ``width`` per sample."""
    seed = _check_seed(seed)
    blocks = -(-width // _BLOCK)
    bitgen = np.random.Philox(seed)
    bitgen.advance(start * blocks)
    gen = np.random.Generator(bitgen)
    return gen.random((count, blocks * _BLOCK))[:, :width]


@dataclass(frozen=True)
class SampleBatch:
    """Readouts and amplitudes of a batch of sampled runs.

    ``weights`` is prod_k (p0 + p1) over the weak steps; it equals 1 for a
    complete Kraus model and corrects the sampling bias otherwise.
    """

    bits: np.ndarray
    final: np.ndarray
    amplitudes: np.ndarray
    weights: np.ndarray

    @property
    def accepted(self) -> np.ndarray:
        return self.final == 0

    def sequence(self, i: int) -> ReadoutSequence:
        return ReadoutSequence(tuple(int(b) for b in self.bits[i]), int(self.final[i]))


def sample_from_uniforms(pp: ProtocolParams, u: np.ndarray, model: str = "complete") -> SampleBatch:
    """Run the conditional-Born sampler with the given uniforms, shape (samples, N+1)."""
    n = _require_finite_n(pp)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] < n + 1:
        raise ParameterError(f"need {n + 1} uniforms per sample, got {u.shape[1]}")
    m = u.shape[0]
    M0, M1 = kraus_pair(pp, model)
    K0 = lab_kraus_stack(pp.theta, pp.d, (M0, M1), np.zeros(n, dtype=int))
    K1 = lab_kraus_stack(pp.theta, pp.d, (M0, M1), np.ones(n, dtype=int))

    psi0 = initial_state(pp.theta)
    states = np.tile(psi0, (m, 1))
    log_scale = np.zeros(m)
    weights = np.ones(m)
    bits = np.zeros((m, n), dtype=np.int8)
    for k in range(n):
        s0 = states @ K0[k].T
        s1 = states @ K1[k].T
        p0 = np.sum(np.abs(s0) ** 2, axis=1)
        p1 = np.sum(np.abs(s1) ** 2, axis=1)
        total = p0 + p1
        jump = u[:, k] * total >= p0
        bits[:, k] = jump
        new = np.where(jump[:, None], s1, s0)
        norm = np.sqrt(np.where(jump, p1, p0))
        weights *= total
        log_scale += np.log(norm)
        states = new / norm[:, None]

    overlap = states @ np.conj(psi0)
    accept_prob = np.abs(overlap) ** 2
    final = (u[:, n] >= accept_prob).astype(np.int8)
    amps = overlap * np.exp(log_scale)
    return SampleBatch(bits, final, amps, weights)


def sample_sequence(pp: ProtocolParams, rng: np.random.Generator, model: str = "complete"):
    """Draw one run; returns (sequence, amplitude) with amplitude 0 when r_{N+1} = 1."""
    n = _require_finite_n(pp)
    batch = sample_from_uniforms(pp, rng.random((1, n + 1)), model)
    amp = complex(batch.amplitudes[0]) if batch.final[0] == 0 else 0j
    return batch.sequence(0), amp


def sample_many(pp: ProtocolParams, n_rs: int, seed: int, model: str = "complete",
                start: int = 0) -> SampleBatch:
    n = _require_finite_n(pp)
    return sample_from_uniforms(pp, substream_uniforms(seed, start, n_rs, n + 1), model)


def jackknife_stderr(x: np.ndarray) -> float:
    """Jackknife standard error of the mean of complex samples (modulus of the error)."""
    x = np.asarray(x)
    n = len(x)
    if n < 2:
        return math.inf
    loo = (np.sum(x) - x) / (n - 1)
    return float(math.sqrt((n - 1) / n * np.sum(np.abs(loo - loo.mean()) ** 2)))


@dataclass(frozen=True)
class McEstimate:
    estimate: complex
    stderr: float
    n_samples: int
    seed: int
    accepted_fraction: float
    model: str = "complete"

    def record(self, pp: ProtocolParams, exact: Optional[complex] = None) -> dict:
        out = dict(params=dict(C=pp.c, A=pp.a, theta=pp.theta, d=pp.d, N=pp.n, model=self.model),
                   n_rs=self.n_samples, seed=self.seed,
                   estimate=dict(re=self.estimate.real, im=self.estimate.imag),
                   stderr=self.stderr, accepted_fraction=self.accepted_fraction)
        if exact is not None:
            out["exact"] = dict(re=exact.real, im=exact.imag)
        return out


def sample_terms(batch: SampleBatch) -> np.ndarray:
    """Per-sample contributions W e^{2i chi} (0 for rejected runs)."""
    amps = batch.amplitudes
    mag = np.abs(amps)
    keep = batch.accepted & (mag > 0)
    unit = np.where(keep, amps / np.where(keep, mag, 1.0), 0)
    return batch.weights * unit * unit


def estimate_averaged(pp: ProtocolParams, n_rs: int, seed: int,
                      model: str = "complete") -> McEstimate:
    """Mean of W e^{2i chi} over ``n_rs`` sampled runs; unbiased for sum_seq amp^2."""
    if n_rs < 1:
        raise ParameterError(f"n_rs must be >= 1, got {n_rs}")
    seed = _check_seed(seed)
    batch = sample_many(pp, n_rs, seed, model)
    terms = sample_terms(batch)
    return McEstimate(complex(terms.mean()), jackknife_stderr(terms), n_rs, seed,
                      float(batch.accepted.mean()), model)
