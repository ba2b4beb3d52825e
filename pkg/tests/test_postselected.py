import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmphase.critical import postselected_point_at_a
from wmphase.errors import UndefinedAtCriticalPoint
from wmphase.measurement import DetectorParams, ProtocolParams, delta_r, kraus_finite
from wmphase.numerics import wrap_phase
from wmphase.postselected import (amplitude_closed_form, amplitude_finite_n, closed_form,
                                  critical_residual, phase_curve, symmetric_components,
                                  trace_phase, winding_at, winding_number)
from wmphase.trajectories import ReadoutSequence, evolve_with

box = dict(c=st.floats(0, 5), a=st.floats(-5, 5), theta=st.floats(0, math.pi))


@given(st.floats(0, 5), st.floats(-5, 5), st.sampled_from([1, -1]))
def test_pole_gives_unit_amplitude(c, a, d):
    assert amplitude_closed_form(ProtocolParams(c, a, 0.0, d)).amplitude == pytest.approx(1, abs=1e-12)


@given(st.floats(0, math.pi))
def test_no_measurement_gives_unit_amplitude(theta):
    res = amplitude_closed_form(ProtocolParams(0, 0, theta, 1))
    assert abs(res.amplitude - 1) < 1e-12


def test_equator_value():
    res = amplitude_closed_form(ProtocolParams(1, 0, math.pi / 2, 1))
    assert res.amplitude.real == pytest.approx(0.3428842, abs=1e-6)
    assert res.phase == pytest.approx(0, abs=1e-12)
    assert res.probability == pytest.approx(0.11755, abs=1e-4)
    finite = amplitude_finite_n(ProtocolParams(1, 0, math.pi / 2, 1, 10 ** 5))
    assert abs(finite.amplitude - res.amplitude) < 1e-5


def test_single_step_by_hand():
    pp = ProtocolParams(0, 0, 1.2, 1, 1)
    dR = delta_r(pp)
    assert amplitude_finite_n(pp).amplitude == pytest.approx((dR @ dR)[0, 0], abs=1e-15)
    # without back-action the two step rotations compose to a full turn
    assert amplitude_finite_n(pp).amplitude == pytest.approx(1, abs=1e-14)


def test_finite_n_convergence():
    pp = ProtocolParams(1, 1, 3 * math.pi / 4, 1)
    exact = amplitude_closed_form(pp).amplitude
    n = 10 ** 4
    finite = amplitude_finite_n(pp.with_(n=n)).amplitude
    assert abs(finite - exact) / abs(exact) <= 5 / n


def test_projective_chain_gives_pancharatnam_phase():
    theta, d, n = 2.0, 1, 20000
    p = DetectorParams(math.pi / 2, math.pi / 2)
    traj = evolve_with(theta, d, (kraus_finite(p, 0), kraus_finite(p, 1)), ReadoutSequence.all_zeros(n))
    phase = np.angle(traj.amplitude)
    assert wrap_phase(phase - math.pi * d * (math.cos(theta) - 1)) == pytest.approx(0, abs=1e-3)


def test_closed_form_vectorized_matches_scalar():
    C, A = np.meshgrid(np.linspace(0, 4, 7), np.linspace(-3, 3, 5))
    grid = closed_form(C, A, 1.1, -1)
    for idx in np.ndindex(C.shape):
        assert grid[idx] == pytest.approx(closed_form(float(C[idx]), float(A[idx]), 1.1, -1), abs=1e-15)


def test_closed_form_small_tau_series_is_continuous():
    # tau = 0 at Z = pi sin(theta); compare across the series threshold
    theta = math.pi / 2
    z0 = closed_form(math.pi, 0.0, theta, 1)
    z1 = closed_form(math.pi + 2e-4, 0.0, theta, 1)
    assert abs(z0 - z1) < 1e-3
    assert abs(closed_form(math.pi + 1e-6, 0, theta, 1) - z0) < 1e-6


def test_large_c_does_not_overflow():
    z = closed_form(500.0, 1.0, 1.0, 1)
    assert np.isfinite(z)


def test_flat_curve():
    curve = phase_curve(0, 0, 1)
    assert np.max(np.abs(curve.unwrapped_phase)) < 1e-12
    assert winding_number(curve) == 0


def test_strong_measurement_curve():
    curve = phase_curve(5, 0, 1)
    assert curve.unwrapped_phase[-1] == pytest.approx(-2 * math.pi, abs=1e-9)
    berry = math.pi * (np.cos(curve.thetas) - 1)
    assert np.max(np.abs(curve.unwrapped_phase - berry)) < 0.5


def test_curve_rows_schema():
    rows = phase_curve(1, 0.5, 1).rows()
    assert list(rows[0]) == ["theta", "re", "im", "phase_unwrapped", "magnitude"]


def test_curve_through_critical_point_raises():
    # a rounded critical C (e.g. 1.9209) misses the zero and the curve stays traceable,
    # so use the analytic solver's point
    p = postselected_point_at_a(1.0, 1)
    assert p.c_crit == pytest.approx(1.9241, abs=1e-4)
    with pytest.raises(UndefinedAtCriticalPoint):
        phase_curve(p.c_crit, p.a_crit, 1)


def test_trace_phase_detects_plain_zero():
    with pytest.raises(UndefinedAtCriticalPoint):
        trace_phase(lambda t: complex(t - 1.0, 0.3 * (t - 1.0)))


@pytest.mark.parametrize("c,a,d,n", [(0.1, 0, 1, 0), (5, 0, 1, -1), (5, 0, -1, 1),
                                     (0.5, 0.5, 1, 0), (5, 0.5, 1, -1), (2.3, 1, 1, -1)])
def test_winding_numbers(c, a, d, n):
    assert winding_at(c, a, d) == n


@settings(max_examples=60)
@given(**box, d=st.sampled_from([1, -1]))
def test_direction_reflection_symmetry(c, a, theta, d):
    z = closed_form(c, a, theta, d)
    assert abs(closed_form(c, a, math.pi - theta, -d) - z) < 1e-12


@settings(max_examples=60)
@given(**box, d=st.sampled_from([1, -1]))
def test_conjugation_symmetry(c, a, theta, d):
    z = closed_form(c, a, theta, d)
    assert abs(closed_form(c, -a, theta, -d) - z.conjugate()) < 1e-12


@settings(max_examples=60)
@given(st.floats(0, 5), st.floats(0.01, math.pi - 0.01))
def test_hermitian_phase_antisymmetric_in_direction(c, theta):
    parts = symmetric_components(c, 0.0, theta)
    assert abs(wrap_phase(parts["chi_s"])) < 1e-12
    assert parts["P_a"] == pytest.approx(1, abs=1e-9)


def test_critical_residual_nonzero_off_line():
    assert critical_residual(1, 0, math.pi / 2, 1) >= 1e-2
