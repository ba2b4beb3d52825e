"""Phases of qubit states under sequences of weak measurements along a rotating axis."""
from .errors import NumericalError, ParameterError, WMPhaseError
from .measurement import DetectorParams, MeasurementAxis, ProtocolParams, kraus_finite, kraus_scaled
from .postselected import (PhaseCurve, PhaseResult, amplitude_closed_form, amplitude_finite_n,
                           phase_curve, winding_at, winding_number)
from .averaged import (AveragedResult, averaged_amplitude, averaged_finite_n, averaged_phase_curve,
                       averaged_winding, averaged_winding_at)
from .trajectories import (ReadoutSequence, Trajectory, dynamical_component, evolve,
                           family_winding_classifier, pancharatnam_phase)
from .limits import c_zero_exact, large_a_expansion, large_c_expansion, scaling_study
from .critical import (CriticalPoint, averaged_critical_points, averaged_threshold,
                       postselected_critical_line, verify_critical_point)
from .montecarlo import McEstimate, estimate_averaged, sample_sequence
from .interferometer import (IntensityPair, intensities_averaged, intensities_postselected,
                             verify_arm_identity)

__version__ = "0.1.0"
