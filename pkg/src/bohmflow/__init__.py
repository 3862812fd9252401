"""Relativistic Bohmian trajectories for mode-sum Klein-Gordon wave functions."""

__version__ = "0.1.0"

from .errors import (BohmflowError, ConfigurationError, DomainError, EnvelopeTooLoose,
                     InconclusiveDomain, IntegrationError, NodeProximity, ReductionNotJustified,
                     ScenarioError)
from .spacetime import Constants, FourVector, Metric, ParticleParams, boost_matrix, lorentz_boost, minkowski_dot
from .fields import (EMPotential, QuadraticGauge, SineGauge, constant_electric, constant_magnetic,
                     field_tensor_at, pure_gauge, zero_field)
from .wavefunction import (ModeSumWaveFunction, PlaneWaveMode, ProductTerm, gauge_transform,
                           gaussian_packet, plane_wave, polar_data, superposition)
from .dynamics import (IntegratorConfig, PacketFamily, TrajectoryRecord, classical_integrate,
                       classical_limit_study, guide_velocity, integrate, mass_shell_residual)
from .nonrel import (ConditionalWaveFunction, NRWaveFunction, ScaledModeFamily, TemporalOffsets,
                     bohm_integrate, limit_comparison, nr_integrate, nr_limit_study,
                     single_time_reduction, temporal_decoupling_check)
from .stats import (SamplingBox, equivariance_test, frame_independence_test, sample_equilibrium,
                    two_mode_box)
