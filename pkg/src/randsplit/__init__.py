"""Random splitting of conservative ODEs: Lorenz-96 and Galerkin-Euler.

Composes exact flows of splitting vector fields for random durations,
propagates the tangent cocycle for Lyapunov exponents, and certifies the
Lie bracket rank condition at explicit test points.
"""

from __future__ import annotations

from .certifier import (
    Certification,
    DetCheck,
    RankReport,
    build_euler_bracket_matrix,
    build_lorenz_bracket_matrix,
    certify_euler,
    certify_lorenz,
    euler_test_point,
    lorenz_test_point,
    numeric_rank,
)
from .engine import (
    MonitorBreach,
    Monitors,
    RankCollapse,
    SeedConfig,
    TimeDistribution,
    TrajectoryState,
    run_trajectory,
    split_step,
    splitting_convergence,
    state_moments,
    tangent_step,
)
from .flows import (
    IntegratorError,
    RotationFlowSpec,
    TriadFlowSpec,
    rotation_flow,
    rotation_flow_jacobian,
    triad_flow,
    triad_flow_with_jacobian,
)
from .lyapunov import LyapunovEstimate, convergence_trace, estimate_spectrum, estimate_sum
from .models import EulerModel, LorenzModel, SplittingModel
from .vecfield import PolyVectorField, lie_bracket, lift

__version__ = "0.1.0"
