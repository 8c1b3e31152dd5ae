"""Geometric optimal control of rigid-body attitude: rotation-group math,
Riccati solvers and LQR gains, a group-preserving simulator, regulation and
tracking feedback laws, and boundary-value solvers for avoidance and
finite-time regulation.
"""

from .errors import (
    AngleNearPi,
    ConfigError,
    GeoLqrError,
    NoConvergence,
    NoDescent,
    NoStabilizingSolution,
    NotControllable,
    NumericalDivergence,
    ObstacleContact,
    ParseError,
    StepTooLarge,
    ValidationError,
)
from .so3 import (
    exp_so3,
    geodesic_distance,
    hat,
    is_rotation,
    log_so3,
    orthogonality_defect,
    transport_velocity,
    vee,
)
from .riccati import (
    CostParams,
    GainPair,
    GainSchedule,
    RiccatiSolution,
    are_residual,
    are_solve,
    dre_integrate,
    drift_matrix,
    gains_from_K,
    scalar_residual,
)
from .dynamics import (
    FlatState,
    InertiaTensor,
    RigidBodyState,
    SimParams,
    TrajectoryLog,
    euler_rhs,
    flat_step,
    lie_euler_step,
    simulate,
)
from .regulators import (
    ControllerConfig,
    ReferenceSample,
    RegulationGoal,
    TrackingReference,
    feedforward_torque,
    lyapunov_value,
    regulation_torque,
    tracking_pd_torque,
    value_candidate,
)
from .pmp import (
    AvoidanceLagrangian,
    AvoidanceScenario,
    BVPSolution,
    ControlEffortLagrangian,
    CostateTrajectory,
    SphereObstacle,
    VariationTrajectory,
    avoidance_rhs,
    costate_integrate,
    curvature,
    shooting_solve,
    trajectory_cost,
    transcription_oracle,
    variational_propagate,
)

__version__ = "0.1.0"
