"""Continuation and classification of periodic responses of periodically
forced nonlinear oscillators (Duffing and Duffing-Van der Pol)."""

from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    Model,
    ModelParams,
    OscState,
    Trajectory,
    energy,
    integrate,
    integrate_with_variations,
    natural_frequency,
    natural_period,
    sample_trajectory,
    vector_field,
)
from .errors import (
    ConfigError,
    DegenerateOrbitError,
    FileFormatError,
    LostFoldConditionError,
    NoConvergenceError,
    NotApplicableError,
    ResokitError,
    SingularJacobianError,
    StepCollapseError,
    StepUnderflowError,
    SwitchFailedError,
)
from .orbits import (
    PeriodicOrbit,
    ResonanceLabel,
    Stability,
    amplitude,
    classify_symmetry,
    mirror_orbit,
    mirror_state,
    refine_orbit,
    residual,
    stroboscopic_map,
    winding_number,
)
from .continuation import (
    BifurcationKind,
    BifurcationPoint,
    Branch,
    BranchPoint,
    StepControl,
    branch_min_distance,
    continue_branch,
    find_isolas,
    fold_test,
    pd_test,
    pitchfork_test,
    stability_changes_accounted,
    switch_branch,
)

__version__ = "0.1.0"
