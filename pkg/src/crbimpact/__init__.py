"""crbimpact: impact-induced joint velocity jump prediction for serial
manipulators.

The package predicts how a manipulator's joint velocities jump when the
end-effector hits a stiff surface, comparing three routes: the classical
joint-space momentum solution, a generalized-momentum task-space
solution, and a composite-rigid-body task-space solution that treats the
high-gain-controlled chain as one frozen body. A penalty-contact
simulator provides desk-scale ground truth, and the evaluation layer
replays experiment datasets and scores every method.
"""

__version__ = "0.1.0"

from .dynamics import (
    CentroidalInertia,
    Iim,
    JointState,
    Jsim,
    centroidal_inertia,
    condition_number,
    forward_kinematics,
    iim_crb,
    iim_gm,
    jsim,
    point_jacobian_linear,
)
from .errors import (
    CrbImpactError,
    DatasetError,
    DegenerateInertiaError,
    ModelValidationError,
    NoImpactError,
    SimulationError,
    SingularConfigurationError,
    StepTooLargeError,
)
from .evaluation import (
    ExperimentRecord,
    absolute_error,
    aggregate_repetitions,
    average_error,
    evaluate_dataset,
    load_dataset,
)
from .impact import (
    ContactFrame,
    ImpactParams,
    Impulse,
    PhaseGrid,
    Prediction,
    contact_frame,
    delta_v,
    friction_cone_check,
    impulse_classical,
    normal_impulse,
    post_impact_contact_velocity,
    predict_classical,
    predict_crb,
    predict_gm,
    predict_with_impulse,
    stick_coefficient,
    tangential_phase_field,
)
from .model import (
    ChainModel,
    Diagnostic,
    JointSpec,
    LinkInertia,
    load_model,
    parse_model,
    save_model,
    validate_model,
)
from .sim import (
    ContactSurface,
    PdGains,
    Scenario,
    SimConfig,
    SimResult,
    extract_jump,
    generate_dataset,
    load_scenario,
    simulate_impact,
)
from .spatial import (
    Transform,
    Twist,
    Wrench,
    adjoint_twist,
    adjoint_wrench,
    skew,
    spatial_cross_dual,
)
