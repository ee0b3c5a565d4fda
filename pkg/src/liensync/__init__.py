"""Energy-optimal finite-time driving of Lienard self-oscillators onto their limit cycle."""

from .core import (
    ForceProfile,
    LienardSystem,
    PhasePoint,
    SystemValidationReport,
    Trajectory,
    ValidationCheck,
    WorkBreakdown,
    build_system,
    make_van_der_pol,
    system_from_dict,
    system_to_dict,
    validate_system,
    vector_field,
    work_breakdown,
)
from .errors import (
    ContractViolation,
    CycleNotFoundError,
    DomainError,
    EventNotFoundError,
    IntegrationError,
    LiensyncError,
    NoSolutionError,
    NumericalError,
    OracleFailure,
    SingularForceError,
    SystemValidationError,
)
from .integrate import (
    EventSpec,
    IntegratorConfig,
    SWEEP_CONFIG,
    VERIFY_CONFIG,
    integrate_driven,
    integrate_until_event,
    small_mu_amplitude,
    small_mu_envelope,
)
from .limit_cycle import (
    LimitCycle,
    branch_velocity,
    distance_to_cycle,
    find_limit_cycle,
)
from .nc_optimal import (
    ElPath,
    GFunction,
    OptimalPlan,
    choose_endpoint_nc,
    g_eval,
    g_invert,
    gfunction_for,
    make_plan,
    solve_el_path,
    speed_limit,
    synthesize_force,
    wnc_min,
)
from .poly import Polynomial
from .total_work import (
    GlobalOpt,
    LandscapeSample,
    Mt2Root,
    TotalWorkLandscape,
    critical_time,
    mt2_residual,
    mt2_roots,
    optimal_endpoint_total,
    total_work_at,
)
from .verify import (
    BvpPath,
    CheckResult,
    VerificationReport,
    adjoint_residuals,
    closed_loop_replay,
    local_optimality,
    oracle_el_bvp,
    oracle_wnc_quadrature,
    perturbation_margins,
)

__version__ = "0.1.0"
