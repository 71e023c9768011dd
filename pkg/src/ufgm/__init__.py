"""Universal first-order optimization toolkit.

A solver for composite sums of convex terms with mixed smoothness (none of
which needs a known constant), an epsilon-halving restart wrapper for
problems with a known optimal value, benchmark baselines, iteration-bound
calculators, and a CLI harness that writes traces, reports, and figures.
"""

from .errors import BacktrackExhausted, ConfigError, NumericalError, ParseError
from .geometry import (
    Constraint,
    Geometry,
    Penalty,
    SimpleTerm,
    composite_step,
    model_argmin,
    project_ball,
    project_box,
    project_nonneg,
    soft_threshold,
    xi,
)
from .problems import (
    CompositeProblem,
    FirstOrderEval,
    HingeSum,
    HolderPower,
    LpTerm,
    Ridge,
    Scaled,
    SpectralPenalty,
    SquaredDistance,
    SummandSpec,
    eigen_max,
    estimate_constants,
    gen_gaussian_instance,
    gen_svm_instance,
    gen_symmetric_instance,
    load_libsvm,
    load_symmetric_matrix,
    max_singular_value,
    specproj_terms,
)
from .solver import (
    BudgetStop,
    CertificateStop,
    EpochRecord,
    KnownOptimum,
    RunResult,
    SolverConfig,
    SolverState,
    StopReason,
    TraceRecord,
    r_ufgm_solve,
    rda_solve,
    solve_a,
    subgradient_solve,
    ufgm_solve,
    ufgm_step,
)
from .theory import (
    GrowthSpec,
    RateInputs,
    RecurrenceSpec,
    backtracking_ceiling,
    explicit_bound,
    growth_bound,
    implicit_bound,
    inexact_constant,
    recurrence_count_bound,
    recurrence_extremal,
    recurrence_threshold_root,
    sum_inexact_constant,
    two_term_bound,
)

__version__ = "0.1.0"
