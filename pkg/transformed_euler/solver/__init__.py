# These are just namespace imports for convenience
from .errors import (
    AssumptionError,
    BreakpointError,
    ConfigError,
    DomainError,
    ExpressionError,
    InversionError,
    PathError,
    SolverError,
)
from .expression import parse_expression
from .piecewise import PiecewiseFn
from .transform import Transform, build_transform, compute_jump_coefficients
from .model import SdeProblem, TransformedSde, validate_assumptions
from .integrator import crude_em_path, em_path, scheme_phi
from .harness import (
    BrownianLattice,
    ConvergenceReport,
    consecutive_l2_errors,
    fit_order,
    generate_lattice,
    simulate_terminals,
)
from .examples import NamedExample, load_example, threshold_problem
from .config import Config, RunConfig, load_config
