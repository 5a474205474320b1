"""Alternating-WKB approximation for the one-dimensional Schrodinger equation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AwkbError,
    BracketError,
    BranchError,
    ConfigError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    PathError,
    RegionError,
    SingularityError,
    ToleranceError,
    TopologyError,
    TurningPointProximityError,
)
from .potential import (  # noqa: E402
    Centrifugal,
    CustomPolynomial,
    Harmonic,
    ProblemSetup,
    TurningPointSet,
    classical_momentum,
    effective_momentum_langer,
    evaluate_potential,
    find_turning_points,
)
from .quadrature import (  # noqa: E402
    ContourPath,
    QuadratureEstimate,
    contour_integrate,
    ellipse,
    momentum_integral,
    phase_integral,
    rectangle,
    stadium,
)
from .wkb import (  # noqa: E402
    WaveTable,
    asymptoticity_report,
    wkb1_allowed,
    wkb1_forbidden,
    wkb2_wavefunction,
    wkb_series,
)
from .bremmer import (  # noqa: E402
    AmplitudePair,
    BremmerExpansion,
    awkb_wavefunction_bound,
    awkb_wavefunction_scattering,
    bremmer_iterate,
    first_order_amplitudes_bound,
    first_order_amplitudes_scattering,
    solve_coupled_ode,
)
from .quantization import (  # noqa: E402
    QuantizationReport,
    action_integral,
    eigenenergy,
    quantization_report,
    reflection_correction_contour,
    winding_contribution,
)
from .reference import compare, ho_exact_eigenstate, normalize, numerov_eigenvalue, numerov_solve  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
