"""Heat kernel coefficients of high tensor powers of line bundles, exact model
spectra, holomorphic Morse bounds and asymptotic fitting."""

from .analytic import HermitianPair, MultiIndex, curvature_eigenvalues, landau_factor, richardson, sinhc_inv
from .asymptotics import (
    ExpansionReport,
    expansion_report,
    fit_coefficients,
    gaussian_reference,
    phi0_theta_derivatives,
    stationary_expand,
)
from .coefficients import (
    EndoCoefficient,
    LargeULimit,
    Signature,
    bochner_e1_partial,
    e0_bochner,
    e0_endo,
    e0_trace,
    e1_kahler,
    large_u_limit,
    phi0,
    phi0_dtheta2,
)
from .errors import (
    ConditioningError,
    CurvheatError,
    DegeneracyWarning,
    DomainError,
    OracleInconsistencyError,
    ParseError,
    PreconditionError,
    RangeError,
    ValidationError,
    VerificationError,
)
from .geometry import CurvaturePoint, ModelGeometry, load_sampled, make_cp1, make_torus, parse_geometry_spec
from .morse import MorseReport, MorseVerification, strong_bound, u_bound, verify_inequalities, weak_bound
from .spectra import (
    HeatTraceSample,
    SpectrumSeries,
    cp1_spectrum,
    exact_hq,
    graded_heat_trace,
    heat_trace,
    lattice_extrapolated,
    lattice_magnetic_eigs,
    mckean_singer,
    torus_spectrum,
)

__version__ = "0.1.0"
