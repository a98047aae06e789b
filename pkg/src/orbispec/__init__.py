"""Computational spectral geometry of compact hyperbolic orbisurfaces."""

from .errors import (
    AreaNotPositive,
    BisectionFailure,
    BoundViolated,
    GenerationUnverified,
    GridTooShort,
    InconsistentRatios,
    NoHyperbolicGenerator,
    NonConvergence,
    NonIntegerMultiplicity,
    NotCertified,
    NotHyperbolic,
    NotHyperbolicTriangle,
    OffDiagonalVanishes,
    OrbispecError,
    ParabolicClassError,
    Unbounded,
)
from .halfplane import (
    IsometryClass,
    MoebiusElement,
    UHPoint,
    apply,
    classify,
    distance,
    translation_length,
)
from .orbisurface import (
    ObstructionVerdict,
    Signature,
    euler_characteristic,
    hyperbolic_area,
    obstruction_check,
    weyl_count_asymptote,
)
from .fuchsian import (
    ConjugacyClassRecord,
    GroupPresentation,
    LengthSpectrum,
    certified_length_spectrum,
    elliptic_class_data,
    enumerate_classes,
    length_spectrum,
    triangle_group,
)
from .selberg import (
    SpectralData,
    TermBreakdown,
    TraceFormulaInput,
    c_function,
    elliptic_term,
    geometric_heat_trace,
    hyperbolic_term,
    identity_term,
    sigma,
    spectral_heat_trace,
)
from .huber import (
    CFunctionHandle,
    ExtractionResult,
    HeatTraceHandle,
    RecoveredSpectrum,
    extract_lengths,
    invert_c,
    recover_spectrum,
)
from .fricke import (
    EquivalenceWitness,
    TraceSignature,
    normalize,
    reconstruct_equivalence,
    trace_signature,
)
from .dirichlet import (
    DiameterEstimate,
    DirichletPolygon,
    check_trace_bounds,
    compute_polygon,
    diameter_estimate,
    polygon_area,
    polygon_svg,
    side_pairings,
    verify_generation,
)

__version__ = "0.1.0"
