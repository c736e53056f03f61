"""Floquet modes and half-guide operators for periodic waveguides."""

__version__ = "0.1.0"

from .cell import CellMatrices, PermittivityCell, PlaneTruncation, assemble_B, assemble_B_derivatives, assemble_epsilon
from .charvals import (
    CharacteristicValue,
    DiskCover,
    JordanChainSet,
    Tolerances,
    band_rectangle,
    build_disk_cover,
    cluster_charvals,
    compute_charvals,
    count_by_contour,
    resolve_multiplicity,
    solve_all_charvals,
    verify_disk_localization,
)
from .contour import Circle, Rectangle
from .cross_section import BCKind, BoundaryCondition, CrossSectionBasis, build_basis, evaluate_psi, sobolev_weight
from .exceptions import (
    ConfigError,
    ConsistencyError,
    ContourError,
    FloquetError,
    MultiplicityError,
    NearSingularError,
    NotApplicableError,
    ResolutionError,
    SymmetryError,
)
from .halfguide import (
    TraceOperatorSpec,
    assemble_F,
    dtn_map,
    dtn_matrix,
    monodromy,
    riesz_conditioning,
    solve_bvp,
    trace_of_mode,
)
from .modes import (
    FloquetMode,
    ModeClass,
    ModeFamily,
    check_estimates,
    classify_and_normalize,
    evaluate_mode,
    flux,
    group_velocity,
    modes_from_chain,
    translation_matrix,
)
from .problem import PRESETS, Analysis, Problem, analyze, desk1, desk2, desk3, smooth_case
