"""finedomain: grid-mask potential theory in the plane.

Exhaustions of F-sigma domains by nested compacts, barrier arc systems
between consecutive stages, certified two-level rational fits summed into a
function that blows up along the barriers, plus the supporting machinery:
exact planar predicates on grid masks, subharmonic patch searches (good
circles, wedges), a logarithmic-capacity solver, and a Monte-Carlo
certification harness with deterministic reports.
"""

from .barrier import (
    ArcCutResult,
    BarrierStage,
    CircleCover,
    arc_cut,
    assemble_barrier,
    build_circle_cover,
    disk_union_boundary_arcs,
    extract_arcs,
)
from .errors import (
    ConfigError,
    DegenerateSet,
    EmptyMask,
    FineDomainError,
    FitFailed,
    FrameTooTight,
    GeometryDegenerate,
    InsufficientStages,
    NoCircleFound,
    NoMargin,
    PoleProximity,
    ScanFailed,
    SeparationFailure,
    WedgeNotFound,
)
from .exhaust import (
    ExhaustionSequence,
    FSigmaDomain,
    build_fine_exhaustion,
    lusin_menchoff_sandwich,
    specialize,
    verify_exhaustion,
)
from .grid import (
    CircularArc,
    ComponentLabeling,
    GridMask,
    Point,
    Segment,
    Wedge,
    annulus_mask,
    circle_mask,
    complement_components,
    disk_mask,
    full_circle,
    mask_from_points,
    point_mask_distance,
    polygon_mask,
    rect_mask,
    segment_mask,
    set_distance,
    wedge_hits,
)
from .potential import (
    DiscreteMeasure,
    FinelyOpenPatch,
    MaskComplementRegion,
    SubharmonicGenerator,
    constant_generator,
    equilibrium_measure,
    eval_generator,
    find_good_circle,
    find_wedge,
    is_polar_at_resolution,
    radial_occupancy_integral,
)
from .rational import (
    RationalFunction,
    SingularityVerdict,
    SynthesizedFunction,
    classify_singularity,
    eval_at,
    eval_grid,
    evaluate,
    fit_two_level_rational,
    synthesize,
)
from .runner import (
    RunResult,
    certify_blowup_mechanics,
    export_field,
    load_run,
    run_scenario,
)
from .scenarios import BUILTIN_NAMES, Scenario, builtin_scenario, parse_config

__version__ = "0.1.0"
