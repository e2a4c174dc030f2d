from .basis3d import (
    BasisSpec,
    CertificateTheorem,
    Crystal3D,
    Cylinder,
    SlabRecord,
    build_crystal3d,
    copy_count,
    cylinder_average,
    lift_rect,
    rasterized_superlevel_lower_bound,
    slab_contribution,
    theorem_certificate,
)
from .crystal2d import (
    CertificateLemma1,
    Crystal2D,
    DyadicRect,
    OracleCheck,
    RectFamily,
    Region2D,
    brute_force_superlevel,
    build_crystal,
    build_rect_family,
    lemma1_certificate,
    oracle_check,
    rect_average,
    union_measure_staircase,
    verify_pairwise_disjoint,
)
from .dyadic import DyadicInterval, DyadicScalar, Ordering, dyd_add, dyd_cmp, dyd_mul
from .exceptions import *
from .rare_sets import (
    Engine,
    ExponentSequence,
    RareSet1D,
    TranslateList,
    average_over,
    build_rare_set,
    decompose_into_copies,
    extra_level_positions,
    level_translates,
    long_intervals,
    measure,
    rademacher_member,
)
from .sharpness import (
    FiniteSReport,
    PhiSpec,
    RatioRow,
    TrendReport,
    finite_s_report,
    phi_enclosure,
    phi_eval,
    sharpness_table,
    trend_report,
)
