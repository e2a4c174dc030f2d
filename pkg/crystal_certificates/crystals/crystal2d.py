"""
The crystal Q_k = Y_k x Y_k, the level-j rectangle families on which the
average of its indicator is exactly 2^{-k}, the superlevel-set certificate,
and a brute-force dyadic maximal-operator oracle for small crystals.
"""

from dataclasses import dataclass, field
import itertools
import logging
import random
from typing import Any, Iterator

import numpy as np

from crystal_certificates.default_settings import get_setting

from .dyadic import ZERO, DyadicInterval, DyadicScalar
from .exceptions import DomainError, EngineDisagreementError, EnumerationLimitError
from .rare_sets import (
    Engine,
    ExponentSequence,
    RareSet1D,
    TranslateList,
    average_over,
    build_rare_set,
    ceil_quarter,
    level_translates,
    long_intervals,
)
from .workers import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Crystal2D:
    x_set: RareSet1D
    y_set: RareSet1D

    @property
    def sequence(self) -> ExponentSequence:
        return self.x_set.require_sequence()

    @property
    def domain_log2(self) -> int:
        return self.x_set.domain_log2

    @property
    def engine(self) -> Engine:
        return self.x_set.engine

    def contains(self, s, t) -> bool:
        return self.x_set.contains(s) and self.y_set.contains(t)

    def measure(self) -> DyadicScalar:
        value = self.x_set.measure() * self.y_set.measure()
        sequence = self.sequence
        if value != DyadicScalar.pow2(2 * sequence.top - 2 * sequence.k):
            raise EngineDisagreementError(f"mu_2(Q_k) = {value} breaks 2^(2m_k - 2k)")
        return value

    def cells(self) -> np.ndarray:
        if self.domain_log2 > get_setting("RASTER_2D_MAX_LOG2"):
            raise EnumerationLimitError(
                f"2D raster limited to m_k <= {get_setting('RASTER_2D_MAX_LOG2')}"
            )
        x = self.x_set.with_engine(Engine.BITSET).cells
        y = self.y_set.with_engine(Engine.BITSET).cells
        return np.outer(x, y)


def build_crystal(sequence: ExponentSequence, engine: Engine = Engine.SYMBOLIC) -> Crystal2D:
    rare_set = build_rare_set(sequence, engine)
    return Crystal2D(x_set=rare_set, y_set=rare_set)


@dataclass(frozen=True)
class DyadicRect:
    """[x_offset, x_offset + 2^width_log2) x [y_offset, y_offset + 2^height_log2)"""

    x_offset: DyadicScalar
    y_offset: DyadicScalar
    width_log2: int
    height_log2: int

    def __post_init__(self):
        object.__setattr__(self, "x_offset", DyadicScalar.coerce(self.x_offset))
        object.__setattr__(self, "y_offset", DyadicScalar.coerce(self.y_offset))

    @property
    def area_log2(self) -> int:
        return self.width_log2 + self.height_log2

    @property
    def area(self) -> DyadicScalar:
        return DyadicScalar.pow2(self.area_log2)

    @property
    def x_interval(self) -> DyadicInterval:
        return DyadicInterval(self.x_offset, self.width_log2)

    @property
    def y_interval(self) -> DyadicInterval:
        return DyadicInterval(self.y_offset, self.height_log2)

    def is_admissible(self, sequence: ExponentSequence) -> bool:
        """Area in {2^{m_1}, ..., 2^{m_k}}."""
        return self.area_log2 in sequence.exponents

    def overlaps(self, other: "DyadicRect") -> bool:
        return self.x_interval.overlaps(other.x_interval) and self.y_interval.overlaps(
            other.y_interval
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "x": self.x_offset.to_json(),
            "y": self.y_offset.to_json(),
            "width_log2": self.width_log2,
            "height_log2": self.height_log2,
        }


def rect_average(crystal: Crystal2D, rect: DyadicRect) -> DyadicScalar:
    """The indicator of Q_k factors, so its average is a product of 1D averages."""
    return average_over(crystal.x_set, rect.x_interval) * average_over(
        crystal.y_set, rect.y_interval
    )


@dataclass(frozen=True)
class RectFamily:
    level: int
    k: int
    x_translates: TranslateList
    y_translates: TranslateList
    x_union: RareSet1D
    y_union: RareSet1D

    @property
    def rect_width_log2(self) -> int:
        return self.x_translates.block_length_log2

    @property
    def rect_height_log2(self) -> int:
        return self.y_translates.block_length_log2

    @property
    def area_log2(self) -> int:
        return self.rect_width_log2 + self.rect_height_log2

    @property
    def count(self) -> int:
        return self.x_translates.count * self.y_translates.count

    @property
    def union_measure(self) -> DyadicScalar:
        return self.x_union.measure() * self.y_union.measure()

    def member(self, index: int) -> DyadicRect:
        y_index, x_index = divmod(index, self.x_translates.count)
        return DyadicRect(
            self.x_translates.offset(x_index),
            self.y_translates.offset(y_index),
            self.rect_width_log2,
            self.rect_height_log2,
        )

    def iter_members(self) -> Iterator[DyadicRect]:
        for y in self.y_translates.iter_offsets():
            for x in self.x_translates.iter_offsets():
                yield DyadicRect(x, y, self.rect_width_log2, self.rect_height_log2)

    def sample_members(self, rng: random.Random, size: int) -> list[DyadicRect]:
        if self.count <= size:
            return list(self.iter_members())
        return [self.member(rng.randrange(self.count)) for _ in range(size)]


def build_rect_family(crystal: Crystal2D, j: int) -> RectFamily:
    sequence = crystal.sequence
    k, top = sequence.k, sequence.top
    if not 1 <= j <= ceil_quarter(k):
        raise DomainError(f"j = {j} outside 1..ceil(k/4) = {ceil_quarter(k)}")
    sequence.check_lemma_admissible()

    family = RectFamily(
        level=j,
        k=k,
        x_translates=level_translates(crystal.x_set, j),
        y_translates=long_intervals(crystal.y_set, j),
        x_union=RareSet1D.constraint_set(top, sequence.exponents[j:], crystal.engine),
        y_union=RareSet1D.constraint_set(top, sequence.exponents[k - j :], crystal.engine),
    )

    expected_count = 1 << (2 * top - sequence.m(k - j + 1) - k)
    if family.count != expected_count:
        raise EngineDisagreementError(
            f"level {j}: {family.count} rectangles, expected 2^(2m_k - m_(k-j+1) - k)"
        )
    if family.area_log2 != sequence.m(k - j + 1):
        raise EngineDisagreementError(f"level {j}: rectangle area is not 2^m_(k-j+1)")
    if family.union_measure != DyadicScalar.pow2(2 * top - k):
        raise EngineDisagreementError(f"level {j}: union measure is not 2^(2m_k - k)")
    if family.x_translates.union_measure() != family.x_union.measure() or (
        family.y_translates.union_measure() != family.y_union.measure()
    ):
        raise EngineDisagreementError(f"level {j}: translates do not fill their unions")
    logger.debug("level %d family: %d rectangles of area 2^%d", j, family.count, family.area_log2)
    return family


def check_family_averages(
    crystal: Crystal2D, family: RectFamily, rng: random.Random | None = None
) -> int:
    """
    Check that members average exactly 2^{-k}: every member for small families,
    a seeded sample otherwise. Returns the number of members checked.
    """
    target = DyadicScalar.pow2(-family.k)
    if family.count <= get_setting("EXHAUSTIVE_CHECK_MAX"):
        members = list(family.iter_members())
    else:
        rng = rng or random.Random(get_setting("SAMPLE_SEED"))
        members = family.sample_members(rng, get_setting("SAMPLE_SIZE"))
    for rect in members:
        value = rect_average(crystal, rect)
        if value != target:
            raise EngineDisagreementError(
                f"level {family.level}: rectangle {rect.to_json()} averages {value}, not {target}"
            )
    return len(members)


def _translates_disjoint(
    translates: TranslateList, sample: int, rng: random.Random
) -> bool:
    length = 1 << translates.block_length_log2
    if translates.explicit is not None or translates.count <= get_setting(
        "EXHAUSTIVE_CHECK_MAX"
    ):
        # Sorted adjacency covers every pair.
        offsets = sorted(translates.iter_offsets())
        return all(b - a >= length for a, b in itertools.pairwise(offsets))
    if not translates.is_structurally_disjoint():
        return False
    for _ in range(sample):
        a, b = rng.randrange(translates.count), rng.randrange(translates.count)
        if a == b:
            continue
        if abs(translates.offset(a) - translates.offset(b)) < length:
            return False
    return True


def verify_pairwise_disjoint(family: RectFamily, sample: int = 1000) -> bool:
    """
    Disjoint x-translates and disjoint y-intervals make the product family
    pairwise disjoint.
    """
    rng = random.Random(get_setting("SAMPLE_SEED"))
    return _translates_disjoint(family.x_translates, sample, rng) and _translates_disjoint(
        family.y_translates, sample, rng
    )


@dataclass(frozen=True)
class Region2D:
    """
    A finite union of products A_i x B_i of constraint sets, or an explicit
    raster over the unit cells of the domain.
    """

    domain_log2: int
    products: tuple[tuple[RareSet1D, RareSet1D], ...] = ()
    raster: np.ndarray | None = field(default=None, compare=False, repr=False)

    def measure(self) -> DyadicScalar:
        if self.raster is not None:
            return DyadicScalar(int(np.count_nonzero(self.raster)))
        # Inclusion-exclusion; intersections of constraint sets stay constraint sets.
        total = ZERO
        for size in range(1, len(self.products) + 1):
            sign = 1 if size % 2 else -1
            for subset in itertools.combinations(self.products, size):
                a, b = subset[0]
                for other_a, other_b in subset[1:]:
                    a, b = a.intersect(other_a), b.intersect(other_b)
                total = total + sign * (a.measure() * b.measure())
        return total

    def rasterize(self) -> np.ndarray:
        if self.raster is not None:
            return self.raster
        if self.domain_log2 > get_setting("RASTER_2D_MAX_LOG2"):
            raise EnumerationLimitError(
                f"2D raster limited to m_k <= {get_setting('RASTER_2D_MAX_LOG2')}"
            )
        size = 1 << self.domain_log2
        mask = np.zeros((size, size), dtype=bool)
        for a, b in self.products:
            mask |= np.outer(
                a.with_engine(Engine.BITSET).cells, b.with_engine(Engine.BITSET).cells
            )
        return mask

    def is_subset(self, other: "Region2D") -> bool:
        mine, theirs = self.rasterize(), other.rasterize()
        return bool(np.all(theirs[mine]))

    @classmethod
    def from_rectangles(cls, domain_log2: int, rects) -> "Region2D":
        size = 1 << domain_log2
        coverage = np.zeros((size + 1, size + 1), dtype=np.int64)
        for rect in rects:
            x, y = rect.x_offset.floor(), rect.y_offset.floor()
            w, h = 1 << rect.width_log2, 1 << rect.height_log2
            coverage[x, y] += 1
            coverage[x + w, y] -= 1
            coverage[x, y + h] -= 1
            coverage[x + w, y + h] += 1
        covered = coverage.cumsum(axis=0).cumsum(axis=1)[:size, :size] > 0
        return cls(domain_log2=domain_log2, raster=covered)


@dataclass(frozen=True)
class StaircaseUnion:
    union_measure: DyadicScalar
    overlaps: dict[tuple[int, int], DyadicScalar]
    region: Region2D


def union_measure_staircase(
    crystal: Crystal2D, J: int, families: list[RectFamily] | None = None
) -> StaircaseUnion:
    """
    Exact measure of U_1 u ... u U_J with U_j = X_j x Y_j. The X_j increase
    and the Y_j decrease with j, so the union is a staircase:
    sum_j (mu(X_j) - mu(X_{j-1})) mu(Y_j) with X_0 empty.
    """
    sequence = crystal.sequence
    if not 0 <= J <= ceil_quarter(sequence.k):
        raise DomainError(f"J = {J} outside 0..ceil(k/4) = {ceil_quarter(sequence.k)}")
    if families is None:
        families = [build_rect_family(crystal, j) for j in range(1, J + 1)]
    families = families[:J]

    total = ZERO
    previous_x = ZERO
    for index, family in enumerate(families):
        if index and not (
            families[index - 1].x_union.is_subset(family.x_union)
            and family.y_union.is_subset(families[index - 1].y_union)
        ):
            raise EngineDisagreementError(f"level {family.level} breaks the staircase nesting")
        x_measure = family.x_union.measure()
        total = total + (x_measure - previous_x) * family.y_union.measure()
        previous_x = x_measure

    overlaps = {}
    for first, second in itertools.combinations(families, 2):
        overlap = first.x_union.intersect(second.x_union).measure() * first.y_union.intersect(
            second.y_union
        ).measure()
        overlaps[(first.level, second.level)] = overlap

    region = Region2D(
        domain_log2=crystal.domain_log2,
        products=tuple((family.x_union, family.y_union) for family in families),
    )
    if len(families) <= 8 and region.measure() != total:
        raise EngineDisagreementError("staircase union differs from inclusion-exclusion")
    return StaircaseUnion(union_measure=total, overlaps=overlaps, region=region)


@dataclass(frozen=True)
class FamilyRecord:
    j: int
    count: int
    width_log2: int
    height_log2: int
    union_measure: DyadicScalar
    members_checked: int
    disjoint: bool

    @property
    def area_log2(self) -> int:
        return self.width_log2 + self.height_log2

    def to_json(self) -> dict[str, Any]:
        return {
            "j": self.j,
            "count": str(self.count),
            "area_log2": self.area_log2,
            "width_log2": self.width_log2,
            "height_log2": self.height_log2,
            "union_measure": self.union_measure.to_json(),
            "members_checked": self.members_checked,
            "disjoint": self.disjoint,
        }


@dataclass(frozen=True)
class CertificateLemma1:
    sequence: ExponentSequence
    J: int
    families: tuple[FamilyRecord, ...]
    union_measure: DyadicScalar
    accounted_measure: DyadicScalar
    bound: DyadicScalar
    overlaps: dict[tuple[int, int], DyadicScalar]
    cross_check: str

    @property
    def k(self) -> int:
        return self.sequence.k

    @property
    def passed(self) -> bool:
        return self.union_measure >= self.bound and all(f.disjoint for f in self.families)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "lemma1",
            "sequence": self.sequence.to_json(),
            "k": self.k,
            "J": self.J,
            "families": [family.to_json() for family in self.families],
            "union_measure": self.union_measure.to_json(),
            "accounted_measure": self.accounted_measure.to_json(),
            "paper_bound": self.bound.to_json(),
            "overlaps": [
                {"j": a, "j2": b, "measure": value.to_json()}
                for (a, b), value in sorted(self.overlaps.items())
            ],
            "cross_check": self.cross_check,
            "pass": self.passed,
        }


def _family_task(args) -> tuple[RectFamily, FamilyRecord]:
    exponents, engine, j = args
    crystal = build_crystal(ExponentSequence(exponents), engine)
    family = build_rect_family(crystal, j)
    checked = check_family_averages(crystal, family)
    record = FamilyRecord(
        j=j,
        count=family.count,
        width_log2=family.rect_width_log2,
        height_log2=family.rect_height_log2,
        union_measure=family.union_measure,
        members_checked=checked,
        disjoint=verify_pairwise_disjoint(family, get_setting("SAMPLE_SIZE")),
    )
    return family, record


def _cross_check_union(
    crystal: Crystal2D, families: list[RectFamily], staircase: StaircaseUnion
) -> str:
    top = crystal.domain_log2
    if crystal.engine is not Engine.BOTH or top > get_setting("CROSS_CHECK_MAX_LOG2"):
        return "none"
    if top <= get_setting("RASTER_2D_MAX_LOG2") and all(
        family.count <= get_setting("EXHAUSTIVE_CHECK_MAX") for family in families
    ):
        rects = itertools.chain.from_iterable(family.iter_members() for family in families)
        raster = Region2D.from_rectangles(top, rects)
        if raster.measure() != staircase.union_measure or not np.array_equal(
            raster.rasterize(), staircase.region.rasterize()
        ):
            raise EngineDisagreementError(
                f"rasterized rectangles cover {raster.measure()},"
                f" staircase gives {staircase.union_measure}"
            )
        return "raster-2d"

    # Group x cells by which X_j contain them and measure the union of the
    # matching Y_j with bitsets.
    x_cells = np.stack([f.x_union.with_engine(Engine.BITSET).cells for f in families])
    y_cells = [f.y_union.with_engine(Engine.BITSET).cells for f in families]
    weights = (1 << np.arange(len(families), dtype=np.int64))[:, None]
    patterns = np.bincount((x_cells * weights).sum(axis=0), minlength=1 << len(families))
    total = 0
    for pattern, width in enumerate(patterns):
        if not pattern or not width:
            continue
        column = np.zeros(crystal.y_set.domain_size, dtype=bool)
        for index, cells in enumerate(y_cells):
            if pattern >> index & 1:
                column |= cells
        total += int(width) * int(np.count_nonzero(column))
    if DyadicScalar(total) != staircase.union_measure:
        raise EngineDisagreementError(
            f"bitset union measure {total} differs from staircase {staircase.union_measure}"
        )
    return "bitset-1d"


def lemma1_certificate(
    sequence: ExponentSequence, engine: Engine = Engine.SYMBOLIC, parallel: int = 1
) -> CertificateLemma1:
    sequence.check_lemma_admissible()
    k, top = sequence.k, sequence.top
    J = ceil_quarter(k)
    crystal = build_crystal(sequence, engine)
    crystal.measure()

    results = ordered_map(
        _family_task, [(sequence.exponents, engine, j) for j in range(1, J + 1)], parallel
    )
    families = [family for family, _ in results]
    records = tuple(record for _, record in results)

    staircase = union_measure_staircase(crystal, J, families)
    level = DyadicScalar.pow2(2 * top - k)
    for (a, b), overlap in staircase.overlaps.items():
        if overlap != level.scale(-abs(a - b)):
            raise EngineDisagreementError(f"overlap of levels {a}, {b} breaks 2^-|j-j'| law")
    cross_check = _cross_check_union(crystal, families, staircase)

    certificate = CertificateLemma1(
        sequence=sequence,
        J=J,
        families=records,
        union_measure=staircase.union_measure,
        accounted_measure=DyadicScalar(J) * level.scale(-1),
        bound=DyadicScalar(k) * level.scale(-3),
        overlaps=staircase.overlaps,
        cross_check=cross_check,
    )
    logger.info(
        "lemma certificate %s: union %s, bound %s, pass=%s",
        sequence.exponents,
        certificate.union_measure,
        certificate.bound,
        certificate.passed,
    )
    return certificate


def brute_force_superlevel(crystal: Crystal2D, level: DyadicScalar) -> Region2D:
    """
    Union of every unit-grid rectangle with dyadic sides 2^a x 2^{m_i - a}
    whose average of the crystal indicator is at least `level`.
    """
    top = crystal.domain_log2
    if top > get_setting("ORACLE_MAX_LOG2"):
        raise EnumerationLimitError(
            f"brute-force oracle limited to m_k <= {get_setting('ORACLE_MAX_LOG2')}"
        )
    level = DyadicScalar.coerce(level)
    size = 1 << top
    table = np.zeros((size + 1, size + 1), dtype=np.int64)
    table[1:, 1:] = crystal.cells().astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    coverage = np.zeros((size + 1, size + 1), dtype=np.int64)

    for area_log2 in crystal.sequence.exponents:
        for a in range(max(0, area_log2 - top), min(area_log2, top) + 1):
            w, h = 1 << a, 1 << (area_log2 - a)
            counts = table[w:, h:] - table[:-w, h:] - table[w:, :-h] + table[:-w, :-h]
            # count / 2^area >= mantissa * 2^-exponent, compared in integers
            if level.exponent >= 0:
                hits = (counts << level.exponent) >= (level.mantissa << area_log2)
            else:
                hits = counts >= (level.mantissa << (area_log2 - level.exponent))
            hits = hits.astype(np.int64)
            coverage[: size - w + 1, : size - h + 1] += hits
            coverage[w:, : size - h + 1] -= hits
            coverage[: size - w + 1, h:] -= hits
            coverage[w:, h:] += hits

    covered = coverage.cumsum(axis=0).cumsum(axis=1)[:size, :size] > 0
    return Region2D(domain_log2=top, raster=covered)


@dataclass(frozen=True)
class OracleCheck:
    sequence: ExponentSequence
    level: DyadicScalar
    certificate_measure: DyadicScalar
    oracle_measure: DyadicScalar
    included: bool

    @property
    def passed(self) -> bool:
        return self.included and self.certificate_measure <= self.oracle_measure

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "oracle",
            "sequence": self.sequence.to_json(),
            "level": self.level.to_json(),
            "certificate_measure": self.certificate_measure.to_json(),
            "oracle_measure": self.oracle_measure.to_json(),
            "included": self.included,
            "pass": self.passed,
        }


def oracle_check(sequence: ExponentSequence, engine: Engine = Engine.SYMBOLIC) -> OracleCheck:
    """Certificate region at level 2^{-k} must sit inside the brute-force superlevel set."""
    sequence.check_lemma_admissible()
    crystal = build_crystal(sequence, engine)
    level = DyadicScalar.pow2(-sequence.k)
    staircase = union_measure_staircase(crystal, ceil_quarter(sequence.k))
    oracle = brute_force_superlevel(crystal, level)
    return OracleCheck(
        sequence=sequence,
        level=level,
        certificate_measure=staircase.union_measure,
        oracle_measure=oracle.measure(),
        included=staircase.region.is_subset(oracle),
    )
