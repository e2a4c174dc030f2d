"""
Three-dimensional lift of the crystals: Z_k = Q_k x [0, 1], the parallelepipeds
R x [0, 2^{k-r}] built over the level-r rectangles of every copy of Q_r inside
Q_k, and the slab-by-slab lower bound for the superlevel set of the basis
maximal operator at level 2^{-k}.
"""

from dataclasses import dataclass, field
import itertools
import logging
from typing import Any, Callable, Iterator

import numpy as np

from crystal_certificates.default_settings import get_setting

from .crystal2d import (
    Crystal2D,
    DyadicRect,
    build_crystal,
    build_rect_family,
    rect_average,
    union_measure_staircase,
)
from .dyadic import ZERO, DyadicInterval, DyadicScalar
from .exceptions import (
    CapacityError,
    DomainError,
    EngineDisagreementError,
    EnumerationLimitError,
    SequenceValidationError,
)
from .rare_sets import (
    Engine,
    ExponentSequence,
    build_rare_set,
    ceil_quarter,
    decompose_into_copies,
)
from .workers import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasisSpec:
    """
    The set S of admissible area exponents: parallelepipeds with sides
    s, 2^N / s, t for N in S. Either an explicit finite list or an infinite
    rule given by a membership predicate and an increasing generator.
    """

    name: str
    members: Callable[[int], bool] = field(compare=False)
    generate: Callable[[], Iterator[int]] = field(compare=False)
    values: tuple[int, ...] | None = None
    params: tuple[tuple[str, int], ...] = ()

    @classmethod
    def finite(cls, values) -> "BasisSpec":
        values = tuple(sorted(set(values)))
        if not values:
            raise SequenceValidationError("S must be a nonempty set of naturals")
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in values):
            raise SequenceValidationError(f"S must contain naturals only, got {list(values)}")
        return cls(
            name="finite",
            members=frozenset(values).__contains__,
            generate=lambda: iter(values),
            values=values,
        )

    @classmethod
    def doubling(cls, m1: int) -> "BasisSpec":
        """S = {m1, 2 m1, 4 m1, ...}"""
        if m1 < 1:
            raise SequenceValidationError(f"m1 = {m1} must be at least 1")

        def members(n: int) -> bool:
            quotient, remainder = divmod(n, m1)
            return remainder == 0 and quotient > 0 and quotient & (quotient - 1) == 0

        return cls(
            name="doubling",
            members=members,
            generate=lambda: (m1 << i for i in itertools.count()),
            params=(("m1", m1),),
        )

    @classmethod
    def tower(cls) -> "BasisSpec":
        """S = {2^(n^n) : n >= 1}, a rare basis growing faster than any doubling rule."""

        def members(value: int) -> bool:
            if value < 1 or value & (value - 1):
                return False
            exponent = value.bit_length() - 1
            n = 1
            while n**n < exponent:
                n += 1
            return n**n == exponent

        return cls(
            name="tower",
            members=members,
            generate=lambda: (1 << (n**n) for n in itertools.count(1)),
        )

    @classmethod
    def infinite(
        cls, name: str, members: Callable[[int], bool], generate: Callable[[], Iterator[int]]
    ) -> "BasisSpec":
        return cls(name=name, members=members, generate=generate)

    @property
    def is_finite(self) -> bool:
        return self.values is not None

    def _greedy(self, limit: int | None = None) -> Iterator[int]:
        # Smallest element, then repeatedly the smallest element at least twice the last.
        last = None
        produced = 0
        for value in self.generate():
            if limit is not None and produced >= limit:
                return
            if last is None or value >= 2 * last:
                yield value
                last = value
                produced += 1

    @property
    def capacity(self) -> int | None:
        """Longest doubling chain in S (None when S is infinite)."""
        if not self.is_finite:
            return None
        return sum(1 for _ in self._greedy())

    def subsequence(self, k: int) -> ExponentSequence:
        if k < 1:
            raise DomainError(f"k = {k} must be at least 1")
        chosen = tuple(self._greedy(limit=k))
        if len(chosen) < k:
            raise CapacityError(
                f"finite S = {list(self.values)} holds a doubling chain of length"
                f" {len(chosen)} only, k = {k} requested"
            )
        sequence = ExponentSequence(chosen)
        sequence.check_symbolic_range()
        if any(not self.members(m) for m in chosen):
            raise EngineDisagreementError("greedy subsequence left S")
        return sequence

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.name}
        if self.values is not None:
            data["values"] = list(self.values)
        data.update(dict(self.params))
        return data


@dataclass(frozen=True)
class Crystal3D:
    base: Crystal2D

    def measure(self) -> DyadicScalar:
        # Height interval [0, 1] contributes a factor 1.
        return self.base.measure()


def build_crystal3d(sequence: ExponentSequence, engine: Engine = Engine.SYMBOLIC) -> Crystal3D:
    return Crystal3D(base=build_crystal(sequence, engine))


@dataclass(frozen=True)
class Cylinder:
    base: DyadicRect
    z_interval: DyadicInterval
    # The top half of the z interval, the part counted in the slab argument.
    slab: DyadicInterval

    def is_admissible(self, sequence: ExponentSequence) -> bool:
        return self.base.is_admissible(sequence)

    def to_json(self) -> dict[str, Any]:
        return {
            "base": self.base.to_json(),
            "z": self.z_interval.to_json(),
            "slab": self.slab.to_json(),
        }


def lift_rect(rect: DyadicRect, r: int, k: int) -> Cylinder:
    if not 1 <= r <= k:
        raise DomainError(f"r = {r} outside 1..{k}")
    height_log2 = k - r
    return Cylinder(
        base=rect,
        z_interval=DyadicInterval(ZERO, height_log2),
        slab=DyadicInterval(DyadicScalar.pow2(height_log2 - 1), height_log2 - 1),
    )


def cylinder_average(crystal: Crystal3D, cylinder: Cylinder) -> DyadicScalar:
    """Exact average of the indicator of Z_k = Q_k x [0, 1] over the cylinder."""
    z = cylinder.z_interval
    low = max(z.left, ZERO)
    high = min(z.right, DyadicScalar(1))
    overlap = high - low if high > low else ZERO
    return rect_average(crystal.base, cylinder.base) * overlap.scale(-z.length_log2)


def copy_count_log2(sequence: ExponentSequence, r: int) -> int:
    """log2 of the number of copies of Q_r making up Q_k."""
    if not 1 <= r <= sequence.k:
        raise DomainError(f"r = {r} outside 1..{sequence.k}")
    return 2 * (sequence.top - sequence.m(r) - sequence.k + r)


def copy_count(sequence: ExponentSequence, r: int) -> int:
    return 1 << copy_count_log2(sequence, r)


@dataclass(frozen=True)
class SlabRecord:
    r: int
    copies_log2: int
    per_copy_measure: DyadicScalar
    per_copy_union: DyadicScalar
    height_log2: int
    contribution: DyadicScalar
    slab_bound: DyadicScalar

    @property
    def copies(self) -> int:
        return 1 << self.copies_log2

    def copies_text(self) -> str:
        # Decimal while it stays printable, a power of two beyond that.
        if self.copies_log2 <= 4096:
            return str(self.copies)
        return f"2^{self.copies_log2}"

    @property
    def z_interval(self) -> DyadicInterval:
        return DyadicInterval(DyadicScalar.pow2(self.height_log2), self.height_log2)

    @property
    def passed(self) -> bool:
        return self.contribution >= self.slab_bound

    def to_json(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "copies": self.copies_text(),
            "copies_log2": self.copies_log2,
            "per_copy_measure": self.per_copy_measure.to_json(),
            "per_copy_union": self.per_copy_union.to_json(),
            "height_log2": self.height_log2,
            "slab": self.z_interval.to_json(),
            "contribution": self.contribution.to_json(),
            "slab_bound": self.slab_bound.to_json(),
        }


def slab_contribution(
    sequence: ExponentSequence, r: int, engine: Engine = Engine.SYMBOLIC
) -> SlabRecord:
    """
    Lower bound for the superlevel set inside the slab [2^{k-r-1}, 2^{k-r}]:
    copies of Q_r times the per-copy superlevel measure at scale r times the
    slab height. The per-copy measure is the level-r lemma accounting
    (ceil(r/4)/2) 2^{2 m_r - r}; the exact per-copy union is computed too and
    must dominate it.
    """
    k, top = sequence.k, sequence.top
    if not 1 <= r <= k:
        raise DomainError(f"r = {r} outside 1..{k}")
    prefix = sequence.prefix(r)
    prefix.check_lemma_admissible()

    copies_log2 = copy_count_log2(sequence, r)
    one_dimensional = decompose_into_copies(build_rare_set(sequence, engine), r).count
    if 2 * (one_dimensional.bit_length() - 1) != copies_log2:
        raise EngineDisagreementError(f"r = {r}: 2D copy count is not the square of the 1D count")

    J = ceil_quarter(r)
    per_copy = DyadicScalar(J) * DyadicScalar.pow2(2 * prefix.top - r - 1)
    per_copy_union = union_measure_staircase(build_crystal(prefix, engine), J).union_measure
    if per_copy_union < per_copy:
        raise EngineDisagreementError(f"r = {r}: exact per-copy union below its accounting")

    height_log2 = k - r - 1
    contribution = per_copy.scale(copies_log2 + height_log2)
    if contribution != DyadicScalar(J) * DyadicScalar.pow2(2 * top - k - 2):
        raise EngineDisagreementError(f"r = {r}: contribution breaks ceil(r/4) 2^(2m_k-k-2)")
    return SlabRecord(
        r=r,
        copies_log2=copies_log2,
        per_copy_measure=per_copy,
        per_copy_union=per_copy_union,
        height_log2=height_log2,
        contribution=contribution,
        slab_bound=DyadicScalar(r) * DyadicScalar.pow2(2 * top - k - 4),
    )


def _slab_task(args) -> SlabRecord:
    exponents, r, engine = args
    return slab_contribution(ExponentSequence(exponents), r, engine)


def rasterized_superlevel_lower_bound(
    sequence: ExponentSequence, engine: Engine = Engine.SYMBOLIC
) -> DyadicScalar:
    """
    Independent check of the slab argument on a 3D raster (half-unit cells in
    z): every level-r family rectangle of every copy of Q_r is moved into
    place, checked to average at least 2^{-r} against Q_k, lifted, checked to
    average at least 2^{-k} against Z_k, and its counted top half is marked.
    Returns the measure of everything marked.
    """
    k, top = sequence.k, sequence.top
    if 2 * top + k + 1 > get_setting("BITSET_MAX_LOG2"):
        raise EnumerationLimitError("3D slab raster limited to 2 m_k + k + 1 <= bitset cap")
    crystal = build_crystal3d(sequence, engine)
    size, depth = 1 << top, 1 << (k + 1)
    marked = np.zeros((size, size, depth), dtype=bool)
    target = DyadicScalar.pow2(-k)

    for r in range(1, k + 1):
        local = build_crystal(sequence.prefix(r), engine)
        rects = [
            rect
            for j in range(1, ceil_quarter(r) + 1)
            for rect in build_rect_family(local, j).iter_members()
        ]
        copies = list(decompose_into_copies(crystal.base.x_set, r).iter_offsets())
        for rect, ox, oy in itertools.product(rects, copies, copies):
            moved = DyadicRect(
                rect.x_offset + ox, rect.y_offset + oy, rect.width_log2, rect.height_log2
            )
            if rect_average(crystal.base, moved) < DyadicScalar.pow2(-r):
                raise EngineDisagreementError(f"moved level-{r} rectangle lost its average")
            cylinder = lift_rect(moved, r, k)
            if not cylinder.is_admissible(sequence) or cylinder_average(crystal, cylinder) < target:
                raise EngineDisagreementError(f"lifted level-{r} cylinder is not a witness")
            x, y = moved.x_offset.floor(), moved.y_offset.floor()
            z = cylinder.slab.left.scale(1).floor()
            marked[
                x : x + (1 << moved.width_log2),
                y : y + (1 << moved.height_log2),
                z : z + (1 << (cylinder.slab.length_log2 + 1)),
            ] = True
    return DyadicScalar(int(np.count_nonzero(marked))).scale(-1)


@dataclass(frozen=True)
class CertificateTheorem:
    basis: BasisSpec
    sequence: ExponentSequence
    slabs: tuple[SlabRecord, ...]
    total: DyadicScalar
    bound: DyadicScalar
    mu3: DyadicScalar
    cross_check: str

    @property
    def k(self) -> int:
        return self.sequence.k

    @property
    def passed(self) -> bool:
        return self.total >= self.bound and all(slab.passed for slab in self.slabs)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "theorem",
            "basis": self.basis.to_json(),
            "sequence": self.sequence.to_json(),
            "k": self.k,
            "slabs": [slab.to_json() for slab in self.slabs],
            "total": self.total.to_json(),
            "mu3": self.mu3.to_json(),
            "paper_bound": self.bound.to_json(),
            "cross_check": self.cross_check,
            "pass": self.passed,
        }


def theorem_certificate(
    basis: BasisSpec, k: int, engine: Engine = Engine.SYMBOLIC, parallel: int = 1
) -> CertificateTheorem:
    sequence = basis.subsequence(k)
    sequence.check_doubling()
    top = sequence.top

    slabs = tuple(
        ordered_map(_slab_task, [(sequence.exponents, r, engine) for r in range(1, k + 1)], parallel)
    )
    for first, second in itertools.combinations(slabs, 2):
        if first.z_interval.overlaps(second.z_interval):
            raise EngineDisagreementError(f"slabs r={first.r} and r={second.r} overlap")
    if any(not slab.z_interval.is_within(0, DyadicScalar.pow2(k - 1)) for slab in slabs):
        raise EngineDisagreementError("a slab leaves [0, 2^(k-1)]")

    total = sum((slab.contribution for slab in slabs), ZERO)
    quarters = sum(ceil_quarter(r) for r in range(1, k + 1))
    if total != DyadicScalar(quarters) * DyadicScalar.pow2(2 * top - k - 2):
        raise EngineDisagreementError("slab total breaks sum ceil(r/4) 2^(2m_k-k-2)")

    mu3 = build_crystal3d(sequence, engine).measure()
    # (1/32) (k^2 / 2^-k) mu_3(Z_k)
    bound = (DyadicScalar(k * k) * mu3).scale(k - 5)

    cross_check = "none"
    if engine is Engine.BOTH and 2 * top + k + 1 <= get_setting("BITSET_MAX_LOG2"):
        exact = sum(
            (s.per_copy_union.scale(s.copies_log2 + s.height_log2) for s in slabs),
            ZERO,
        )
        rasterized = rasterized_superlevel_lower_bound(sequence, engine)
        if rasterized != exact:
            raise EngineDisagreementError(
                f"3D raster of the lifted slabs measures {rasterized}, expected {exact}"
            )
        cross_check = "raster-3d"

    certificate = CertificateTheorem(
        basis=basis,
        sequence=sequence,
        slabs=slabs,
        total=total,
        bound=bound,
        mu3=mu3,
        cross_check=cross_check,
    )
    logger.info(
        "theorem certificate k=%d %s: total %s, bound %s, pass=%s",
        k,
        sequence.exponents,
        total,
        bound,
        certificate.passed,
    )
    return certificate
