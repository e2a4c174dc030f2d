"""
One-dimensional rare sets

    Y_k = {t in [0, 2^{m_k}) : r_0(t / 2^{m_1}) + ... + r_0(t / 2^{m_k}) = k}

and the translate families used to build the crystals.

Two interchangeable engines answer every query:

* the symbolic engine works with the modulus-constraint form
  ``{t : (t mod 2^e) < 2^{e-1} for e in scales}``. On the unit-cell grid the
  constraint for scale e says that bit e-1 of the cell index is zero, so
  counting cells in any integer interval reduces to a digit count over the
  binary expansion of the endpoints, exact for any domain size;
* the bitset engine rasterizes the set over the 2^{m_k} unit cells with numpy.

Engine.BOTH answers from the symbolic engine and, whenever the domain is small
enough, recomputes with the bitset engine and refuses to continue on any
difference.
"""

from dataclasses import dataclass
from enum import Enum
import functools
import itertools
import logging
import math
import random
from typing import Any, Callable, Iterator

import numpy as np

from crystal_certificates.default_settings import get_setting

from .dyadic import DyadicInterval, DyadicScalar
from .exceptions import (
    AdmissibilityError,
    DomainError,
    EngineDisagreementError,
    EnumerationLimitError,
    SequenceValidationError,
)

logger = logging.getLogger(__name__)


class Engine(str, Enum):
    BITSET = "bitset"
    SYMBOLIC = "symbolic"
    BOTH = "both"


def ceil_quarter(k: int) -> int:
    return -(-k // 4)


@dataclass(frozen=True)
class ExponentSequence:
    """
    The scales m_1 < m_2 < ... < m_k of a rare basis. Only structural validity
    is enforced on construction; the two admissibility conditions are checked
    by the operations that rely on them.
    """

    exponents: tuple[int, ...]

    def __post_init__(self):
        exponents = tuple(self.exponents)
        if not exponents:
            raise SequenceValidationError("an exponent sequence needs at least one term")
        for index, value in enumerate(exponents, start=1):
            if isinstance(value, bool) or not isinstance(value, int):
                raise SequenceValidationError(f"m_{index} = {value!r} is not an integer")
            if value < 1:
                raise SequenceValidationError(f"m_{index} = {value} must be at least 1")
        for index in range(1, len(exponents)):
            if exponents[index] <= exponents[index - 1]:
                raise SequenceValidationError(
                    f"exponents must increase strictly: m_{index} = {exponents[index - 1]}"
                    f" >= m_{index + 1} = {exponents[index]}"
                )
        object.__setattr__(self, "exponents", exponents)

    @classmethod
    def from_doubling(cls, m1: int, k: int) -> "ExponentSequence":
        if k < 1:
            raise SequenceValidationError(f"k = {k} must be at least 1")
        return cls(tuple(m1 << i for i in range(k)))

    @property
    def k(self) -> int:
        return len(self.exponents)

    @property
    def top(self) -> int:
        return self.exponents[-1]

    def m(self, j: int) -> int:
        """1-based access, m(1) = m_1."""
        if not 1 <= j <= self.k:
            raise DomainError(f"index {j} outside 1..{self.k}")
        return self.exponents[j - 1]

    def prefix(self, r: int) -> "ExponentSequence":
        if not 1 <= r <= self.k:
            raise DomainError(f"prefix length r = {r} outside 1..{self.k}")
        return ExponentSequence(self.exponents[:r])

    def lemma_violation(self) -> AdmissibilityError | None:
        k = self.k
        for j in range(1, k // 2 + 1):
            lhs = self.m(k - j)
            rhs = self.m(k - j + 1) - self.m(j)
            if lhs > rhs:
                return AdmissibilityError(
                    f"m_{{k-j}} <= m_{{k-j+1}} - m_j fails at j={j} ({lhs} > {rhs})",
                    index=j,
                )
        return None

    def is_lemma_admissible(self) -> bool:
        return self.lemma_violation() is None

    def check_lemma_admissible(self):
        violation = self.lemma_violation()
        if violation is not None:
            raise violation

    def doubling_violation(self) -> AdmissibilityError | None:
        for j in range(1, self.k):
            if 2 * self.m(j) > self.m(j + 1):
                return AdmissibilityError(
                    f"2 m_j <= m_{{j+1}} fails at j={j} ({2 * self.m(j)} > {self.m(j + 1)})",
                    index=j,
                )
        return None

    def is_doubling(self) -> bool:
        return self.doubling_violation() is None

    def check_doubling(self):
        violation = self.doubling_violation()
        if violation is not None:
            raise violation

    def check_symbolic_range(self):
        cap = get_setting("SYMBOLIC_MAX_EXPONENT")
        if self.top > cap:
            raise EnumerationLimitError(
                f"m_{self.k} is a {self.top.bit_length()}-bit exponent; symbolic"
                f" certificates stop at m_k <= {cap} (SYMBOLIC_MAX_EXPONENT)"
            )

    def to_json(self) -> list[int]:
        return list(self.exponents)


def rademacher(t: DyadicScalar | int) -> int:
    """
    r_0 extended 1-periodically: +1 on [0, 1/2], -1 on (1/2, 1) (closed left
    half, as in the classical definition).
    """
    t = DyadicScalar.coerce(t)
    fractional = t - t.floor()
    return 1 if fractional <= DyadicScalar.pow2(-1) else -1


def rademacher_member(sequence: ExponentSequence, t: DyadicScalar | int) -> bool:
    """Membership in Y_k straight from the Rademacher-sum definition."""
    t = DyadicScalar.coerce(t)
    if not 0 <= t <= DyadicScalar.pow2(sequence.top):
        return False
    total = sum(rademacher(t.scale(-m)) for m in sequence.exponents)
    return total == sequence.k


@dataclass(frozen=True)
class RareSet1D:
    """
    A modulus-constraint set on the domain [0, 2^domain_log2). Y_k is the
    constraint set whose scales are the whole sequence; `sequence` is kept
    for the operations that need the full Y_k structure.
    """

    domain_log2: int
    scales: tuple[int, ...]
    engine: Engine = Engine.SYMBOLIC
    sequence: ExponentSequence | None = None

    def __post_init__(self):
        scales = tuple(sorted(self.scales))
        if len(set(scales)) != len(scales):
            raise SequenceValidationError(f"constraint scales must be distinct, got {scales}")
        for scale in scales:
            if not 1 <= scale <= self.domain_log2:
                raise SequenceValidationError(
                    f"scale {scale} outside 1..{self.domain_log2} for this domain"
                )
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "engine", Engine(self.engine))

    @classmethod
    def constraint_set(
        cls, domain_log2: int, scales, engine: Engine = Engine.SYMBOLIC
    ) -> "RareSet1D":
        return cls(domain_log2=domain_log2, scales=tuple(scales), engine=engine)

    @classmethod
    def from_json(cls, data: dict[str, Any], engine: Engine = Engine.SYMBOLIC):
        return cls.constraint_set(int(data["domain_log2"]), data["scales"], engine=engine)

    def to_json(self) -> dict[str, Any]:
        return {"domain_log2": self.domain_log2, "scales": list(self.scales)}

    def with_engine(self, engine: Engine) -> "RareSet1D":
        return RareSet1D(self.domain_log2, self.scales, Engine(engine), self.sequence)

    def require_sequence(self) -> ExponentSequence:
        if self.sequence is None:
            raise DomainError("this operation needs a rare set built from a sequence")
        return self.sequence

    @property
    def domain_size(self) -> int:
        return 1 << self.domain_log2

    # Engine plumbing

    def cross_checkable(self) -> bool:
        return self.domain_log2 <= get_setting("CROSS_CHECK_MAX_LOG2")

    def resolve(self, what: str, symbolic: Callable[[], Any], bitset: Callable[[], Any]):
        if self.engine is Engine.SYMBOLIC:
            return symbolic()
        if self.engine is Engine.BITSET:
            return bitset()
        value = symbolic()
        if self.cross_checkable():
            check = bitset()
            if check != value:
                raise EngineDisagreementError(
                    f"{what}: symbolic engine gives {value}, bitset engine gives {check}"
                    f" (domain 2^{self.domain_log2}, scales {list(self.scales)})"
                )
            logger.debug("%s cross-checked: %s", what, value)
        return value

    # Bitset engine

    @functools.cached_property
    def cells(self) -> np.ndarray:
        """Boolean array over the unit cells [c, c + 1) of the domain."""
        if self.domain_log2 > get_setting("BITSET_MAX_LOG2"):
            raise EnumerationLimitError(
                f"bitset engine is limited to 2^{get_setting('BITSET_MAX_LOG2')} cells,"
                f" domain has 2^{self.domain_log2}"
            )
        index = np.arange(self.domain_size, dtype=np.int64)
        mask = np.ones(self.domain_size, dtype=bool)
        for scale in self.scales:
            mask &= ((index >> (scale - 1)) & 1) == 0
        return mask

    @functools.cached_property
    def cell_prefix(self) -> np.ndarray:
        """prefix[n] = number of member cells below n."""
        prefix = np.zeros(self.domain_size + 1, dtype=np.int64)
        np.cumsum(self.cells, out=prefix[1:])
        return prefix

    def to_hex(self) -> str:
        if self.domain_log2 > get_setting("CROSS_CHECK_MAX_LOG2"):
            raise EnumerationLimitError("hex export is limited to cross-checkable domains")
        return np.packbits(self.cells, bitorder="little").tobytes().hex()

    # Symbolic engine

    def count_below(self, n: int) -> int:
        """Number of member cells c with 0 <= c < n."""
        n = min(max(n, 0), self.domain_size)
        forbidden = {scale - 1 for scale in self.scales}
        total = 0
        for bit in range(n.bit_length() - 1, -1, -1):
            if not (n >> bit) & 1:
                continue
            # Cells agreeing with n above `bit`, with a 0 at `bit`, free below.
            free = bit - sum(1 for position in forbidden if position < bit)
            total += 1 << free
            if bit in forbidden:
                # Every remaining prefix now carries a forbidden 1.
                break
        return total

    def _symbolic_contains(self, t: DyadicScalar) -> bool:
        for scale in self.scales:
            period = DyadicScalar.pow2(scale)
            remainder = t - period * (t.scale(-scale).floor())
            if remainder >= DyadicScalar.pow2(scale - 1):
                return False
        return True

    # Queries

    def contains(self, t: DyadicScalar | int) -> bool:
        t = DyadicScalar.coerce(t)
        if not 0 <= t < self.domain_size:
            return False
        return self.resolve(
            "membership",
            lambda: self._symbolic_contains(t),
            lambda: bool(self.cells[t.floor()]),
        )

    def measure(self) -> DyadicScalar:
        return self.resolve(
            "measure",
            # Distinct integer scales: every constraint halves each surviving block.
            lambda: DyadicScalar.pow2(self.domain_log2 - len(self.scales)),
            lambda: DyadicScalar(int(np.count_nonzero(self.cells))),
        )

    def count_between(self, lower: int, upper: int) -> int:
        return self.resolve(
            "cell count",
            lambda: self.count_below(upper) - self.count_below(lower),
            lambda: int(self.cell_prefix[upper] - self.cell_prefix[lower]),
        )

    def intersect(self, other: "RareSet1D") -> "RareSet1D":
        if other.domain_log2 != self.domain_log2:
            raise DomainError("constraint sets live on different domains")
        return RareSet1D(
            self.domain_log2,
            tuple(set(self.scales) | set(other.scales)),
            self.engine,
        )

    def is_subset(self, other: "RareSet1D") -> bool:
        return other.domain_log2 == self.domain_log2 and set(other.scales) <= set(
            self.scales
        )


def build_rare_set(
    sequence: ExponentSequence, engine: Engine = Engine.SYMBOLIC
) -> RareSet1D:
    if not isinstance(sequence, ExponentSequence):
        sequence = ExponentSequence(tuple(sequence))
    rare_set = RareSet1D(
        domain_log2=sequence.top,
        scales=sequence.exponents,
        engine=engine,
        sequence=sequence,
    )
    logger.debug("built Y_k for %s with engine %s", sequence.exponents, rare_set.engine.value)
    return rare_set


def measure(rare_set: RareSet1D) -> DyadicScalar:
    return rare_set.measure()


def average_over(rare_set: RareSet1D, interval: DyadicInterval) -> DyadicScalar:
    """Exact average of the indicator of `rare_set` over `interval`."""
    if not interval.on_unit_grid():
        raise DomainError(f"interval {interval.to_json()} is not on the unit-cell grid")
    if not interval.is_within(0, rare_set.domain_size):
        raise DomainError(
            f"interval {interval.to_json()} leaves the domain [0, 2^{rare_set.domain_log2})"
        )
    lower = interval.left.floor()
    upper = lower + (1 << interval.length_log2)
    return DyadicScalar(rare_set.count_between(lower, upper)).scale(-interval.length_log2)


@dataclass(frozen=True)
class TranslateList:
    """
    Offsets of pairwise disjoint translates of a block [0, 2^block_length_log2).

    Offsets built from the crystal structure form a mixed-radix set
    ``{sum(l_i * 2^{step_i}) : 0 <= l_i < radix_i}`` described by `digits`;
    they are generated lazily since counts grow like 2^{m_k}. Explicit offset
    lists are accepted too (used for hand-built families).
    """

    block_length_log2: int
    digits: tuple[tuple[int, int], ...] = ()
    explicit: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "digits", tuple(sorted((int(s), int(r)) for s, r in self.digits))
        )
        if self.explicit is not None:
            object.__setattr__(self, "explicit", tuple(int(o) for o in self.explicit))

    @classmethod
    def from_offsets(cls, offsets, block_length_log2: int) -> "TranslateList":
        return cls(block_length_log2=block_length_log2, explicit=tuple(offsets))

    @property
    def count(self) -> int:
        if self.explicit is not None:
            return len(self.explicit)
        return math.prod(radix for _, radix in self.digits)

    @property
    def is_enumerable(self) -> bool:
        return self.count <= 1 << get_setting("ENUMERATION_CAP_LOG2")

    def offset(self, index: int) -> int:
        if not 0 <= index < self.count:
            raise DomainError(f"translate index {index} outside 0..{self.count - 1}")
        if self.explicit is not None:
            return self.explicit[index]
        value = 0
        for step, radix in self.digits:
            index, digit = divmod(index, radix)
            value += digit << step
        return value

    def iter_offsets(self) -> Iterator[int]:
        if self.explicit is not None:
            yield from self.explicit
            return
        # Most significant digit varies slowest, so offsets come out increasing.
        ranges = [range(radix) for _, radix in reversed(self.digits)]
        steps = [step for step, _ in reversed(self.digits)]
        for combo in itertools.product(*ranges):
            yield sum(digit << step for digit, step in zip(combo, steps))

    @property
    def offsets(self) -> list[DyadicScalar] | None:
        if not self.is_enumerable:
            return None
        return [DyadicScalar(offset) for offset in self.iter_offsets()]

    def offset_array(self) -> np.ndarray:
        if not self.is_enumerable:
            raise EnumerationLimitError(f"{self.count} translates exceed the enumeration cap")
        return np.fromiter(self.iter_offsets(), dtype=np.int64, count=self.count)

    def intervals(self) -> Iterator[DyadicInterval]:
        for offset in self.iter_offsets():
            yield DyadicInterval(DyadicScalar(offset), self.block_length_log2)

    def sample(self, rng: random.Random, size: int) -> list[int]:
        if self.count <= size:
            return list(self.iter_offsets())
        return [self.offset(rng.randrange(self.count)) for _ in range(size)]

    def union_measure(self) -> DyadicScalar:
        return DyadicScalar(self.count).scale(self.block_length_log2)

    def is_structurally_disjoint(self) -> bool:
        """
        Alignment argument for mixed-radix offsets: the block fits below the
        smallest step and each digit's range stays below the next step, so
        distinct digit tuples give blocks that cannot meet.
        """
        if self.explicit is not None:
            return False
        if not self.digits:
            return True
        if self.block_length_log2 > self.digits[0][0]:
            return False
        for (step, radix), (next_step, _) in zip(self.digits, self.digits[1:]):
            if (radix << step) > (1 << next_step):
                return False
        return True

    def to_json(self) -> dict[str, Any]:
        data = {
            "count": str(self.count),
            "block_length_log2": self.block_length_log2,
        }
        if self.explicit is not None:
            data["offsets"] = [str(offset) for offset in self.explicit]
        else:
            data["digits"] = [[step, str(radix)] for step, radix in self.digits]
        return data


def _copy_digits(sequence: ExponentSequence, start: int) -> list[tuple[int, int]]:
    # l_i * 2^{m_i} with 0 <= l_i < 2^{m_{i+1} - m_i - 1}, i = start..k-1
    sequence.check_symbolic_range()
    return [
        (sequence.m(i), 1 << (sequence.m(i + 1) - sequence.m(i) - 1))
        for i in range(start, sequence.k)
    ]


def _window_counts(rare_set: RareSet1D, offsets: np.ndarray, length_log2: int) -> np.ndarray:
    prefix = rare_set.with_engine(Engine.BITSET).cell_prefix
    return prefix[offsets + (1 << length_log2)] - prefix[offsets]


def _union_cells(domain_log2: int, offsets: np.ndarray, length_log2: int) -> np.ndarray:
    coverage = np.zeros((1 << domain_log2) + 1, dtype=np.int64)
    np.add.at(coverage, offsets, 1)
    np.add.at(coverage, offsets + (1 << length_log2), -1)
    return np.cumsum(coverage[:-1])


def _cross_check_translates(
    rare_set: RareSet1D,
    translates: TranslateList,
    expected_average: DyadicScalar,
    union_scales: tuple[int, ...],
    what: str,
):
    if rare_set.engine is not Engine.BOTH or not rare_set.cross_checkable():
        return
    offsets = translates.offset_array()
    counts = _window_counts(rare_set, offsets, translates.block_length_log2)
    expected_count = expected_average.scale(translates.block_length_log2)
    if not expected_count.is_integer() or not np.all(counts == expected_count.floor()):
        raise EngineDisagreementError(
            f"{what}: a translate misses the average {expected_average}"
        )
    coverage = _union_cells(rare_set.domain_log2, offsets, translates.block_length_log2)
    if coverage.max(initial=0) > 1:
        raise EngineDisagreementError(f"{what}: translates overlap")
    claimed = RareSet1D.constraint_set(rare_set.domain_log2, union_scales, Engine.BITSET)
    if not np.array_equal(coverage == 1, claimed.cells):
        raise EngineDisagreementError(
            f"{what}: union differs from the constraint set with scales {list(union_scales)}"
        )
    logger.debug("%s: %d translates cross-checked by bitset", what, translates.count)


def decompose_into_copies(rare_set: RareSet1D, r: int) -> TranslateList:
    """Offsets of the disjoint copies of Y_r whose union is Y_k."""
    sequence = rare_set.require_sequence()
    if not 1 <= r <= sequence.k:
        raise DomainError(f"r = {r} outside 1..{sequence.k}")
    translates = TranslateList(
        block_length_log2=sequence.m(r), digits=tuple(_copy_digits(sequence, r))
    )
    expected = 1 << (sequence.top - sequence.m(r) - (sequence.k - r))
    if translates.count != expected:
        raise EngineDisagreementError(
            f"copy count {translates.count} differs from 2^(m_k - m_r - (k - r)) = {expected}"
        )
    if rare_set.engine is Engine.BOTH and rare_set.cross_checkable():
        copy = build_rare_set(sequence.prefix(r), Engine.BITSET).cells
        members = np.flatnonzero(copy)
        offsets = translates.offset_array()
        cells = (offsets[:, None] + members[None, :]).ravel()
        coverage = np.bincount(cells, minlength=rare_set.domain_size)
        if coverage.max(initial=0) > 1 or not np.array_equal(
            coverage == 1, rare_set.with_engine(Engine.BITSET).cells
        ):
            raise EngineDisagreementError(f"copies of Y_{r} do not tile Y_{sequence.k}")
    return translates


def level_translates(rare_set: RareSet1D, j: int) -> TranslateList:
    """
    Disjoint translates of [0, 2^{m_j}) over each of which Y_k has average
    2^{-j}; their union is the constraint set with scales m_{j+1}, ..., m_k.
    """
    sequence = rare_set.require_sequence()
    if not 1 <= j <= sequence.k:
        raise DomainError(f"j = {j} outside 1..{sequence.k}")
    translates = TranslateList(
        block_length_log2=sequence.m(j), digits=tuple(_copy_digits(sequence, j))
    )
    _cross_check_translates(
        rare_set,
        translates,
        DyadicScalar.pow2(-j),
        sequence.exponents[j:],
        f"level translates j={j}",
    )
    return translates


def long_intervals(rare_set: RareSet1D, j: int) -> TranslateList:
    """
    Disjoint intervals of length 2^{m_{k-j+1} - m_j} over each of which Y_k
    has average 2^{j-k}; their union is the constraint set with scales
    m_{k-j+1}, ..., m_k.
    """
    sequence = rare_set.require_sequence()
    k = sequence.k
    if not 1 <= j <= ceil_quarter(k):
        raise DomainError(f"j = {j} outside 1..ceil(k/4) = {ceil_quarter(k)}")
    sequence.check_lemma_admissible()
    length_log2 = sequence.m(k - j + 1) - sequence.m(j)
    # Translates of I tiling the left half of [0, 2^{m_{k-j+1}}), then the
    # copies of Y_{k-j+1} inside Y_k.
    digits = [(length_log2, 1 << (sequence.m(j) - 1))] + _copy_digits(sequence, k - j + 1)
    translates = TranslateList(block_length_log2=length_log2, digits=tuple(digits))
    _cross_check_translates(
        rare_set,
        translates,
        DyadicScalar.pow2(j - k),
        sequence.exponents[k - j :],
        f"long intervals j={j}",
    )
    return translates


def extra_level_positions(rare_set: RareSet1D, j: int) -> list[int]:
    """
    Unit-grid positions of windows [p, p + 2^{m_j}) where Y_k also averages
    2^{-j} but which are not in the indexed family of `level_translates`.
    Reported only; certificates use the indexed family.
    """
    sequence = rare_set.require_sequence()
    family = set(level_translates(rare_set.with_engine(Engine.SYMBOLIC), j).iter_offsets())
    width_log2 = sequence.m(j)
    positions = np.arange(rare_set.domain_size - (1 << width_log2) + 1, dtype=np.int64)
    counts = _window_counts(rare_set, positions, width_log2)
    hits = positions[counts == 1 << (width_log2 - j)]
    return [int(p) for p in hits if int(p) not in family]
