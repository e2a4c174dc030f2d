"""
Orlicz gauge tables: certified slab totals divided by phi(2^k) mu_3(Z_k) for
phi(x) = x log(1 + x)^p. Everything upstream is exact; this is the only module
that evaluates logarithms, and it does so with interval enclosures.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
import itertools
import logging
from typing import Any, Iterable

import mpmath
from mpmath import iv
import numpy as np

from crystal_certificates.default_settings import get_setting

from .basis3d import BasisSpec, CertificateTheorem, theorem_certificate
from .dyadic import DyadicScalar
from .exceptions import (
    DomainError,
    EngineDisagreementError,
    InsufficientRowsError,
    MissingCertificateError,
)
from .rare_sets import Engine

logger = logging.getLogger(__name__)

RELATIVE_WIDTH_LOG2 = -30
LOWER_BOUND_STATEMENT = (
    "Ratios are certified lower bounds for the crystal witness family only; a 'bounded'"
    " classification says nothing about upper bounds for the maximal operator."
)


class Trend(str, Enum):
    QUADRATIC = "quadratic"
    LINEAR = "linear"
    BOUNDED = "bounded"


@contextmanager
def _interval_precision(bits: int | None = None):
    saved = iv.prec
    iv.prec = bits or get_setting("PHI_PRECISION_BITS")
    try:
        yield
    finally:
        iv.prec = saved


def _interval(value: DyadicScalar):
    return iv.mpf(value.mantissa) * iv.mpf(2) ** (-value.exponent)


def endpoints(interval) -> tuple[mpmath.mpf, mpmath.mpf]:
    # Convert at full working precision; rounding here would break the enclosure.
    with mpmath.workprec(get_setting("PHI_PRECISION_BITS")):
        return mpmath.mpf(interval.a), mpmath.mpf(interval.b)


@dataclass(frozen=True)
class PhiSpec:
    """phi(x) = x * ln(1 + x)**p"""

    p: int

    def __post_init__(self):
        if self.p not in (0, 1, 2):
            raise DomainError(f"phi exponent p = {self.p} outside the catalog 0, 1, 2")

    @property
    def label(self) -> str:
        return "x" if self.p == 0 else f"x*log(1+x)^{self.p}"

    @property
    def is_exact(self) -> bool:
        """phi(2^k) is itself dyadic."""
        return self.p == 0


def phi_eval(phi: PhiSpec, x) -> mpmath.mpf:
    with mpmath.workprec(get_setting("PHI_PRECISION_BITS")):
        if isinstance(x, DyadicScalar):
            x = mpmath.ldexp(mpmath.mpf(x.mantissa), -x.exponent)
        x = mpmath.mpf(x)
        if x < 0:
            raise DomainError(f"phi is defined on [0, inf), got {x}")
        return x * mpmath.log1p(x) ** phi.p


def phi_enclosure(phi: PhiSpec, x: DyadicScalar):
    """Interval guaranteed to contain phi(x)."""
    if x.sign() < 0:
        raise DomainError(f"phi is defined on [0, inf), got {x}")
    with _interval_precision():
        value = _interval(x)
        return value * iv.log(1 + value) ** phi.p


@dataclass(frozen=True)
class RatioRow:
    k: int
    phi: PhiSpec
    lower_bound: DyadicScalar
    mu3: DyadicScalar
    denominator: tuple[mpmath.mpf, mpmath.mpf]
    ratio: tuple[mpmath.mpf, mpmath.mpf]
    # Only for p = 0, where the ratio is a dyadic rational.
    exact_ratio: DyadicScalar | None = None

    @property
    def alpha_log2(self) -> int:
        return -self.k

    @property
    def ratio_mid(self) -> mpmath.mpf:
        low, high = self.ratio
        return (low + high) / 2

    @property
    def ratio_value(self) -> float:
        return float(self.ratio_mid)

    @property
    def ratio_err(self) -> mpmath.mpf:
        low, high = self.ratio
        return (high - low) / 2

    def meets_quadratic_envelope(self) -> bool | None:
        """rho(k, 0) >= k^2 / 32, decided exactly."""
        if self.exact_ratio is None:
            return None
        return self.exact_ratio.scale(5) >= self.k * self.k

    def to_row(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "alpha_log2": self.alpha_log2,
            "p": self.phi.p,
            "lower_bound_m": str(self.lower_bound.mantissa),
            "lower_bound_e": self.lower_bound.exponent,
            "denom": mpmath.nstr(sum(self.denominator) / 2, 20),
            "ratio": mpmath.nstr(self.ratio_mid, 20),
            "ratio_err": mpmath.nstr(self.ratio_err, 5),
        }

    def to_json(self) -> dict[str, Any]:
        data = self.to_row()
        if self.exact_ratio is not None:
            data["exact_ratio"] = self.exact_ratio.to_json()
            data["meets_quadratic_envelope"] = self.meets_quadratic_envelope()
        return data


def ratio_row(certificate: CertificateTheorem, phi: PhiSpec) -> RatioRow:
    k = certificate.k
    alpha_inverse = DyadicScalar.pow2(k)
    # total / mu_3 is dyadic; dividing first keeps the enclosure small.
    normalized = certificate.total.scale(-certificate.mu3.log2())
    with _interval_precision():
        phi_value = phi_enclosure(phi, alpha_inverse)
        denominator = endpoints(phi_value * _interval(certificate.mu3))
        ratio = endpoints(_interval(normalized) / phi_value)
    if ratio[1] - ratio[0] > mpmath.ldexp(ratio[0], RELATIVE_WIDTH_LOG2):
        raise EngineDisagreementError(
            f"ratio enclosure for k={k}, p={phi.p} is wider than"
            f" 2^{RELATIVE_WIDTH_LOG2} relative"
        )
    exact = normalized.scale(-k) if phi.is_exact else None
    return RatioRow(
        k=k,
        phi=phi,
        lower_bound=certificate.total,
        mu3=certificate.mu3,
        denominator=denominator,
        ratio=ratio,
        exact_ratio=exact,
    )


def sharpness_table(
    basis: BasisSpec,
    k_range: Iterable[int],
    phis: Iterable[PhiSpec],
    engine: Engine = Engine.SYMBOLIC,
    parallel: int = 1,
    certificates: dict[int, CertificateTheorem] | None = None,
) -> list[RatioRow]:
    """
    One row per (k, phi), ordered by (k, p). Certificates are built on demand
    unless a mapping k -> certificate is passed, in which case every k must be
    present.
    """
    ks = sorted(set(k_range))
    phis = sorted(set(phis), key=lambda phi: phi.p)
    if certificates is None:
        certificates = {k: theorem_certificate(basis, k, engine, parallel) for k in ks}
    rows = []
    for k, phi in itertools.product(ks, phis):
        if k not in certificates:
            raise MissingCertificateError(f"no theorem certificate for k = {k}")
        rows.append(ratio_row(certificates[k], phi))
    logger.info("sharpness table: %d rows for k in %s", len(rows), ks)
    return rows


@dataclass(frozen=True)
class PhiTrend:
    p: int
    ks: tuple[int, ...]
    ratios: tuple[float, ...]
    slope: float
    classification: Trend
    max_ratio: float
    # p = 0: min rho / k^2, exact
    envelope: Fraction | None = None
    # p = 1: min and max of rho / k
    linear_bracket: tuple[float, float] | None = None
    # p = 2: largest relative change between consecutive k >= 8
    stabilization: float | None = None

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "p": self.p,
            "k": list(self.ks),
            "slope": round(self.slope, 6),
            "classification": self.classification.value,
            "max_ratio": round(self.max_ratio, 12),
        }
        if self.envelope is not None:
            data["envelope"] = str(self.envelope)
            data["envelope_at_least_1_32"] = self.envelope >= Fraction(1, 32)
        if self.linear_bracket is not None:
            data["ratio_over_k"] = [round(value, 12) for value in self.linear_bracket]
        if self.stabilization is not None:
            data["stabilization"] = round(self.stabilization, 12)
        return data


@dataclass(frozen=True)
class TrendReport:
    trends: tuple[PhiTrend, ...]
    statement: str = LOWER_BOUND_STATEMENT

    def for_p(self, p: int) -> PhiTrend:
        for trend in self.trends:
            if trend.p == p:
                return trend
        raise KeyError(p)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "trend",
            "trends": [trend.to_json() for trend in self.trends],
            "statement": self.statement,
        }


def classify_slope(slope: float) -> Trend:
    if slope > 1.25:
        return Trend.QUADRATIC
    if slope > 0.25:
        return Trend.LINEAR
    return Trend.BOUNDED


def trend_report(rows: list[RatioRow]) -> TrendReport:
    trends = []
    ordered = sorted(rows, key=lambda row: (row.phi.p, row.k))
    for p, group in itertools.groupby(ordered, key=lambda row: row.phi.p):
        group = list(group)
        if len(group) < 3:
            raise InsufficientRowsError(
                f"trend for p = {p} needs at least 3 rows, got {len(group)}"
            )
        ks = np.array([row.k for row in group], dtype=float)
        ratios = np.array([row.ratio_value for row in group])
        slope = float(np.polyfit(np.log(ks), np.log(ratios), 1)[0])

        envelope = linear_bracket = stabilization = None
        if p == 0:
            envelope = min(row.exact_ratio.to_fraction() / (row.k * row.k) for row in group)
        elif p == 1:
            per_k = ratios / ks
            linear_bracket = (float(per_k.min()), float(per_k.max()))
        else:
            tail = ratios[ks >= 8]
            if len(tail) >= 2:
                stabilization = float(np.max(np.abs(np.diff(tail)) / tail[:-1]))

        trends.append(
            PhiTrend(
                p=p,
                ks=tuple(int(k) for k in ks),
                ratios=tuple(float(value) for value in ratios),
                slope=slope,
                classification=classify_slope(slope),
                max_ratio=float(ratios.max()),
                envelope=envelope,
                linear_bracket=linear_bracket,
                stabilization=stabilization,
            )
        )
    return TrendReport(trends=tuple(trends))


@dataclass(frozen=True)
class FiniteSReport:
    basis: BasisSpec
    k_max: int
    rows: tuple[RatioRow, ...]
    statement: str

    @property
    def capped_ratio(self) -> RatioRow:
        return self.rows[-1]

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "finite-s",
            "basis": self.basis.to_json(),
            "k_max": self.k_max,
            "sequence": self.basis.subsequence(self.k_max).to_json(),
            "rows": [row.to_json() for row in self.rows],
            "capped_ratio": self.capped_ratio.to_json(),
            "statement": self.statement,
        }


def finite_s_report(
    values, engine: Engine = Engine.SYMBOLIC, parallel: int = 1
) -> FiniteSReport:
    basis = BasisSpec.finite(values)
    k_max = basis.capacity
    rows = sharpness_table(basis, range(1, k_max + 1), [PhiSpec(0)], engine, parallel)
    statement = (
        f"S holds a doubling chain of length {k_max} only, so the witness family stops at"
        f" k = {k_max} and the ratio stays below a fixed cap; quadratic growth in k is not"
        " available for a finite S."
    )
    return FiniteSReport(basis=basis, k_max=k_max, rows=tuple(rows), statement=statement)
