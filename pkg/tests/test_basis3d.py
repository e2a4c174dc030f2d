import pytest

from crystal_certificates.crystals.basis3d import (
    BasisSpec,
    build_crystal3d,
    copy_count,
    cylinder_average,
    lift_rect,
    rasterized_superlevel_lower_bound,
    slab_contribution,
    theorem_certificate,
)
from crystal_certificates.crystals.crystal2d import DyadicRect
from crystal_certificates.crystals.dyadic import DyadicScalar
from crystal_certificates.crystals.exceptions import (
    AdmissibilityError,
    CapacityError,
    EnumerationLimitError,
    SequenceValidationError,
)
from crystal_certificates.crystals.rare_sets import Engine, ExponentSequence


class TestBasisSpec:
    def test_finite_capacity_and_subsequence(self):
        basis = BasisSpec.finite([4, 1, 2, 2])
        assert basis.values == (1, 2, 4)
        assert basis.capacity == 3
        assert basis.subsequence(3).exponents == (1, 2, 4)
        assert basis.subsequence(2).exponents == (1, 2)

    @pytest.mark.parametrize(
        "values, capacity",
        [([5], 1), ([3, 4, 5], 1), ([1, 3, 5, 7], 3), ([1, 3, 5], 2), ([1, 2, 3, 4, 8, 9, 16], 5)],
    )
    def test_greedy_capacity(self, values, capacity):
        assert BasisSpec.finite(values).capacity == capacity

    def test_capacity_is_enforced(self):
        with pytest.raises(CapacityError):
            BasisSpec.finite([1, 2, 4]).subsequence(4)

    def test_finite_rejects_non_naturals(self):
        with pytest.raises(SequenceValidationError):
            BasisSpec.finite([])
        with pytest.raises(SequenceValidationError):
            BasisSpec.finite([0, 1])

    def test_doubling(self):
        basis = BasisSpec.doubling(3)
        assert basis.capacity is None
        assert basis.subsequence(4).exponents == (3, 6, 12, 24)
        assert basis.members(12) and not basis.members(9)
        assert basis.to_json() == {"kind": "doubling", "m1": 3}

    def test_tower(self):
        basis = BasisSpec.tower()
        assert basis.subsequence(3).exponents == (2, 16, 1 << 27)
        assert basis.members(16) and basis.members(1 << 256)
        assert not basis.members(8)
        assert not basis.members(12)

    def test_tower_stops_at_the_symbolic_range(self):
        with pytest.raises(EnumerationLimitError, match="257-bit exponent"):
            BasisSpec.tower().subsequence(4)

    def test_symbolic_range_is_configurable(self, settings):
        settings.CRYSTAL_CERTIFICATES = {"SYMBOLIC_MAX_EXPONENT": 8}
        assert BasisSpec.doubling(1).subsequence(4).top == 8
        with pytest.raises(EnumerationLimitError):
            BasisSpec.doubling(1).subsequence(5)

    def test_infinite_rule(self):
        squares = BasisSpec.infinite(
            "squares", lambda n: int(n**0.5) ** 2 == n, lambda: (n * n for n in range(1, 100))
        )
        assert squares.subsequence(3).exponents == (1, 4, 9)
        assert squares.to_json() == {"kind": "squares"}


def test_crystal3d_measure(q4):
    crystal = build_crystal3d(ExponentSequence(q4))
    assert crystal.measure() == DyadicScalar.pow2(8)


def test_lifted_rectangle(q4):
    crystal = build_crystal3d(ExponentSequence(q4))
    cylinder = lift_rect(DyadicRect(0, 0, 0, 1), 1, 4)
    assert cylinder.z_interval.length == 8
    assert cylinder.slab.left == 4
    assert cylinder.slab.length == 4
    assert cylinder.is_admissible(crystal.base.sequence)
    assert cylinder_average(crystal, cylinder) == DyadicScalar.pow2(-4)


def test_copy_counts(q4):
    assert copy_count(ExponentSequence(q4), 1) == 256
    assert copy_count(ExponentSequence(q4), 4) == 1
    assert copy_count(ExponentSequence((1, 2, 4)), 2) == 4


@pytest.mark.parametrize(
    "r, copies_log2, height_log2, per_copy_union",
    [(1, 8, 2, 2), (2, 8, 1, 4), (3, 6, 0, 32), (4, 0, -1, 4096)],
)
def test_slab_contribution(q4, r, copies_log2, height_log2, per_copy_union):
    slab = slab_contribution(ExponentSequence(q4), r, Engine.BOTH)
    assert slab.copies_log2 == copies_log2
    assert slab.height_log2 == height_log2
    assert slab.per_copy_union == per_copy_union
    assert slab.contribution == 1024
    assert slab.slab_bound == 256 * r
    assert slab.passed


def test_slab_json_keeps_huge_copy_counts_readable():
    sequence = BasisSpec.tower().subsequence(3)
    slab = slab_contribution(sequence, 1)
    data = slab.to_json()
    assert data["copies_log2"] == 2 * ((1 << 27) - 2 - 2)
    assert data["copies"] == f"2^{data['copies_log2']}"


def test_theorem_certificate_k4(q4):
    certificate = theorem_certificate(BasisSpec.finite(q4), 4, Engine.BOTH)
    assert certificate.total == 4096
    assert certificate.mu3 == 256
    assert certificate.bound == 2048
    assert certificate.cross_check == "raster-3d"
    assert certificate.passed
    assert [slab.r for slab in certificate.slabs] == [1, 2, 3, 4]

    data = certificate.to_json()
    assert data["kind"] == "theorem"
    assert data["basis"] == {"kind": "finite", "values": [1, 2, 4, 8]}
    assert data["slabs"][0]["copies"] == "256"
    assert data["pass"] is True


def test_theorem_certificate_smallest_case():
    certificate = theorem_certificate(BasisSpec.finite([1, 2]), 2, Engine.BOTH)
    assert certificate.total == 2
    assert certificate.bound == DyadicScalar.pow2(-1)
    assert certificate.passed


def test_rasterized_lower_bound_matches_exact_unions(q4):
    assert rasterized_superlevel_lower_bound(ExponentSequence(q4), Engine.BOTH) == 8192


def test_theorem_certificate_tower():
    certificate = theorem_certificate(BasisSpec.tower(), 2)
    assert certificate.sequence.exponents == (2, 16)
    assert certificate.total == DyadicScalar.pow2(29)
    assert certificate.bound == DyadicScalar.pow2(27)
    assert certificate.cross_check == "none"
    assert certificate.passed


def test_theorem_certificate_doubling_grows_quadratically():
    basis = BasisSpec.doubling(1)
    for k in (8, 12):
        certificate = theorem_certificate(basis, k)
        quarters = sum(-(-r // 4) for r in range(1, k + 1))
        assert certificate.total == certificate.mu3.scale(k - 2) * quarters
        assert certificate.passed


def test_theorem_certificate_capacity():
    with pytest.raises(CapacityError):
        theorem_certificate(BasisSpec.finite([1, 2, 4]), 4)


def test_theorem_certificate_is_the_same_in_parallel(q4):
    basis = BasisSpec.finite(q4)
    assert (
        theorem_certificate(basis, 4, parallel=3).to_json()
        == theorem_certificate(basis, 4, parallel=1).to_json()
    )


def test_slab_needs_lemma_admissible_prefix():
    with pytest.raises(AdmissibilityError):
        slab_contribution(ExponentSequence((2, 3, 4)), 3)
