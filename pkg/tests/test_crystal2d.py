import dataclasses

import pytest

from crystal_certificates.crystals.basis3d import copy_count
from crystal_certificates.crystals.crystal2d import (
    DyadicRect,
    RectFamily,
    Region2D,
    brute_force_superlevel,
    build_crystal,
    build_rect_family,
    check_family_averages,
    lemma1_certificate,
    oracle_check,
    rect_average,
    union_measure_staircase,
    verify_pairwise_disjoint,
)
from crystal_certificates.crystals.dyadic import DyadicScalar
from crystal_certificates.crystals.exceptions import (
    AdmissibilityError,
    DomainError,
    EnumerationLimitError,
)
from crystal_certificates.crystals.rare_sets import (
    Engine,
    ExponentSequence,
    RareSet1D,
    TranslateList,
    ceil_quarter,
    decompose_into_copies,
    level_translates,
    long_intervals,
)

# Doubling rules m_1 = 1, 2, 3 up to m_k <= 128, plus two irregular doubling sequences.
DOUBLING_SWEEP = [
    *(
        ExponentSequence.from_doubling(m1, k)
        for m1, k_max in ((1, 8), (2, 7), (3, 6))
        for k in range(2, k_max + 1)
    ),
    ExponentSequence((1, 3, 7, 15, 31)),
    ExponentSequence((2, 5, 11, 23, 47, 95)),
]


def sequence_id(sequence):
    return ",".join(str(m) for m in sequence.exponents)


def test_crystal_measure(q4):
    crystal = build_crystal(ExponentSequence(q4), Engine.BOTH)
    assert crystal.measure() == DyadicScalar.pow2(8)
    assert int(crystal.cells().sum()) == 256
    assert crystal.contains(0, 4)
    assert not crystal.contains(1, 0)


def test_rect_average_factors(q4):
    crystal = build_crystal(ExponentSequence(q4))
    rect = DyadicRect(0, 0, 1, 7)
    assert rect.area_log2 == 8
    assert rect.is_admissible(crystal.sequence)
    assert rect_average(crystal, rect) == DyadicScalar.pow2(-4)


def test_level_one_family(q4):
    crystal = build_crystal(ExponentSequence(q4), Engine.BOTH)
    family = build_rect_family(crystal, 1)
    assert family.count == 16
    assert (family.rect_width_log2, family.rect_height_log2) == (1, 7)
    assert family.union_measure == DyadicScalar.pow2(12)
    assert check_family_averages(crystal, family) == 16
    assert verify_pairwise_disjoint(family)
    members = list(family.iter_members())
    assert members[3] == family.member(3)
    assert all(not a.overlaps(b) for a in members for b in members if a != b)


def test_large_families_are_sampled(q5):
    crystal = build_crystal(ExponentSequence(q5))
    family = build_rect_family(crystal, 2)
    assert family.count == 1 << 19
    assert check_family_averages(crystal, family) == 200
    assert verify_pairwise_disjoint(family, sample=200)


def test_corrupted_family_is_not_disjoint(q4):
    family = build_rect_family(build_crystal(ExponentSequence(q4)), 1)
    offsets = list(family.x_translates.iter_offsets())
    width = family.rect_width_log2

    duplicated = TranslateList.from_offsets([offsets[0], *offsets[:-1]], width)
    assert duplicated.count == family.x_translates.count
    assert not verify_pairwise_disjoint(dataclasses.replace(family, x_translates=duplicated))

    shifted = TranslateList.from_offsets([offsets[0], offsets[0] + 1, *offsets[2:]], width)
    assert not verify_pairwise_disjoint(dataclasses.replace(family, x_translates=shifted))

    # The same offsets, listed explicitly, are still disjoint.
    explicit = TranslateList.from_offsets(offsets, width)
    assert verify_pairwise_disjoint(dataclasses.replace(family, x_translates=explicit))


def test_single_member_family_is_disjoint():
    union = RareSet1D.constraint_set(3, (3,))
    family = RectFamily(
        level=1,
        k=1,
        x_translates=TranslateList.from_offsets([5], 1),
        y_translates=TranslateList.from_offsets([2], 2),
        x_union=union,
        y_union=union,
    )
    assert family.count == 1
    assert verify_pairwise_disjoint(family)
    assert build_rect_family(build_crystal(ExponentSequence((1, 2))), 1).count == 1


@pytest.mark.parametrize("sequence", DOUBLING_SWEEP, ids=sequence_id)
def test_counting_identities(sequence):
    k, top, m = sequence.k, sequence.top, sequence.m
    crystal = build_crystal(sequence)
    for j in range(1, k + 1):
        assert level_translates(crystal.x_set, j).count == 1 << (top - m(j) + j - k)
    for r in range(1, k + 1):
        assert decompose_into_copies(crystal.x_set, r).count == 1 << (top - m(r) - k + r)
        assert copy_count(sequence, r) == 1 << 2 * (top - m(r) - k + r)
    for j in range(1, ceil_quarter(k) + 1):
        assert long_intervals(crystal.y_set, j).count == 1 << (m(j) + top - m(k - j + 1) - j)
        family = build_rect_family(crystal, j)
        assert family.count == 1 << (2 * top - m(k - j + 1) - k)
        assert family.area_log2 == m(k - j + 1)
        assert family.union_measure == DyadicScalar.pow2(2 * top - k)


@pytest.mark.parametrize("sequence", DOUBLING_SWEEP, ids=sequence_id)
def test_overlap_law(sequence):
    full = DyadicScalar.pow2(2 * sequence.top - sequence.k)
    J = ceil_quarter(sequence.k)
    staircase = union_measure_staircase(build_crystal(sequence), J)
    assert staircase.overlaps == {
        (j, i): full.scale(j - i) for j in range(1, J + 1) for i in range(j + 1, J + 1)
    }
    assert staircase.union_measure == DyadicScalar(J + 1) * full.scale(-1)
    assert staircase.region.measure() == staircase.union_measure


def test_family_level_is_bounded(q4):
    crystal = build_crystal(ExponentSequence(q4))
    with pytest.raises(DomainError):
        build_rect_family(crystal, 2)


def test_staircase_overlaps(q5):
    crystal = build_crystal(ExponentSequence(q5))
    staircase = union_measure_staircase(crystal, 2)
    level = DyadicScalar.pow2(27)
    assert staircase.union_measure == DyadicScalar(3).scale(26)
    assert staircase.overlaps == {(1, 2): level.scale(-1)}
    assert staircase.region.measure() == staircase.union_measure


def test_region_from_rectangles_counts_overlap_once():
    region = Region2D.from_rectangles(3, [DyadicRect(0, 0, 2, 1), DyadicRect(2, 0, 1, 2)])
    assert region.measure() == 12


def test_lemma_certificate_k4(q4):
    certificate = lemma1_certificate(ExponentSequence(q4), Engine.BOTH)
    assert certificate.J == 1
    assert certificate.union_measure == 4096
    assert certificate.accounted_measure == 2048
    assert certificate.bound == 2048
    assert certificate.cross_check == "raster-2d"
    assert certificate.passed

    data = certificate.to_json()
    assert data["kind"] == "lemma1"
    assert data["union_measure"] == {"m": "1", "e": -12}
    assert data["accounted_measure"] == {"m": "1", "e": -11}
    assert data["paper_bound"] == {"m": "1", "e": -11}
    assert data["families"][0]["count"] == "16"
    assert data["families"][0]["area_log2"] == 8
    assert data["overlaps"] == []
    assert data["pass"] is True


def test_lemma_certificate_k5(q5):
    certificate = lemma1_certificate(ExponentSequence(q5), Engine.BOTH)
    assert certificate.J == 2
    assert certificate.union_measure == DyadicScalar(3).scale(26)
    assert certificate.bound == DyadicScalar(5).scale(24)
    assert certificate.overlaps[(1, 2)] == DyadicScalar.pow2(26)
    assert certificate.cross_check == "bitset-1d"
    assert certificate.passed


def test_lemma_certificate_smallest_case():
    certificate = lemma1_certificate(ExponentSequence((1, 2)), Engine.BOTH)
    assert certificate.union_measure == 4
    assert certificate.bound == 1
    assert certificate.passed


def test_lemma_certificate_symbolic_only_for_large_sequences():
    sequence = ExponentSequence.from_doubling(1, 8)
    certificate = lemma1_certificate(sequence)
    assert certificate.cross_check == "none"
    # (J + 1) / 2 * 2^(2 m_k - k) with J = 2
    assert certificate.union_measure == DyadicScalar(3).scale(256 - 8 - 1)
    assert certificate.passed


def test_lemma_certificate_rejects_inadmissible_sequences():
    with pytest.raises(AdmissibilityError):
        lemma1_certificate(ExponentSequence((2, 3, 4)))


def test_lemma_certificate_is_the_same_in_parallel(q5):
    sequence = ExponentSequence(q5)
    assert (
        lemma1_certificate(sequence, parallel=2).to_json()
        == lemma1_certificate(sequence, parallel=1).to_json()
    )


def test_brute_force_superlevel_small_crystal():
    crystal = build_crystal(ExponentSequence((1, 2)))
    # Everything within reach of the single crystal cell at level 1/4.
    assert brute_force_superlevel(crystal, DyadicScalar.pow2(-2)).measure() == 8
    # Only the two area-2 dominoes reach level 1/2.
    assert brute_force_superlevel(crystal, DyadicScalar.pow2(-1)).measure() == 3


@pytest.mark.parametrize(
    "exponents, certificate_measure, oracle_measure",
    [((1, 2), 4, 8), ((1, 2, 4), 32, None), ((1, 2, 4, 8), 4096, None)],
)
def test_oracle_check(exponents, certificate_measure, oracle_measure):
    check = oracle_check(ExponentSequence(exponents), Engine.BOTH)
    assert check.included
    assert check.certificate_measure == certificate_measure
    if oracle_measure is not None:
        assert check.oracle_measure == oracle_measure
    assert check.passed
    assert check.to_json()["kind"] == "oracle"


def test_oracle_is_limited_to_small_crystals(q5):
    crystal = build_crystal(ExponentSequence(q5))
    with pytest.raises(EnumerationLimitError):
        brute_force_superlevel(crystal, DyadicScalar.pow2(-5))
