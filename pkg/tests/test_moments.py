import math
from fractions import Fraction

import numpy as np
import pytest

from steelrank import (
    ParameterError,
    TiePattern,
    cov_w,
    extract_tie_pattern,
    factor_decomposition,
    mean_w,
    var_w,
)

from _oracles import random_tie_pattern, split_moments

TIE_213 = TiePattern((2, 1, 3))  # pooled values like (1, 1, 2, 3, 3, 3)


def compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def test_mean_examples():
    assert mean_w(6, 6) == 18
    assert mean_w(2, 2) == 2
    assert mean_w(3, 5) == 7.5
    with pytest.raises(ParameterError):
        mean_w(0, 3)


def test_var_against_split_enumeration():
    # oracle: all 90 labeled splits of the pooled multiset into (2, 2, 2)
    values = [1, 1, 2, 3, 3, 3]
    mean, cov, m = split_moments(values, (2, 2, 2), [(0, 1), (0, 2)])
    assert m == 90
    assert cov[0, 0] == pytest.approx(41 / 30, rel=1e-12)
    assert var_w(2, 2, TIE_213) == pytest.approx(41 / 30, rel=1e-15)
    assert var_w(2, 2, TIE_213) == pytest.approx(cov[0, 0], rel=1e-12)


def test_var_no_ties_closed_form():
    assert var_w(2, 2, TiePattern.no_ties(6)) == 2 * 2 * 5 / 12


def test_var_fully_tied_is_zero():
    assert var_w(3, 4, TiePattern((7,))) == 0.0


def test_cov_against_split_enumeration():
    values = [1, 1, 2, 3, 3, 3]
    _, cov, _ = split_moments(values, (2, 2, 2), [(0, 1), (0, 2)])
    assert cov[0, 1] == pytest.approx(19 / 30, rel=1e-12)
    assert cov_w(2, 2, 2, TIE_213) == pytest.approx(19 / 30, rel=1e-15)


def test_cov_no_ties_and_fully_tied():
    assert cov_w(2, 2, 2, TiePattern.no_ties(6)) == pytest.approx(2 / 3, rel=1e-15)
    assert cov_w(2, 3, 4, TiePattern((9,))) == 0.0


def test_size_validation():
    with pytest.raises(ParameterError):
        var_w(4, 3, TIE_213)  # 4 + 3 > 6
    with pytest.raises(ParameterError):
        cov_w(3, 2, 2, TIE_213)  # 3 + 2 + 2 > 6


def test_factor_decomposition_small_case():
    ms = factor_decomposition((2, 2, 2), TIE_213)
    assert ms.sigma0_2 == pytest.approx(19 / 120, rel=1e-15)
    assert ms.sigma2 == pytest.approx([11 / 15, 11 / 15], rel=1e-15)
    assert ms.tau2 == pytest.approx([41 / 30, 41 / 30], rel=1e-15)
    assert ms.cov[0, 1] == pytest.approx(19 / 30, rel=1e-15)
    assert ms.mu.tolist() == [2, 2]


def test_factor_decomposition_iq_pattern(iq_groups):
    tie = extract_tie_pattern(np.concatenate(iq_groups))
    ms = factor_decomposition((6, 6, 6, 6), tie)
    assert math.sqrt(ms.sigma0_2) == pytest.approx(0.7062328, abs=1e-6)
    assert np.sqrt(ms.sigma2) == pytest.approx([4.540007] * 3, abs=1e-6)
    assert np.sqrt(ms.tau2) == pytest.approx([6.210249] * 3, abs=1e-6)
    assert ms.mu.tolist() == [18, 18, 18]


def test_factor_decomposition_no_ties_large():
    ms = factor_decomposition((100, 100, 100), TiePattern.no_ties(300))
    assert ms.sigma0_2 == pytest.approx(100 / 12, rel=1e-15)
    assert ms.tau2 == pytest.approx([100 * 100 * 201 / 12] * 2, rel=1e-15)


def test_two_sample_reduction_matches_classical_formula():
    # with N = n0 + n1 the variance must equal the classical tie-corrected form
    for n0, n1 in [(2, 3), (4, 4), (5, 2), (6, 6)]:
        n = n0 + n1
        rng = np.random.default_rng(n0 * 10 + n1)
        for _ in range(20):
            d = random_tie_pattern(rng, n)
            tie = TiePattern(d)
            classical = Fraction(n0 * n1 * (n + 1), 12) - Fraction(
                n0 * n1 * tie.s3_plus, 12 * n * (n - 1)
            ) if n > 1 else Fraction(0)
            assert var_w(n0, n1, tie) == float(classical)


def test_tie_corrections_never_inflate_variance():
    rng = np.random.default_rng(11)
    for n_total in range(3, 11):
        for sizes in [(1, n_total - 1), (n_total // 2, n_total - n_total // 2)]:
            base = var_w(sizes[0], sizes[1], TiePattern.no_ties(n_total))
            for _ in range(20):
                tie = TiePattern(random_tie_pattern(rng, n_total))
                assert var_w(sizes[0], sizes[1], tie) <= base + 1e-12


def test_factor_consistency():
    rng = np.random.default_rng(23)
    for n_total in (6, 8, 10):
        for sizes in compositions(n_total, 3):
            for _ in range(5):
                tie = TiePattern(random_tie_pattern(rng, n_total))
                ms = factor_decomposition(sizes, tie)
                n1, n2 = sizes[1], sizes[2]
                assert ms.cov[0, 1] == pytest.approx(n1 * n2 * ms.sigma0_2, rel=1e-12, abs=1e-15)
                recomposed = np.asarray(sizes[1:]) ** 2 * ms.sigma0_2 + ms.sigma2
                assert recomposed == pytest.approx(ms.tau2, rel=1e-12)
                assert cov_w(sizes[0], n1, n2, tie) == pytest.approx(
                    ms.cov[0, 1], rel=1e-12, abs=1e-15
                )


def test_enumeration_equivalence_small_grid():
    # the full N <= 10 sweep lives in the acceptance suite; spot-check here
    rng = np.random.default_rng(5)
    for sizes in [(2, 2), (3, 2), (2, 2, 2), (3, 2, 2), (2, 2, 2, 2)]:
        n_total = sum(sizes)
        for _ in range(3):
            d = random_tie_pattern(rng, n_total)
            values = [v for v, mult in enumerate(d) for _ in range(mult)]
            pairs = [(0, i) for i in range(1, len(sizes))]
            mean, cov, _ = split_moments(values, sizes, pairs)
            for i, ni in enumerate(sizes[1:]):
                assert mean[i] == pytest.approx(mean_w(sizes[0], ni), rel=1e-12)
                assert cov[i, i] == pytest.approx(
                    var_w(sizes[0], ni, TiePattern(d)), rel=1e-10, abs=1e-12
                )
            for i in range(len(sizes) - 1):
                for j in range(i + 1, len(sizes) - 1):
                    expected = cov_w(sizes[0], sizes[1 + i], sizes[1 + j], TiePattern(d))
                    assert cov[i, j] == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_degenerate_pattern_is_all_zero():
    ms = factor_decomposition((3, 4), TiePattern((7,)))
    assert ms.sigma0_2 == 0 and ms.tau2[0] == 0 and ms.sigma2[0] == 0
    assert ms.correction_ratio[0] == 1.0


def test_correction_ratio_zero_without_ties():
    ms = factor_decomposition((4, 4), TiePattern.no_ties(8))
    assert ms.correction_ratio[0] == 0.0


def test_size_mismatch():
    with pytest.raises(ParameterError):
        factor_decomposition((2, 2), TIE_213)  # sums to 4, N = 6
