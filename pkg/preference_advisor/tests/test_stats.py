import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate
from scipy.stats import t as t_dist

from src.dataio import GROUP_CODES
from src.errors import DataError, EmptyDataError, InsufficientDataError, ShapeError, ZeroTotalError, ZeroVarianceError
from src.stats import (ContingencyTable, advice_accuracy, column_share, correlation_matrix,
                       correlation_p_value, gender_age_correlations, identity_pairing, modal_samples, pearson,
                       per_product_gender_correlation, percent_correct, round_half_up, row_share)


# 行为样本 S1…S8，列按 GROUP_CODES 顺序
GROUP_SHARES = [
    [70.0, 2.8, 8.3, 6.3, 3.8, 2.1, 1.8, 7.1],
    [12.0, 69.4, 8.3, 6.3, 3.8, 29.8, 1.8, 7.1],
    [2.0, 2.8, 50.0, 0.0, 1.3, 2.1, 3.6, 0.0],
    [2.0, 0.0, 8.3, 56.3, 1.3, 0.0, 1.8, 21.4],
    [6.0, 2.8, 8.3, 0.0, 70.5, 2.1, 7.3, 0.0],
    [4.0, 19.4, 8.3, 12.5, 16.7, 61.7, 7.3, 14.3],
    [2.0, 0.0, 0.0, 0.0, 1.3, 2.1, 72.7, 0.0],
    [2.0, 2.8, 8.3, 18.8, 1.3, 0.0, 3.6, 50.0],
]

# 按计数重新计算的值，(S6, M_ADULT) 为 1.7，(S8, M_OLD) 为 18.8
SAMPLE_SHARES = [
    [79.5, 2.3, 2.3, 2.3, 6.8, 2.3, 2.3, 2.3],
    [11.5, 48.1, 1.9, 1.9, 5.8, 26.9, 1.9, 1.9],
    [8.3, 8.3, 50.0, 0.0, 8.3, 8.3, 16.7, 0.0],
    [6.3, 0.0, 6.3, 56.3, 6.3, 0.0, 6.3, 18.8],
    [4.6, 1.5, 1.5, 0.0, 84.6, 1.5, 6.2, 0.0],
    [3.3, 11.7, 1.7, 3.3, 21.7, 48.3, 6.7, 3.3],
    [2.3, 0.0, 0.0, 0.0, 2.3, 2.3, 93.0, 0.0],
    [6.3, 6.3, 6.3, 18.8, 6.3, 0.0, 12.5, 43.8],
]


def test_round_half_up():
    assert round_half_up(56.25, 1) == 56.3
    assert round_half_up(2.675, 2) == 2.68
    assert round_half_up(-0.115, 2) == -0.12
    assert round_half_up(18.75, 1) == 18.8


def test_contingency_table_validation():
    with pytest.raises(ShapeError):
        ContingencyTable(counts=np.zeros(3))
    with pytest.raises(DataError):
        ContingencyTable(counts=np.array([[1, -1]]))
    with pytest.raises(DataError):
        ContingencyTable(counts=np.array([[1.5, 1]]))
    with pytest.raises(ShapeError):
        ContingencyTable(counts=np.ones((2, 2)), row_labels=("S1",))


# ---------- pearson ----------

def test_pearson_perfect_lines():
    assert pearson([1, 2, 3], [1, 2, 3]).r == pytest.approx(1.0)
    negative = pearson([1, 2, 3], [3, 2, 1])
    assert negative.r == pytest.approx(-1.0)
    assert negative.p_two_tailed == pytest.approx(0.0, abs=1e-6)


def test_pearson_published_values():
    s7 = pearson([1, 0, 0, 0], [1, 1, 40, 0])
    assert s7.r == pytest.approx(-0.32, abs=0.005)
    teen = pearson([35, 6, 1, 1, 3, 2, 1, 1], [3, 3, 1, 1, 55, 13, 1, 1])
    assert teen.r == pytest.approx(-0.110, abs=0.0005)
    assert teen.p_two_tailed == pytest.approx(0.795, abs=0.002)
    assert teen.n == 8


def test_pearson_preconditions():
    with pytest.raises(ShapeError):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(InsufficientDataError):
        pearson([1, 2], [2, 1])
    with pytest.raises(ZeroVarianceError):
        pearson([4, 4, 4], [1, 2, 3])
    with pytest.raises(ZeroVarianceError):
        pearson([1, 2, 3], [0, 0, 0])


def _brute_force_p(r, n):
    df = n - 2
    t_stat = abs(r) * math.sqrt(df / (1 - r * r))
    tail, _ = integrate.quad(lambda x: t_dist.pdf(x, df), t_stat, np.inf)
    return 2 * tail


def test_p_value_matches_integrated_tail():
    for r, n in ((-0.330, 8), (0.548, 8), (0.2, 30), (-0.9, 4)):
        assert correlation_p_value(r, n) == pytest.approx(_brute_force_p(r, n), abs=1e-6)


def test_p_value_edges():
    assert correlation_p_value(1.0, 5) == 0.0
    assert correlation_p_value(0.0, 10) == pytest.approx(1.0)
    with pytest.raises(InsufficientDataError):
        correlation_p_value(0.5, 2)


@pytest.mark.parametrize("n", [4, 8, 30])
def test_p_value_falls_with_abs_r(n):
    rs = np.linspace(0.0, 0.99, 100)
    p = np.array([correlation_p_value(r, n) for r in rs])
    assert np.all(np.diff(p) <= 1e-12)
    for r in rs:
        assert correlation_p_value(-r, n) == correlation_p_value(r, n)


vectors = st.integers(3, 15).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-60, 60), min_size=n, max_size=n),
    st.lists(st.integers(-60, 60), min_size=n, max_size=n),
))


@settings(max_examples=200, deadline=None)
@given(vectors, st.integers(-5, 5).filter(bool), st.integers(-20, 20))
def test_pearson_laws(pair, a, b):
    x, y = pair
    assume(len(set(x)) > 1 and len(set(y)) > 1)
    r_xy = pearson(x, y)
    assert -1.0 <= r_xy.r <= 1.0
    assert 0.0 <= r_xy.p_two_tailed <= 1.0
    assert pearson(y, x).r == pytest.approx(r_xy.r, abs=1e-12)
    shifted = [a * v + b for v in x]
    assert pearson(shifted, y).r == pytest.approx(math.copysign(1, a) * r_xy.r, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 12), st.integers(-100, 100), st.lists(st.integers(-9, 9), min_size=12, max_size=12))
def test_pearson_rejects_constant_vectors(n, c, y):
    assume(len(set(y[:n])) > 1)
    with pytest.raises(ZeroVarianceError):
        pearson([c] * n, y[:n])


# ---------- percent correct / shares ----------

def test_percent_correct_fixture(table2):
    result = percent_correct(table2, identity_pairing(table2))
    values, mean = result.rounded(1)
    assert values == [70.0, 69.4, 50.0, 56.3, 70.5, 61.7, 72.7, 50.0]
    assert mean == 62.6
    assert result.labels == ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8"]


def test_percent_correct_simple_tables():
    diagonal = ContingencyTable(counts=np.diag([3, 5, 7]))
    result = percent_correct(diagonal, identity_pairing(diagonal))
    assert result.values == [100.0, 100.0, 100.0]
    uniform = ContingencyTable(counts=np.ones((2, 2), dtype=int))
    result = percent_correct(uniform, identity_pairing(uniform))
    assert result.values == [50.0, 50.0]
    assert result.mean == 50.0
    with pytest.raises(EmptyDataError):
        percent_correct(uniform, {})


def test_percent_correct_zero_column():
    table = ContingencyTable(counts=np.array([[1, 0], [2, 0]]))
    with pytest.raises(ZeroTotalError, match="G2"):
        percent_correct(table, identity_pairing(table))


def test_column_share_fixture(table2):
    shares = column_share(table2)
    npt.assert_array_equal(shares[:, 0], [70.0, 12.0, 2.0, 2.0, 6.0, 4.0, 2.0, 2.0])
    npt.assert_allclose(column_share(table2, decimals=None).sum(axis=0), 100.0)


def test_row_share_fixture(table2):
    shares = row_share(table2)
    assert shares[0, 0] == 79.5
    assert shares[5, GROUP_CODES.index("M_ADULT")] == 1.7
    assert shares[7, GROUP_CODES.index("M_OLD")] == 18.8
    npt.assert_allclose(row_share(table2, decimals=None).sum(axis=1), 100.0)


def test_column_share_full_table(table2):
    npt.assert_array_equal(column_share(table2), GROUP_SHARES)


def test_row_share_full_table(table2):
    npt.assert_array_equal(row_share(table2), SAMPLE_SHARES)


def test_rounded_shares_sum_near_hundred(table2):
    # 逐格四舍五入后合计可能偏离 100 最多 0.3
    npt.assert_allclose(column_share(table2).sum(axis=0), 100.0, rtol=0, atol=0.3 + 1e-9)
    npt.assert_allclose(row_share(table2).sum(axis=1), 100.0, rtol=0, atol=0.3 + 1e-9)


def test_shares_name_zero_totals():
    table = ContingencyTable(counts=np.array([[1, 0], [0, 0]]))
    with pytest.raises(ZeroTotalError, match="G2"):
        column_share(table)
    with pytest.raises(ZeroTotalError, match="S2"):
        row_share(table)


# ---------- correlations ----------

def test_correlation_matrix_fixture(table2):
    matrix = correlation_matrix(table2, axis="columns")
    young = matrix.get("M_YOUNG", "F_YOUNG")
    assert young.r == pytest.approx(0.548, abs=0.0005)
    assert young.p_two_tailed == pytest.approx(0.159, abs=0.002)
    old = matrix.get("M_OLD", "F_OLD")
    assert old.r == pytest.approx(0.517, abs=0.0005)
    assert old.p_two_tailed == pytest.approx(0.189, abs=0.002)
    assert young.n == 8


@pytest.mark.parametrize("axis", ["columns", "rows"])
def test_correlation_matrix_is_symmetric(table2, axis):
    matrix = correlation_matrix(table2, axis=axis)
    size = len(matrix.labels)
    assert size == 8
    for a in range(size):
        assert matrix.results[a][a].r == 1.0
        for b in range(size):
            assert matrix.results[a][b] == matrix.results[b][a]


def test_correlation_matrix_rejects_constant_column():
    table = ContingencyTable(counts=np.array([[1, 2, 3], [1, 5, 1], [1, 0, 2]]))
    with pytest.raises(ZeroVarianceError):
        correlation_matrix(table)
    with pytest.raises(ValueError):
        correlation_matrix(table, axis="diagonal")


def test_gender_age_correlations_fixture(table2):
    results = gender_age_correlations(table2)
    assert list(results) == ["teen", "young", "adult", "senior"]
    assert [round_half_up(results[k].r, 2) for k in results] == [-0.11, 0.55, -0.33, 0.52]
    expected = {"teen": -0.110, "young": 0.548, "adult": -0.330, "senior": 0.517}
    for key, r in expected.items():
        assert results[key].r == pytest.approx(r, abs=0.0005)
    assert results["teen"].p_two_tailed == pytest.approx(0.795, abs=0.002)
    assert results["young"].p_two_tailed == pytest.approx(0.159, abs=0.002)
    assert results["senior"].p_two_tailed == pytest.approx(0.189, abs=0.002)
    adult = results["adult"]
    assert adult.p_two_tailed == pytest.approx(_brute_force_p(adult.r, adult.n), abs=0.002)


def test_gender_age_correlations_duplicated_columns(table2):
    counts = table2.counts.copy()
    counts[:, 4:] = counts[:, :4]
    results = gender_age_correlations(ContingencyTable(counts=counts))
    assert [res.r for res in results.values()] == pytest.approx([1.0, 1.0, 1.0, 1.0])


def test_per_product_gender_correlation_fixture(table2):
    results = per_product_gender_correlation(table2)
    expected = [1.00, 1.00, 0.90, 0.96, 0.94, 0.93, -0.32, 0.96]
    assert [res.r for res in results.values()] == pytest.approx(expected, abs=0.01)
    assert all(res.n == 4 for res in results.values())


def test_per_product_scaled_row():
    counts = np.array([[1, 2, 3, 4, 2, 4, 6, 8]])
    results = per_product_gender_correlation(ContingencyTable(counts=counts))
    assert results["S1"].r == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        per_product_gender_correlation(ContingencyTable(counts=np.ones((2, 6), dtype=int)))


# ---------- advice evaluation ----------

def test_modal_samples(table2):
    assert modal_samples(table2) == dict(zip(GROUP_CODES, [f"S{k}" for k in range(1, 9)]))


def test_advice_accuracy(table2):
    evaluation = advice_accuracy(table2, modal_samples(table2))
    assert round_half_up(evaluation.mean, 1) == 62.6
    assert evaluation.accuracy["F_ADULT"] == pytest.approx(100 * 40 / 55)

    # 推荐不在表中的样本时按 0 计
    other = advice_accuracy(table2, {"M_TEEN": "S40", "F_OLD": "S4"})
    assert other.accuracy["M_TEEN"] == 0.0
    assert other.accuracy["F_OLD"] == pytest.approx(100 * 3 / 14)
    with pytest.raises(EmptyDataError):
        advice_accuracy(table2, {})
