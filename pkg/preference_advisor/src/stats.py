# preference_advisor/src/stats.py
"""
评估统计

- 列联表（样本 × 客户群）上的正确率、列占比、行占比
- Pearson 相关系数（计算公式版）及基于 t 分布的双尾显著性
- 相关矩阵、分年龄段男女相关、分产品男女相关
- 顾问推荐结果的命中率评估
"""
import math
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import t as t_dist

from .errors import (DataError, EmptyDataError, InsufficientDataError, ShapeError,
                     ZeroTotalError, ZeroVarianceError)

AGE_BAND_KEYS = ("teen", "young", "adult", "senior")


@dataclass(eq=False)
class ContingencyTable:
    """计数矩阵：行 = 产品样本 S1…Sm，列 = 客户群"""
    counts: np.ndarray
    row_labels: Tuple[str, ...] = ()
    col_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ShapeError(f"计数矩阵必须是二维的，实际维度为 {counts.ndim}")
        if counts.size and not np.all(np.equal(np.mod(counts, 1), 0)):
            raise DataError("计数必须为整数")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise DataError("计数不能为负数")
        self.counts = counts

        rows, cols = counts.shape
        self.row_labels = tuple(self.row_labels) or tuple(f"S{k + 1}" for k in range(rows))
        self.col_labels = tuple(self.col_labels) or tuple(f"G{k + 1}" for k in range(cols))
        if len(self.row_labels) != rows or len(self.col_labels) != cols:
            raise ShapeError(f"行/列标签数量与计数矩阵 {counts.shape} 不一致")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.counts.shape

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def grand_total(self) -> int:
        return int(self.counts.sum())

    def row_index(self, label: str) -> int:
        try:
            return self.row_labels.index(label)
        except ValueError:
            raise DataError(f"列联表中没有样本 '{label}'") from None

    def col_index(self, label: str) -> int:
        try:
            return self.col_labels.index(label)
        except ValueError:
            raise DataError(f"列联表中没有客户群 '{label}'") from None

    def same_as(self, other: "ContingencyTable") -> bool:
        return (self.row_labels == other.row_labels and self.col_labels == other.col_labels
                and np.array_equal(self.counts, other.counts))


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int
    p_two_tailed: float


@dataclass
class PercentCorrect:
    """每个样本在其配对客户群中的命中率（完整精度），以及平均值"""
    labels: List[str]
    values: List[float]
    mean: float

    def rounded(self, digits: int = 1) -> Tuple[List[float], float]:
        return [round_half_up(v, digits) for v in self.values], round_half_up(self.mean, digits)


@dataclass
class AdviceEvaluation:
    """每个客户群的推荐样本及其命中率（该群中实际购买该样本的比例）"""
    advice: Dict[str, str]
    accuracy: Dict[str, float]
    mean: float


@dataclass
class CorrelationMatrix:
    labels: List[str]
    results: List[List[CorrelationResult]] = field(default_factory=list)

    def get(self, a: str, b: str) -> CorrelationResult:
        return self.results[self.labels.index(a)][self.labels.index(b)]


def round_half_up(value: float, digits: int = 1) -> float:
    """按十进制四舍五入（远离零），以 float 的最短十进制表示为准"""
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def correlation_p_value(r: float, n: int) -> float:
    """t = r·√((n−2)/(1−r²))，自由度 n−2 的双尾 p 值；|r| = 1 时为 0"""
    if n < 3:
        raise InsufficientDataError(f"至少需要 3 对数据，实际为 {n}")
    r = min(1.0, max(-1.0, r))
    if abs(r) >= 1.0:
        return 0.0
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(min(1.0, 2.0 * t_dist.sf(abs(t_stat), n - 2)))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """
    Pearson 线性相关系数

    r = (nΣxy − ΣxΣy) / (√(nΣx² − (Σx)²)·√(nΣy² − (Σy)²))

    Raises:
        ShapeError: 长度不一致
        InsufficientDataError: n < 3
        ZeroVarianceError: 任一向量为常数
    """
    xv = np.asarray(x, dtype=np.float64).ravel()
    yv = np.asarray(y, dtype=np.float64).ravel()
    if xv.shape != yv.shape:
        raise ShapeError(f"两个向量长度不一致: {xv.shape[0]} vs {yv.shape[0]}")
    n = xv.shape[0]
    if n < 3:
        raise InsufficientDataError(f"至少需要 3 对数据，实际为 {n}")
    if np.all(xv == xv[0]):
        raise ZeroVarianceError("第一个向量为常数，方差为 0")
    if np.all(yv == yv[0]):
        raise ZeroVarianceError("第二个向量为常数，方差为 0")

    # 平移到均值附近再代入公式，r 不变
    xv = xv - xv.mean()
    yv = yv - yv.mean()
    sx, sy = xv.sum(), yv.sum()
    numerator = n * np.dot(xv, yv) - sx * sy
    denominator = math.sqrt(n * np.dot(xv, xv) - sx * sx) * math.sqrt(n * np.dot(yv, yv) - sy * sy)
    if denominator == 0.0:
        raise ZeroVarianceError("方差在数值上为 0")
    r = float(min(1.0, max(-1.0, numerator / denominator)))
    return CorrelationResult(r=r, n=n, p_two_tailed=correlation_p_value(r, n))


def identity_pairing(table: ContingencyTable) -> Dict[str, str]:
    """第 i 个样本与第 i 个客户群配对"""
    k = min(table.shape)
    return {table.row_labels[i]: table.col_labels[i] for i in range(k)}


def _column_hit_rate(table: ContingencyTable, row: int, col: int) -> float:
    total = int(table.col_totals[col])
    if total == 0:
        raise ZeroTotalError(f"客户群 '{table.col_labels[col]}' 的合计为 0")
    return 100.0 * int(table.counts[row, col]) / total


def percent_correct(table: ContingencyTable, pairing: Mapping[str, str]) -> PercentCorrect:
    """样本 Si 配对客户群 gi 时，值为 100·counts[Si][gi] / gi 列合计"""
    labels: List[str] = []
    values: List[float] = []
    for sample, group in pairing.items():
        labels.append(sample)
        values.append(_column_hit_rate(table, table.row_index(sample), table.col_index(group)))
    if not values:
        raise EmptyDataError("配对关系为空")
    return PercentCorrect(labels=labels, values=values, mean=math.fsum(values) / len(values))


def advice_accuracy(table: ContingencyTable, advice: Mapping[str, str]) -> AdviceEvaluation:
    """
    评估推荐结果：客户群 g 被推荐样本 s 时，命中率 = 100·counts[s][g] / g 列合计

    推荐样本不在表中（例如 52 色目录中的其他颜色）时按 0 计。
    """
    accuracy: Dict[str, float] = {}
    for group, sample in advice.items():
        col = table.col_index(group)
        if sample in table.row_labels:
            accuracy[group] = _column_hit_rate(table, table.row_index(sample), col)
        else:
            if int(table.col_totals[col]) == 0:
                raise ZeroTotalError(f"客户群 '{group}' 的合计为 0")
            accuracy[group] = 0.0
    if not accuracy:
        raise EmptyDataError("推荐结果为空")
    mean = math.fsum(accuracy.values()) / len(accuracy)
    return AdviceEvaluation(advice=dict(advice), accuracy=accuracy, mean=mean)


def _round_matrix(matrix: np.ndarray, decimals: Optional[int]) -> np.ndarray:
    if decimals is None:
        return matrix
    return np.vectorize(lambda v: round_half_up(v, decimals), otypes=[np.float64])(matrix)


def column_share(table: ContingencyTable, decimals: Optional[int] = 1) -> np.ndarray:
    """单元格 = 100·count / 列合计；decimals=None 时返回完整精度"""
    totals = table.col_totals
    for c, total in enumerate(totals):
        if total == 0:
            raise ZeroTotalError(f"客户群 '{table.col_labels[c]}' 的合计为 0")
    return _round_matrix(100.0 * table.counts / totals[np.newaxis, :], decimals)


def row_share(table: ContingencyTable, decimals: Optional[int] = 1) -> np.ndarray:
    """单元格 = 100·count / 样本行合计；decimals=None 时返回完整精度"""
    totals = table.row_totals
    for r, total in enumerate(totals):
        if total == 0:
            raise ZeroTotalError(f"样本 '{table.row_labels[r]}' 的合计为 0")
    return _round_matrix(100.0 * table.counts / totals[:, np.newaxis], decimals)


def correlation_matrix(table: ContingencyTable, axis: str = "columns") -> CorrelationMatrix:
    """
    按列（客户群，n = 样本数）或按行（样本，n = 客户群数）两两计算 Pearson 相关

    对角线 r = 1、p = 0；结果严格对称。
    """
    if axis == "columns":
        vectors, labels = table.counts.T.astype(np.float64), list(table.col_labels)
    elif axis == "rows":
        vectors, labels = table.counts.astype(np.float64), list(table.row_labels)
    else:
        raise ValueError(f"axis 只能是 'columns' 或 'rows'，实际为 '{axis}'")

    n = vectors.shape[1]
    if n < 3:
        raise InsufficientDataError(f"每个向量至少需要 3 个元素，实际为 {n}")
    for label, vec in zip(labels, vectors):
        if np.all(vec == vec[0]):
            raise ZeroVarianceError(f"'{label}' 为常数向量，方差为 0")

    size = len(labels)
    diagonal = CorrelationResult(r=1.0, n=n, p_two_tailed=0.0)
    results: List[List[Optional[CorrelationResult]]] = [[None] * size for _ in range(size)]
    for a in range(size):
        results[a][a] = diagonal
        for b in range(a + 1, size):
            try:
                res = pearson(vectors[a], vectors[b])
            except DataError as e:
                raise type(e)(f"'{labels[a]}' 与 '{labels[b]}': {e}") from e
            results[a][b] = results[b][a] = res
    return CorrelationMatrix(labels=labels, results=results)


def _require_gender_age_columns(table: ContingencyTable) -> None:
    if table.shape[1] != 8:
        raise ShapeError(f"需要 8 个客户群列（男 4 个年龄段 + 女 4 个年龄段），实际为 {table.shape[1]}")


def gender_age_correlations(table: ContingencyTable) -> Dict[str, CorrelationResult]:
    """每个年龄段：男性列与女性列的样本向量相关（n = 样本数）"""
    _require_gender_age_columns(table)
    results: Dict[str, CorrelationResult] = {}
    for k, band in enumerate(AGE_BAND_KEYS):
        try:
            results[band] = pearson(table.counts[:, k], table.counts[:, k + 4])
        except DataError as e:
            raise type(e)(f"年龄段 '{band}': {e}") from e
    return results


def per_product_gender_correlation(table: ContingencyTable) -> Dict[str, CorrelationResult]:
    """每个样本：4 个男性年龄段计数与 4 个女性年龄段计数的相关（n = 4）"""
    _require_gender_age_columns(table)
    results: Dict[str, CorrelationResult] = {}
    for r, label in enumerate(table.row_labels):
        try:
            results[label] = pearson(table.counts[r, :4], table.counts[r, 4:])
        except DataError as e:
            raise type(e)(f"样本 '{label}': {e}") from e
    return results


def modal_samples(table: ContingencyTable) -> Dict[str, str]:
    """每个客户群中购买次数最多的样本（并列时取靠前者）"""
    return {label: table.row_labels[int(np.argmax(table.counts[:, c]))]
            for c, label in enumerate(table.col_labels)}
