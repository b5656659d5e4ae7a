# preference_advisor/src/dataio.py
"""
客户群编码与购买记录读写

- 8 个客户群（性别 × 年龄段）及其独热编码
- 样本目录（S1…Sm）
- 购买记录 CSV 的解析、汇总为列联表，以及内置的样本评估数据（308 条购买记录的计数）
- 计数展开为记录、按列分布的带种子合成采样
"""
import csv
import io
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .errors import ConfigError, DataError, EmptyDataError, ParseError, ZeroTotalError
from .logger import logger
from .stats import ContingencyTable

RECORD_HEADER = ("gender", "age_band", "sample")
_SAMPLE_ID = re.compile(r"^[Ss](\d+)$")


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"


class AgeBand(str, Enum):
    TEEN = "teen"        # 13–19
    YOUNG = "young"      # 20–29
    ADULT = "adult"      # 30–45
    SENIOR = "senior"    # 46+


AGE_SYNONYMS = {"old": AgeBand.SENIOR}


@dataclass(frozen=True)
class CustomerGroup:
    gender: Gender
    age_band: AgeBand

    @property
    def index(self) -> int:
        """男青少年=0 … 女老年=7"""
        return list(Gender).index(self.gender) * len(AgeBand) + list(AgeBand).index(self.age_band)

    @property
    def code(self) -> str:
        """列标签，如 M_TEEN、F_OLD"""
        age = "OLD" if self.age_band is AgeBand.SENIOR else self.age_band.name
        return f"{self.gender.name[0]}_{age}"

    @property
    def token(self) -> str:
        """规则事实中使用的取值，如 female-young"""
        return f"{self.gender.value}-{self.age_band.value}"

    @property
    def display_name(self) -> str:
        """报告中的行名，如 MaleTeen、FemaleOld"""
        age = "Old" if self.age_band is AgeBand.SENIOR else self.age_band.value.capitalize()
        return f"{self.gender.value.capitalize()}{age}"

    @classmethod
    def from_index(cls, index: int) -> "CustomerGroup":
        return ALL_GROUPS[index]

    @classmethod
    def parse(cls, gender_token: str, age_token: str) -> "CustomerGroup":
        """解析性别/年龄段文本（不区分大小写，old 视为 senior）"""
        g = str(gender_token).strip().lower()
        a = str(age_token).strip().lower()
        try:
            gender = Gender(g)
        except ValueError:
            raise ValueError(f"未知的性别 '{gender_token}'，可选值: {', '.join(x.value for x in Gender)}") from None
        if a in AGE_SYNONYMS:
            age = AGE_SYNONYMS[a]
        else:
            try:
                age = AgeBand(a)
            except ValueError:
                valid = ", ".join(x.value for x in AgeBand)
                raise ValueError(f"未知的年龄段 '{age_token}'，可选值: {valid}（old 等同 senior）") from None
        return cls(gender, age)


ALL_GROUPS: Tuple[CustomerGroup, ...] = tuple(CustomerGroup(g, a) for g in Gender for a in AgeBand)
GROUP_CODES: Tuple[str, ...] = tuple(g.code for g in ALL_GROUPS)


def normalize_sample_id(token: str) -> str:
    match = _SAMPLE_ID.match(str(token).strip())
    if not match or int(match.group(1)) < 1:
        raise ValueError(f"无法识别的样本编号 '{token}'，应为 S<k>")
    return f"S{int(match.group(1))}"


@dataclass(frozen=True)
class SampleCatalog:
    """有序的样本编号及显示名"""
    ids: Tuple[str, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        ids = tuple(normalize_sample_id(s) for s in self.ids)
        if not ids:
            raise ConfigError("样本目录不能为空")
        if len(set(ids)) != len(ids):
            raise ConfigError("样本目录中存在重复编号")
        labels = tuple(self.labels) or ids
        if len(labels) != len(ids):
            raise ConfigError("样本显示名数量与编号数量不一致")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, sample_id: str) -> bool:
        try:
            return normalize_sample_id(sample_id) in self.ids
        except ValueError:
            return False

    def index(self, sample_id: str) -> int:
        sid = normalize_sample_id(sample_id)
        if sid not in self.ids:
            raise DataError(f"样本 '{sample_id}' 不在样本目录中（共 {len(self.ids)} 个样本）")
        return self.ids.index(sid)

    @classmethod
    def numbered(cls, count: int) -> "SampleCatalog":
        return cls(ids=tuple(f"S{k}" for k in range(1, count + 1)))


EVAL_CATALOG = SampleCatalog.numbered(8)
PAPER_CATALOG = SampleCatalog.numbered(52)


@dataclass(frozen=True)
class PurchaseRecord:
    group: CustomerGroup
    sample: str


# 样本评估数据：行 S1…S8，列 M_TEEN, M_YOUNG, M_ADULT, M_OLD, F_TEEN, F_YOUNG, F_ADULT, F_OLD
TABLE2_COUNTS: Tuple[Tuple[int, ...], ...] = (
    (35, 1, 1, 1, 3, 1, 1, 1),
    (6, 25, 1, 1, 3, 14, 1, 1),
    (1, 1, 6, 0, 1, 1, 2, 0),
    (1, 0, 1, 9, 1, 0, 1, 3),
    (3, 1, 1, 0, 55, 1, 4, 0),
    (2, 7, 1, 2, 13, 29, 4, 2),
    (1, 0, 0, 0, 1, 1, 40, 0),
    (1, 1, 1, 3, 1, 0, 2, 7),
)

FIXTURES = ("table2",)


def fixture_table(name: str = "table2") -> ContingencyTable:
    """内置评估数据的列联表"""
    if name not in FIXTURES:
        raise ConfigError(f"未知的内置数据 '{name}'，可选值: {', '.join(FIXTURES)}")
    return ContingencyTable(counts=np.array(TABLE2_COUNTS), row_labels=EVAL_CATALOG.ids, col_labels=GROUP_CODES)


def encode_group(group: CustomerGroup) -> np.ndarray:
    """独热编码：index(group) 处为 1.0，其余为 0.0"""
    vec = np.zeros(len(ALL_GROUPS))
    vec[group.index] = 1.0
    return vec


def load_records(path: str, catalog: Optional[SampleCatalog] = None) -> List[PurchaseRecord]:
    """
    读取购买记录 CSV（表头 gender,age_band,sample，取值不区分大小写）

    Args:
        path: 文件路径
        catalog: 若提供，样本编号必须在目录中

    Raises:
        DataError: 文件不存在
        ParseError: 表头错误、重复表头、未知取值（带行号）
        EmptyDataError: 没有任何数据行
    """
    if not os.path.exists(path):
        raise DataError(f"记录文件 '{path}' 不存在")
    with open(path, "r", encoding="utf-8", newline="") as f:
        records = read_records(f, catalog)
    logger.info(f"已读取 {len(records)} 条购买记录: {path}")
    return records


def read_records(stream: TextIO, catalog: Optional[SampleCatalog] = None) -> List[PurchaseRecord]:
    reader = csv.reader(stream)
    header_seen = False
    records: List[PurchaseRecord] = []
    for row in reader:
        line = reader.line_num
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        lowered = tuple(c.lower() for c in cells)
        if not header_seen:
            if lowered != RECORD_HEADER:
                raise ParseError(f"表头应为 '{','.join(RECORD_HEADER)}'，实际为 '{','.join(cells)}'", line=line)
            header_seen = True
            continue
        if lowered == RECORD_HEADER:
            raise ParseError("重复的表头行", line=line)
        if len(cells) != len(RECORD_HEADER):
            raise ParseError(f"应有 {len(RECORD_HEADER)} 列，实际为 {len(cells)} 列", line=line)
        try:
            group = CustomerGroup.parse(cells[0], cells[1])
            sample = normalize_sample_id(cells[2])
        except ValueError as e:
            raise ParseError(str(e), line=line) from None
        if catalog is not None and sample not in catalog:
            raise ParseError(f"样本 '{sample}' 不在样本目录中", line=line)
        records.append(PurchaseRecord(group=group, sample=sample))

    if not records:
        raise EmptyDataError("记录文件中没有数据行")
    return records


def write_records(records: Iterable[PurchaseRecord], stream: TextIO) -> int:
    """按规范取值（小写、senior）写出 CSV，返回写出的记录数"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RECORD_HEADER)
    count = 0
    for rec in records:
        writer.writerow([rec.group.gender.value, rec.group.age_band.value, rec.sample])
        count += 1
    return count


def records_to_csv(records: Iterable[PurchaseRecord]) -> str:
    buffer = io.StringIO()
    write_records(records, buffer)
    return buffer.getvalue()


def tabulate(records: Iterable[PurchaseRecord], catalog: SampleCatalog) -> ContingencyTable:
    """把购买记录汇总为 样本 × 客户群 的计数矩阵"""
    counts = np.zeros((len(catalog), len(ALL_GROUPS)), dtype=np.int64)
    for rec in records:
        counts[catalog.index(rec.sample), rec.group.index] += 1
    return ContingencyTable(counts=counts, row_labels=catalog.ids, col_labels=GROUP_CODES)


def _groups_for(table: ContingencyTable) -> Tuple[CustomerGroup, ...]:
    if table.shape[1] != len(ALL_GROUPS):
        raise DataError(f"列联表应有 {len(ALL_GROUPS)} 个客户群列，实际为 {table.shape[1]}")
    return ALL_GROUPS


def expand_counts(table: ContingencyTable) -> List[PurchaseRecord]:
    """按行优先、逐次重复的确定顺序，把每个单元格展开为 counts[s][g] 条记录"""
    groups = _groups_for(table)
    records: List[PurchaseRecord] = []
    for s, sample in enumerate(table.row_labels):
        sid = normalize_sample_id(sample)
        for g, group in enumerate(groups):
            records.extend([PurchaseRecord(group=group, sample=sid)] * int(table.counts[s, g]))
    return records


def to_training_pairs(records: Sequence[PurchaseRecord], catalog: SampleCatalog) -> List[Tuple[np.ndarray, np.ndarray]]:
    """输入 = 客户群独热编码，目标 = 所选样本在目录上的独热编码"""
    pairs = []
    for rec in records:
        target = np.zeros(len(catalog))
        target[catalog.index(rec.sample)] = 1.0
        pairs.append((encode_group(rec.group), target))
    return pairs


def synthetic_records(table: ContingencyTable, per_group: int, seed: int) -> List[PurchaseRecord]:
    """
    按每个客户群列的购买分布独立抽样生成合成记录（同一客户群偏好相同颜色的假设）

    Args:
        table: 提供条件分布的列联表
        per_group: 每个客户群抽取的记录数
        seed: 随机种子
    """
    if per_group <= 0:
        raise ConfigError(f"每个客户群的记录数必须为正整数，当前为 {per_group}")
    groups = _groups_for(table)
    rng = np.random.default_rng(seed)
    records: List[PurchaseRecord] = []
    for g, group in enumerate(groups):
        column = table.counts[:, g].astype(np.float64)
        total = column.sum()
        if total == 0:
            raise ZeroTotalError(f"客户群 '{group.code}' 的合计为 0，无法按其分布抽样")
        draws = rng.choice(len(table.row_labels), size=per_group, p=column / total)
        records.extend(PurchaseRecord(group=group, sample=normalize_sample_id(table.row_labels[d])) for d in draws)
    return records


def catalog_for_records(records: Sequence[PurchaseRecord], minimum: int = 8) -> SampleCatalog:
    """覆盖记录中最大样本编号的 S1…Sm 目录（至少 minimum 个）"""
    highest = max((int(rec.sample[1:]) for rec in records), default=0)
    return SampleCatalog.numbered(max(highest, minimum))
