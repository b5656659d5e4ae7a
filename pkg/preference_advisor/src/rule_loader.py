# preference_advisor/src/rule_loader.py
"""
知识库：if-then 规则的数据结构与规则文件解析

规则文件格式（UTF-8，规则之间空行分隔，# 之后为注释）：

    rule young_trend salience 10
    if age = young
    then assert segment trend

    rule trend_boost
    if segment = trend
    then boost S2 0.1
"""
import math
import operator
import os
import re
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

from .dataio import SampleCatalog, normalize_sample_id
from .errors import RuleValidationError
from .logger import logger

FactValue = Union[str, float]

COMPARATORS: Dict[str, Callable[[object, object], bool]] = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
OPERATOR_ALIASES = {"≠": "!=", "≤": "<=", "≥": ">=", "==": "="}
ORDERING_OPERATORS = {"<", "<=", ">", ">="}

_IDENTIFIER = re.compile(r"^[A-Za-z_][\w.\-]*$")


def parse_value(token: str) -> FactValue:
    """能解析为有限实数的取值按数值处理，其余按字符串"""
    text = token.strip()
    try:
        number = float(text)
    except ValueError:
        return text
    return number if math.isfinite(number) else text


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Condition:
    key: str
    op: str
    value: FactValue

    def holds(self, facts: Mapping[str, FactValue]) -> bool:
        """缺少该事实时为假；数值与字符串比较时只有 != 为真"""
        if self.key not in facts:
            return False
        actual = facts[self.key]
        if _is_number(actual) != _is_number(self.value):
            return self.op == "!="
        if _is_number(actual):
            return COMPARATORS[self.op](float(actual), float(self.value))
        return COMPARATORS[self.op](str(actual).casefold(), str(self.value).casefold())


@dataclass(frozen=True)
class AssertFact:
    key: str
    value: FactValue


@dataclass(frozen=True)
class AdjustScore:
    sample: str
    delta: float


Action = Union[AssertFact, AdjustScore]


@dataclass(frozen=True)
class Rule:
    id: str
    conditions: Tuple[Condition, ...]
    actions: Tuple[Action, ...]
    salience: int = 0
    line: Optional[int] = None

    def __post_init__(self):
        if not _IDENTIFIER.match(self.id or ""):
            raise RuleValidationError(f"非法的规则编号 '{self.id}'", line=self.line)
        if not self.conditions:
            raise RuleValidationError(f"规则 '{self.id}' 没有任何条件", line=self.line)
        if not self.actions:
            raise RuleValidationError(f"规则 '{self.id}' 没有任何动作", line=self.line)
        for cond in self.conditions:
            if cond.op not in COMPARATORS:
                raise RuleValidationError(f"规则 '{self.id}' 使用了未知的比较符 '{cond.op}'", line=self.line)
            if cond.op in ORDERING_OPERATORS and not _is_number(cond.value):
                raise RuleValidationError(
                    f"规则 '{self.id}' 对字符串取值 '{cond.value}' 使用了比较符 '{cond.op}'", line=self.line)

    def matches(self, facts: Mapping[str, FactValue]) -> bool:
        return all(cond.holds(facts) for cond in self.conditions)


def validate_rules(rules: Iterable[Rule], catalog: Optional[SampleCatalog] = None) -> None:
    """检查规则编号唯一；提供目录时检查 boost 引用的样本都存在"""
    seen: Dict[str, Rule] = {}
    for rule in rules:
        if rule.id in seen:
            raise RuleValidationError(f"规则编号 '{rule.id}' 重复", line=rule.line)
        seen[rule.id] = rule
        if catalog is None:
            continue
        for action in rule.actions:
            if isinstance(action, AdjustScore) and action.sample not in catalog:
                raise RuleValidationError(
                    f"规则 '{rule.id}' 引用的样本 '{action.sample}' 不在样本目录中（共 {len(catalog)} 个样本）",
                    line=rule.line)


class _RuleBuilder:
    def __init__(self, rule_id: str, salience: int, line: int):
        self.rule_id = rule_id
        self.salience = salience
        self.line = line
        self.conditions: List[Condition] = []
        self.actions: List[Action] = []

    def build(self) -> Rule:
        return Rule(id=self.rule_id, conditions=tuple(self.conditions), actions=tuple(self.actions),
                    salience=self.salience, line=self.line)


def _parse_rule_header(rest: str, line: int) -> _RuleBuilder:
    parts = rest.split()
    if len(parts) == 1:
        return _RuleBuilder(parts[0], 0, line)
    if len(parts) == 3 and parts[1] == "salience":
        try:
            return _RuleBuilder(parts[0], int(parts[2]), line)
        except ValueError:
            raise RuleValidationError(f"salience 必须为整数，实际为 '{parts[2]}'", line=line) from None
    raise RuleValidationError("规则头应为 'rule <id> [salience N]'", line=line)


def _parse_condition(rest: str, line: int) -> Condition:
    parts = rest.split(None, 2)
    if len(parts) != 3:
        raise RuleValidationError("条件应为 'if <key> <op> <value>'", line=line)
    key, op, value = parts
    op = OPERATOR_ALIASES.get(op, op)
    if op not in COMPARATORS:
        raise RuleValidationError(f"未知的比较符 '{parts[1]}'", line=line)
    return Condition(key=key, op=op, value=parse_value(value))


def _parse_action(rest: str, line: int) -> Action:
    kind, _, body = rest.partition(" ")
    if kind == "assert":
        parts = body.split(None, 1)
        if len(parts) != 2:
            raise RuleValidationError("动作应为 'then assert <key> <value>'", line=line)
        return AssertFact(key=parts[0], value=parse_value(parts[1]))
    if kind == "boost":
        parts = body.split()
        if len(parts) != 2:
            raise RuleValidationError("动作应为 'then boost <sample> <delta>'", line=line)
        try:
            sample = normalize_sample_id(parts[0])
        except ValueError as e:
            raise RuleValidationError(str(e), line=line) from None
        delta = parse_value(parts[1])
        if not _is_number(delta):
            raise RuleValidationError(f"boost 的增量必须为实数，实际为 '{parts[1]}'", line=line)
        return AdjustScore(sample=sample, delta=float(delta))
    raise RuleValidationError(f"未知的动作 '{kind}'，应为 assert 或 boost", line=line)


def parse_rules(text: str, catalog: Optional[SampleCatalog] = None) -> List[Rule]:
    """解析规则文本，错误信息带行号"""
    rules: List[Rule] = []
    current: Optional[_RuleBuilder] = None

    def finish():
        nonlocal current
        if current is not None:
            rules.append(current.build())
            current = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        # 整行注释不结束当前规则，只有空行才结束
        if raw.strip().startswith("#"):
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            finish()
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "rule":
            finish()
            current = _parse_rule_header(rest, lineno)
        elif keyword in ("if", "then"):
            if current is None:
                raise RuleValidationError(f"'{keyword}' 行前缺少 'rule <id>'", line=lineno)
            if keyword == "if":
                current.conditions.append(_parse_condition(rest, lineno))
            else:
                current.actions.append(_parse_action(rest, lineno))
        else:
            raise RuleValidationError(f"无法识别的关键字 '{keyword}'", line=lineno)
    finish()

    validate_rules(rules, catalog)
    return rules


def load_rules(path: str, catalog: Optional[SampleCatalog] = None) -> List[Rule]:
    """从文件加载并校验知识库"""
    if not os.path.exists(path):
        raise RuleValidationError(f"规则文件 '{path}' 不存在")
    with open(path, "r", encoding="utf-8") as f:
        rules = parse_rules(f.read(), catalog)
    logger.info(f"已加载 {len(rules)} 条规则: {path}")
    return rules
