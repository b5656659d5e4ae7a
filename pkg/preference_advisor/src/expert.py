# preference_advisor/src/expert.py
"""
专家系统外壳：工作内存 + 正向链推理 + 与网络得分混合的推荐排序
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .dataio import ALL_GROUPS, EVAL_CATALOG, PAPER_CATALOG, CustomerGroup, SampleCatalog, encode_group
from .errors import ConfigError
from .logger import logger
from .nnet import Network, forward
from .rule_loader import AdjustScore, AssertFact, FactValue, Rule, validate_rules


@dataclass(frozen=True)
class Fact:
    key: str
    value: FactValue

    def __post_init__(self):
        if not str(self.key).strip():
            raise ValueError("事实的键不能为空")


class WorkingMemory:
    """一次咨询私有的事实库，键唯一"""

    def __init__(self, facts: Iterable[Fact] = ()):
        self._facts: Dict[str, FactValue] = {}
        for fact in facts:
            if fact.key in self._facts:
                raise ValueError(f"初始事实中键 '{fact.key}' 重复")
            self._facts[fact.key] = fact.value

    def assert_fact(self, key: str, value: FactValue) -> Optional[FactValue]:
        """写入事实，已存在时覆盖并返回旧值"""
        previous = self._facts.get(key)
        self._facts[key] = value
        return previous

    def __contains__(self, key: str) -> bool:
        return key in self._facts

    def as_dict(self) -> Dict[str, FactValue]:
        return dict(self._facts)


@dataclass
class InferenceResult:
    facts: Dict[str, FactValue]
    fired: List[str]
    adjustments: Dict[str, float]
    log: List[str] = field(default_factory=list)


def _agenda_key(rule: Rule) -> Tuple[int, str]:
    return -rule.salience, rule.id


def infer(rules: Sequence[Rule], initial_facts: Iterable[Fact]) -> InferenceResult:
    """
    正向链推理到不动点

    每轮从尚未触发、条件全部成立的规则中选 salience 最高者（相同时取编号字典序最小者）执行其动作，
    每条规则最多触发一次。

    Args:
        rules: 已校验的知识库
        initial_facts: 初始事实（键不可重复）

    Returns:
        InferenceResult: 最终事实、触发顺序、各样本累计得分调整、推理日志
    """
    validate_rules(rules)
    memory = WorkingMemory(initial_facts)
    agenda = sorted(rules, key=_agenda_key)
    fired: List[str] = []
    fired_ids = set()
    adjustments: Dict[str, float] = {}
    log: List[str] = []

    while True:
        facts = memory.as_dict()
        rule = next((r for r in agenda if r.id not in fired_ids and r.matches(facts)), None)
        if rule is None:
            break
        fired_ids.add(rule.id)
        fired.append(rule.id)
        log.append(f"fire {rule.id}")
        for action in rule.actions:
            if isinstance(action, AssertFact):
                previous = memory.assert_fact(action.key, action.value)
                if previous is None:
                    log.append(f"  assert {action.key} = {action.value}")
                else:
                    log.append(f"  overwrite {action.key}: {previous} -> {action.value}")
            elif isinstance(action, AdjustScore):
                adjustments[action.sample] = adjustments.get(action.sample, 0.0) + action.delta
                log.append(f"  boost {action.sample} {action.delta:+g}")
        logger.debug(f"规则 {rule.id} 触发")

    return InferenceResult(facts=memory.as_dict(), fired=fired, adjustments=adjustments, log=log)


def profile_facts(group: CustomerGroup) -> List[Fact]:
    """由客户群确定的咨询事实：gender、age、group"""
    return [
        Fact("gender", group.gender.value),
        Fact("age", group.age_band.value),
        Fact("group", group.token),
    ]


@dataclass(frozen=True)
class RecommendationEntry:
    sample_id: str
    blended: float
    nn_score: float
    rule_adjust: float


@dataclass
class Recommendation:
    group: CustomerGroup
    entries: List[RecommendationEntry]
    fired: List[str] = field(default_factory=list)

    @property
    def top(self) -> str:
        return self.entries[0].sample_id

    def ranking(self) -> List[str]:
        return [e.sample_id for e in self.entries]


def default_catalog(output_size: int) -> SampleCatalog:
    """按网络输出数选择样本目录：8 为评估目录，52 为完整目录，其余为 S1…Sm"""
    for catalog in (EVAL_CATALOG, PAPER_CATALOG):
        if len(catalog) == output_size:
            return catalog
    return SampleCatalog.numbered(output_size)


def recommend(net: Network, rules: Sequence[Rule], group: CustomerGroup, nn_weight: float = 1.0,
              catalog: Optional[SampleCatalog] = None) -> Recommendation:
    """
    咨询：blended = nn_weight·网络输出 + 规则得分调整，按 blended 降序、样本序号升序排名
    """
    if net.input_size != 8:
        raise ConfigError(f"网络输入层应为 8 个单元，实际为 {net.input_size}")
    catalog = catalog or default_catalog(net.output_size)
    if len(catalog) != net.output_size:
        raise ConfigError(f"样本目录共 {len(catalog)} 个样本，与网络输出层 {net.output_size} 个单元不一致")

    validate_rules(rules, catalog)
    scores = forward(net, encode_group(group)).output
    result = infer(rules, profile_facts(group))

    entries = []
    for k, sample_id in enumerate(catalog.ids):
        nn_score = float(scores[k])
        adjust = result.adjustments.get(sample_id, 0.0)
        entries.append((k, RecommendationEntry(sample_id=sample_id, blended=nn_weight * nn_score + adjust,
                                               nn_score=nn_score, rule_adjust=adjust)))
    entries.sort(key=lambda item: (-item[1].blended, item[0]))
    return Recommendation(group=group, entries=[e for _, e in entries], fired=result.fired)


def advise_all(net: Network, rules: Sequence[Rule], nn_weight: float = 1.0,
               catalog: Optional[SampleCatalog] = None) -> Dict[str, str]:
    """对 8 个客户群逐一咨询，返回 客户群列标签 → 首选样本"""
    return {g.code: recommend(net, rules, g, nn_weight, catalog).top for g in ALL_GROUPS}
