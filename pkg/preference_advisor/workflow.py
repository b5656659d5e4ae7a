# preference_advisor/workflow.py
"""
产品偏好顾问 - 命令行入口
负责协调各个模块完成训练、分析、咨询和数据生成

    python preference_advisor/workflow.py train --fixture table2 --preset eval8 --seed 7
    python preference_advisor/workflow.py analyze --fixture table2 --format text
    python preference_advisor/workflow.py recommend female adult
    python preference_advisor/workflow.py gen --fixture table2 --synthetic --per-group 40
"""
import argparse
import copy
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

from src.config_loader import get_config, load_config, update_recursive
from src.dataio import (ALL_GROUPS, FIXTURES, CustomerGroup, PurchaseRecord, SampleCatalog,
                        catalog_for_records, expand_counts, fixture_table, load_records, records_to_csv,
                        synthetic_records, tabulate, to_training_pairs, write_records)
from src.errors import (AdvisorError, ConfigError, DataError, ModelFormatError, RuleValidationError,
                        ShapeError)
from src.expert import advise_all, default_catalog, recommend
from src.logger import LEVELS, logger, set_log_level
from src.model_io import read_model_file, write_model_file
from src.nnet import PRESETS, Network, NetworkConfig, init_weights, train
from src.report_exporter import FORMATS, ReportTable, export_report
from src.rule_loader import Rule, load_rules
from src.stats import (AGE_BAND_KEYS, ContingencyTable, advice_accuracy, column_share, correlation_matrix,
                       gender_age_correlations, identity_pairing, per_product_gender_correlation,
                       percent_correct, round_half_up, row_share)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_QUALITY = 4

DEFAULTS: Dict[str, Any] = {
    "network": {
        "preset": "eval8",
        "layer_sizes": None,
        "learning_rate": 0.2,
        "momentum": 0.5,
        "max_epochs": 5000,
        "target_mse": 0.01,
        "seed": 0,
        "init_half_range": 0.5,
        "use_bias": False,
    },
    "training": {"show_progress": False},
    "data": {"fixture": None, "records_file": None},
    "expert": {"rules_file": None, "nn_weight": 1.0},
    "paths": {"model_file": "models/advisor.pamodel"},
    "report": {"format": "tsv", "out": None, "satisfaction_threshold": 60.0},
    "logging": {"level": "INFO"},
}

# 已出版表格中与计数不符的单元格：(客户群, 样本) -> 印刷值
PUBLISHED_ROW_SHARE_MISPRINTS: Dict[Tuple[str, str], str] = {
    ("M_ADULT", "S6"): "11.7",
    ("M_OLD", "S8"): "18.0",
}


@dataclass
class RunConfig:
    """默认值 < 配置文件 < 命令行参数 合并后的运行配置"""
    network: NetworkConfig
    fixture: Optional[str]
    records_file: Optional[str]
    rules_file: Optional[str]
    nn_weight: float
    model_file: str
    fmt: str
    out: Optional[str]
    satisfaction_threshold: float
    show_progress: bool
    log_level: str


def _flag(args: argparse.Namespace, name: str) -> Any:
    return getattr(args, name, None)


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """把命令行参数排成与配置文件相同的结构，未给出的为 None（合并时跳过）"""
    return {
        "network": {
            "preset": _flag(args, "preset"),
            "learning_rate": _flag(args, "learning_rate"),
            "momentum": _flag(args, "momentum"),
            "max_epochs": _flag(args, "epochs"),
            "target_mse": _flag(args, "target_mse"),
            "seed": _flag(args, "seed"),
            "init_half_range": _flag(args, "init_half_range"),
            "use_bias": _flag(args, "use_bias"),
        },
        "training": {"show_progress": _flag(args, "progress")},
        "expert": {"rules_file": _flag(args, "rules"), "nn_weight": _flag(args, "nn_weight")},
        "paths": {"model_file": _flag(args, "model")},
        "report": {"format": _flag(args, "format"), "out": _flag(args, "out")},
    }


def _parse_bool(value: Any, key: str) -> bool:
    """YAML 布尔值，或大小写不敏感的字符串 true / false"""
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    raise ConfigError(f"{key} 必须为 true 或 false，当前为 {value!r}")


def _network_config(section: Any, preset_flag: Optional[str]) -> NetworkConfig:
    if not isinstance(section, dict):
        raise ConfigError("配置项 network 必须是映射")
    if preset_flag or not section.get("layer_sizes"):
        name = preset_flag or section.get("preset")
        if name not in PRESETS:
            raise ConfigError(f"未知的网络预设: {name}，可选值: {', '.join(PRESETS)}")
        layer_sizes = PRESETS[name]
    else:
        layer_sizes = section["layer_sizes"]
    try:
        values = dict(
            layer_sizes=tuple(int(s) for s in layer_sizes),
            learning_rate=float(section["learning_rate"]),
            momentum=float(section["momentum"]),
            max_epochs=int(section["max_epochs"]),
            target_mse=float(section["target_mse"]),
            seed=int(section["seed"]),
            init_half_range=float(section["init_half_range"]),
            use_bias=_parse_bool(section.get("use_bias"), "network.use_bias"),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"network 配置无效: {e}") from None
    return NetworkConfig(**values)


def build_run_config(args: argparse.Namespace, file_config: Dict[str, Any]) -> RunConfig:
    """合并默认值、配置文件与命令行参数，并在执行任何工作之前完成校验"""
    merged = copy.deepcopy(DEFAULTS)
    update_recursive(merged, file_config or {})
    update_recursive(merged, _flag_overrides(args))

    # 数据来源：命令行的 --fixture / --data 互斥且优先于配置文件
    fixture = get_config("data.fixture", config=merged)
    records_file = get_config("data.records_file", config=merged)
    if _flag(args, "fixture"):
        fixture, records_file = args.fixture, None
    elif _flag(args, "data"):
        fixture, records_file = None, args.data
    elif fixture and records_file:
        raise ConfigError("配置文件中 data.fixture 与 data.records_file 只能指定一个")
    if fixture and fixture not in FIXTURES:
        raise ConfigError(f"未知的内置数据 '{fixture}'，可选值: {', '.join(FIXTURES)}")

    fmt = get_config("report.format", config=merged)
    if fmt not in FORMATS:
        raise ConfigError(f"未知的输出格式 '{fmt}'，可选值: {', '.join(FORMATS)}")

    try:
        nn_weight = float(get_config("expert.nn_weight", config=merged))
        threshold = float(get_config("report.satisfaction_threshold", config=merged))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"数值配置无效: {e}") from None
    if not (math.isfinite(nn_weight) and nn_weight >= 0):
        raise ConfigError(f"expert.nn_weight 必须为非负实数，当前为 {nn_weight}")
    if not 0 <= threshold <= 100:
        raise ConfigError(f"report.satisfaction_threshold 必须位于 [0, 100]，当前为 {threshold}")

    log_level = str(get_config("logging.level", config=merged)).upper()
    if log_level not in LEVELS:
        raise ConfigError(f"未知的日志级别: {log_level}，可选值: {', '.join(LEVELS)}")

    return RunConfig(
        network=_network_config(merged["network"], _flag(args, "preset")),
        fixture=fixture,
        records_file=records_file,
        rules_file=get_config("expert.rules_file", config=merged),
        nn_weight=nn_weight,
        model_file=get_config("paths.model_file", config=merged),
        fmt=fmt,
        out=get_config("report.out", config=merged),
        satisfaction_threshold=threshold,
        show_progress=_parse_bool(get_config("training.show_progress", config=merged), "training.show_progress"),
        log_level=log_level,
    )


def _emit(run: RunConfig, tables: List[ReportTable]) -> None:
    content = export_report(tables, run.fmt, run.out)
    if not run.out:
        sys.stdout.write(content)


def _require_source(run: RunConfig) -> None:
    if not run.fixture and not run.records_file:
        raise ConfigError("缺少数据来源，请指定 --fixture table2 或 --data <records.csv>")


def load_table(run: RunConfig) -> ContingencyTable:
    """按运行配置得到列联表"""
    _require_source(run)
    if run.fixture:
        return fixture_table(run.fixture)
    records = load_records(run.records_file)
    return tabulate(records, catalog_for_records(records))


def load_training_data(run: RunConfig) -> Tuple[list, SampleCatalog]:
    """按运行配置得到 (训练样本对, 样本目录)；目录大小取网络输出层"""
    _require_source(run)
    if run.network.layer_sizes[0] != len(ALL_GROUPS):
        raise ConfigError(f"网络输入层应为 {len(ALL_GROUPS)} 个单元，当前为 {run.network.layer_sizes[0]}")
    catalog = default_catalog(run.network.layer_sizes[-1])
    if run.fixture:
        records = expand_counts(fixture_table(run.fixture))
    else:
        records = load_records(run.records_file, catalog)
    return to_training_pairs(records, catalog), catalog


def _load_rules(run: RunConfig, catalog: SampleCatalog) -> List[Rule]:
    return load_rules(run.rules_file, catalog) if run.rules_file else []


# ---------- train ----------

def cmd_train(run: RunConfig, args: argparse.Namespace) -> int:
    pairs, catalog = load_training_data(run)
    logger.info(f"train: {len(pairs)} 条训练样本，样本目录 {len(catalog)} 个")

    net = init_weights(run.network)
    trained, report = train(net, pairs, show_progress=run.show_progress)
    write_model_file(trained, run.model_file)

    _emit(run, [ReportTable(
        title="Training summary",
        headers=["field", "value"],
        rows=[
            ["model", run.model_file],
            ["epochs", report.epochs_run],
            ["final_mse", f"{report.final_mse:.6f}"],
            ["converged", "true" if report.converged else "false"],
        ],
    )])
    if args.require_converged and not report.converged:
        logger.error(f"训练未收敛（final_mse={report.final_mse:.6f} > {run.network.target_mse}）")
        return EXIT_QUALITY
    return EXIT_OK


# ---------- analyze ----------

def _fmt(value: float, digits: int) -> str:
    return f"{round_half_up(value, digits):.{digits}f}"


def _group_names(table: ContingencyTable) -> List[str]:
    names = {g.code: g.display_name for g in ALL_GROUPS}
    return [names.get(code, code) for code in table.col_labels]


def _counts_section(table: ContingencyTable) -> ReportTable:
    rows = [[label, *(int(c) for c in table.counts[r]), int(table.row_totals[r])]
            for r, label in enumerate(table.row_labels)]
    rows.append(["Total", *(int(c) for c in table.col_totals), table.grand_total])
    return ReportTable(title="Table 2: purchases by sample and customer group",
                       headers=["sample", *_group_names(table), "Total"], rows=rows)


def _percent_correct_section(table: ContingencyTable, threshold: float) -> ReportTable:
    result = percent_correct(table, identity_pairing(table))
    values, mean = result.rounded(1)
    satisfied = [label for label, v in zip(result.labels, result.values) if v >= threshold]
    return ReportTable(
        title="% Correct (sample Si advised to group i)",
        headers=["", *result.labels],
        rows=[["% Correct", *(f"{v:.1f}" for v in values)]],
        notes=[f"Average % Correct: {mean:.1f}",
               f"At or above {threshold:.1f}%: {', '.join(satisfied) or 'none'}"],
    )


def _column_share_section(table: ContingencyTable) -> ReportTable:
    shares = column_share(table, decimals=None)
    rows = [[label, *(_fmt(v, 1) for v in shares[r])] for r, label in enumerate(table.row_labels)]
    return ReportTable(title="Table 3: % within customer group",
                       headers=["sample", *_group_names(table)], rows=rows)


def _row_share_section(table: ContingencyTable, fixture: ContingencyTable) -> ReportTable:
    shares = row_share(table, decimals=None)
    names = _group_names(table)
    rows = [[names[c], *(_fmt(v, 1) for v in shares[:, c])] for c in range(table.shape[1])]
    notes = []
    if table.same_as(fixture):
        for (group, sample), printed in PUBLISHED_ROW_SHARE_MISPRINTS.items():
            c, r = table.col_index(group), table.row_index(sample)
            computed = _fmt(shares[r, c], 1)
            notes.append(f"Discrepancy: ({names[c]}, {sample}) published as {printed}, computed {computed} "
                         f"({int(table.counts[r, c])}/{int(table.row_totals[r])})")
            logger.warning(f"已出版表格 ({names[c]}, {sample}) 印刷值 {printed} 与计算值 {computed} 不符")
    return ReportTable(title="Table 4: % within sample",
                       headers=["group", *table.row_labels], rows=rows, notes=notes)


def _correlation_matrix_section(table: ContingencyTable) -> ReportTable:
    title = "Correlations between customer groups (Pearson, over samples)"
    headers = ["group", "statistic", *table.col_labels]
    try:
        matrix = correlation_matrix(table, axis="columns")
    except DataError as e:
        return ReportTable(title=title, headers=headers, rows=[], notes=[f"n/a: {e}"])
    rows = []
    for a, label in enumerate(matrix.labels):
        results = matrix.results[a]
        rows.append([label, "Pearson Correlation", *(f"{res.r:.3f}" for res in results)])
        rows.append(["", "Sig. (2-tailed)",
                     *("" if a == b else f"{res.p_two_tailed:.3f}" for b, res in enumerate(results))])
        rows.append(["", "N", *(res.n for res in results)])
    return ReportTable(title=title, headers=headers, rows=rows)


def _gender_age_section(table: ContingencyTable) -> ReportTable:
    title = "Table 5: correlation between male and female by age band"
    headers = ["age band", "r", "r (3 d.p.)", "Sig. (2-tailed)", "N"]
    try:
        results = gender_age_correlations(table)
    except (DataError, ShapeError) as e:
        return ReportTable(title=title, headers=headers, rows=[], notes=[f"n/a: {e}"])
    rows = [[band, _fmt(results[band].r, 2), f"{results[band].r:.3f}",
             f"{results[band].p_two_tailed:.3f}", results[band].n] for band in AGE_BAND_KEYS]
    line = ", ".join(_fmt(results[band].r, 2) for band in AGE_BAND_KEYS)
    return ReportTable(title=title, headers=headers, rows=rows, notes=[f"Table 5: {line}"])


def _per_product_section(table: ContingencyTable) -> ReportTable:
    title = "Table 6: correlation between male and female per sample"
    headers = ["sample", "r", "Sig. (2-tailed)", "N"]
    try:
        results = per_product_gender_correlation(table)
    except (DataError, ShapeError) as e:
        return ReportTable(title=title, headers=headers, rows=[], notes=[f"n/a: {e}"])
    rows = [[label, _fmt(res.r, 2), f"{res.p_two_tailed:.3f}", res.n] for label, res in results.items()]
    line = ", ".join(_fmt(res.r, 2) for res in results.values())
    return ReportTable(title=title, headers=headers, rows=rows, notes=[f"Table 6: {line}"])


def _advice_section(table: ContingencyTable, net: Network, rules: List[Rule], run: RunConfig) -> ReportTable:
    catalog = default_catalog(net.output_size)
    sources = {
        "network": advise_all(net, [], 1.0, catalog),
        "rules": advise_all(net, rules, 0.0, catalog),
        "expert": advise_all(net, rules, run.nn_weight, catalog),
    }
    evaluations = {name: advice_accuracy(table, advice) for name, advice in sources.items()}
    threshold = run.satisfaction_threshold
    names = dict(zip(table.col_labels, _group_names(table)))

    rows = []
    for code in table.col_labels:
        row: List[Any] = [names[code]]
        for name, ev in evaluations.items():
            row.extend([ev.advice[code], _fmt(ev.accuracy[code], 1)])
        row.append("yes" if evaluations["expert"].accuracy[code] >= threshold else "no")
        rows.append(row)
    rows.append(["Mean", *[cell for ev in evaluations.values() for cell in ("", _fmt(ev.mean, 1))], ""])

    headers = ["group"]
    for name in evaluations:
        headers.extend([f"{name} advice", f"{name} %"])
    headers.append(f">= {threshold:.1f}%")
    notes = ["Mean accuracy: " + ", ".join(f"{name} {_fmt(ev.mean, 1)}" for name, ev in evaluations.items()),
             f"nn_weight: {run.nn_weight:g}, rules: {len(rules)}"]
    return ReportTable(title="Advice evaluation (share of each group buying the advised sample)",
                       headers=headers, rows=rows, notes=notes)


def cmd_analyze(run: RunConfig, args: argparse.Namespace) -> int:
    table = load_table(run)
    logger.info(f"analyze: 列联表 {table.shape[0]}×{table.shape[1]}，共 {table.grand_total} 条购买记录")

    tables = [
        _counts_section(table),
        _percent_correct_section(table, run.satisfaction_threshold),
        _column_share_section(table),
        _row_share_section(table, fixture_table()),
        _correlation_matrix_section(table),
        _gender_age_section(table),
        _per_product_section(table),
    ]
    if _flag(args, "model") or _flag(args, "rules"):
        net = read_model_file(run.model_file)
        rules = _load_rules(run, default_catalog(net.output_size))
        tables.append(_advice_section(table, net, rules, run))
    _emit(run, tables)
    return EXIT_OK


# ---------- recommend ----------

def _parse_group(gender: Optional[str], age: Optional[str]) -> CustomerGroup:
    if not gender or not age:
        raise ConfigError("需要指定性别和年龄段，例如: recommend female adult")
    try:
        return CustomerGroup.parse(gender, age)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _recommendation_table(net: Network, rules: List[Rule], group: CustomerGroup, run: RunConfig,
                          catalog: SampleCatalog) -> ReportTable:
    rec = recommend(net, rules, group, run.nn_weight, catalog)
    rows = [[rank, e.sample_id, f"{e.blended:.6f}", f"{e.nn_score:.6f}", f"{e.rule_adjust:+.6f}"]
            for rank, e in enumerate(rec.entries, start=1)]
    return ReportTable(
        title=f"Recommendation for {group.display_name} ({group.token})",
        headers=["rank", "sample", "blended", "network", "rules"],
        rows=rows,
        notes=[f"top: {rec.top}", f"fired: {', '.join(rec.fired) or 'none'}"],
    )


def _interactive_loop(net: Network, rules: List[Rule], run: RunConfig, catalog: SampleCatalog,
                      stream: TextIO) -> None:
    """提示 → 读取 "<gender> <age>" → 输出排名，直到输入结束"""
    sys.stderr.write("gender age> ")
    sys.stderr.flush()
    for line in stream:
        tokens = line.split()
        if tokens:
            try:
                if len(tokens) != 2:
                    raise ConfigError("请输入 '<gender> <age>'，例如: female adult")
                group = _parse_group(*tokens)
                _emit(run, [_recommendation_table(net, rules, group, run, catalog)])
                sys.stdout.flush()
            except ConfigError as e:
                logger.error(str(e))
        sys.stderr.write("gender age> ")
        sys.stderr.flush()
    sys.stderr.write("\n")


def cmd_recommend(run: RunConfig, args: argparse.Namespace) -> int:
    net = read_model_file(run.model_file)
    catalog = default_catalog(net.output_size)
    rules = _load_rules(run, catalog)
    if args.interactive:
        _interactive_loop(net, rules, run, catalog, sys.stdin)
        return EXIT_OK
    group = _parse_group(args.gender, args.age)
    _emit(run, [_recommendation_table(net, rules, group, run, catalog)])
    return EXIT_OK


# ---------- gen ----------

def cmd_gen(run: RunConfig, args: argparse.Namespace) -> int:
    table = load_table(run)
    if args.synthetic:
        records: List[PurchaseRecord] = synthetic_records(table, args.per_group, seed=run.network.seed)
    else:
        records = expand_counts(table)
    if run.out:
        with open(run.out, "w", encoding="utf-8", newline="") as f:
            write_records(records, f)
        logger.info(f"已写出 {len(records)} 条购买记录到 {run.out}")
    else:
        sys.stdout.write(records_to_csv(records))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "train": cmd_train,
    "analyze": cmd_analyze,
    "recommend": cmd_recommend,
    "gen": cmd_gen,
}


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML 配置文件（默认读取环境变量 PREFADVISOR_CONFIG 或 preference_advisor/config.yaml）")
    common.add_argument("--seed", type=int, help="随机种子（初始化、打乱顺序、合成数据）")
    common.add_argument("--format", choices=FORMATS, help="输出格式（默认 tsv）")
    common.add_argument("--out", help="输出文件路径（默认标准输出）")

    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group()
    group.add_argument("--fixture", choices=FIXTURES, help="使用内置评估数据")
    group.add_argument("--data", metavar="PATH", help="购买记录 CSV（gender,age_band,sample）")

    advisor = argparse.ArgumentParser(add_help=False)
    advisor.add_argument("--model", metavar="PATH", help="模型文件")
    advisor.add_argument("--rules", metavar="PATH", help="规则文件")
    advisor.add_argument("--nn-weight", type=float, help="网络得分权重（默认 1.0）")

    parser = argparse.ArgumentParser(
        prog="preference-advisor",
        description="按客户群推荐产品颜色：反向传播网络 + 规则专家系统，并复现样本评估分析",
        epilog="配置优先级：内置默认值 < 配置文件 < 命令行参数",
    )
    sub = parser.add_subparsers(dest="command")

    p_train = sub.add_parser("train", parents=[common, source], help="训练网络并保存模型")
    p_train.add_argument("--preset", choices=sorted(PRESETS), help="网络拓扑预设（默认 eval8）")
    p_train.add_argument("--learning-rate", type=float)
    p_train.add_argument("--momentum", type=float)
    p_train.add_argument("--epochs", type=int, help="最多训练的 epoch 数")
    p_train.add_argument("--target-mse", type=float)
    p_train.add_argument("--init-half-range", type=float, help="初始权重均匀分布半宽，0 为全零")
    p_train.add_argument("--use-bias", action="store_const", const=True, help="启用偏置单元")
    p_train.add_argument("--model", metavar="PATH", help="模型输出路径")
    p_train.add_argument("--require-converged", action="store_true", help="未收敛时以退出码 4 结束")
    p_train.add_argument("--progress", action="store_const", const=True, help="显示进度条")

    sub.add_parser("analyze", parents=[common, source, advisor], help="复现评估表格与相关分析")

    p_rec = sub.add_parser("recommend", parents=[common, advisor], help="为客户群给出排序后的推荐")
    p_rec.add_argument("gender", nargs="?", help="male | female")
    p_rec.add_argument("age", nargs="?", help="teen | young | adult | senior (old)")
    p_rec.add_argument("--interactive", action="store_true", help="循环读取标准输入中的客户群直到输入结束")

    p_gen = sub.add_parser("gen", parents=[common, source], help="生成购买记录 CSV")
    p_gen.add_argument("--synthetic", action="store_true", help="按各客户群的购买分布抽样")
    p_gen.add_argument("--per-group", type=int, default=50, help="合成模式下每个客户群的记录数")

    return parser, sub.choices


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser, subparsers = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        run = build_run_config(args, load_config(args.config, force_reload=True))
        set_log_level(run.log_level)
        logger.info(f"开始执行 {args.command}")
        code = COMMANDS[args.command](run, args)
        logger.info(f"{args.command} 结束，退出码 {code}")
        return code
    except (ConfigError, ModelFormatError, RuleValidationError) as e:
        logger.error(str(e))
        subparsers[args.command].print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError) as e:
        logger.error(str(e))
        return EXIT_DATA
    except AdvisorError as e:
        logger.error(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
