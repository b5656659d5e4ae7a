# preference_advisor/src/report_exporter.py
"""
报告导出器
负责把分析/推荐结果渲染为 TSV 或对齐文本，并写入文件或标准输出
"""
import csv
import io
import os
from dataclasses import dataclass, field
from typing import Any, List, Sequence

from tabulate import tabulate

from .errors import ConfigError
from .logger import logger

FORMATS = ("tsv", "text")


@dataclass
class ReportTable:
    title: str
    headers: Sequence[str]
    rows: List[Sequence[Any]]
    notes: List[str] = field(default_factory=list)


def _cell(value: Any) -> str:
    return "" if value is None else str(value)


def render_text(tables: Sequence[ReportTable]) -> str:
    blocks = []
    for table in tables:
        lines = [f"== {table.title} =="]
        if table.rows:
            # 单元格已格式化为字符串，禁止 tabulate 重新解析数字
            lines.append(tabulate([[_cell(c) for c in row] for row in table.rows],
                                  headers=list(table.headers), tablefmt="pipe", disable_numparse=True))
        lines.extend(table.notes)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def render_tsv(tables: Sequence[ReportTable]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
    for n, table in enumerate(tables):
        if n:
            buffer.write("\n")
        buffer.write(f"# {table.title}\n")
        if table.rows:
            writer.writerow(table.headers)
            for row in table.rows:
                writer.writerow([_cell(c) for c in row])
        for note in table.notes:
            buffer.write(f"# {note}\n")
    return buffer.getvalue()


def render_report(tables: Sequence[ReportTable], fmt: str = "tsv") -> str:
    if fmt == "tsv":
        return render_tsv(tables)
    if fmt == "text":
        return render_text(tables)
    raise ConfigError(f"未知的输出格式 '{fmt}'，可选值: {', '.join(FORMATS)}")


def export_report(tables: Sequence[ReportTable], fmt: str = "tsv", out_path: str = None) -> str:
    """
    渲染报告；指定 out_path 时同时写入文件

    Returns:
        str: 渲染后的报告文本
    """
    content = render_report(tables, fmt)
    if out_path:
        os.makedirs(os.path.dirname(out_path) or '.', exist_ok=True)
        with open(out_path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        logger.info(f"报告已导出到 {out_path}（{len(tables)} 个表）")
    return content
