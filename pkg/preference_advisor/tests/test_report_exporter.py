import pytest

from src.errors import ConfigError
from src.report_exporter import ReportTable, export_report, render_report

TABLES = [
    ReportTable(title="Counts", headers=["sample", "M_TEEN"], rows=[["S1", 35], ["S2", "06"]],
                notes=["Average % Correct: 62.6"]),
    ReportTable(title="Empty", headers=["x"], rows=[], notes=["n/a: nothing"]),
]


def test_tsv_layout():
    lines = render_report(TABLES, "tsv").splitlines()
    assert lines[:4] == ["# Counts", "sample\tM_TEEN", "S1\t35", "S2\t06"]
    assert "# Average % Correct: 62.6" in lines
    assert lines[-2:] == ["# Empty", "# n/a: nothing"]


def test_text_layout_keeps_cell_strings():
    text = render_report(TABLES, "text")
    assert text.startswith("== Counts ==\n")
    # 字符串单元格不被当作数字重新格式化
    assert "06" in text
    assert "Average % Correct: 62.6" in text
    assert "== Empty ==\nn/a: nothing" in text


def test_unknown_format():
    with pytest.raises(ConfigError):
        render_report(TABLES, "html")


def test_export_to_file(tmp_path):
    path = tmp_path / "out" / "report.tsv"
    content = export_report(TABLES, "tsv", str(path))
    assert path.read_text(encoding="utf-8") == content
