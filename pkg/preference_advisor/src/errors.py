# preference_advisor/src/errors.py
"""
异常层级

命令行入口按异常类型映射退出码：配置类错误 -> 2，数据类错误 -> 3。
"""
from typing import Optional


class AdvisorError(Exception):
    """所有项目内异常的基类"""


class ConfigError(AdvisorError, ValueError):
    """配置非法或互相冲突（网络参数、配置文件、网络与样本目录尺寸不符等）"""


class ShapeError(AdvisorError, ValueError):
    """向量/矩阵维度不匹配"""


class DataError(AdvisorError, ValueError):
    """输入数据问题的基类"""


class EmptyDataError(DataError):
    """数据集、记录文件或列联表为空"""


class ParseError(DataError):
    """记录文件解析失败，消息中带行号"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"第 {line} 行: {message}"
        super().__init__(message)


class ZeroVarianceError(DataError):
    """Pearson 相关的输入向量为常数"""


class InsufficientDataError(DataError):
    """样本对数量不足（n < 3）"""


class ZeroTotalError(DataError, ZeroDivisionError):
    """行/列合计为 0，无法计算百分比"""


class TrainingError(DataError):
    """训练过程中出现非有限的误差"""


class ModelFormatError(AdvisorError, ValueError):
    """模型文件格式错误，field 指出出错的字段"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field is not None:
            message = f"[{field}] {message}"
        super().__init__(message)


class ModelVersionError(ModelFormatError):
    """模型文件版本标记不被支持"""


class RuleValidationError(AdvisorError, ValueError):
    """规则文件解析或校验失败，消息中带行号"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"规则文件第 {line} 行: {message}"
        super().__init__(message)
