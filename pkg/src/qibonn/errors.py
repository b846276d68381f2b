"""异常定义：配置、数据、数值与指标错误"""


class QibonnError(Exception):
    """所有 qibonn 异常的基类"""


class ConfigError(QibonnError, ValueError):
    """配置无效（CLI 退出码 2）"""


class DataError(QibonnError, RuntimeError):
    """数据加载或预处理失败（CLI 退出码 3）"""


class SplitError(DataError):
    """数据集无法按要求划分"""


class DomainError(QibonnError, ValueError):
    """参数超出定义域"""


class StructuralError(QibonnError, ValueError):
    """长度或形状不一致（调用方错误）"""


class TrainingDivergedError(QibonnError, ArithmeticError):
    """训练损失出现 NaN/Inf"""


class UndefinedMetricError(QibonnError, ValueError):
    """指标在当前标签分布下无定义（例如只有一个类别）"""
