"""
异常处理模块
"""


class MicrolocalException(Exception):
    """基础异常类"""
    pass


class InvalidConfigError(MicrolocalException):
    """配置不合法异常"""
    pass


class ConfigNotFoundError(MicrolocalException):
    """配置文件不存在异常"""
    pass


class CalculationError(MicrolocalException):
    """计算错误异常"""
    pass


class OutputError(MicrolocalException):
    """输出文件写入失败异常"""
    pass


class DimensionMismatchError(MicrolocalException):
    """维数不一致异常"""
    pass


class TruncationBudgetError(MicrolocalException):
    """超出截断预算异常"""
    pass


class NyquistError(MicrolocalException):
    """层级超出采样奈奎斯特限制异常"""
    pass


class ResolutionError(MicrolocalException):
    """网格分辨率不足异常"""
    pass


class QuadratureError(MicrolocalException):
    """数值积分不收敛异常"""
    pass


class InsufficientBasisError(MicrolocalException):
    """小波基光滑性或消失矩不足异常"""
    pass


class SignalSpecError(MicrolocalException):
    """测试信号参数不合法异常"""
    pass


class SymbolFileError(MicrolocalException):
    """符号表文件格式错误异常"""
    pass


class HarnessAssertionError(MicrolocalException):
    """检验断言失败异常"""
    pass
