"""
异常定义
所有求解器异常都带有稳定的错误码，to_dict() 返回统一格式的错误信息
"""
from typing import Any, Dict, Optional


class SimplError(Exception):
    """求解器异常基类"""

    code = "SIMPL_ERROR"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """统一格式的错误信息"""
        payload = {
            "success": False,
            "error": self.message,
            "code": self.code,
        }
        for key, value in self.details.items():
            if key == "history":
                continue
            payload[key] = _plain(value)
        return payload


class InvalidArgumentError(SimplError, ValueError):
    code = "INVALID_ARGUMENT"


class BoundaryProximityError(SimplError):
    """逆映射在多面体边界附近无法收敛"""

    code = "BOUNDARY_PROXIMITY"

    @property
    def residual(self) -> Optional[float]:
        return self.details.get("residual")


class InfeasibleConstraintError(SimplError):
    code = "INFEASIBLE_CONSTRAINT"


class ProjectionNonConvergenceError(SimplError):
    code = "PROJECTION_NOT_CONVERGED"

    @property
    def violations(self):
        return self.details.get("violations")


class LinearSolveError(SimplError):
    code = "LINEAR_SOLVE_FAILED"

    @property
    def backward_error(self) -> Optional[float]:
        return self.details.get("backward_error")


class InvalidMaterialError(SimplError, ValueError):
    code = "INVALID_MATERIAL"


class ConfigError(SimplError):
    """配置文件错误，带行号"""

    code = "CONFIG_ERROR"

    def __str__(self) -> str:
        path = self.details.get("path")
        line = self.details.get("line")
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        return f"{where}{self.message}"


class OptimizationAborted(SimplError):
    """优化中止，附带已完成部分的历史记录"""

    code = "OPTIMIZATION_ABORTED"

    @property
    def history(self):
        return self.details.get("history")


def _plain(value: Any) -> Any:
    # numpy 标量/数组转为可 JSON 序列化的类型
    if hasattr(value, "tolist"):
        return value.tolist()
    return value
