"""
插件注册中心
统一管理基准问题构造器与验证 oracle 的注册和获取，避免循环导入
"""
from typing import Any, Callable, Dict, Optional, Type
import threading


class PluginRegistry:
    """插件注册中心 - 使用单例模式"""

    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if not self._initialized:
            # {name: {"builder": callable, "config": pydantic 模型, "module": 模块名}}
            self.problems: Dict[str, Dict[str, Any]] = {}
            # {name: {"func": callable, "module": 模块名, "doc": 说明}}
            self.oracles: Dict[str, Dict[str, Any]] = {}
            self.logger = None  # 延迟设置
            self._initialized = True

    def set_logger(self, logger):
        """设置日志记录器"""
        self.logger = logger

    def register_problem(self, name: str, builder: Callable, config_model: Type, module_name: str):
        """注册基准问题构造器"""
        if name in self.problems and self.problems[name]["module"] != module_name:
            raise ValueError(f"问题名称重复: {name}")
        self.problems[name] = {"builder": builder, "config": config_model, "module": module_name}
        if self.logger:
            self.logger.log_module_event("PROBLEM_REGISTERED", module_name, {
                "problem": name,
                "config_model": config_model.__name__,
            })

    def register_oracle(self, name: str, func: Callable, module_name: str):
        """注册验证 oracle"""
        self.oracles[name] = {
            "func": func,
            "module": module_name,
            "doc": (func.__doc__ or "").strip().splitlines()[0] if func.__doc__ else "",
        }
        if self.logger:
            self.logger.log_module_event("ORACLE_REGISTERED", module_name, {"oracle": name})

    def get_problem(self, name: str) -> Optional[Dict[str, Any]]:
        """获取指定的问题构造器信息"""
        return self.problems.get(name)

    def get_oracle(self, name: str) -> Optional[Callable]:
        """获取指定的 oracle"""
        info = self.oracles.get(name)
        return info["func"] if info else None

    def problem_names(self):
        return sorted(self.problems)

    def oracle_names(self):
        return sorted(self.oracles)


# 全局注册中心实例
plugin_registry = PluginRegistry()
