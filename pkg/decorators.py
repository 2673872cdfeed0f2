import functools
from typing import Callable, Optional, Type

from pydantic import BaseModel

from registry import plugin_registry


def _module_name(func: Callable) -> str:
    # problems.isotropic_cantilever → isotropic_cantilever
    return func.__module__.split('.')[-1]


def problem_builder(name: str, *, config: Type[BaseModel]) -> Callable:
    """
    基准问题构造器装饰器
    被标记的函数接收已校验的配置模型，返回 (Problem, Polytope, GlobalConstraints)

    参数:
        name (str): 配置文件 [run] problem 中使用的名称
        config (BaseModel): [problem] 段对应的 pydantic 模型

    使用示例:
        @problem_builder("isotropic_cantilever_2d", config=IsotropicCantileverConfig)
        def build_isotropic_cantilever(cfg): ...
    """
    if not (isinstance(config, type) and issubclass(config, BaseModel)):
        raise TypeError("config 必须是 pydantic 模型类")

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(cfg=None, **overrides):
            if cfg is None:
                cfg = config(**overrides)
            elif overrides:
                cfg = cfg.model_copy(update=overrides)
            return func(cfg)

        wrapper.config_model = config
        wrapper.problem_name = name
        plugin_registry.register_problem(name, wrapper, config, _module_name(func))
        return wrapper

    return decorator


def oracle(func: Optional[Callable] = None, *, name: Optional[str] = None) -> Callable:
    """
    验证 oracle 装饰器
    被标记的函数无参数调用，返回可打印的字典

    使用示例:
        @oracle
        @oracle(name="illinois_bisection")
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            return func(*args, **kwargs)

        plugin_registry.register_oracle(name or func.__name__, wrapper, _module_name(func))
        return wrapper

    # 支持带参数和不带参数的调用
    if func is None:
        return decorator
    return decorator(func)
