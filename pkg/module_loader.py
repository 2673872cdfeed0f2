import importlib
import pkgutil
import sys
from pathlib import Path
from typing import Dict, Iterable

from loguru import logger

from config import Config
from registry import plugin_registry

ROOT_DIR = Path(__file__).resolve().parent


# 延迟导入logger避免循环导入
def get_solver_logger():
    try:
        from logger import solver_logger
        return solver_logger
    except ImportError:
        return None


class ModuleLoader:
    """插件模块加载器，负责导入 Config.PLUGIN_PACKAGES 下的问题与 oracle 模块"""

    def __init__(self, packages: Iterable[str] = Config.PLUGIN_PACKAGES):
        self.packages = tuple(packages)
        self.loaded_modules: Dict[str, object] = {}

        # 将仓库根目录添加到Python路径
        root = str(ROOT_DIR)
        if root not in sys.path:
            sys.path.insert(0, root)

        plugin_registry.set_logger(get_solver_logger())

    def load_all_modules(self):
        """加载所有插件模块（启动时调用）"""
        for package in self.packages:
            package_dir = ROOT_DIR / package
            if not package_dir.is_dir():
                logger.warning(f"⚠️  插件目录不存在: {package_dir}")
                continue

            # 包本身（__init__ 中可能定义共享模型）
            self._load_module_sync(package)
            for info in pkgutil.iter_modules([str(package_dir)]):
                if info.name.startswith("_"):
                    continue
                self._load_module_sync(f"{package}.{info.name}")

        solver_logger = get_solver_logger()
        if solver_logger:
            solver_logger.log_system_event("PLUGINS_LOADED", {
                "modules": len(self.loaded_modules),
                "problems": plugin_registry.problem_names(),
                "oracles": plugin_registry.oracle_names(),
            })

    def _load_module_sync(self, module_path: str):
        """同步加载指定模块（内部方法）"""
        try:
            if module_path in sys.modules:
                module = sys.modules[module_path]
            else:
                module = importlib.import_module(module_path)
            self.loaded_modules[module_path] = module
            logger.debug(f"✅ 加载模块成功: {module_path}")
        except Exception as e:
            logger.error(f"❌ 加载模块失败 {module_path}: {str(e)}")
            raise

