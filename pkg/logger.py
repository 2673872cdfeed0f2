import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

from loguru import logger

from config import Config


class SolverLogger:
    """基于loguru的求解过程日志记录器"""

    def __init__(self):
        self._file_sink_id = None
        self.setup_logger()

    def setup_logger(self, log_dir: Optional[Union[str, Path]] = None):
        """设置日志记录器"""
        # 移除默认的logger
        logger.remove()
        self._file_sink_id = None

        # 始终配置控制台输出
        logger.add(
            sys.stderr,
            format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
            level=Config.LOG_LEVEL,
            colorize=True
        )

        # 配置文件输出
        if Config.LOG_TO_FILE and log_dir is not None:
            try:
                log_path = Path(log_dir) / Config.LOG_FILE_NAME
                log_path.parent.mkdir(parents=True, exist_ok=True)

                self._file_sink_id = logger.add(
                    str(log_path),
                    format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
                    level=Config.LOG_LEVEL,
                    rotation=Config.LOG_ROTATION,      # 自动轮转
                    retention=Config.LOG_RETENTION,    # 保留时间
                    encoding="utf-8",
                    enqueue=False                      # 保证写入顺序
                )
                logger.info(f"📁 日志文件已配置: {log_path}")

            except Exception as e:
                logger.error(f"⚠️  创建日志文件失败: {e}")

    def close_file_sink(self):
        """关闭文件输出（运行结束时调用）"""
        if self._file_sink_id is not None:
            logger.remove(self._file_sink_id)
            self._file_sink_id = None

    def _dumps(self, data: Dict) -> str:
        return json.dumps({k: _jsonable(v) for k, v in data.items()}, ensure_ascii=False)

    def log_iteration(self, record: Dict):
        """记录一次被接受的迭代"""
        if not Config.ENABLE_ITERATION_LOGGING:
            return
        logger.info(f"🔁 ITERATION | {self._dumps(record)}")

    def log_projection(self, details: Dict):
        """记录投影结果"""
        logger.debug(f"📐 PROJECTION | {self._dumps(details)}")

    def log_warning_event(self, event: str, details: Dict = None):
        """记录警告事件"""
        log_data = {"event": event}
        if details:
            log_data.update(details)
        logger.warning(f"⚠️  WARNING | {self._dumps(log_data)}")

    def log_error(self, message: str, error_details: Dict = None):
        """记录错误日志"""
        log_data = {"message": message}
        if error_details:
            log_data.update(error_details)
        logger.error(f"💥 ERROR | {self._dumps(log_data)}")

    def log_system_event(self, event: str, details: Dict = None):
        """记录系统事件"""
        log_data = {"event": event}
        if details:
            log_data.update(details)
        logger.info(f"🔧 SYSTEM | {self._dumps(log_data)}")

    def log_module_event(self, event: str, module_name: str, details: Dict = None):
        """记录插件模块相关事件"""
        log_data = {
            "event": event,
            "module": module_name
        }
        if details:
            log_data.update(details)
        logger.info(f"🧩 MODULE | {self._dumps(log_data)}")

    def success(self, message: str):
        logger.success(message)

    def debug(self, message: str):
        logger.debug(message)


def _jsonable(value: Any) -> Any:
    """numpy 类型转为 JSON 可序列化类型，长向量截断"""
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, list) and len(value) > Config.LOG_MAX_VECTOR_SIZE:
        return value[:Config.LOG_MAX_VECTOR_SIZE] + ["...[truncated]"]
    if isinstance(value, float) and value != value:
        return "nan"
    return value


# 全局日志记录器实例
solver_logger = SolverLogger()
