"""
运行配置文件解析与校验

格式为带分节的 key = value 文本（configparser 语法），# 或 ; 开头为注释：

    [run]         problem, output_dir, snapshot_period
    [grid]        nx, ny
    [optimizer]   c1, tol_abs, tol_rel, alpha0, alpha_min, alpha_max, max_iters, max_backtracks
    [projection]  tol_g, max_sweeps
    [problem]     问题自身的参数（由该问题的 pydantic 模型校验），
                  polytope = builtin 或顶点文件路径
    [constraint.N] weights, bound, sense（le 或 ge）；按 N 升序组成约束矩阵，
                  给出时替换问题自带的约束行

向量写成逗号分隔的小数，边界选择器写成逗号分隔的边名（left,right,bottom,top）。
相对路径相对于配置文件所在目录。
"""
import configparser
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import ConfigError
from problems.cantilever import BUILTIN_POLYTOPE
from optimizer import OptOptions
from registry import plugin_registry

SECTIONS = ("run", "grid", "optimizer", "projection", "problem")
_RUN_KEYS = {"problem", "output_dir", "snapshot_period"}
_GRID_KEYS = {"nx", "ny"}
_PROJECTION_KEYS = {"tol_g", "max_sweeps"}
_CONSTRAINT_KEYS = {"weights", "bound", "sense"}
_CONSTRAINT_SECTION = re.compile(r"constraint\.(\d+)")


class RunConfig(BaseModel):
    """一次实验运行的完整配置"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    path: Path
    problem: str
    output_dir: Path
    snapshot_period: int = Field(0, ge=0)     # 0 表示不输出中间快照
    optimizer: OptOptions
    problem_config: BaseModel


class _Locator:
    """按 (section, key) 查找配置文件中的行号（从 1 开始）"""

    def __init__(self, text: str):
        self.lines: Dict[Tuple[str, Optional[str]], int] = {}
        section = None
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                self.lines.setdefault((section, None), number)
            elif section is not None:
                for sep in ("=", ":"):
                    if sep in line:
                        key = line.split(sep, 1)[0].strip()
                        self.lines.setdefault((section, key), number)
                        break

    def line(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key)) or self.lines.get((section, None))


def _error(path: Path, locator: Optional[_Locator], message: str,
           section: Optional[str] = None, key: Optional[str] = None) -> ConfigError:
    line = locator.line(section, key) if (locator and section) else None
    return ConfigError(message, path=str(path), line=line, section=section, key=key)


def _validation_error(path: Path, locator: _Locator, exc: ValidationError,
                      key_sections: Dict[str, str], default_section: str) -> ConfigError:
    first = exc.errors()[0]
    key = str(first["loc"][0]) if first["loc"] else None
    section = key_sections.get(key, default_section) if key else default_section
    where = f"[{section}] {key}: " if key else f"[{section}]: "
    return _error(path, locator, f"{where}{first['msg']}", section, key)


def _problem_validation_error(path: Path, locator: _Locator, exc: ValidationError,
                              key_sections: Dict[str, str], constraint_sections: List[str]) -> ConfigError:
    """[constraint.N] 中的错误定位到对应分节与键"""
    loc = exc.errors()[0]["loc"]
    if len(loc) >= 2 and loc[0] == "constraints" and isinstance(loc[1], int):
        section = constraint_sections[loc[1]]
        key = str(loc[2]) if len(loc) > 2 else None
        where = f"[{section}] {key}: " if key else f"[{section}]: "
        return _error(path, locator, f"{where}{exc.errors()[0]['msg']}", section, key)
    return _validation_error(path, locator, exc, key_sections, "problem")


def _check_keys(path: Path, locator: _Locator, section: str, values: Dict[str, str], allowed):
    for key in values:
        if key not in allowed:
            raise _error(path, locator, f"unknown key '{key}' in [{section}]", section, key)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    读取并校验运行配置

    参数:
        path: 配置文件路径

    返回:
        RunConfig

    异常:
        ConfigError: 解析或校验失败，带文件名与行号
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}", path=str(path))

    locator = _Locator(text)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # 保留键名大小写（E_x、E_y）
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}",
                          path=str(path), line=getattr(e, "lineno", None))

    constraint_sections = []
    for section in parser.sections():
        match = _CONSTRAINT_SECTION.fullmatch(section)
        if match:
            constraint_sections.append((int(match.group(1)), section))
        elif section not in SECTIONS:
            raise _error(path, locator, f"unknown section [{section}]", section)
    constraint_sections = [section for _, section in sorted(constraint_sections)]

    def section_values(name: str) -> Dict[str, str]:
        return dict(parser.items(name)) if parser.has_section(name) else {}

    run = section_values("run")
    grid = section_values("grid")
    optimizer = section_values("optimizer")
    projection = section_values("projection")
    problem = section_values("problem")
    _check_keys(path, locator, "run", run, _RUN_KEYS)
    _check_keys(path, locator, "grid", grid, _GRID_KEYS)
    _check_keys(path, locator, "projection", projection, _PROJECTION_KEYS)
    for section in constraint_sections:
        _check_keys(path, locator, section, section_values(section), _CONSTRAINT_KEYS)
    if "constraints" in problem:
        raise _error(path, locator, "constraint rows go in [constraint.N] sections",
                     "problem", "constraints")

    name = run.get("problem")
    if not name:
        raise _error(path, locator, "[run] problem is required", "run")
    info = plugin_registry.get_problem(name)
    if info is None:
        raise _error(path, locator,
                     f"unknown problem '{name}'; available: {plugin_registry.problem_names()}",
                     "run", "problem")

    opt_sections = {key: "optimizer" for key in optimizer}
    opt_sections.update({key: "projection" for key in projection})
    try:
        opts = OptOptions(**optimizer, **projection)
    except ValidationError as e:
        raise _validation_error(path, locator, e, opt_sections, "optimizer")

    base = path.parent
    problem_values = dict(problem)
    problem_values.update(grid)
    if "psi0_file" in problem_values:
        problem_values["psi0_file"] = str(base / problem_values["psi0_file"])
    if problem_values.get("polytope", BUILTIN_POLYTOPE).strip() != BUILTIN_POLYTOPE:
        problem_values["polytope"] = str(base / problem_values["polytope"].strip())
    if constraint_sections:
        if "constraints" not in info["config"].model_fields:
            raise _error(path, locator, f"problem '{name}' does not take constraint rows",
                         constraint_sections[0])
        problem_values["constraints"] = [section_values(section) for section in constraint_sections]
    key_sections = {key: "problem" for key in problem}
    key_sections.update({key: "grid" for key in grid})
    try:
        problem_config = info["config"](**problem_values)
    except ValidationError as e:
        raise _problem_validation_error(path, locator, e, key_sections, constraint_sections)

    try:
        return RunConfig(
            path=path,
            problem=name,
            output_dir=base / run.get("output_dir", f"runs/{name}"),
            snapshot_period=run.get("snapshot_period", 0),
            optimizer=opts,
            problem_config=problem_config,
        )
    except ValidationError as e:
        raise _validation_error(path, locator, e, {key: "run" for key in run}, "run")


def describe(config: RunConfig) -> List[str]:
    """配置摘要（validate 命令输出）"""
    lines = [
        f"problem         : {config.problem}",
        f"output_dir      : {config.output_dir}",
        f"snapshot_period : {config.snapshot_period}",
    ]
    lines += [f"optimizer.{k:<14}: {v}" for k, v in config.optimizer.model_dump().items()]
    lines += [f"problem.{k:<16}: {v}" for k, v in config.problem_config.model_dump().items()]
    return lines
