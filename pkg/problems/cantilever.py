"""
悬臂梁柔度最小化的公共部分：配置模型、载荷区域与柔度目标
"""
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import InvalidArgumentError
from fem import ComplianceState, FilterOperator, MaterialLaw, assemble_filter, body_force_vector, solve_compliance
from field import SIDES, CellField, Mesh
from polytope import Polytope
from projection import GlobalConstraints, at_least

BUILTIN_POLYTOPE = "builtin"


def split_list(value):
    # "bottom, top" → ["bottom", "top"]；"0, 0.1, 0" → ["0", "0.1", "0"]
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ConstraintRow(BaseModel):
    """一行全局约束 ∫w·η ≤ bound（sense = le）或 ≥ bound（sense = ge）"""
    model_config = ConfigDict(extra="forbid")

    weights: List[float]
    bound: float
    sense: Literal["le", "ge"] = "le"

    @field_validator("weights", mode="before")
    @classmethod
    def _parse_weights(cls, value):
        return split_list(value)

    @field_validator("weights")
    @classmethod
    def _check_weights(cls, value):
        if not value:
            raise ValueError("weights must not be empty")
        if not np.all(np.isfinite(value)):
            raise ValueError("weights must be finite")
        if not np.any(np.asarray(value) != 0.0):
            raise ValueError("weights must not be all zero")
        return value

    def as_row(self):
        """规范化为 (w, b)，使约束写成 ∫w·η ≤ b"""
        if self.sense == "ge":
            return at_least(self.weights, self.bound)
        return np.asarray(self.weights, dtype=float), float(self.bound)


class CantileverConfig(BaseModel):
    """矩形悬臂梁：左端固支，右端附近圆盘区域内受体力"""
    model_config = ConfigDict(extra="forbid")

    lx: float = Field(3.0, gt=0)
    ly: float = Field(1.0, gt=0)
    nx: int = Field(96, ge=1)
    ny: int = Field(32, ge=1)
    epsilon: float = Field(0.06 / (2.0 * np.sqrt(3.0)), ge=0)
    load_center: Tuple[float, float] = (2.9, 0.5)
    load_radius: float = Field(0.05, gt=0)
    load_vector: Tuple[float, float] = (0.0, -1.0)
    gamma_d: List[str] = ["left"]
    gamma_f: List[str] = ["bottom", "top"]
    psi0: Optional[List[float]] = None          # 常数初始潜变量
    psi0_file: Optional[Path] = None            # 每行一个单元的初始潜变量
    polytope: str = BUILTIN_POLYTOPE            # builtin 或顶点文件路径（每行一个顶点）
    constraints: List[ConstraintRow] = []       # 非空时替换问题自带的约束行

    @field_validator("load_center", "load_vector", "psi0", "gamma_d", "gamma_f", mode="before")
    @classmethod
    def _parse_lists(cls, value):
        return split_list(value)

    @field_validator("gamma_d", "gamma_f")
    @classmethod
    def _check_sides(cls, value):
        unknown = [side for side in value if side not in SIDES]
        if unknown:
            raise ValueError(f"unknown boundary sides {unknown}; valid sides are {list(SIDES)}")
        return value

    @field_validator("polytope")
    @classmethod
    def _check_polytope(cls, value):
        value = value.strip()
        if value != BUILTIN_POLYTOPE and not Path(value).is_file():
            raise ValueError(f"polytope must be '{BUILTIN_POLYTOPE}' or an existing vertex file, got '{value}'")
        return value

    @model_validator(mode="after")
    def _check_geometry(self):
        cx, cy = self.load_center
        if not (0.0 <= cx <= self.lx and 0.0 <= cy <= self.ly):
            raise ValueError("load center lies outside the domain")
        if not self.gamma_d:
            raise ValueError("gamma_d must name at least one side")
        if self.psi0 is not None and self.psi0_file is not None:
            raise ValueError("give either psi0 or psi0_file, not both")
        return self


def resolve_polytope(cfg: CantileverConfig, dim: int, builtin: Callable[[], Polytope]) -> Polytope:
    """配置中的多面体；builtin 时使用问题自带的构造"""
    P = builtin() if cfg.polytope == BUILTIN_POLYTOPE else Polytope.from_file(cfg.polytope)
    if P.dim != dim:
        raise InvalidArgumentError("polytope dimension does not match the material model",
                                   expected=dim, got=P.dim, polytope=cfg.polytope)
    return P


def resolve_constraints(cfg: CantileverConfig, dim: int,
                        default: Callable[[], GlobalConstraints]) -> GlobalConstraints:
    """配置中的约束行；未给出时使用问题自带的约束"""
    if not cfg.constraints:
        return default()
    for i, row in enumerate(cfg.constraints):
        if len(row.weights) != dim:
            raise InvalidArgumentError("constraint weights have wrong length",
                                       row=i, expected=dim, got=len(row.weights))
    return GlobalConstraints.from_rows([row.as_row() for row in cfg.constraints])


def loaded_cells(mesh: Mesh, center, radius: float) -> np.ndarray:
    """质心落在圆盘内的单元；没有时取离圆心最近的单元"""
    d2 = np.sum((mesh.cell_centroids() - np.asarray(center, dtype=float)) ** 2, axis=1)
    cells = np.flatnonzero(d2 <= radius ** 2)
    if cells.size == 0:
        cells = np.array([mesh.nearest_cell(center)])
    return cells


class CompliancePipeline:
    """
    η ↦ F(η) = f·u(η̃) 及其 L² 梯度

    滤波分解在构造时建立，之后每次 evaluate 只重新组装弹性矩阵
    """

    def __init__(self, name: str, mesh: Mesh, material: MaterialLaw, fop: FilterOperator,
                 load: np.ndarray, gamma_d, psi0: CellField, P: Polytope, constraints: GlobalConstraints):
        self.name = name
        self.mesh = mesh
        self.material = material
        self.fop = fop
        self.load = load
        self.gamma_d = list(gamma_d)
        self.psi0 = psi0
        self.polytope = P
        self.constraints = constraints
        self.evaluations = 0

    def state(self, eta: CellField) -> ComplianceState:
        self.evaluations += 1
        return solve_compliance(self.mesh, self.material, eta, self.fop, self.load, self.gamma_d)

    def evaluate(self, eta: CellField) -> Tuple[float, CellField]:
        s = self.state(eta)
        return s.compliance, s.gradient

    def report(self, eta: CellField) -> Dict[str, object]:
        """写入运行摘要的附加量"""
        return {"phase_volumes": self.mesh.cell_area * np.sum(eta.values, axis=0)}


def build_common(cfg: CantileverConfig, channels: int, default_psi0) -> Tuple[Mesh, FilterOperator, np.ndarray, CellField]:
    """网格、滤波器、载荷向量与初始潜变量"""
    mesh = Mesh(cfg.lx, cfg.ly, cfg.nx, cfg.ny)
    fop = assemble_filter(mesh, cfg.epsilon, cfg.gamma_f)
    cells = loaded_cells(mesh, cfg.load_center, cfg.load_radius)
    load = body_force_vector(mesh, cells, cfg.load_vector)

    if cfg.psi0_file is not None:
        values = np.loadtxt(cfg.psi0_file, ndmin=2)
        psi0 = CellField(mesh, values)
    else:
        value = np.asarray(cfg.psi0 if cfg.psi0 is not None else default_psi0, dtype=float)
        psi0 = CellField.constant(mesh, value)
    if psi0.channels != channels:
        raise InvalidArgumentError("initial latent field has wrong channel count",
                                   expected=channels, got=psi0.channels)
    return mesh, fop, load, psi0
