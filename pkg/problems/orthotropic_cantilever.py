"""
正交各向异性材料方向优化的悬臂梁
设计变量 η = (η_void, r cos 2θ, r sin 2θ)，多面体为八边形底面加空材料顶点
"""
from typing import Dict

import numpy as np
from pydantic import Field

from decorators import problem_builder
from errors import InvalidArgumentError
from field import CellField
from materials import OrthoSpec, iso_voigt, rotated_ortho_C
from polytope import build_regular_polygon_with_apex, orientation_angles
from problems.cantilever import (
    CantileverConfig,
    CompliancePipeline,
    build_common,
    resolve_constraints,
    resolve_polytope,
)
from projection import GlobalConstraints, at_least


class OrthotropicCantileverConfig(CantileverConfig):
    E_x: float = Field(5.0, gt=0)
    E_y: float = Field(0.5, gt=0)
    nu_xy: float = 0.3
    p: int = Field(4, ge=2)
    num_angles: int = Field(8, ge=3)
    void_fraction: float = Field(0.3, gt=0, lt=1)   # 空材料最小体积分数
    void_modulus: float = Field(1e-6, gt=0)
    stiffness_floor: float = Field(1e-6, ge=0)      # 统一叠加 floor·C_iso(1, ν)


class OrthotropicPipeline(CompliancePipeline):
    def report(self, eta: CellField) -> Dict[str, object]:
        _, r = orientation_angles(eta.values, apex_axis=0)
        info = super().report(eta)
        # 纯相饱和度 max(s, r)
        info["mean_saturation"] = float(np.mean(np.maximum(eta.values[:, 0], r)))
        return info


@problem_builder("orthotropic_cantilever_2d", config=OrthotropicCantileverConfig)
def build_orthotropic_cantilever(cfg: OrthotropicCantileverConfig):
    """
    构造正交各向异性悬臂梁

    三个通道全部经过同一个滤波器；空材料顶点使用 void_modulus 的各向同性张量。
    第 0 个坐标始终是空材料分量 s，自定义多面体需沿用这一坐标约定

    返回:
        (OrthotropicPipeline, Polytope, GlobalConstraints)
    """
    spec = OrthoSpec(E_x=cfg.E_x, E_y=cfg.E_y, nu_xy=cfg.nu_xy, p=cfg.p)
    P = resolve_polytope(cfg, 3,
                         lambda: build_regular_polygon_with_apex(cfg.num_angles, periodic=True, apex_axis=0))
    if not P.is_full_dimensional:
        raise InvalidArgumentError("orientation polytope must be full-dimensional", rank=P.row_rank)

    mesh, fop, load, psi0 = build_common(cfg, 3, [0.0, 0.1, 0.0])

    def void_fraction_bound():
        # ∫η_void ≥ void_fraction·|Ω|
        w, b = at_least([1.0, 0.0, 0.0], cfg.void_fraction * mesh.area)
        return GlobalConstraints([w], [b])

    C = resolve_constraints(cfg, 3, void_fraction_bound)
    C.check_feasible(P, mesh.area)

    C_apex = iso_voigt(cfg.void_modulus, cfg.nu_xy)
    floor = cfg.stiffness_floor * iso_voigt(1.0, cfg.nu_xy) if cfg.stiffness_floor > 0 else np.zeros((3, 3))

    def material(eta_q):
        C_q, dC_da, dC_db, dC_ds = rotated_ortho_C(spec, eta_q[..., 1], eta_q[..., 2], eta_q[..., 0], C_apex)
        dC = np.stack([dC_ds, dC_da, dC_db], axis=-3)
        return C_q + floor, dC

    problem = OrthotropicPipeline("orthotropic_cantilever_2d", mesh, material, fop, load,
                                  cfg.gamma_d, psi0, P, C)
    return problem, P, C
