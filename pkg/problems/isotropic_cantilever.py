"""
四相各向同性悬臂梁（空材料 + 三种刚度不同的实体材料）
设计变量位于标准单纯形 Δ³，多材料 SIMP 插值
"""
from typing import List

import numpy as np
from pydantic import Field, field_validator, model_validator

from decorators import problem_builder
from materials import IsoStack, simp_voigt
from polytope import Polytope
from problems.cantilever import (
    CantileverConfig,
    CompliancePipeline,
    build_common,
    resolve_constraints,
    resolve_polytope,
    split_list,
)
from projection import GlobalConstraints


class IsotropicCantileverConfig(CantileverConfig):
    E: List[float] = [1e-6, 1.0, 3.0, 5.0]
    nu: float = 0.3
    p: float = Field(3.0, ge=1.0)
    bounds: List[float] = [0.18, 0.36, 0.36]    # 实体相的绝对面积上限

    @field_validator("E", "bounds", mode="before")
    @classmethod
    def _parse_vectors(cls, value):
        return split_list(value)

    @model_validator(mode="after")
    def _check_phases(self):
        if len(self.bounds) != len(self.E) - 1:
            raise ValueError("need one volume bound per non-void phase")
        return self


@problem_builder("isotropic_cantilever_2d", config=IsotropicCantileverConfig)
def build_isotropic_cantilever(cfg: IsotropicCantileverConfig):
    """
    构造各向同性多材料悬臂梁

    默认多面体为标准单纯形，约束为 bounds 给出的实体相面积上限；
    配置中的 polytope 与 constraints 可分别替换它们

    返回:
        (CompliancePipeline, Polytope, GlobalConstraints)
    """
    stack = IsoStack(E=tuple(cfg.E), nu=cfg.nu, p=cfg.p)
    n = stack.phase_count
    P = resolve_polytope(cfg, n, lambda: Polytope(np.eye(n)))
    # 行向量选出 η_2..η_n
    C = resolve_constraints(cfg, n, lambda: GlobalConstraints(np.eye(n)[1:], cfg.bounds))

    mesh, fop, load, psi0 = build_common(cfg, n, np.zeros(n))
    C.check_feasible(P, mesh.area)

    def material(eta_q):
        return simp_voigt(stack, eta_q)

    problem = CompliancePipeline("isotropic_cantilever_2d", mesh, material, fop, load,
                                 cfg.gamma_d, psi0, P, C)
    return problem, P, C
