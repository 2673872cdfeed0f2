"""
SiMPL 主循环：GBB 步长 → 潜变量梯度步 → Bregman 投影 → Armijo 回溯 → 顶点间隙残差停止准则
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Protocol, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config
from errors import OptimizationAborted, SimplError
from field import CellField, integrate_dot, vertex_gap_residual
from logger import solver_logger
from polytope import Polytope
from projection import GlobalConstraints, ProjectionResult, constraint_values, project


class OptOptions(BaseModel):
    """优化器参数"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    c1: float = Field(Config.C1, gt=0.0, lt=1.0)
    tol_abs: float = Field(Config.TOL_ABS, ge=0.0)
    tol_rel: float = Field(Config.TOL_REL, ge=0.0)
    alpha0: float = Field(Config.ALPHA0, gt=0.0)
    alpha_min: float = Field(Config.ALPHA_MIN, gt=0.0)
    alpha_max: float = Field(Config.ALPHA_MAX, gt=0.0)
    max_iters: int = Field(Config.MAX_ITERS, ge=0)
    max_backtracks: int = Field(Config.MAX_BACKTRACKS, ge=1)
    tol_g: float = Field(Config.TOL_G, gt=0.0)
    max_sweeps: int = Field(Config.MAX_SWEEPS, ge=1)

    @model_validator(mode="after")
    def _check_step_bounds(self):
        if not self.alpha_min <= self.alpha0 <= self.alpha_max:
            raise ValueError("step sizes must satisfy alpha_min <= alpha0 <= alpha_max")
        return self


@dataclass
class IterationRecord:
    k: int
    F: float                    # 接受后的目标值 F(η^{k+1})
    res: float                  # 顶点间隙残差 res_k
    alpha: float                # 接受的步长
    backtracks: int
    mu: np.ndarray
    constraints: np.ndarray     # ∫Wη^{k+1} dx
    min_lambda: float           # 最小重心坐标，严格内点的见证
    backtracks_exhausted: bool = False

    def to_dict(self):
        return {
            "k": self.k, "F": self.F, "res": self.res, "alpha": self.alpha,
            "backtracks": self.backtracks, "mu": self.mu, "constraints": self.constraints,
            "min_lambda": self.min_lambda, "backtracks_exhausted": self.backtracks_exhausted,
        }


@dataclass
class OptHistory:
    constraint_count: int
    records: List[IterationRecord] = field(default_factory=list)

    def append(self, record: IterationRecord):
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index) -> IterationRecord:
        return self.records[index]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def header(self) -> str:
        r = self.constraint_count
        cols = ["k", "F", "res", "alpha", "backtracks"]
        cols += [f"mu_{i + 1}" for i in range(r)] + [f"c_{i + 1}" for i in range(r)]
        return ",".join(cols)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """每个被接受的迭代一行，实数保留 17 位有效数字"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [self.header()]
        for rec in self.records:
            values = [str(rec.k), f"{rec.F:.17g}", f"{rec.res:.17g}", f"{rec.alpha:.17g}", str(rec.backtracks)]
            values += [f"{v:.17g}" for v in rec.mu] + [f"{v:.17g}" for v in rec.constraints]
            lines.append(",".join(values))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


class Objective(Protocol):
    def evaluate(self, eta: CellField) -> Tuple[float, CellField]:
        """返回 (F(η), ∇F(η) 的 L² 表示)"""


@dataclass
class SimplResult:
    eta: CellField
    psi: CellField
    F: float
    F_initial: float
    history: OptHistory
    status: str                              # "converged" | "max_iters"
    projection: Optional[ProjectionResult] = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def iterations(self) -> int:
        return len(self.history)


IterationCallback = Callable[[IterationRecord, CellField, CellField], None]


def gbb_step(eta_k: CellField, eta_km1: CellField, psi_k: CellField, psi_km1: CellField,
             g_k: CellField, g_km1: CellField,
             alpha_min: float = Config.ALPHA_MIN, alpha_max: float = Config.ALPHA_MAX) -> float:
    """
    广义 Barzilai–Borwein 步长 |∫Δη·Δψ dx / ∫Δη·ΔG dx|，截断到 [alpha_min, alpha_max]

    分母绝对值小于 1e-300 时返回 alpha_max
    """
    d_eta = eta_k.with_values(eta_k.values - eta_km1.values)
    denominator = integrate_dot(d_eta, g_k.with_values(g_k.values - g_km1.values))
    if abs(denominator) < Config.GBB_DENOMINATOR_FLOOR:
        return float(alpha_max)
    numerator = integrate_dot(d_eta, psi_k.with_values(psi_k.values - psi_km1.values))
    return float(np.clip(abs(numerator / denominator), alpha_min, alpha_max))


def armijo_accept(F_new: float, F_old: float, g_k: CellField,
                  eta_new: CellField, eta_k: CellField, c1: float) -> bool:
    """F_new ≤ F_old + c1·∫g_k·(η_new − η_k) dx（非严格不等式）"""
    step = eta_new.with_values(eta_new.values - eta_k.values)
    return bool(F_new <= F_old + c1 * integrate_dot(g_k, step))


def _evaluate(problem: Objective, eta: CellField, history: OptHistory) -> Tuple[float, CellField]:
    try:
        F, grad = problem.evaluate(eta)
    except SimplError as e:
        raise OptimizationAborted(f"objective evaluation failed: {e.message}",
                                  cause=e.code, history=history) from e
    if not np.isfinite(F) or not np.all(np.isfinite(grad.values)):
        raise OptimizationAborted("objective returned non-finite values", history=history)
    return float(F), grad


def _project(P: Polytope, psi_half: CellField, C: GlobalConstraints,
             opts: OptOptions, history: OptHistory) -> ProjectionResult:
    try:
        return project(P, psi_half, C, tol_g=opts.tol_g, max_sweeps=opts.max_sweeps)
    except SimplError as e:
        raise OptimizationAborted(f"projection failed: {e.message}",
                                  cause=e.code, history=history) from e


def simpl_run(problem: Objective, P: Polytope, C: GlobalConstraints, psi0: CellField,
              opts: Optional[OptOptions] = None,
              callback: Optional[IterationCallback] = None) -> SimplResult:
    """
    SiMPL 迭代

    参数:
        problem: 目标函数（evaluate 返回值与 L² 梯度）
        P: 多面体
        C: 全局线性约束
        psi0: 初始潜变量；先投影到约束集上，投影结果即 η⁰ 的潜变量
        opts: 优化器参数
        callback: 每个被接受的迭代之后调用 callback(record, eta, psi)

    返回:
        SimplResult

    异常:
        OptimizationAborted: 目标函数或投影失败，附带已完成的历史记录
    """
    opts = opts or OptOptions()
    if psi0.channels != P.dim:
        raise OptimizationAborted("initial latent field has wrong channel count",
                                  expected=P.dim, got=psi0.channels)
    if not np.all(np.isfinite(psi0.values)):
        raise OptimizationAborted("initial latent field must be finite")

    history = OptHistory(constraint_count=C.count)
    proj = _project(P, psi0, C, opts, history)
    psi = proj.psi
    eta = psi.with_values(P.map_points(psi.values))
    F, g = _evaluate(problem, eta, history)
    F_initial = F
    solver_logger.log_system_event("SIMPL_START", {
        "cells": psi.mesh.cell_count, "channels": P.dim, "vertices": P.vertex_count,
        "constraints": C.count, "F0": F, "initial_mu": proj.mu,
    })

    prev = None          # 上一个被接受迭代的 (η, ψ, g)
    res0 = None
    status = "max_iters"
    for k in range(opts.max_iters):
        if prev is None:
            alpha = opts.alpha0
        else:
            alpha = gbb_step(eta, prev[0], psi, prev[1], g, prev[2], opts.alpha_min, opts.alpha_max)

        backtracks = 0
        exhausted = False
        while True:
            trial_proj = _project(P, psi.with_values(psi.values - alpha * g.values), C, opts, history)
            psi_new = trial_proj.psi
            eta_new = psi.with_values(P.map_points(psi_new.values))
            F_new, g_new = _evaluate(problem, eta_new, history)
            if armijo_accept(F_new, F, g, eta_new, eta, opts.c1):
                break
            if backtracks >= opts.max_backtracks:
                exhausted = True
                solver_logger.log_warning_event("BACKTRACKS_EXHAUSTED", {
                    "k": k, "alpha": alpha, "F_old": F, "F_new": F_new})
                break
            alpha *= 0.5
            backtracks += 1

        d = psi.with_values((psi.values - psi_new.values) / alpha)
        res = vertex_gap_residual(P, d, eta)
        if res0 is None:
            res0 = res

        record = IterationRecord(
            k=k, F=F_new, res=res, alpha=alpha, backtracks=backtracks,
            mu=trial_proj.mu.copy(), constraints=constraint_values(P, psi_new, C),
            min_lambda=float(P.barycentric(psi_new.values).min()),
            backtracks_exhausted=exhausted,
        )
        history.append(record)
        solver_logger.log_iteration(record.to_dict())

        prev = (eta, psi, g)
        eta, psi, g, F, proj = eta_new, psi_new, g_new, F_new, trial_proj
        if callback is not None:
            callback(record, eta, psi)

        if res <= opts.tol_abs or (res0 > 0 and res / res0 <= opts.tol_rel):
            status = "converged"
            break

    solver_logger.log_system_event("SIMPL_FINISHED", {
        "status": status, "iterations": len(history), "F": F,
        "res": history[-1].res if len(history) else None,
    })
    return SimplResult(eta=eta, psi=psi, F=F, F_initial=F_initial, history=history,
                       status=status, projection=proj)
