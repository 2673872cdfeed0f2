"""
全局线性约束 ∫Wη dx ⪯ b 下的 Bregman 投影

单个约束：对单调不增的标量函数 h(μ) 用 Illinois 法求根
多个约束：Bregman–Dykstra 循环（按约束编号升序）
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from config import Config
from errors import InfeasibleConstraintError, InvalidArgumentError, ProjectionNonConvergenceError
from field import CellField
from logger import solver_logger
from polytope import Polytope


class GlobalConstraints:
    """∫_Ω Wη dx ⪯ b，W 的每行是单位体积权重"""

    def __init__(self, W, b):
        W = np.asarray(W, dtype=float)
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if W.size == 0:
            W = W.reshape(0, W.shape[-1] if W.ndim == 2 else 0)
        if W.ndim == 1:
            W = W.reshape(1, -1)
        if W.ndim != 2 or W.shape[0] != b.shape[0]:
            raise InvalidArgumentError("W must be r×n and b of length r",
                                       W_shape=list(W.shape), b_shape=list(b.shape))
        if W.shape[0] and np.any(np.all(W == 0.0, axis=1)):
            raise InvalidArgumentError("constraint rows with all-zero weights are not allowed")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise InvalidArgumentError("constraint data must be finite")
        self.W = W
        self.b = b
        self.W.flags.writeable = False
        self.b.flags.writeable = False

    @classmethod
    def empty(cls, n: int) -> "GlobalConstraints":
        return cls(np.zeros((0, n)), np.zeros(0))

    @classmethod
    def from_rows(cls, rows: Sequence["tuple"]) -> "GlobalConstraints":
        """rows: (w, b) 二元组序列"""
        W = np.array([np.asarray(w, dtype=float) for w, _ in rows])
        b = np.array([float(bound) for _, bound in rows])
        return cls(W, b)

    @property
    def count(self) -> int:
        return self.W.shape[0]

    def check_feasible(self, P: Polytope, area: float, interior_point=None) -> float:
        """
        严格可行性证明

        参数:
            P: 多面体
            area: 区域面积 |Ω|
            interior_point: 可选的常数设计（P 内部一点）

        返回:
            float: 最小松弛量 min_i (b_i − |Ω|·w_i·η)，必须为正
        """
        if self.count == 0:
            return float("inf")
        if interior_point is not None:
            eta = np.asarray(interior_point, dtype=float)
            slack = float(np.min(self.b - area * (self.W @ eta)))
        else:
            # 在常数设计上最大化松弛量 t：|Ω|·W·V·λ + t ≤ b，λ ∈ 单纯形
            q = P.vertex_count
            A = area * (self.W @ P.vertices)
            c = np.zeros(q + 1)
            c[-1] = -1.0
            A_ub = np.hstack([A, np.ones((self.count, 1))])
            A_eq = np.hstack([np.ones((1, q)), np.zeros((1, 1))])
            bounds = [(0.0, None)] * q + [(None, 1.0)]
            result = linprog(c, A_ub=A_ub, b_ub=self.b, A_eq=A_eq, b_eq=[1.0],
                             bounds=bounds, method="highs")
            slack = float(result.x[-1]) if result.status == 0 else -np.inf
        if not slack > 0:
            raise InfeasibleConstraintError(
                "global constraints admit no strictly feasible design", slack=slack)
        return slack


def at_least(w, b: float):
    """把 ∫w·η ≥ b 写成 ∫(−w)·η ≤ −b"""
    return -np.asarray(w, dtype=float), -float(b)


@dataclass
class ProjectionResult:
    psi: CellField
    mu: np.ndarray          # 对偶乘子，⪰ 0
    violation: np.ndarray   # 投影后的 ∫Wη − b
    sweeps: int


def constraint_values(P: Polytope, psi: CellField, C: GlobalConstraints) -> np.ndarray:
    """∫_Ω W·∇R*(ψ) dx"""
    eta = P.map_points(psi.values)
    return psi.mesh.cell_area * (C.W @ np.sum(eta, axis=0))


def dual_objective(P: Polytope, psi_half: CellField, C: GlobalConstraints, mu) -> float:
    """g(μ) = −∫R*(ψ − Wᵀμ) dx − μ·b"""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    shifted = psi_half.values - mu @ C.W
    return float(-psi_half.mesh.cell_area * np.sum(P.conjugate_values(shifted)) - mu @ C.b)


def _slack_tolerance(tol: float, mu: float) -> float:
    """|f(μ)| ≤ tol/max(1, μ) 同时保证可行性与 |μ·f(μ)| ≤ tol"""
    return tol / max(1.0, abs(mu))


def _illinois(f, lo: float, f_lo: float, hi: float, f_hi: float, tol: float):
    """
    Illinois 法（带停滞修正的试位法）

    要求 f(lo) > 0 ≥ f(hi)，f 单调不增；在 |f(μ)| ≤ tol/max(1, μ) 时停止
    """
    side = 0
    mu, f_mu = hi, f_hi
    for _ in range(Config.ILLINOIS_MAX_ITER):
        if abs(f_mu) <= _slack_tolerance(tol, mu):
            return mu, f_mu
        mu = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        if not (lo < mu < hi):
            mu = 0.5 * (lo + hi)
        f_mu = f(mu)
        if abs(f_mu) <= _slack_tolerance(tol, mu):
            return mu, f_mu
        if f_mu > 0:
            lo, f_lo = mu, f_mu
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = mu, f_mu
            if side == 1:
                f_lo *= 0.5
            side = 1
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, hi):
            # 区间已收缩到机器精度，取可行一侧
            return hi, f(hi)
    solver_logger.log_warning_event("ILLINOIS_MAX_ITER", {
        "iterations": Config.ILLINOIS_MAX_ITER, "mu": mu, "residual": f_mu,
        "bracket": [lo, hi], "tol": _slack_tolerance(tol, mu)})
    return mu, f_mu


def _solve_multiplier(P: Polytope, base: np.ndarray, w: np.ndarray, bound: float,
                      area: float, tol_g: float):
    """在 base − μw 方向上求最小的 μ ≥ 0 使 ∫w·η ≤ b"""

    def violation(mu: float) -> float:
        eta = P.map_points(base - mu * w)
        return area * float(np.sum(eta @ w)) - bound

    f0 = violation(0.0)
    if f0 <= 0.0:
        return 0.0, f0

    lo, f_lo = 0.0, f0
    hi = 1.0
    f_hi = violation(hi)
    while f_hi > 0.0:
        if hi > Config.BRACKET_LIMIT:
            raise InfeasibleConstraintError(
                "no strictly feasible point along the constraint direction",
                bound=bound, violation=f_hi)
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = violation(hi)

    mu, f_mu = _illinois(violation, lo, f_lo, hi, f_hi, tol_g)
    if abs(f_mu) > tol_g and f_mu > 0:
        raise ProjectionNonConvergenceError(
            "Illinois iteration did not reach the constraint tolerance",
            violations=[f_mu])
    return float(mu), float(f_mu)


def project_single(P: Polytope, psi_half: CellField, w, b: float,
                   tol_g: float = Config.TOL_G) -> ProjectionResult:
    """
    单约束投影

    h(0) ≤ b 时直接返回（μ = 0，ψ 不变）；否则求 h(μ*) = b
    """
    w = np.asarray(w, dtype=float).reshape(P.dim)
    area = psi_half.mesh.cell_area
    mu, viol = _solve_multiplier(P, psi_half.values, w, float(b), area, tol_g)
    if mu == 0.0:
        psi = psi_half.copy()
    else:
        psi = psi_half.with_values(psi_half.values - mu * w)
    return ProjectionResult(psi=psi, mu=np.array([mu]), violation=np.array([viol]), sweeps=1)


def project_multi(P: Polytope, psi_half: CellField, C: GlobalConstraints,
                  tol_g: float = Config.TOL_G,
                  max_sweeps: int = Config.MAX_SWEEPS) -> ProjectionResult:
    """
    Bregman–Dykstra 投影

    每个约束保存修正乘子 μ_i；内层步骤在"当前潜变量 + 该约束的修正"上重新求解
    单约束问题，因此 μ_i 可以回落到 0。
    """
    if C.count < 1:
        raise InvalidArgumentError("project_multi needs at least one constraint")
    area = psi_half.mesh.cell_area
    base = psi_half.values
    mu = np.zeros(C.count)
    psi = base.copy()

    for sweep in range(1, max_sweeps + 1):
        psi_prev = psi
        for i in range(C.count):
            w = C.W[i]
            # 撤销约束 i 的修正后重新投影
            start = psi + mu[i] * w
            mu[i], _ = _solve_multiplier(P, start, w, C.b[i], area, tol_g)
            psi = start - mu[i] * w

        violation = constraint_values(P, psi_half.with_values(psi), C) - C.b
        change = float(np.max(np.abs(psi - psi_prev))) if sweep > 1 else np.inf
        if sweep == 1 and not np.any(mu):
            change = 0.0
        complementary = np.abs(mu * violation) <= tol_g * np.maximum(1.0, np.abs(C.b))
        if np.all(violation <= tol_g) and np.all(complementary) and change <= tol_g:
            if not np.any(mu):
                psi = base.copy()
            solver_logger.log_projection({"sweeps": sweep, "mu": mu, "violation": violation})
            return ProjectionResult(psi=psi_half.with_values(psi), mu=mu.copy(),
                                    violation=violation, sweeps=sweep)

    raise ProjectionNonConvergenceError(
        "Bregman-Dykstra projection exceeded the sweep limit",
        violations=violation, sweeps=max_sweeps, mu=mu)


def project(P: Polytope, psi_half: CellField, C: GlobalConstraints,
            tol_g: float = Config.TOL_G, max_sweeps: int = Config.MAX_SWEEPS) -> ProjectionResult:
    """按约束个数选择投影算法"""
    if C.count == 0:
        return ProjectionResult(psi=psi_half.copy(), mu=np.zeros(0), violation=np.zeros(0), sweeps=0)
    if C.count == 1:
        return project_single(P, psi_half, C.W[0], C.b[0], tol_g)
    return project_multi(P, psi_half, C, tol_g, max_sweeps)
