"""
凸多面体的熵参数化
顶点矩阵 V (n×q)，梯度映射 ∇R*(ψ) = V·softmax(Vᵀψ)，及其逆映射、共轭函数、
Jacobian 与 Bregman 散度
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp, softmax

from config import Config
from errors import BoundaryProximityError, InvalidArgumentError


def _require_finite(values: np.ndarray, name: str):
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"{name} must be finite", argument=name)


def stable_softmax(y) -> np.ndarray:
    """
    数值稳定的 softmax（沿最后一维）

    参数:
        y: 有限实数向量，或按行排列的一批向量

    返回:
        np.ndarray: exp(y - max y) / Σ exp(y - max y)
    """
    y = np.asarray(y, dtype=float)
    _require_finite(y, "y")
    return softmax(y, axis=-1)


@dataclass(frozen=True)
class BarycentricPoint:
    """多面体中的点及其最大熵重心坐标"""
    weights: np.ndarray   # λ ∈ (0,1)^q，和为 1
    point: np.ndarray     # V·λ


class Polytope:
    """
    由顶点给出的凸多面体

    vertices 为 n×q 矩阵，每一列是一个顶点。构造后不可变，可在线程间共享。
    """

    def __init__(self, vertices):
        V = np.array(vertices, dtype=float)
        if V.ndim == 1:
            V = V.reshape(1, -1)
        if V.ndim != 2:
            raise InvalidArgumentError("vertex matrix must be two-dimensional", shape=list(V.shape))
        _require_finite(V, "vertices")

        n, q = V.shape
        if q < 2:
            raise InvalidArgumentError("a polytope needs at least two vertices", vertex_count=q)

        # 顶点两两不同
        diff = V[:, :, None] - V[:, None, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=0))
        dist[np.diag_indices(q)] = np.inf
        if np.min(dist) <= Config.DISTINCT_VERTEX_TOL:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise InvalidArgumentError("duplicate vertices", first=int(min(i, j)), second=int(max(i, j)))

        centroid = V.mean(axis=1)
        centered = V - centroid[:, None]
        # 行和精确为零（消除舍入误差）
        centered -= centered.mean(axis=1, keepdims=True)

        U, sigma, _ = np.linalg.svd(centered, full_matrices=False)
        scale = max(1.0, float(np.max(np.abs(V))))
        rank = int(np.sum(sigma > Config.RANK_TOL * scale))
        if rank == 0:
            raise InvalidArgumentError("vertices span no direction")
        if rank == 1 and q > 2:
            # 共线点集只有两个端点是顶点
            raise InvalidArgumentError("collinear vertex list with interior points", vertex_count=q)

        self.vertices = V
        self.centered_vertices = centered
        self.centroid = centroid
        self.row_rank = rank
        # 中心化顶点列空间的正交基，用于最小范数代表元
        self._range_basis = U[:, :rank].copy()

        for array in (self.vertices, self.centered_vertices, self.centroid, self._range_basis):
            array.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.vertices.shape[0]

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[1]

    @property
    def is_full_dimensional(self) -> bool:
        return self.row_rank == self.dim

    def __repr__(self) -> str:
        return f"Polytope(n={self.dim}, q={self.vertex_count}, rank={self.row_rank})"

    # ------------------------------------------------------------------
    # 序列化：每行一个顶点
    # ------------------------------------------------------------------
    @classmethod
    def from_vertex_list(cls, points: Iterable[Sequence[float]]) -> "Polytope":
        rows = np.array(list(points), dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(-1, 1)
        return cls(rows.T)

    @classmethod
    def from_text(cls, text: str) -> "Polytope":
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(field) for field in line.split()])
            except ValueError:
                raise InvalidArgumentError("malformed vertex line", line=line)
        if len({len(r) for r in rows}) > 1:
            raise InvalidArgumentError("vertex lines have different lengths")
        return cls.from_vertex_list(rows)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Polytope":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = [" ".join(f"{x:.17g}" for x in column) for column in self.vertices.T]
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------
    # 批量映射：psi 的形状为 (n,) 或 (m, n)
    # ------------------------------------------------------------------
    def scores(self, psi) -> np.ndarray:
        """Vᵀψ"""
        psi = np.asarray(psi, dtype=float)
        _require_finite(psi, "psi")
        return psi @ self.vertices

    def barycentric(self, psi) -> np.ndarray:
        """λ = softmax(Vᵀψ)"""
        return softmax(self.scores(psi), axis=-1)

    def map_points(self, psi) -> np.ndarray:
        """∇R*(ψ) = V·λ"""
        return self.barycentric(psi) @ self.vertices.T

    def conjugate_values(self, psi) -> np.ndarray:
        """R*(ψ) = log Σ exp(Vᵀψ)"""
        return logsumexp(self.scores(psi), axis=-1)

    def jacobians(self, psi) -> np.ndarray:
        """V(diag λ − λλᵀ)Vᵀ，形状 (..., n, n)"""
        lam = self.barycentric(psi)
        x = lam @ self.vertices.T
        second = np.einsum("...q,iq,jq->...ij", lam, self.vertices, self.vertices)
        return second - x[..., :, None] * x[..., None, :]

    def project_to_range(self, psi) -> np.ndarray:
        """投影到中心化顶点的列空间（最小范数代表元）"""
        B = self._range_basis
        return (np.asarray(psi, dtype=float) @ B) @ B.T

    def vertex_gaps(self, d, eta) -> np.ndarray:
        """min_v d·(v − η)，逐行计算"""
        d = np.asarray(d, dtype=float)
        eta = np.asarray(eta, dtype=float)
        gaps = d @ self.vertices - np.sum(d * eta, axis=-1, keepdims=True)
        return np.min(gaps, axis=-1)


# ----------------------------------------------------------------------
# 单点操作
# ----------------------------------------------------------------------
def gradient_map(P: Polytope, psi) -> BarycentricPoint:
    """ψ ↦ (λ, V·λ)，λ 的所有分量严格为正"""
    lam = P.barycentric(np.asarray(psi, dtype=float).reshape(P.dim))
    return BarycentricPoint(weights=lam, point=P.vertices @ lam)


def conjugate_value(P: Polytope, psi) -> float:
    """R*(ψ)，带最大值平移的 log-sum-exp"""
    return float(P.conjugate_values(np.asarray(psi, dtype=float).reshape(P.dim)))


def map_jacobian(P: Polytope, psi) -> np.ndarray:
    return P.jacobians(np.asarray(psi, dtype=float).reshape(P.dim))


def inverse_map(P: Polytope, eta, tol: float = Config.INVERSE_MAP_TOL,
                max_iter: int = Config.INVERSE_MAP_MAX_ITER, psi_hint=None) -> np.ndarray:
    """
    逆映射 ∇R(η)：对凹的对偶目标 ψ·η − R*(ψ) 做阻尼牛顿迭代

    参数:
        P: 多面体
        eta: 相对内部的点
        tol: |∇R*(ψ) − η| 的容差
        max_iter: 最大牛顿步数
        psi_hint: 可选的初值

    返回:
        np.ndarray: 列空间中的最小范数 ψ
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive", tol=tol)
    eta = np.asarray(eta, dtype=float).reshape(P.dim)
    _require_finite(eta, "eta")

    psi = np.zeros(P.dim) if psi_hint is None else P.project_to_range(np.asarray(psi_hint, dtype=float))
    reg = Config.HESSIAN_REGULARIZATION * np.eye(P.dim)

    def dual(p):
        return float(p @ eta - P.conjugate_values(p))

    residual = eta - P.map_points(psi)
    res_norm = float(np.linalg.norm(residual))
    polished = 0
    for _ in range(max_iter):
        if res_norm <= tol:
            # 收敛后再做一步完整牛顿步提高 ψ 的精度
            if polished >= 1:
                break
            polished += 1
        step = np.linalg.solve(P.jacobians(psi) + reg, residual)
        value = dual(psi)
        t = 1.0
        while True:
            trial = psi + t * step
            trial_residual = eta - P.map_points(trial)
            trial_norm = float(np.linalg.norm(trial_residual))
            # 残差充分下降即接受；对偶值在收敛附近的变化低于舍入，只用于远离解时
            if trial_norm <= (1.0 - 1e-4 * t) * res_norm:
                break
            if res_norm > Config.INVERSE_MAP_NEWTON_REGION and dual(trial) > value:
                break
            if t <= 1e-12:
                break
            t *= 0.5
        if res_norm <= tol and trial_norm > res_norm:
            break
        psi, residual, res_norm = trial, trial_residual, trial_norm

    if res_norm > tol:
        raise BoundaryProximityError(
            "inverse map did not converge; point too close to the polytope boundary",
            residual=res_norm)
    return P.project_to_range(psi)


def entropy_value(P: Polytope, eta, psi_hint=None) -> float:
    """R(η) = ψ·η − R*(ψ)，ψ = ∇R(η)"""
    eta = np.asarray(eta, dtype=float).reshape(P.dim)
    psi = inverse_map(P, eta, psi_hint=psi_hint)
    return float(psi @ eta - P.conjugate_values(psi))


def bregman_divergence(P: Polytope, eta, v) -> float:
    """
    D_R(η, v) = R(η) − R(v) − ∇R(v)·(η − v)

    舍入造成的 −1e-12·scale 以内的负值截为零，更负的值说明共轭计算出错
    """
    eta = np.asarray(eta, dtype=float).reshape(P.dim)
    v = np.asarray(v, dtype=float).reshape(P.dim)
    psi_eta = inverse_map(P, eta)
    psi_v = inverse_map(P, v)
    r_eta = psi_eta @ eta - P.conjugate_values(psi_eta)
    r_v = psi_v @ v - P.conjugate_values(psi_v)
    linear = psi_v @ (eta - v)
    value = float(r_eta - r_v - linear)
    scale = max(1.0, abs(float(r_eta)), abs(float(r_v)), abs(float(linear)))
    if value < -Config.BREGMAN_NEGATIVE_TOL * scale:
        raise InvalidArgumentError("Bregman divergence is negative", value=value, scale=scale)
    return max(value, 0.0)


def build_regular_polygon_with_apex(num_angles: int, periodic: bool = True,
                                    apex: Optional[Sequence[float]] = None,
                                    apex_axis: int = 2) -> Polytope:
    """
    正多边形底面加一个顶点的棱锥，用于材料方向编码

    两种方式的底面都是同一个正 N 边形，区别在于第 i 个底面顶点代表的方向：
    periodic 时 θ_i = π(i−1)/N，极角为二倍角 2θ_i（π 周期的张量）；
    否则 θ_i = 2π(i−1)/N 本身就是极角（如磁化方向）。
    用 orientation_angles(..., periodic=...) 按同一约定解码。

    参数:
        num_angles: 离散方向数（底面顶点数）
        periodic: 方向是否以 π 为周期
        apex: 顶点坐标，默认为 apex_axis 方向的单位向量
        apex_axis: 顶点所在坐标轴，底面位于其余两个坐标

    返回:
        Polytope: R³ 中的多面体，底面顶点在前，顶点最后
    """
    if num_angles < 3:
        raise InvalidArgumentError("num_angles must be at least 3", num_angles=num_angles)
    if apex_axis not in (0, 1, 2):
        raise InvalidArgumentError("apex_axis must be 0, 1 or 2", apex_axis=apex_axis)

    directions = direction_angles(num_angles, periodic)
    polar = 2.0 * directions if periodic else directions

    plane_axes = [axis for axis in range(3) if axis != apex_axis]
    base = np.zeros((3, num_angles))
    base[plane_axes[0]] = np.cos(polar)
    base[plane_axes[1]] = np.sin(polar)

    if apex is None:
        apex_vec = np.zeros(3)
        apex_vec[apex_axis] = 1.0
    else:
        apex_vec = np.asarray(apex, dtype=float).reshape(3)
    return Polytope(np.column_stack([base, apex_vec]))


def direction_angles(num_angles: int, periodic: bool = True) -> np.ndarray:
    """底面顶点代表的材料方向 θ_i：periodic 时覆盖 [0, π)，否则覆盖 [0, 2π)"""
    period = np.pi if periodic else 2.0 * np.pi
    return period * np.arange(num_angles) / num_angles


def orientation_angles(eta, apex_axis: int = 2, periodic: bool = True):
    """
    由底面坐标恢复材料方向

    返回:
        (theta, r): periodic 时 θ = φ/2 ∈ [0, π)，否则 θ = φ ∈ [0, 2π)；r 为底面半径坐标
    """
    eta = np.asarray(eta, dtype=float)
    plane_axes = [axis for axis in range(3) if axis != apex_axis]
    a = eta[..., plane_axes[0]]
    b = eta[..., plane_axes[1]]
    phi = np.mod(np.arctan2(b, a), 2.0 * np.pi)
    return (0.5 * phi if periodic else phi), np.hypot(a, b)
