"""
投影参照解：二分法乘子、稠密对偶求解、单单元熵最小化
"""
import numpy as np
from scipy.optimize import minimize

from decorators import oracle
from field import CellField, Mesh
from polytope import Polytope, build_regular_polygon_with_apex
from projection import GlobalConstraints, constraint_values, dual_objective, project_multi, project_single


def bisection_multiplier(P: Polytope, psi_half: CellField, w, b: float, tol: float = 1e-14) -> float:
    """单约束乘子的二分法参照解"""
    w = np.asarray(w, dtype=float)
    area = psi_half.mesh.cell_area

    def h(mu):
        return area * float(np.sum(P.map_points(psi_half.values - mu * w) @ w)) - b

    if h(0.0) <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while h(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dense_dual_projection(P: Polytope, psi_half: CellField, C: GlobalConstraints) -> np.ndarray:
    """L-BFGS-B 在 μ ⪰ 0 上最大化对偶目标 g(μ)；∇g = ∫Wη(μ) − b"""

    def negative_dual(mu):
        shifted = psi_half.with_values(psi_half.values - mu @ C.W)
        grad = constraint_values(P, shifted, C) - C.b
        return -dual_objective(P, psi_half, C, mu), -grad

    result = minimize(negative_dual, np.zeros(C.count), jac=True, method="L-BFGS-B",
                      bounds=[(0.0, None)] * C.count,
                      options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000})
    return result.x


def entropy_projection(P: Polytope, psi_half, W, b, area: float = 1.0) -> np.ndarray:
    """
    单单元上 min D_R(η, ∇R*(ψ_half)) s.t. area·Wη ≤ b 的 SLSQP 参照解

    在重心坐标 λ 上求解：R(Vλ) 的最大熵表示使目标变为 Σλ log λ − ψ_half·Vλ
    """
    psi_half = np.asarray(psi_half, dtype=float)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    V = P.vertices
    q = P.vertex_count
    floor = 1e-300

    def objective(lam):
        lam = np.maximum(lam, floor)
        return float(np.sum(lam * np.log(lam)) - psi_half @ (V @ lam))

    def gradient(lam):
        lam = np.maximum(lam, floor)
        return np.log(lam) + 1.0 - V.T @ psi_half

    constraints = [
        {"type": "eq", "fun": lambda lam: np.sum(lam) - 1.0, "jac": lambda lam: np.ones(q)},
        {"type": "ineq", "fun": lambda lam: b - area * (W @ (V @ lam)), "jac": lambda lam: -area * (W @ V)},
    ]
    start = P.barycentric(np.zeros(P.dim))
    result = minimize(objective, start, jac=gradient, method="SLSQP",
                      bounds=[(1e-12, 1.0)] * q, constraints=constraints,
                      options={"ftol": 1e-15, "maxiter": 1000})
    return V @ result.x


@oracle(name="illinois_bisection")
def illinois_bisection():
    """Illinois 单约束投影与二分法参照解的比较"""
    rng = np.random.default_rng(7)
    mesh = Mesh(1.0, 1.0, 4, 4)
    P = Polytope(np.eye(3))
    psi = CellField(mesh, rng.normal(size=(mesh.cell_count, 3)))
    w = np.array([0.0, 1.0, 0.0])
    b = 0.2
    result = project_single(P, psi, w, b, tol_g=1e-13)
    reference = bisection_multiplier(P, psi, w, b)
    return {"mu": float(result.mu[0]), "mu_bisection": reference,
            "difference": abs(float(result.mu[0]) - reference)}


@oracle(name="tiny_dual")
def tiny_dual():
    """Bregman–Dykstra 与稠密对偶求解在单单元上的比较"""
    mesh = Mesh(1.0, 1.0, 1, 1)
    P = Polytope(np.eye(4))
    psi = CellField(mesh, np.array([[0.0, 0.4, 0.2, -0.1]]))
    C = GlobalConstraints(np.eye(4)[1:], [0.18, 0.36, 0.36])
    result = project_multi(P, psi, C, tol_g=1e-12)
    mu_dense = dense_dual_projection(P, psi, C)
    return {"mu_dykstra": result.mu.tolist(), "mu_dense": mu_dense.tolist(),
            "difference": float(np.max(np.abs(result.mu - mu_dense))), "sweeps": result.sweeps}


@oracle(name="entropy_hexagon")
def entropy_hexagon():
    """六边形上的两个约束：Dykstra 投影点与 SLSQP 熵最小化的比较"""
    P = Polytope(build_regular_polygon_with_apex(6, periodic=False).vertices[:2, :6])
    mesh = Mesh(1.0, 1.0, 1, 1)
    psi = CellField(mesh, np.array([[1.5, 0.8]]))
    C = GlobalConstraints([[1.0, 0.0], [0.0, 1.0]], [0.2, 0.1])
    result = project_multi(P, psi, C, tol_g=1e-12)
    eta = P.map_points(result.psi.values)[0]
    reference = entropy_projection(P, psi.values[0], C.W, C.b)
    return {"eta_dykstra": eta.tolist(), "eta_slsqp": reference.tolist(),
            "difference": float(np.max(np.abs(eta - reference)))}
