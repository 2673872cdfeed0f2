"""
二次目标上的优化器参照解
F(η) = ½∫|η − η*|² dx 在约束 ∫Wη ≤ b 下的最小点由稠密约束求解给出
"""
import numpy as np
from scipy.optimize import minimize

from decorators import oracle
from field import CellField, Mesh
from optimizer import OptOptions, simpl_run
from polytope import Polytope
from projection import GlobalConstraints


class QuadraticObjective:
    """F(η) = ½∫|η − η*|² dx，∇F = η − η*"""

    def __init__(self, target: CellField):
        self.target = target

    def evaluate(self, eta: CellField):
        diff = eta.values - self.target.values
        return 0.5 * eta.mesh.cell_area * float(np.sum(diff * diff)), eta.with_values(diff)


def dense_quadratic_minimizer(P: Polytope, target: CellField, C: GlobalConstraints) -> np.ndarray:
    """在重心坐标上用 SLSQP 求解约束二次问题"""
    mesh = target.mesh
    m, q = mesh.cell_count, P.vertex_count
    V = P.vertices

    def unpack(x):
        return x.reshape(m, q)

    def objective(x):
        diff = unpack(x) @ V.T - target.values
        return 0.5 * mesh.cell_area * float(np.sum(diff * diff))

    def gradient(x):
        diff = unpack(x) @ V.T - target.values
        return (mesh.cell_area * diff @ V).ravel()

    constraints = [{"type": "eq", "fun": lambda x: unpack(x).sum(axis=1) - 1.0}]
    if C.count:
        constraints.append({
            "type": "ineq",
            "fun": lambda x: C.b - mesh.cell_area * (C.W @ np.sum(unpack(x) @ V.T, axis=0)),
        })
    start = np.full(m * q, 1.0 / q)
    result = minimize(objective, start, jac=gradient, method="SLSQP",
                      bounds=[(0.0, 1.0)] * (m * q), constraints=constraints,
                      options={"ftol": 1e-16, "maxiter": 2000})
    return unpack(result.x) @ V.T


@oracle(name="quadratic_kkt")
def quadratic_kkt():
    """带一个质量约束的二次问题：SiMPL 结果与 KKT 点"""
    mesh = Mesh(1.0, 1.0, 4, 1)
    P = Polytope([[0.0, 1.0]])
    target = CellField(mesh, np.array([0.3, 0.45, 0.6, 0.75]))
    C = GlobalConstraints([[1.0]], [0.4])
    opts = OptOptions(tol_rel=1e-12, max_iters=100)
    result = simpl_run(QuadraticObjective(target), P, C, CellField.zeros(mesh, 1), opts)
    dense = dense_quadratic_minimizer(P, target, C)
    return {
        "eta_simpl": result.eta.values.ravel().tolist(),
        "eta_dense": dense.ravel().tolist(),
        "iterations": result.iterations,
        "status": result.status,
        "difference": float(np.max(np.abs(result.eta.values - dense))),
    }
