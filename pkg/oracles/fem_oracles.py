"""
有限元参照解：中心差分梯度检查与一维 Helmholtz 边界层解析解
"""
import numpy as np

from decorators import oracle
from fem import apply_filter, assemble_filter
from field import CellField, Mesh
from problems.isotropic_cantilever import build_isotropic_cantilever
from problems.orthotropic_cantilever import build_orthotropic_cantilever


def finite_difference_check(problem, eta: CellField, samples, step: float = 1e-5):
    """
    对 (cell, channel) 样本做中心差分，与 gradF·cell_area 比较

    相对误差的分母不小于 max|gradF|·cell_area

    返回:
        list[dict]: 每个样本的解析值、差分值与相对误差
    """
    _, grad = problem.evaluate(eta)
    scale = max(float(np.abs(grad.values).max()) * eta.mesh.cell_area, 1e-30)
    rows = []
    for cell, channel in samples:
        plus = eta.values.copy()
        minus = eta.values.copy()
        plus[cell, channel] += step
        minus[cell, channel] -= step
        F_plus, _ = problem.evaluate(eta.with_values(plus))
        F_minus, _ = problem.evaluate(eta.with_values(minus))
        fd = (F_plus - F_minus) / (2.0 * step)
        analytic = grad.values[cell, channel] * eta.mesh.cell_area
        rows.append({
            "cell": int(cell), "channel": int(channel), "analytic": float(analytic), "fd": float(fd),
            "relative_error": float(abs(fd - analytic) / max(abs(analytic), scale)),
        })
    return rows


def directional_derivative_check(problem, eta: CellField, direction: np.ndarray, step: float = 1e-5) -> dict:
    """
    沿整场方向 d 的中心差分，与 ∫gradF·d 比较

    返回:
        dict: 解析方向导数、差分值与相对误差
    """
    _, grad = problem.evaluate(eta)
    F_plus, _ = problem.evaluate(eta.with_values(eta.values + step * direction))
    F_minus, _ = problem.evaluate(eta.with_values(eta.values - step * direction))
    fd = (F_plus - F_minus) / (2.0 * step)
    analytic = float(np.sum(grad.values * direction) * eta.mesh.cell_area)
    return {"analytic": analytic, "fd": float(fd),
            "relative_error": float(abs(fd - analytic) / max(abs(analytic), 1e-30))}


def random_design(problem, P, seed: int = 0, scale: float = 1.0) -> CellField:
    """随机潜变量映射得到的严格内点设计"""
    rng = np.random.default_rng(seed)
    psi = rng.normal(scale=scale, size=(problem.mesh.cell_count, P.dim))
    return CellField(problem.mesh, P.map_points(psi))


def boundary_layer_profile(y, length: float, epsilon: float) -> np.ndarray:
    """−ε²u'' + u = 1，u(0) = u(L) = 0 的解"""
    y = np.asarray(y, dtype=float)
    return 1.0 - np.cosh((y - 0.5 * length) / epsilon) / np.cosh(0.5 * length / epsilon)


@oracle(name="fem_gradient")
def fem_gradient():
    """两个基准问题在 12×4 网格上的中心差分梯度检查"""
    out = {}
    rng = np.random.default_rng(3)
    for builder in (build_isotropic_cantilever, build_orthotropic_cantilever):
        problem, P, _ = builder(nx=12, ny=4)
        eta = random_design(problem, P, seed=11)
        samples = [(int(rng.integers(problem.mesh.cell_count)), int(rng.integers(P.dim))) for _ in range(5)]
        rows = finite_difference_check(problem, eta, samples)
        direction = rng.uniform(-1.0, 1.0, size=eta.values.shape)
        directional = directional_derivative_check(problem, eta, direction)
        out[builder.problem_name] = {
            "max_relative_error": max(r["relative_error"] for r in rows),
            "directional_relative_error": directional["relative_error"],
            "samples": rows,
            "directional": directional,
        }
    return out


@oracle(name="filter_boundary_layer")
def filter_boundary_layer(epsilon: float = 0.1, ny: int = 80):
    """一维板条上的 Helmholtz 滤波与解析边界层比较"""
    mesh = Mesh(1.0 / ny, 1.0, 1, ny)
    fop = assemble_filter(mesh, epsilon, "bottom,top")
    filtered = apply_filter(fop, CellField.constant(mesh, 1.0))
    y = mesh.node_coords()[:, 1]
    exact = boundary_layer_profile(y, 1.0, epsilon)
    error = float(np.max(np.abs(filtered.values[:, 0] - exact)) / np.max(exact))
    return {"epsilon": epsilon, "h": mesh.hy, "relative_max_error": error}
