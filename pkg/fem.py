"""
二维 Q1 有限元
- 平面应力弹性（每节点 2 个自由度）
- Helmholtz 密度滤波 (ε²K + M)η̃ = Bη
- 对称正定求解：稀疏 LU（小规模）或 Jacobi 预条件共轭梯度
- 柔度及其 L² 原始梯度表示

局部节点顺序：逆时针，从左下角开始；积分统一用 2×2 Gauss
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import LinearOperator, cg, splu

from config import Config
from errors import InvalidArgumentError, InvalidMaterialError, LinearSolveError
from field import CellField, Mesh, NodalField
from logger import solver_logger

# 参考单元 [-1,1]²
_NODE_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_GAUSS = _NODE_SIGNS / np.sqrt(3.0)

# N[g, a]：第 g 个 Gauss 点上第 a 个形函数的值
SHAPE_VALUES = 0.25 * (1.0 + _GAUSS[:, None, 0] * _NODE_SIGNS[None, :, 0]) \
    * (1.0 + _GAUSS[:, None, 1] * _NODE_SIGNS[None, :, 1])


def _shape_gradients(mesh: Mesh) -> np.ndarray:
    """物理坐标下的形函数梯度，形状 (4 Gauss 点, 4 节点, 2)"""
    xi = _GAUSS[:, None, :]
    sa = _NODE_SIGNS[None, :, :]
    dxi = 0.25 * sa[..., 0] * (1.0 + xi[..., 1] * sa[..., 1])
    deta = 0.25 * sa[..., 1] * (1.0 + xi[..., 0] * sa[..., 0])
    return np.stack([dxi * 2.0 / mesh.hx, deta * 2.0 / mesh.hy], axis=-1)


def strain_matrices(mesh: Mesh) -> np.ndarray:
    """应变-位移矩阵 B，形状 (4, 3, 8)，自由度顺序 [u0x, u0y, u1x, u1y, ...]"""
    grad = _shape_gradients(mesh)
    B = np.zeros((4, 3, 8))
    B[:, 0, 0::2] = grad[..., 0]
    B[:, 1, 1::2] = grad[..., 1]
    B[:, 2, 0::2] = grad[..., 1]
    B[:, 2, 1::2] = grad[..., 0]
    return B


def _jacobian_det(mesh: Mesh) -> float:
    return 0.25 * mesh.hx * mesh.hy


def element_dofs(mesh: Mesh) -> np.ndarray:
    """每个单元的 8 个位移自由度编号"""
    nodes = mesh.cell_nodes
    return np.stack([2 * nodes, 2 * nodes + 1], axis=-1).reshape(mesh.cell_count, 8)


# ----------------------------------------------------------------------
# 对称正定算子
# ----------------------------------------------------------------------
class SpdOperator:
    """
    带 Dirichlet 消元的稀疏对称正定矩阵

    求解在自由自由度子矩阵上进行，受约束自由度的解恒为零。
    分解（或预条件子）在第一次求解时建立并缓存。
    """

    def __init__(self, matrix, fixed: Optional[np.ndarray] = None, name: str = "operator"):
        K = sp.csr_matrix(matrix, dtype=float)
        if K.shape[0] != K.shape[1]:
            raise InvalidArgumentError("operator must be square", shape=list(K.shape))
        scale = abs(K).max() if K.nnz else 0.0
        asym = abs(K - K.T).max() if K.nnz else 0.0
        if asym > 1e-12 * max(scale, np.finfo(float).tiny):
            raise InvalidArgumentError("operator is not symmetric", asymmetry=float(asym))

        self.name = name
        self.matrix = K
        self.size = K.shape[0]
        self.fixed_mask = np.zeros(self.size, dtype=bool)
        if fixed is not None and len(fixed):
            self.fixed_mask[np.asarray(fixed, dtype=int)] = True
        self.free = np.flatnonzero(~self.fixed_mask)
        self._free_matrix = K[self.free][:, self.free].tocsc()
        self._lu = None
        self._jacobi = None
        self._norm = None

    @property
    def uses_direct_solver(self) -> bool:
        return len(self.free) <= Config.DIRECT_SOLVER_MAX_DOFS

    def _factorize(self):
        try:
            lu = splu(self._free_matrix)
        except RuntimeError as e:
            raise LinearSolveError(f"{self.name}: factorization failed: {e}")
        pivots = np.abs(lu.U.diagonal())
        if pivots.size and pivots.min() <= Config.PIVOT_RATIO_TOL * pivots.max():
            raise LinearSolveError(f"{self.name}: matrix is singular after Dirichlet elimination",
                                   pivot_ratio=float(pivots.min() / pivots.max()))
        solver_logger.debug(f"🧮 {self.name}: factorized {len(self.free)} free dofs")
        return lu

    def _solve_free(self, rhs: np.ndarray) -> np.ndarray:
        if self.uses_direct_solver:
            if self._lu is None:
                self._lu = self._factorize()
            return self._lu.solve(rhs)

        if self._jacobi is None:
            diag = self._free_matrix.diagonal()
            if np.any(diag <= 0):
                raise LinearSolveError(f"{self.name}: non-positive diagonal entry")
            inv = 1.0 / diag
            self._jacobi = LinearOperator(self._free_matrix.shape, matvec=lambda x: inv * x)
        columns = rhs.reshape(rhs.shape[0], -1)
        out = np.empty_like(columns)
        for c in range(columns.shape[1]):
            x, info = cg(self._free_matrix, columns[:, c], rtol=Config.CG_RTOL,
                         maxiter=Config.CG_MAX_ITER, M=self._jacobi)
            if info != 0:
                raise LinearSolveError(f"{self.name}: conjugate gradient did not converge",
                                       iterations=info)
            out[:, c] = x
        return out.reshape(rhs.shape)

    def solve(self, rhs) -> np.ndarray:
        """
        求解 K u = f（受约束自由度处 u = 0）

        参数:
            rhs: 长度为 size 的向量，或 (size, k) 的多个右端项

        返回:
            np.ndarray: 与 rhs 同形状的解
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.size:
            raise InvalidArgumentError("right-hand side has wrong length",
                                       expected=self.size, got=rhs.shape[0])
        if not np.all(np.isfinite(rhs)):
            raise InvalidArgumentError("right-hand side must be finite")

        u = np.zeros_like(rhs)
        f_free = rhs[self.free]
        norm_f = np.linalg.norm(f_free)
        if norm_f == 0.0:
            return u

        u_free = self._solve_free(f_free)
        error = self._backward_error(u_free, f_free, norm_f)
        steps = 0
        while not error <= Config.SOLVE_BACKWARD_ERROR_TOL and steps < Config.REFINEMENT_STEPS:
            u_free = u_free + self._solve_free(f_free - self._free_matrix @ u_free)
            error = self._backward_error(u_free, f_free, norm_f)
            steps += 1
        if not error <= Config.SOLVE_BACKWARD_ERROR_TOL:
            raise LinearSolveError(f"{self.name}: backward error above tolerance",
                                   backward_error=float(error), refinement_steps=steps)
        if steps:
            solver_logger.debug(f"🧮 {self.name}: {steps} refinement step(s), backward error {error:.3e}")
        u[self.free] = u_free
        return u

    def _backward_error(self, u_free: np.ndarray, f_free: np.ndarray, norm_f: float) -> float:
        """‖Ku−f‖ / (‖K‖₁‖u‖ + ‖f‖)，对称矩阵的 1-范数给出 2-范数的上界"""
        if self._norm is None:
            self._norm = float(spla.norm(self._free_matrix, 1))
        residual = np.linalg.norm(self._free_matrix @ u_free - f_free)
        return residual / (self._norm * np.linalg.norm(u_free) + norm_f)


def solve_spd(op: SpdOperator, rhs) -> np.ndarray:
    return op.solve(rhs)


# ----------------------------------------------------------------------
# Helmholtz 滤波
# ----------------------------------------------------------------------
@dataclass
class FilterOperator:
    mesh: Mesh
    epsilon: float
    operator: SpdOperator      # ε²K + M，Γ_F 节点已消元
    coupling: sp.csr_matrix    # B：节点 × 单元，B[a, e] = ∫_e N_a dx

    @property
    def fixed_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.operator.fixed_mask)


def _scatter(mesh: Mesh, local: np.ndarray, dofs: np.ndarray, size: int) -> sp.csr_matrix:
    # local: (m, k, k) 单元矩阵；dofs: (m, k) 全局编号
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def assemble_filter(mesh: Mesh, epsilon: float, gamma_f=None) -> FilterOperator:
    """
    组装 (ε²K + M) 与单元-节点耦合矩阵

    参数:
        mesh: 网格
        epsilon: 滤波长度 ε ≥ 0
        gamma_f: Γ_F 边界选择器（η̃ = 0），None 表示无
    """
    if not epsilon >= 0:
        raise InvalidArgumentError("filter length must be non-negative", epsilon=epsilon)
    grad = _shape_gradients(mesh)
    det = _jacobian_det(mesh)
    stiffness = det * np.einsum("gad,gbd->ab", grad, grad)
    mass = det * np.einsum("ga,gb->ab", SHAPE_VALUES, SHAPE_VALUES)
    local = np.broadcast_to(epsilon ** 2 * stiffness + mass, (mesh.cell_count, 4, 4))
    A = _scatter(mesh, local, mesh.cell_nodes, mesh.node_count)

    cells = np.repeat(np.arange(mesh.cell_count), 4)
    coupling = sp.coo_matrix(
        (np.full(4 * mesh.cell_count, mesh.cell_area / 4.0), (mesh.cell_nodes.ravel(), cells)),
        shape=(mesh.node_count, mesh.cell_count)).tocsr()

    fixed = mesh.select_nodes(gamma_f)
    return FilterOperator(mesh=mesh, epsilon=float(epsilon),
                          operator=SpdOperator(A, fixed, name="filter"), coupling=coupling)


def apply_filter(fop: FilterOperator, eta: CellField) -> NodalField:
    """η ↦ η̃，各通道共用同一分解"""
    if eta.mesh != fop.mesh:
        raise InvalidArgumentError("field lives on a different mesh")
    rhs = fop.coupling @ eta.values
    return NodalField(fop.mesh, fop.operator.solve(rhs))


def filter_adjoint(fop: FilterOperator, s: NodalField) -> CellField:
    """s ↦ Bᵀ(ε²K+M)⁻¹s / |Ω_e|（L² 原始表示）"""
    if s.mesh != fop.mesh:
        raise InvalidArgumentError("field lives on a different mesh")
    z = fop.operator.solve(s.values)
    return CellField(fop.mesh, (fop.coupling.T @ z) / fop.mesh.cell_area)


def interpolate_to_quadrature(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """节点值 (N, n) → Gauss 点值 (m, 4, n)"""
    nodal = np.asarray(nodal, dtype=float)
    return np.einsum("ga,ean->egn", SHAPE_VALUES, nodal[mesh.cell_nodes])


# ----------------------------------------------------------------------
# 弹性
# ----------------------------------------------------------------------
def _broadcast_material(mesh: Mesh, C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.shape == (3, 3):
        C = C[None, None]
    elif C.ndim == 3:
        C = C[:, None]
    return np.broadcast_to(C, (mesh.cell_count, 4, 3, 3))


def element_stiffness(mesh: Mesh, C) -> np.ndarray:
    """
    单元刚度矩阵 Σ_g det·B_gᵀ C_g B_g

    参数:
        C: (3,3)、(m,3,3) 或 (m,4,3,3) 的 Voigt 矩阵

    返回:
        np.ndarray: (m, 8, 8)
    """
    B = strain_matrices(mesh)
    C = _broadcast_material(mesh, C)
    return _jacobian_det(mesh) * np.einsum("gia,egij,gjb->eab", B, C, B)


def assemble_elasticity(mesh: Mesh, C_at_quadpoints, gamma_d) -> SpdOperator:
    """组装平面应力刚度矩阵，Γ_D 上 u = 0"""
    Ke = element_stiffness(mesh, C_at_quadpoints)
    eig = np.linalg.eigvalsh(0.5 * (Ke + np.swapaxes(Ke, 1, 2)))
    trace = np.trace(Ke, axis1=1, axis2=2)
    bad = np.flatnonzero(eig[:, 0] < -1e-10 * np.abs(trace))
    if bad.size:
        raise InvalidMaterialError("element stiffness is indefinite",
                                   cells=bad[:10], min_eigenvalue=float(eig[bad, 0].min()))

    nodes = mesh.select_nodes(gamma_d)
    if nodes.size == 0:
        raise InvalidArgumentError("elasticity needs a non-empty Dirichlet boundary")
    fixed = np.concatenate([2 * nodes, 2 * nodes + 1])
    K = _scatter(mesh, Ke, element_dofs(mesh), 2 * mesh.node_count)
    return SpdOperator(K, fixed, name="elasticity")


def body_force_vector(mesh: Mesh, cells, force) -> np.ndarray:
    """在给定单元上施加均布体力 f 的节点载荷向量"""
    cells = np.atleast_1d(np.asarray(cells, dtype=int))
    force = np.asarray(force, dtype=float).reshape(2)
    f = np.zeros(2 * mesh.node_count)
    share = mesh.cell_area / 4.0
    nodes = mesh.cell_nodes[cells].ravel()
    np.add.at(f, 2 * nodes, share * force[0])
    np.add.at(f, 2 * nodes + 1, share * force[1])
    return f


# 材料回调：Gauss 点上的 η̃ (m,4,n) → (C (m,4,3,3), ∂C/∂η̃ (m,4,n,3,3))
MaterialLaw = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass
class ComplianceState:
    filtered: NodalField       # η̃
    displacement: NodalField   # u，两个通道 (u_x, u_y)
    compliance: float
    gradient: CellField        # ∇F 的 L² 表示


def solve_compliance(mesh: Mesh, C_eval: MaterialLaw, eta: CellField,
                     fop: FilterOperator, load: np.ndarray, gamma_d) -> ComplianceState:
    """η → η̃ → K(η̃)u = f → F = f·u 及伴随梯度"""
    filtered = apply_filter(fop, eta)
    eta_q = interpolate_to_quadrature(mesh, filtered.values)
    C, dC = C_eval(eta_q)

    K = assemble_elasticity(mesh, C, gamma_d)
    u = K.solve(load)
    F = float(load @ u)

    # 自伴问题：∂F/∂η̃_a = −Σ_g det·N_a(g)·ε(u)ᵀ (∂C/∂η̃) ε(u)
    strains = np.einsum("gia,ea->egi", strain_matrices(mesh), u[element_dofs(mesh)])
    dF_q = -_jacobian_det(mesh) * np.einsum("egi,egnij,egj->egn", strains, dC, strains)
    local = np.einsum("ga,egn->ean", SHAPE_VALUES, dF_q)
    sensitivity = np.zeros((mesh.node_count, eta.channels))
    np.add.at(sensitivity, mesh.cell_nodes.ravel(), local.reshape(-1, eta.channels))

    gradient = filter_adjoint(fop, NodalField(mesh, sensitivity))
    return ComplianceState(filtered=filtered,
                           displacement=NodalField(mesh, u.reshape(-1, 2)),
                           compliance=F, gradient=gradient)


def compliance_and_gradient(mesh: Mesh, C_eval: MaterialLaw, eta: CellField,
                            fop: FilterOperator, load: np.ndarray, gamma_d) -> Tuple[float, CellField]:
    state = solve_compliance(mesh, C_eval, eta, fop, load, gamma_d)
    return state.compliance, state.gradient
