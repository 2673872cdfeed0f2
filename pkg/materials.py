"""
材料插值律及其导数
- 多材料 SIMP：累积密度递推
- 旋转正交各向异性：二倍角编码 (a, b) = r·(cos 2θ, sin 2θ)，顶点分量 s

所有函数对输入做广播，最后一维之外的维度视为批量维度
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from errors import InvalidArgumentError, InvalidMaterialError


@dataclass(frozen=True)
class IsoStack:
    """各向同性材料叠层，第一相为空材料"""
    E: Tuple[float, ...]
    nu: float = 0.3
    p: float = 3.0

    def __post_init__(self):
        E = tuple(float(e) for e in self.E)
        object.__setattr__(self, "E", E)
        if len(E) < 1:
            raise InvalidMaterialError("material stack needs at least one phase")
        if not all(e > 0 for e in E):
            raise InvalidMaterialError("Young's moduli must be strictly positive", E=list(E))
        if self.p < 1:
            raise InvalidMaterialError("SIMP exponent must be at least 1", p=self.p)
        if not 1.0 - self.nu ** 2 > 0:
            raise InvalidMaterialError("Poisson ratio out of range", nu=self.nu)

    @property
    def phase_count(self) -> int:
        return len(self.E)


@dataclass(frozen=True)
class OrthoSpec:
    """平面应力正交各向异性材料，x 为主方向"""
    E_x: float
    E_y: float
    nu_xy: float
    p: int = 4

    def __post_init__(self):
        if not (self.E_x > 0 and self.E_y > 0):
            raise InvalidMaterialError("directional moduli must be positive", E_x=self.E_x, E_y=self.E_y)
        if not 1.0 - self.nu_xy * self.nu_yx > 0:
            raise InvalidMaterialError("compliance is not positive definite",
                                       nu_xy=self.nu_xy, nu_yx=self.nu_yx)
        if self.p < 2 or self.p % 2:
            raise InvalidMaterialError("orientation exponent must be even and at least 2", p=self.p)

    @property
    def nu_yx(self) -> float:
        return self.nu_xy * self.E_y / self.E_x

    @property
    def G_xy(self) -> float:
        return float(np.sqrt(self.E_x * self.E_y) / (2.0 * (1.0 + np.sqrt(self.nu_xy * self.nu_yx))))


def iso_voigt(E: float, nu: float) -> np.ndarray:
    """各向同性平面应力 Voigt 矩阵 E/(1−ν²)·[[1,ν,0],[ν,1,0],[0,0,(1−ν)/2]]"""
    if not E > 0:
        raise InvalidArgumentError("Young's modulus must be positive", E=E)
    if not 1.0 - nu ** 2 > 0:
        raise InvalidArgumentError("Poisson ratio must satisfy 1 − ν² > 0", nu=nu)
    return E / (1.0 - nu ** 2) * np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, 0.5 * (1.0 - nu)],
    ])


def ortho_voigt(spec: OrthoSpec) -> np.ndarray:
    """正交各向异性平面应力 Voigt 矩阵（θ = 0）"""
    denom = 1.0 - spec.nu_xy * spec.nu_yx
    if not denom > 0:
        raise InvalidArgumentError("1 − ν_xy·ν_yx must be positive")
    return np.array([
        [spec.E_x / denom, spec.nu_xy * spec.E_y / denom, 0.0],
        [spec.nu_xy * spec.E_y / denom, spec.E_y / denom, 0.0],
        [0.0, 0.0, spec.G_xy],
    ])


def eff_youngs(stack: IsoStack, eta_tilde) -> Tuple[np.ndarray, np.ndarray]:
    """
    累积密度递推的等效杨氏模量

    E⁽¹⁾ = E_1，E⁽ʲ⁾ = E⁽ʲ⁻¹⁾[1 − t_jᵖ] + E_j·t_jᵖ，t_j = η̃_j / S_j，S_j = Σ_{i≤j} η̃_i

    参数:
        stack: 材料叠层
        eta_tilde: (..., n) 滤波后的相密度，先截断到 [0,1]

    返回:
        (E_eff, dE): 形状 (...) 与 (..., n)；dE 是对原始（未截断）输入的导数
    """
    eta_tilde = np.asarray(eta_tilde, dtype=float)
    n = stack.phase_count
    if eta_tilde.shape[-1] != n:
        raise InvalidArgumentError("phase count mismatch", expected=n, got=eta_tilde.shape[-1])

    x = np.clip(eta_tilde, 0.0, 1.0)
    inside = (eta_tilde >= 0.0) & (eta_tilde <= 1.0)
    S = np.cumsum(x, axis=-1)
    batch = x.shape[:-1]
    p = stack.p

    E = np.full(batch, stack.E[0])
    dE = np.zeros(batch + (n,))
    for j in range(1, n):
        Sj = S[..., j]
        xj = x[..., j]
        positive = Sj > 0
        safe_S = np.where(positive, Sj, 1.0)
        # 0/0 := 0
        t = np.where(positive, xj / safe_S, 0.0)
        tp = t ** p
        dtp = np.where(positive, p * t ** (p - 1), 0.0)

        # dt_j/dx_i：i < j 为 −x_j/S_j²，i = j 为 (S_j − x_j)/S_j²
        dt = np.zeros(batch + (n,))
        dt[..., :j] = (-xj / safe_S ** 2)[..., None]
        dt[..., j] = (Sj - xj) / safe_S ** 2
        dt *= positive[..., None]

        gap = stack.E[j] - E
        dE = dE * (1.0 - tp)[..., None] + (gap * dtp)[..., None] * dt
        E = E * (1.0 - tp) + stack.E[j] * tp

    return E, dE * inside


def _rpow(r: np.ndarray, k: float) -> np.ndarray:
    # r^k，r = 0 处取 0（k > 0）或 1（k = 0）；负幂只出现在带更高阶因子的项里
    r = np.asarray(r, dtype=float)
    if k == 0:
        return np.ones_like(r)
    positive = r > 0
    safe = np.where(positive, r, 1.0)
    return np.where(positive, safe ** k, 0.0)


@dataclass(frozen=True)
class _RotationBasis:
    """R(θ)·C_ani·R(−θ) = A0 + cos2θ·Ac2 + sin2θ·As2 + cos4θ·Ac4 + sin4θ·As4"""
    A0: np.ndarray
    Ac2: np.ndarray
    As2: np.ndarray
    Ac4: np.ndarray
    As4: np.ndarray


def rotation_basis(spec: OrthoSpec) -> _RotationBasis:
    """由层合板不变量 U1..U5 展开旋转后的 Voigt 矩阵"""
    Q = ortho_voigt(spec)
    Q11, Q22, Q12, Q66 = Q[0, 0], Q[1, 1], Q[0, 1], Q[2, 2]
    U1 = (3 * Q11 + 3 * Q22 + 2 * Q12 + 4 * Q66) / 8
    U2 = (Q11 - Q22) / 2
    U3 = (Q11 + Q22 - 2 * Q12 - 4 * Q66) / 8
    U4 = (Q11 + Q22 + 6 * Q12 - 4 * Q66) / 8
    U5 = (Q11 + Q22 - 2 * Q12 + 4 * Q66) / 8
    return _RotationBasis(
        A0=np.array([[U1, U4, 0.0], [U4, U1, 0.0], [0.0, 0.0, U5]]),
        Ac2=np.array([[U2, 0.0, 0.0], [0.0, -U2, 0.0], [0.0, 0.0, 0.0]]),
        As2=np.array([[0.0, 0.0, U2 / 2], [0.0, 0.0, U2 / 2], [U2 / 2, U2 / 2, 0.0]]),
        Ac4=np.array([[U3, -U3, 0.0], [-U3, U3, 0.0], [0.0, 0.0, -U3]]),
        As4=np.array([[0.0, 0.0, U3], [0.0, 0.0, -U3], [U3, -U3, 0.0]]),
    )


def rotated_voigt(spec: OrthoSpec, theta) -> np.ndarray:
    """方向角 θ 处的正交各向异性 Voigt 矩阵"""
    basis = rotation_basis(spec)
    theta = np.asarray(theta, dtype=float)[..., None, None]
    return (basis.A0 + np.cos(2 * theta) * basis.Ac2 + np.sin(2 * theta) * basis.As2
            + np.cos(4 * theta) * basis.Ac4 + np.sin(4 * theta) * basis.As4)


def rotated_ortho_C(spec: OrthoSpec, a, b, s, C_iso) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    旋转正交各向异性插值 C = sᵖ·C_iso + rᵖ·R(θ)C_aniR(−θ)

    cos 2θ = a/r、sin 2θ = b/r、cos 4θ = (a²−b²)/r²、sin 4θ = 2ab/r²，
    各项写成 a、b 与 r 的幂次乘积，p ≥ 2 时在 r = 0 处连续可微

    参数:
        spec: 正交各向异性材料
        a, b, s: 形状相同的数组（或标量）
        C_iso: 3×3 顶点材料 Voigt 矩阵

    返回:
        (C, dC_da, dC_db, dC_ds)，形状 (..., 3, 3)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.asarray(s, dtype=float)
    C_iso = np.asarray(C_iso, dtype=float)
    p = spec.p
    basis = rotation_basis(spec)
    r = np.hypot(a, b)

    rp, rp1, rp2 = _rpow(r, p), _rpow(r, p - 1), _rpow(r, p - 2)
    rp3, rp4 = _rpow(r, p - 3), _rpow(r, p - 4)
    c4 = a * a - b * b
    s4 = 2 * a * b

    terms = [
        (basis.A0, rp, p * rp2 * a, p * rp2 * b),
        (basis.Ac2, a * rp1, rp1 + (p - 1) * a * a * rp3, (p - 1) * a * b * rp3),
        (basis.As2, b * rp1, (p - 1) * a * b * rp3, rp1 + (p - 1) * b * b * rp3),
        (basis.Ac4, c4 * rp2, 2 * a * rp2 + (p - 2) * c4 * a * rp4, -2 * b * rp2 + (p - 2) * c4 * b * rp4),
        (basis.As4, s4 * rp2, 2 * b * rp2 + (p - 2) * s4 * a * rp4, 2 * a * rp2 + (p - 2) * s4 * b * rp4),
    ]

    C = (s ** p)[..., None, None] * C_iso
    dC_da = np.zeros_like(C)
    dC_db = np.zeros_like(C)
    for A, value, d_a, d_b in terms:
        C = C + value[..., None, None] * A
        dC_da = dC_da + d_a[..., None, None] * A
        dC_db = dC_db + d_b[..., None, None] * A
    dC_ds = (p * s ** (p - 1))[..., None, None] * C_iso
    return C, dC_da, dC_db, dC_ds


def simp_voigt(stack: IsoStack, eta_tilde) -> Tuple[np.ndarray, np.ndarray]:
    """
    C(η̃) = E_eff·iso_voigt(1, ν) 及其对各相的导数

    返回:
        (C, dC): 形状 (..., 3, 3) 与 (..., n, 3, 3)
    """
    E, dE = eff_youngs(stack, eta_tilde)
    unit = iso_voigt(1.0, stack.nu)
    return E[..., None, None] * unit, dE[..., None, None] * unit


def voigt_is_psd(C, tol: float = 1e-10) -> bool:
    """所有 Voigt 矩阵的最小特征值 ≥ −tol·trace"""
    C = np.asarray(C, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (C + np.swapaxes(C, -1, -2)))
    trace = np.trace(C, axis1=-2, axis2=-1)
    return bool(np.all(eig[..., 0] >= -tol * np.abs(trace)))
