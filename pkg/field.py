"""
均匀矩形网格与场
单元编号与节点编号均为 x 方向最快（行优先）
"""
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from errors import InvalidArgumentError
from polytope import Polytope

SIDES = ("left", "right", "bottom", "top")


class Mesh:
    """矩形区域 (0,lx)×(0,ly) 上的 nx×ny 均匀网格"""

    def __init__(self, lx: float, ly: float, nx: int, ny: int):
        if nx < 1 or ny < 1:
            raise InvalidArgumentError("cell counts must be at least 1", nx=nx, ny=ny)
        if not (lx > 0 and ly > 0):
            raise InvalidArgumentError("domain lengths must be positive", lx=lx, ly=ly)
        self.lx = float(lx)
        self.ly = float(ly)
        self.nx = int(nx)
        self.ny = int(ny)
        self.hx = self.lx / self.nx
        self.hy = self.ly / self.ny
        self.cell_area = self.hx * self.hy

        # 单元节点：逆时针，从左下角开始
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        i = i.ravel()
        j = j.ravel()
        n0 = j * (self.nx + 1) + i
        self.cell_nodes = np.stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1], axis=1)
        self.cell_nodes.flags.writeable = False

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny

    @property
    def node_count(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return (self.lx, self.ly, self.nx, self.ny) == (other.lx, other.ly, other.nx, other.ny)

    def __hash__(self) -> int:
        return hash((self.lx, self.ly, self.nx, self.ny))

    def __repr__(self) -> str:
        return f"Mesh(lx={self.lx}, ly={self.ly}, nx={self.nx}, ny={self.ny})"

    def node_coords(self) -> np.ndarray:
        x = np.linspace(0.0, self.lx, self.nx + 1)
        y = np.linspace(0.0, self.ly, self.ny + 1)
        X, Y = np.meshgrid(x, y)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def cell_centroids(self) -> np.ndarray:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        X, Y = np.meshgrid(x, y)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def boundary_nodes(self, sides: Iterable[str]) -> np.ndarray:
        """给定边上的节点（含角点），升序"""
        ix, iy = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny + 1))
        ix = ix.ravel()
        iy = iy.ravel()
        mask = np.zeros(self.node_count, dtype=bool)
        for side in sides:
            if side == "left":
                mask |= ix == 0
            elif side == "right":
                mask |= ix == self.nx
            elif side == "bottom":
                mask |= iy == 0
            elif side == "top":
                mask |= iy == self.ny
            else:
                raise InvalidArgumentError(f"unknown boundary side '{side}'", valid_sides=list(SIDES))
        return np.flatnonzero(mask)

    def select_nodes(self, selector) -> np.ndarray:
        """边界选择器：边名序列或节点编号数组"""
        if selector is None:
            return np.zeros(0, dtype=int)
        if isinstance(selector, str):
            selector = [s.strip() for s in selector.split(",") if s.strip()]
        selector = list(selector)
        if selector and all(isinstance(s, str) for s in selector):
            return self.boundary_nodes(selector)
        nodes = np.unique(np.asarray(selector, dtype=int))
        if nodes.size and (nodes.min() < 0 or nodes.max() >= self.node_count):
            raise InvalidArgumentError("node index out of range")
        return nodes

    def nearest_cell(self, point: Sequence[float]) -> int:
        d2 = np.sum((self.cell_centroids() - np.asarray(point, dtype=float)) ** 2, axis=1)
        return int(np.argmin(d2))


class _Field:
    _entity = "cell"

    def __init__(self, mesh: Mesh, values):
        values = np.asarray(values, dtype=float)
        expected = mesh.cell_count if self._entity == "cell" else mesh.node_count
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] != expected:
            raise InvalidArgumentError(
                f"{self._entity} field has wrong shape",
                expected_rows=expected, shape=list(values.shape))
        self.mesh = mesh
        self.values = values

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, mesh: Mesh, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        rows = mesh.cell_count if cls._entity == "cell" else mesh.node_count
        return cls(mesh, np.tile(value, (rows, 1)))

    @classmethod
    def zeros(cls, mesh: Mesh, channels: int):
        return cls.constant(mesh, np.zeros(channels))

    def copy(self):
        return type(self)(self.mesh, self.values.copy())

    def with_values(self, values):
        return type(self)(self.mesh, values)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.mesh!r}, channels={self.channels})"


class CellField(_Field):
    """分片常数（每单元）向量场"""
    _entity = "cell"


class NodalField(_Field):
    """双线性（每节点）向量场"""
    _entity = "node"


def _check_compatible(a: _Field, b: _Field):
    if a.mesh != b.mesh or a.values.shape != b.values.shape:
        raise InvalidArgumentError(
            "fields are not compatible",
            left_shape=list(a.values.shape), right_shape=list(b.values.shape))


def integrate_dot(a: CellField, b: CellField) -> float:
    """∫_Ω a·b dx（分片常数）"""
    _check_compatible(a, b)
    return float(a.mesh.cell_area * np.sum(a.values * b.values))


def vertex_gap_residual(P: Polytope, d: CellField, eta: CellField) -> float:
    """
    顶点间隙残差 Σ_e |Ω_e|·|min_v d_e·(v − η_e)|

    min 项总是非正，d ≡ 0 时残差为零
    """
    _check_compatible(d, eta)
    gaps = P.vertex_gaps(d.values, eta.values)
    return float(d.mesh.cell_area * np.sum(np.abs(gaps)))


# ----------------------------------------------------------------------
# 输出
# ----------------------------------------------------------------------
def _format_block(values: np.ndarray) -> str:
    return "\n".join(f"{v:.17g}" for v in values)


def write_vtk(path: Union[str, Path], mesh: Mesh,
              cell_fields: Optional[Dict[str, CellField]] = None,
              point_fields: Optional[Dict[str, NodalField]] = None,
              title: str = "simpl design") -> Path:
    """
    写出 legacy-VTK ASCII STRUCTURED_POINTS 文件

    每个通道一个 SCALARS 块，名称为 <name>_<通道号>（通道号从 1 开始）
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {mesh.hx:.17g} {mesh.hy:.17g} 1",
    ]
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.cell_count}")
        for name, f in cell_fields.items():
            for c in range(f.channels):
                lines += [f"SCALARS {name}_{c + 1} double 1", "LOOKUP_TABLE default",
                          _format_block(f.values[:, c])]
    if point_fields:
        lines.append(f"POINT_DATA {mesh.node_count}")
        for name, f in point_fields.items():
            for c in range(f.channels):
                lines += [f"SCALARS {name}_{c + 1} double 1", "LOOKUP_TABLE default",
                          _format_block(f.values[:, c])]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_vtk_scalars(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """读回 write_vtk 写出的 SCALARS 块"""
    tokens = Path(path).read_text(encoding="utf-8").splitlines()
    blocks: Dict[str, np.ndarray] = {}
    count = 0
    k = 0
    while k < len(tokens):
        line = tokens[k].strip()
        if line.startswith("CELL_DATA") or line.startswith("POINT_DATA"):
            count = int(line.split()[1])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            start = k + 2
            blocks[name] = np.array([float(v) for v in tokens[start:start + count]])
            k = start + count
            continue
        k += 1
    return blocks


def write_pgm(path: Union[str, Path], mesh: Mesh, values: np.ndarray) -> Tuple[float, float]:
    """
    写出 8 位 PGM 图像（单通道），[min,max] 线性映射到 [0,255]

    缩放区间记录在注释行中；图像第一行对应 y 最大的一行单元
    """
    values = np.asarray(values, dtype=float).reshape(mesh.ny, mesh.nx)
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    span = vmax - vmin
    if span > 0:
        pixels = np.rint((values - vmin) / span * 255.0).astype(int)
    else:
        pixels = np.zeros_like(values, dtype=int)
    pixels = np.clip(pixels, 0, 255)[::-1]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["P2", f"# scale min={vmin:.17g} max={vmax:.17g}", f"{mesh.nx} {mesh.ny}", "255"]
    lines += [" ".join(str(p) for p in row) for row in pixels]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return vmin, vmax
