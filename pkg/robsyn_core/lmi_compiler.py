"""
LMI 建模与编译模块 (LMI Modeling & Compilation)

功能：用仿射矩阵表达式描述标量 / 对称矩阵 / 一般矩阵决策变量上的分块 LMI，
编译成标准锥形式（线性目标、线性等式、半正定块），交给可插拔的后端求解，
并在求解后回代原约束做残差检查。

核心功能：
- svec / smat: 对称矩阵与 s(s+1)/2 维向量之间的等距映射（非对角元乘 √2）
- Variable: 决策变量（scalar / symmetric / full）
- AffineExpr: 仿射矩阵表达式，系数以稀疏矩阵作用在变量坐标上
- bmat: 分块拼接（允许零维块）
- ConicProblem: 约束与目标的容器，compile() 得到 StandardForm，solve() 得到 Solution
- StandardForm.dump: 稀疏三元组文本导出，便于和外部工具交叉核对

约定：矩阵向量化一律按列优先（Fortran 顺序）。
"""

import io
import math
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy import sparse

from .config import SolverSettings, log
from .conic_backend import BackendResult, ConicBackend, CvxpyBackend, SolveStatus
from .errors import AsymmetricMatrixError, DimensionMismatchError, RobsynError

SYMMETRY_TOL = 1e-12


class ProblemStructureError(RobsynError, ValueError):
    """约束引用了未声明变量、声明了未使用变量、或约束不是锥约束"""


# ---------------------------------------------------------------------------
# svec / smat
# ---------------------------------------------------------------------------

def svec_index(s: int) -> List[Tuple[int, int]]:
    """上三角按列排列的 (i, j) 坐标，i ≤ j"""
    return [(i, j) for j in range(s) for i in range(j + 1)]


def svec(S: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """
    对称矩阵 → 向量，非对角元乘 √2，使 ⟨S1, S2⟩_F = svec(S1)ᵀ svec(S2)。

    Raises:
        AsymmetricMatrixError: S 不对称（超出 tol，按最大元素相对）
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatchError(f"svec 需要方阵，得到形状 {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > tol * scale:
        raise AsymmetricMatrixError("svec 的输入不对称")
    root2 = math.sqrt(2.0)
    return np.array([S[i, j] if i == j else root2 * S[i, j] for i, j in svec_index(S.shape[0])])


def smat(v: np.ndarray) -> np.ndarray:
    """svec 的逆映射"""
    v = np.asarray(v, dtype=float).ravel()
    s = int(round((math.sqrt(8 * v.size + 1) - 1) / 2))
    if s * (s + 1) // 2 != v.size:
        raise DimensionMismatchError(f"长度 {v.size} 不是三角数")
    S = np.zeros((s, s))
    inv_root2 = 1.0 / math.sqrt(2.0)
    for k, (i, j) in enumerate(svec_index(s)):
        if i == j:
            S[i, i] = v[k]
        else:
            S[i, j] = S[j, i] = v[k] * inv_root2
    return S


def symmetric_basis_map(s: int) -> sparse.csc_matrix:
    """svec 坐标 → vec(S) 的稀疏线性映射，形状 (s², s(s+1)/2)"""
    rows, cols, vals = [], [], []
    inv_root2 = 1.0 / math.sqrt(2.0)
    for k, (i, j) in enumerate(svec_index(s)):
        if i == j:
            rows.append(i + i * s)
            cols.append(k)
            vals.append(1.0)
        else:
            rows += [i + j * s, j + i * s]
            cols += [k, k]
            vals += [inv_root2, inv_root2]
    return sparse.csc_matrix((vals, (rows, cols)), shape=(s * s, s * (s + 1) // 2))


def transpose_permutation(rows: int, cols: int) -> np.ndarray:
    """perm 使得 vec(Xᵀ) = vec(X)[perm]，X 为 rows×cols"""
    j, i = np.meshgrid(np.arange(cols), np.arange(rows), indexing="ij")
    # vec(Xᵀ) 中位置 j + i*cols 对应 X[i, j]，其在 vec(X) 中位置 i + j*rows
    perm = np.empty(rows * cols, dtype=int)
    perm[(j + i * cols).ravel()] = (i + j * rows).ravel()
    return perm


# ---------------------------------------------------------------------------
# 变量与表达式
# ---------------------------------------------------------------------------

class VariableKind(Enum):
    """决策变量类型"""
    SCALAR = "scalar"
    SYMMETRIC = "symmetric"
    FULL = "full"


class Variable:
    """
    决策变量

    对称变量用 svec 坐标参数化（s(s+1)/2 个未知数）；一般矩阵变量按列优先向量化。
    变量按身份比较，同名变量在同一问题中不允许重复声明。
    """

    __array_ufunc__ = None

    def __init__(self, name: str, kind: VariableKind, shape: Tuple[int, int],
                 lower: Optional[float] = None, psd: bool = False):
        self.name = name
        self.kind = kind
        self.shape = shape
        self.lower = lower
        self.psd = psd
        if kind is VariableKind.SYMMETRIC:
            self.size = shape[0] * (shape[0] + 1) // 2
            self._vec_map = symmetric_basis_map(shape[0])
        else:
            self.size = shape[0] * shape[1]
            self._vec_map = sparse.identity(self.size, format="csc")

    def __repr__(self) -> str:
        return f"Variable({self.name!r}, {self.kind.value}, {self.shape})"

    @property
    def vec_map(self) -> sparse.csc_matrix:
        return self._vec_map

    @property
    def expr(self) -> "AffineExpr":
        return AffineExpr(np.zeros(self.shape), {self: self._vec_map.tocsr()})

    def to_matrix(self, coords: np.ndarray) -> np.ndarray:
        """坐标向量 → 矩阵值"""
        coords = np.asarray(coords, dtype=float).ravel()
        if self.kind is VariableKind.SYMMETRIC:
            return smat(coords)
        return coords.reshape(self.shape, order="F")

    # 运算委托给 AffineExpr
    def __add__(self, other):
        return self.expr + other

    def __radd__(self, other):
        return other + self.expr

    def __sub__(self, other):
        return self.expr - other

    def __rsub__(self, other):
        return other - self.expr

    def __neg__(self):
        return -self.expr

    def __mul__(self, other):
        return self.expr * other

    def __rmul__(self, other):
        return other * self.expr

    def __matmul__(self, other):
        return self.expr @ other

    def __rmatmul__(self, other):
        return other @ self.expr

    @property
    def T(self) -> "AffineExpr":
        return self.expr.T


Operand = Union["AffineExpr", Variable, np.ndarray, float, int]


def _as_matrix(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    return arr


class AffineExpr:
    """
    仿射矩阵表达式 E(x) = const + Σ_v mat(coeffs[v] @ coords(v))

    coeffs[v] 是形状 (rows*cols, v.size) 的稀疏矩阵，作用在变量坐标上，结果按列优先排成矩阵。
    """

    __array_ufunc__ = None

    def __init__(self, const, coeffs: Optional[Dict[Variable, sparse.csr_matrix]] = None):
        self.const = _as_matrix(const)
        self.coeffs: Dict[Variable, sparse.csr_matrix] = dict(coeffs or {})

    @staticmethod
    def wrap(value: Operand, shape: Optional[Tuple[int, int]] = None) -> "AffineExpr":
        if isinstance(value, AffineExpr):
            return value
        if isinstance(value, Variable):
            return value.expr
        if shape is not None and np.ndim(value) == 0 and shape != (1, 1):
            if float(value) != 0.0:
                raise DimensionMismatchError(f"标量 {value} 不能与形状 {shape} 的表达式相加")
            return AffineExpr(np.zeros(shape))
        return AffineExpr(value)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.const.shape

    @property
    def variables(self) -> List[Variable]:
        return list(self.coeffs)

    def __repr__(self) -> str:
        names = ", ".join(v.name for v in self.coeffs)
        return f"AffineExpr(shape={self.shape}, vars=[{names}])"

    # --- 线性运算 ---
    def _combine(self, other: Operand, sign: float) -> "AffineExpr":
        other = AffineExpr.wrap(other, self.shape)
        if other.shape != self.shape:
            raise DimensionMismatchError(f"形状不一致: {self.shape} vs {other.shape}")
        coeffs = dict(self.coeffs)
        for var, coef in other.coeffs.items():
            scaled = coef if sign > 0 else -coef
            coeffs[var] = coeffs[var] + scaled if var in coeffs else scaled
        return AffineExpr(self.const + sign * other.const, coeffs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __radd__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return AffineExpr(-self.const, {v: -c for v, c in self.coeffs.items()})

    def __mul__(self, alpha):
        if isinstance(alpha, (AffineExpr, Variable)) or np.ndim(alpha) != 0:
            raise TypeError("AffineExpr 只支持与标量相乘；矩阵乘法请用 @")
        alpha = float(alpha)
        return AffineExpr(alpha * self.const, {v: alpha * c for v, c in self.coeffs.items()})

    def __rmul__(self, alpha):
        return self.__mul__(alpha)

    def __truediv__(self, alpha):
        return self.__mul__(1.0 / float(alpha))

    def __matmul__(self, other):
        if isinstance(other, (AffineExpr, Variable)):
            other = AffineExpr.wrap(other)
            if other.coeffs:
                raise TypeError("两个含变量的表达式相乘不是仿射的")
            other = other.const
        return self.right_multiply(_as_matrix(other))

    def __rmatmul__(self, other):
        return self.left_multiply(_as_matrix(other))

    def left_multiply(self, A: np.ndarray) -> "AffineExpr":
        """A @ E，vec(AE) = (I_c ⊗ A) vec(E)"""
        r, c = self.shape
        if A.shape[1] != r:
            raise DimensionMismatchError(f"左乘维度不一致: {A.shape} @ {self.shape}")
        op = sparse.kron(sparse.identity(c, format="csr"), sparse.csr_matrix(A), format="csr")
        return AffineExpr(A @ self.const, {v: op @ coef for v, coef in self.coeffs.items()})

    def right_multiply(self, B: np.ndarray) -> "AffineExpr":
        """E @ B，vec(EB) = (Bᵀ ⊗ I_r) vec(E)"""
        r, c = self.shape
        if B.shape[0] != c:
            raise DimensionMismatchError(f"右乘维度不一致: {self.shape} @ {B.shape}")
        op = sparse.kron(sparse.csr_matrix(B.T), sparse.identity(r, format="csr"), format="csr")
        return AffineExpr(self.const @ B, {v: op @ coef for v, coef in self.coeffs.items()})

    def congruence(self, T: np.ndarray) -> "AffineExpr":
        """Tᵀ E T"""
        T = _as_matrix(T)
        return self.left_multiply(T.T).right_multiply(T)

    @property
    def T(self) -> "AffineExpr":
        r, c = self.shape
        perm = transpose_permutation(r, c)
        return AffineExpr(self.const.T, {v: coef[perm, :] for v, coef in self.coeffs.items()})

    def sym(self) -> "AffineExpr":
        return (self + self.T) * 0.5

    def trace(self) -> "AffineExpr":
        r, c = self.shape
        if r != c:
            raise DimensionMismatchError("trace 需要方阵")
        idx = np.arange(r) * (r + 1)
        coeffs = {v: sparse.csr_matrix(coef[idx, :].sum(axis=0)) for v, coef in self.coeffs.items()}
        return AffineExpr(np.trace(self.const), coeffs)

    def times_matrix(self, M: np.ndarray) -> "AffineExpr":
        """标量表达式 s 乘以常数矩阵 M，得到 s·M"""
        if self.shape != (1, 1):
            raise DimensionMismatchError("times_matrix 只适用于 1×1 表达式")
        M = _as_matrix(M)
        col = sparse.csr_matrix(M.flatten(order="F").reshape(-1, 1))
        return AffineExpr(self.const[0, 0] * M, {v: col @ coef for v, coef in self.coeffs.items()})

    # --- 检查与求值 ---
    def is_symmetric(self, tol: float = 1e-10) -> bool:
        r, c = self.shape
        if r != c:
            return False
        if self.const.size and np.max(np.abs(self.const - self.const.T)) > tol * max(1.0, np.max(np.abs(self.const))):
            return False
        perm = transpose_permutation(r, c)
        for coef in self.coeffs.values():
            diff = coef[perm, :] - coef
            if diff.nnz and np.max(np.abs(diff.data)) > tol * max(1.0, abs(coef).max()):
                return False
        return True

    def evaluate(self, coordinates: Mapping[Variable, np.ndarray]) -> np.ndarray:
        """按变量坐标求值"""
        flat = self.const.flatten(order="F")
        for var, coef in self.coeffs.items():
            flat = flat + coef @ np.asarray(coordinates[var], dtype=float).ravel()
        return flat.reshape(self.shape, order="F")


def bmat(blocks: Sequence[Sequence[Optional[Operand]]]) -> AffineExpr:
    """
    分块拼接，None 表示零块。每个块行至少要有一个非 None 元素确定行高，
    每个块列同理；允许零维块（对应退化通道）。
    """
    nrows, ncols = len(blocks), len(blocks[0])
    wrapped = [[None if b is None else AffineExpr.wrap(b) for b in row] for row in blocks]
    heights: List[Optional[int]] = [None] * nrows
    widths: List[Optional[int]] = [None] * ncols
    for i, row in enumerate(wrapped):
        if len(row) != ncols:
            raise DimensionMismatchError("bmat 各行块数不一致")
        for j, b in enumerate(row):
            if b is None:
                continue
            h, w = b.shape
            if heights[i] is not None and heights[i] != h:
                raise DimensionMismatchError(f"bmat 第 {i} 行高度不一致: {heights[i]} vs {h}")
            if widths[j] is not None and widths[j] != w:
                raise DimensionMismatchError(f"bmat 第 {j} 列宽度不一致: {widths[j]} vs {w}")
            heights[i], widths[j] = h, w
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise DimensionMismatchError("bmat 存在整行或整列为 None，无法确定尺寸")

    R, C = sum(heights), sum(widths)
    const = np.zeros((R, C))
    triplets: Dict[Variable, Tuple[list, list, list]] = {}
    row_off = np.concatenate([[0], np.cumsum(heights)]).astype(int)
    col_off = np.concatenate([[0], np.cumsum(widths)]).astype(int)
    for i, row in enumerate(wrapped):
        for j, b in enumerate(row):
            if b is None or b.const.size == 0:
                continue
            ro, co = row_off[i], col_off[j]
            br, bc = b.shape
            const[ro:ro + br, co:co + bc] = b.const
            ii, jj = np.indices((br, bc))
            target = ((ro + ii) + (co + jj) * R).flatten(order="F")
            for var, coef in b.coeffs.items():
                coo = coef.tocoo()
                rows, cols, vals = triplets.setdefault(var, ([], [], []))
                rows.append(target[coo.row])
                cols.append(coo.col)
                vals.append(coo.data)
    coeffs = {}
    for var, (rows, cols, vals) in triplets.items():
        coeffs[var] = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(R * C, var.size)
        )
    # 只出现在零维块中的变量也要保留引用关系
    for row in wrapped:
        for b in row:
            if b is None:
                continue
            for var in b.coeffs:
                coeffs.setdefault(var, sparse.csr_matrix((R * C, var.size)))
    return AffineExpr(const, coeffs)


def block_diag(*blocks: Operand) -> AffineExpr:
    """分块对角拼接"""
    n = len(blocks)
    wrapped = [AffineExpr.wrap(b) for b in blocks]
    grid: List[List[Optional[AffineExpr]]] = []
    for i in range(n):
        row: List[Optional[Operand]] = []
        for j in range(n):
            if i == j:
                row.append(wrapped[i])
            else:
                row.append(np.zeros((wrapped[i].shape[0], wrapped[j].shape[1])))
        grid.append(row)
    return bmat(grid)


# ---------------------------------------------------------------------------
# 问题、标准型与解
# ---------------------------------------------------------------------------

@dataclass
class LmiConstraint:
    """expr ⪰ 0（strict 时为 expr ≻ 0）"""
    expr: AffineExpr
    strict: bool
    name: str


@dataclass
class PsdBlock:
    """标准型中的一个半正定块：mat(F0 + F x) - shift·I ⪰ 0（已按 scale 缩放）"""
    name: str
    size: int
    F0: np.ndarray
    F: sparse.csr_matrix
    scale: float
    shift: float


@dataclass
class StandardForm:
    """
    标准锥形式

    minimize c·x + offset  s.t.  A_eq x = b_eq,  mat(F0_k + F_k x) - shift_k I ⪰ 0
    sense = -1 表示原问题为最大化（c、offset 已取负）。
    """
    n: int
    c: np.ndarray
    offset: float
    sense: int
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    blocks: List[PsdBlock]
    variables: List[Variable]
    offsets: Dict[str, Tuple[int, int]]

    def block_value(self, block: PsdBlock, x: np.ndarray) -> np.ndarray:
        flat = block.F0 + (block.F @ x if self.n else 0.0)
        M = np.reshape(flat, (block.size, block.size), order="F")
        return 0.5 * (M + M.T)

    def worst_residual(self, x: np.ndarray) -> float:
        """
        原约束（不含 ε 偏移）的最大相对违反量

        每块的负特征值除以 max(1, |F0|, |F|·|x|) 的最大元素，即按各项量级归一化，不受相消影响；
        等式约束按绝对误差计。
        """
        worst = 0.0
        for block in self.blocks:
            if block.size == 0:
                continue
            terms = abs(block.F) @ np.abs(x) if self.n else np.zeros_like(block.F0)
            lam = float(np.linalg.eigvalsh(self.block_value(block, x))[0])
            magnitude = max(1.0, float(np.max(np.abs(block.F0))), float(np.max(terms, initial=0.0)))
            worst = max(worst, -lam / magnitude)
        if self.A_eq.shape[0] > 0:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        return worst

    def split(self, x: np.ndarray) -> Dict[Variable, np.ndarray]:
        return {v: x[self.offsets[v.name][0]:self.offsets[v.name][0] + v.size] for v in self.variables}

    def dump(self, stream: Optional[TextIO] = None) -> str:
        """
        稀疏三元组文本导出（索引从 0 开始，只写上三角）：

            n <变量数>
            objective <minimize|maximize> <offset>
            c <列> <值>
            A <行> <列> <值> / b <行> <值>
            block <k> <名字> size <s> scale <缩放> shift <偏移>
            F0 <k> <i> <j> <值>
            F <k> <列> <i> <j> <值>
            var <名字> <起始列> <坐标数>
        """
        out = stream or io.StringIO()
        out.write(f"n {self.n}\n")
        out.write(f"objective {'minimize' if self.sense > 0 else 'maximize'} {self.offset:.17g}\n")
        for col in np.flatnonzero(self.c):
            out.write(f"c {col} {self.c[col]:.17g}\n")
        A = self.A_eq.tocoo()
        for r, col, v in zip(A.row, A.col, A.data):
            out.write(f"A {r} {col} {v:.17g}\n")
        for r, v in enumerate(self.b_eq):
            out.write(f"b {r} {v:.17g}\n")
        for k, block in enumerate(self.blocks):
            s = block.size
            out.write(f"block {k} {block.name} size {s} scale {block.scale:.17g} shift {block.shift:.17g}\n")
            for idx in np.flatnonzero(block.F0):
                i, j = idx % s, idx // s
                if i <= j:
                    out.write(f"F0 {k} {i} {j} {block.F0[idx]:.17g}\n")
            F = block.F.tocoo()
            for idx, col, v in zip(F.row, F.col, F.data):
                i, j = idx % s, idx // s
                if i <= j:
                    out.write(f"F {k} {col} {i} {j} {v:.17g}\n")
        for var in self.variables:
            start, size = self.offsets[var.name]
            out.write(f"var {var.name} {start} {size}\n")
        return out.getvalue() if stream is None else ""


@dataclass
class Solution:
    """求解结果；status 为 OPTIMAL 时 residual ≤ residual_tol 已经过检查"""
    status: SolveStatus
    objective: Optional[float]
    residual: float
    solver: str
    message: str = ""
    solve_time: float = 0.0
    coordinates: Dict[Variable, np.ndarray] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def value(self, var: Variable) -> Union[float, np.ndarray]:
        mat = var.to_matrix(self.coordinates[var])
        if var.kind is VariableKind.SCALAR:
            return float(mat[0, 0])
        return mat

    def evaluate(self, expr: Operand) -> np.ndarray:
        return AffineExpr.wrap(expr).evaluate(self.coordinates)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "residual": self.residual,
            "solver": self.solver,
            "message": self.message,
            "solve_time": self.solve_time,
        }


class ConicProblem:
    """
    LMI 优化问题

    用法：
        prob = ConicProblem("lyap")
        P = prob.symmetric("P", 2)
        prob.add_lmi(P, strict=True)
        prob.add_lmi(P - A.T @ P @ A, strict=True)
        sol = prob.solve()
    """

    def __init__(self, name: str = "problem"):
        self.name = name
        self.variables: List[Variable] = []
        self.lmis: List[LmiConstraint] = []
        self.equalities: List[AffineExpr] = []
        self.objective: Optional[AffineExpr] = None
        self.sense = 1
        self._names: Dict[str, Variable] = {}

    # --- 变量 ---
    def _declare(self, var: Variable) -> Variable:
        if var.name in self._names:
            raise ProblemStructureError(f"变量名重复: {var.name}")
        self._names[var.name] = var
        self.variables.append(var)
        return var

    def scalar(self, name: str, lower: Optional[float] = None) -> Variable:
        return self._declare(Variable(name, VariableKind.SCALAR, (1, 1), lower=lower))

    def symmetric(self, name: str, size: int, psd: bool = False) -> Variable:
        return self._declare(Variable(name, VariableKind.SYMMETRIC, (size, size), psd=psd))

    def full(self, name: str, rows: int, cols: int) -> Variable:
        return self._declare(Variable(name, VariableKind.FULL, (rows, cols)))

    # --- 约束与目标 ---
    def add_lmi(self, expr: Operand, strict: bool = False, name: Optional[str] = None) -> None:
        """expr ⪰ 0；strict=True 时 expr ≻ 0（编译时按 ε 偏移）"""
        expr = AffineExpr.wrap(expr)
        if expr.shape[0] != expr.shape[1]:
            raise ProblemStructureError(f"LMI 必须是方阵，得到 {expr.shape}")
        self.lmis.append(LmiConstraint(expr, strict, name or f"lmi{len(self.lmis)}"))

    def add_equality(self, expr: Operand, rhs: Operand = 0.0) -> None:
        expr = AffineExpr.wrap(expr)
        self.equalities.append(expr - AffineExpr.wrap(rhs, expr.shape))

    def minimize(self, expr: Operand) -> None:
        self.objective, self.sense = AffineExpr.wrap(expr), 1

    def maximize(self, expr: Operand) -> None:
        self.objective, self.sense = AffineExpr.wrap(expr), -1

    # --- 编译 ---
    def _expressions(self) -> Iterable[AffineExpr]:
        yield from (c.expr for c in self.lmis)
        yield from self.equalities
        if self.objective is not None:
            yield self.objective

    def compile(self, settings: Optional[SolverSettings] = None) -> StandardForm:
        """编译为标准型；严格约束在按块缩放后偏移 settings.eps"""
        settings = settings or SolverSettings.from_env()
        declared = set(self.variables)
        referenced = set()
        for expr in self._expressions():
            for var in expr.coeffs:
                if var not in declared:
                    raise ProblemStructureError(f"约束引用了未声明的变量 {var.name}")
                referenced.add(var)
        unused = [v.name for v in self.variables if v not in referenced]
        if unused:
            raise ProblemStructureError(f"变量未被任何约束或目标引用: {', '.join(unused)}")

        offsets: Dict[str, Tuple[int, int]] = {}
        start = 0
        for var in self.variables:
            offsets[var.name] = (start, var.size)
            start += var.size
        n = start

        def assemble(expr: AffineExpr) -> Tuple[np.ndarray, sparse.csr_matrix]:
            rows = expr.shape[0] * expr.shape[1]
            parts = []
            for var in self.variables:
                coef = expr.coeffs.get(var)
                parts.append(coef if coef is not None else sparse.csr_matrix((rows, var.size)))
            F = sparse.hstack(parts, format="csr") if parts else sparse.csr_matrix((rows, 0))
            return expr.const.flatten(order="F"), F

        blocks: List[PsdBlock] = []
        for var in self.variables:
            if var.lower is not None:
                F0, F = assemble(var.expr - var.lower)
                blocks.append(PsdBlock(f"{var.name}>=lb", 1, F0, F, 1.0, 0.0))
            if var.psd:
                F0, F = assemble(var.expr)
                blocks.append(PsdBlock(f"{var.name}>>0", var.shape[0], F0, F, 1.0, 0.0))
        for con in self.lmis:
            if con.expr.shape[0] == 0:
                continue
            if not con.expr.is_symmetric():
                raise ProblemStructureError(f"LMI {con.name} 不对称，不是锥约束")
            F0, F = assemble(con.expr)
            magnitude = float(np.max(np.abs(F0))) if F0.size else 0.0
            scale = 1.0 / max(1.0, magnitude)
            blocks.append(PsdBlock(con.name, con.expr.shape[0], scale * F0, scale * F,
                                   scale, settings.eps if con.strict else 0.0))

        eq_rows = [assemble(e) for e in self.equalities if e.const.size]
        if eq_rows:
            A_eq = sparse.vstack([F for _, F in eq_rows], format="csr")
            b_eq = -np.concatenate([F0 for F0, _ in eq_rows])
        else:
            A_eq, b_eq = sparse.csr_matrix((0, n)), np.zeros(0)

        if self.objective is not None:
            if self.objective.shape != (1, 1):
                raise ProblemStructureError("目标必须是 1×1 表达式")
            f0, f = assemble(self.objective)
            c = self.sense * np.asarray(f.todense()).ravel()
            offset = self.sense * float(f0[0])
        else:
            c, offset = np.zeros(n), 0.0

        return StandardForm(n, c, offset, self.sense, A_eq, b_eq, blocks, list(self.variables), offsets)

    def solve(self, settings: Optional[SolverSettings] = None,
              backend: Optional[ConicBackend] = None) -> Solution:
        """编译并求解；OPTIMAL 仅在回代残差 ≤ residual_tol 时给出"""
        settings = settings or SolverSettings.from_env()
        form = self.compile(settings)
        if settings.dump_dir:
            _dump_form(form, settings.dump_dir, self.name)
        backend = backend or CvxpyBackend(settings)
        best: Optional[Solution] = None
        for raw in backend.attempts(form):
            solution = build_solution(form, raw, settings, self.name)
            if solution.ok or raw.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
                return solution
            # 回代不过关时换下一个求解器，全部失败则留残差最小的一个
            if best is None or solution.residual < best.residual:
                best = solution
        if best is None:
            return Solution(SolveStatus.NUMERICAL_FAILURE, None, math.inf, "", "backend returned no result")
        return best


def _dump_form(form: StandardForm, directory: str, name: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, re.sub(r"[^\w.-]+", "_", name or "problem") + ".txt")
    with open(path, "w", encoding="utf-8") as f:
        form.dump(f)
    return path


def build_solution(form: StandardForm, raw: BackendResult, settings: SolverSettings, name: str = "") -> Solution:
    """把后端结果映射回原变量，并做求解后残差检查"""
    if raw.x is None or raw.status is not SolveStatus.OPTIMAL:
        log("求解器", f"{name}: {raw.status.value} ({raw.message})", settings.verbose)
        return Solution(raw.status, None, math.inf, raw.solver, raw.message, raw.solve_time)

    x = raw.x
    residual = form.worst_residual(x)
    objective = form.sense * (float(form.c @ x) + form.offset) if form.n else form.sense * form.offset
    status, message = raw.status, raw.message
    if residual > settings.residual_tol:
        status = SolveStatus.NUMERICAL_FAILURE
        message = f"post-solve residual {residual:.3e} > {settings.residual_tol:.1e} ({raw.message})"
    log("求解器", f"{name}: {status.value}, obj={objective:.6g}, residual={residual:.2e}", settings.verbose)
    return Solution(status, objective, residual, raw.solver, message, raw.solve_time, form.split(x))
