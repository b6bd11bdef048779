"""
乘子引擎模块 (Multiplier Engine)

功能：构造、变换与组合参数化的乘子锥

    𝐏 = { P(θ) = Σ θ_i G_i : θ 满足锥约束 }

其中每个 P 都满足 [Δᵀ; I]ᵀ P [Δᵀ; I] ⪰ 0（对集合中的所有 Δ）。
P 的行列按 [upper; lower] 划分：upper 对应 Δᵀ 的行数（z 侧），lower 对应单位阵（w 侧）。

核心功能：
- MultiplierClass: 乘子锥（参数块 + 稀疏生成矩阵 + 参数空间中的 LMI 约束）
- 先验乘子: prior_full_block, prior_repeated_scalar
- 扰动乘子: disturbance_quadratic, disturbance_diagonal, disturbance_convex_hull,
  disturbance_toeplitz, infinity_ball_vertices
- 非线性通道乘子: nonlinear_norm_bound
- 组合与变换: sum_classes, transform_prior, learn_from_data, combine
- 检查: assumption_definiteness_check, certify_membership, sample_feasible
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, sparse

from .config import SolverSettings, log
from .conic_backend import SolveStatus
from .errors import AsymmetricMatrixError, DimensionMismatchError, NumericalFailureError
from .lft_model import DataMatrices, UncertaintyStructure
from .lmi_compiler import AffineExpr, ConicProblem, Solution, Variable, smat, svec_index, symmetric_basis_map

MAX_HULL_DIMENSION = 16


class ParamKind(Enum):
    """参数块类型"""
    SCALAR = "scalar"          # θ ≥ 0
    PSD = "psd"                # Λ ⪰ 0
    SYMMETRIC = "symmetric"    # 自由对称矩阵（只受显式 LMI 约束）


@dataclass(frozen=True)
class ParameterBlock:
    """一个参数块；矩阵参数按 svec 坐标展开"""
    name: str
    kind: ParamKind
    size: int = 1

    @property
    def n_coords(self) -> int:
        if self.kind is ParamKind.SCALAR:
            return 1
        return self.size * (self.size + 1) // 2


@dataclass(frozen=True, eq=False)
class ParamLmi:
    """参数空间中的齐次 LMI：mat(coeff @ θ) ⪰ 0"""
    name: str
    size: int
    coeff: sparse.csc_matrix


@dataclass(frozen=True, eq=False)
class MultiplierValue:
    """求解器给出的乘子取值"""
    theta: np.ndarray
    P: np.ndarray
    label: str = ""

    def to_dict(self) -> dict:
        eig = np.linalg.eigvalsh(self.P) if self.P.size else np.zeros(0)
        return {
            "label": self.label,
            "n_params": int(self.theta.size),
            "theta_norm": float(np.linalg.norm(self.theta)),
            "eig_min": float(eig[0]) if eig.size else 0.0,
            "eig_max": float(eig[-1]) if eig.size else 0.0,
        }


def _check_symmetric(H: np.ndarray, what: str, tol: float = 1e-10) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[0] != H.shape[1]:
        raise DimensionMismatchError(f"{what} 必须是方阵，得到 {H.shape}")
    if H.size and np.max(np.abs(H - H.T)) > tol * max(1.0, float(np.max(np.abs(H)))):
        raise AsymmetricMatrixError(f"{what} 不对称")
    return 0.5 * (H + H.T)


def _vec(M: np.ndarray) -> np.ndarray:
    return np.asarray(M, dtype=float).flatten(order="F")


def _symmetric_images(s: int, image) -> sparse.csc_matrix:
    """对 svec 基矩阵 E_k 逐个取 vec(image(E_k))，拼成生成矩阵的列"""
    basis = symmetric_basis_map(s).toarray()
    cols = [_vec(image(basis[:, k].reshape(s, s, order="F"))) for k in range(basis.shape[1])]
    return sparse.csc_matrix(np.column_stack(cols)) if cols else sparse.csc_matrix((0, 0))


@dataclass(frozen=True, eq=False)
class MultiplierClass:
    """
    乘子锥

    - upper / lower: P 的行列划分（upper = Δᵀ 的行数，lower = 单位阵的行数）
    - blocks: 参数块，按顺序占用 θ 的坐标
    - generator: 形状 (dim², n_params) 的稀疏矩阵，vec(P(θ)) = generator @ θ
    - constraints: 参数空间中额外的齐次 LMI
    """
    upper: int
    lower: int
    blocks: Tuple[ParameterBlock, ...]
    generator: sparse.csc_matrix
    constraints: Tuple[ParamLmi, ...] = ()
    label: str = "multiplier"

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        gen = sparse.csc_matrix(self.generator)
        if gen.shape != (self.dim ** 2, self.n_params):
            raise DimensionMismatchError(
                f"生成矩阵形状应为 {(self.dim ** 2, self.n_params)}，得到 {gen.shape}")
        object.__setattr__(self, "generator", gen)

    @property
    def dim(self) -> int:
        return self.upper + self.lower

    @property
    def n_params(self) -> int:
        return sum(b.n_coords for b in self.blocks)

    @property
    def offsets(self) -> List[Tuple[int, int]]:
        out, start = [], 0
        for b in self.blocks:
            out.append((start, b.n_coords))
            start += b.n_coords
        return out

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        """θ ↦ P(θ)"""
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.n_params:
            raise DimensionMismatchError(f"θ 长度应为 {self.n_params}，得到 {theta.size}")
        P = np.reshape(self.generator @ theta, (self.dim, self.dim), order="F")
        return 0.5 * (P + P.T)

    def is_feasible(self, theta: np.ndarray, tol: float = 1e-9) -> bool:
        """检查 θ 是否满足参数块与显式 LMI 约束"""
        theta = np.asarray(theta, dtype=float).ravel()
        for block, (start, size) in zip(self.blocks, self.offsets):
            part = theta[start:start + size]
            if block.kind is ParamKind.SCALAR and part[0] < -tol:
                return False
            if block.kind is ParamKind.PSD and np.linalg.eigvalsh(smat(part))[0] < -tol:
                return False
        for con in self.constraints:
            F = np.reshape(con.coeff @ theta, (con.size, con.size), order="F")
            if con.size and np.linalg.eigvalsh(0.5 * (F + F.T))[0] < -tol:
                return False
        return True

    def quadratic_form(self, theta: np.ndarray, delta_t: np.ndarray) -> np.ndarray:
        """[Δᵀ; I]ᵀ P(θ) [Δᵀ; I]，delta_t 为 lower×upper"""
        Phi = self.outer_factor(delta_t)
        return Phi.T @ self.evaluate(theta) @ Phi

    def outer_factor(self, delta_t: np.ndarray) -> np.ndarray:
        delta_t = np.atleast_2d(np.asarray(delta_t, dtype=float))
        if delta_t.shape != (self.lower, self.upper):
            raise DimensionMismatchError(f"Δ 形状应为 {(self.lower, self.upper)}，得到 {delta_t.shape}")
        return np.vstack([delta_t.T, np.eye(self.lower)])

    def transform(self, T: np.ndarray, upper: int, lower: int, label: Optional[str] = None) -> "MultiplierClass":
        """
        合同变换 P ↦ Tᵀ P T，T 形状为 dim × (upper + lower)。

        vec(TᵀGT) = (Tᵀ ⊗ Tᵀ) vec(G)，参数与参数约束保持不变。
        """
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape != (self.dim, upper + lower):
            raise DimensionMismatchError(f"变换矩阵形状应为 {(self.dim, upper + lower)}，得到 {T.shape}")
        if self.n_params == 0:
            gen = sparse.csc_matrix(((upper + lower) ** 2, 0))
        else:
            kron_t = np.kron(T, T)  # (Tᵀ ⊗ Tᵀ)ᵀ
            gen = sparse.csc_matrix(np.asarray(self.generator.T @ kron_t).T)
        return MultiplierClass(upper, lower, self.blocks, gen, self.constraints, label or self.label)

    def instantiate(self, problem: ConicProblem, prefix: str) -> Tuple[AffineExpr, List[Variable]]:
        """
        在 problem 中声明参数变量并加入参数约束，返回 P(θ) 的仿射表达式。
        """
        variables: List[Variable] = []
        coeffs: Dict[Variable, sparse.csr_matrix] = {}
        for block, (start, size) in zip(self.blocks, self.offsets):
            name = f"{prefix}.{block.name}"
            if block.kind is ParamKind.SCALAR:
                var = problem.scalar(name, lower=0.0)
            else:
                var = problem.symmetric(name, block.size, psd=block.kind is ParamKind.PSD)
            variables.append(var)
            coeffs[var] = self.generator[:, start:start + size].tocsr()
        for con in self.constraints:
            con_coeffs = {var: con.coeff[:, start:start + size].tocsr()
                          for var, (start, size) in zip(variables, self.offsets)}
            problem.add_lmi(AffineExpr(np.zeros((con.size, con.size)), con_coeffs), name=f"{prefix}.{con.name}")
        return AffineExpr(np.zeros((self.dim, self.dim)), coeffs), variables

    def value_from(self, solution: Solution, variables: Sequence[Variable]) -> MultiplierValue:
        """从解中取回 θ 与 P(θ)"""
        parts = [np.asarray(solution.coordinates[v]).ravel() for v in variables]
        theta = np.concatenate(parts) if parts else np.zeros(0)
        return MultiplierValue(theta, self.evaluate(theta), self.label)

    def describe(self) -> dict:
        return {
            "label": self.label,
            "upper": self.upper,
            "lower": self.lower,
            "blocks": [{"name": b.name, "kind": b.kind.value, "size": b.size} for b in self.blocks],
            "constraints": len(self.constraints),
        }


# ---------------------------------------------------------------------------
# 构造器
# ---------------------------------------------------------------------------

def zero_class(upper: int, lower: int, label: str = "zero") -> MultiplierClass:
    """只含 0 的乘子类"""
    return MultiplierClass(upper, lower, (), sparse.csc_matrix(((upper + lower) ** 2, 0)), (), label)


def prior_full_block(H: np.ndarray, nz: Optional[int] = None, label: str = "full") -> MultiplierClass:
    """
    满块先验 {λH, λ ≥ 0}。

    Args:
        H: (n_z,j + n_w,j) 阶对称矩阵，作用在 [Δ_jᵀ; I] 上
        nz: Δ_j 的列数（upper 尺寸），缺省时取 H 的一半
    """
    H = _check_symmetric(H, "H_j")
    dim = H.shape[0]
    if nz is None:
        if dim % 2:
            raise DimensionMismatchError("H_j 维数为奇数时必须给出 nz")
        nz = dim // 2
    block = ParameterBlock("lambda", ParamKind.SCALAR)
    gen = sparse.csc_matrix(_vec(H).reshape(-1, 1))
    return MultiplierClass(nz, dim - nz, (block,), gen, (), label)


def prior_repeated_scalar(h: np.ndarray, n: int, label: str = "repeated") -> MultiplierClass:
    """重复标量块先验 {h ⊗ Λ : Λ ⪰ 0}，h 为 2×2 对称矩阵"""
    h = _check_symmetric(h, "h_j")
    if h.shape != (2, 2):
        raise DimensionMismatchError(f"h_j 必须是 2×2，得到 {h.shape}")
    if n < 1:
        raise DimensionMismatchError("块尺寸 n 必须 ≥ 1")
    gen = _symmetric_images(n, lambda E: np.kron(h, E))
    return MultiplierClass(n, n, (ParameterBlock("Lambda", ParamKind.PSD, n),), gen, (), label)


def disturbance_quadratic(Q_d: np.ndarray, S_d: Optional[np.ndarray], R_d: np.ndarray,
                          label: str = "quad", tol: float = 1e-10) -> MultiplierClass:
    """
    二次扰动界 {τ[Q_d, S_d; S_dᵀ, R_d], τ ≥ 0}，作用在 [Dᵀ; I] 上（Q_d 为 N×N）。

    要求 Q_d ⪯ 0（Q_d ≺ 0 时满足定性条件；半定的核约束类需与其他类组合使用）。
    """
    Q_d = _check_symmetric(Q_d, "Q_d")
    R_d = _check_symmetric(R_d, "R_d")
    N, n_d = Q_d.shape[0], R_d.shape[0]
    S_d = np.zeros((N, n_d)) if S_d is None else np.atleast_2d(np.asarray(S_d, dtype=float))
    if S_d.shape != (N, n_d):
        raise DimensionMismatchError(f"S_d 形状应为 {(N, n_d)}，得到 {S_d.shape}")
    if N and np.max(np.linalg.eigvalsh(Q_d)) > tol * max(1.0, float(np.max(np.abs(Q_d)))):
        raise ValueError("disturbance_quadratic 要求 Q_d ⪯ 0")
    G = np.block([[Q_d, S_d], [S_d.T, R_d]])
    gen = sparse.csc_matrix(_vec(G).reshape(-1, 1))
    return MultiplierClass(N, n_d, (ParameterBlock("tau", ParamKind.SCALAR),), gen, (), label)


def disturbance_diagonal(d2_bar: float, N: int, n_d: int, label: str = "diag") -> MultiplierClass:
    """
    逐样本范数界 ‖d_k‖₂ ≤ d̄₂：每个样本一个 p_i ≥ 0，
    P(p) = [−diag(p), 0; 0, (Σp_i) d̄₂² I]。
    """
    if d2_bar < 0 or N < 1:
        raise ValueError("需要 d̄₂ ≥ 0 且 N ≥ 1")
    dim = N + n_d
    rows, cols, vals = [], [], []
    for i in range(N):
        rows.append(i + i * dim)
        cols.append(i)
        vals.append(-1.0)
        for k in range(n_d):
            idx = N + k
            rows.append(idx + idx * dim)
            cols.append(i)
            vals.append(d2_bar ** 2)
    gen = sparse.csc_matrix((vals, (rows, cols)), shape=(dim * dim, N))
    blocks = tuple(ParameterBlock(f"p{i}", ParamKind.SCALAR) for i in range(N))
    return MultiplierClass(N, n_d, blocks, gen, (), label)


def infinity_ball_vertices(d_bar: float, n_d: int, N: int) -> List[np.ndarray]:
    """∞-范数球 {‖d_k‖∞ ≤ d̄} 的全部顶点（n_d×N 的符号模式），限 n_d·N ≤ 16"""
    count = n_d * N
    if count > MAX_HULL_DIMENSION:
        raise ValueError(f"顶点数 2^{count} 过多，仅支持 n_d·N ≤ {MAX_HULL_DIMENSION}")
    return [d_bar * np.reshape(signs, (n_d, N), order="F") for signs in product((-1.0, 1.0), repeat=count)]


def disturbance_convex_hull(vertices: Sequence[np.ndarray], label: str = "hull") -> MultiplierClass:
    """
    凸包扰动界：自由对称参数 P_d（(N+n_d) 阶），约束
    [I; 0]ᵀP_d[I; 0] ⪯ 0 以及对每个顶点 [D̄_iᵀ; I]ᵀP_d[D̄_iᵀ; I] ⪰ 0。
    """
    if not vertices:
        raise ValueError("至少需要一个顶点")
    shapes = {np.atleast_2d(v).shape for v in vertices}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"顶点形状不一致: {shapes}")
    n_d, N = shapes.pop()
    dim = N + n_d
    basis_map = symmetric_basis_map(dim)
    constraints: List[ParamLmi] = []

    def congruence_coeff(T: np.ndarray) -> sparse.csc_matrix:
        kron_t = np.kron(T, T)
        return sparse.csc_matrix(np.asarray(basis_map.T @ kron_t).T)

    upper_sel = np.vstack([np.eye(N), np.zeros((n_d, N))])
    constraints.append(ParamLmi("upper_nsd", N, -congruence_coeff(upper_sel)))
    for i, vertex in enumerate(vertices):
        Phi = np.vstack([np.atleast_2d(vertex).T, np.eye(n_d)])
        constraints.append(ParamLmi(f"vertex{i}", n_d, congruence_coeff(Phi)))
    block = ParameterBlock("P_d", ParamKind.SYMMETRIC, dim)
    return MultiplierClass(N, n_d, (block,), basis_map, tuple(constraints), label)


def toeplitz_difference(N: int, period: int = 1) -> np.ndarray:
    """N×(N−period) 差分矩阵 T：DT = 0 ⇔ d_k = d_{k+period}"""
    if not 1 <= period < N:
        raise ValueError(f"需要 1 ≤ period < N，得到 period={period}, N={N}")
    T = np.zeros((N, N - period))
    for k in range(N - period):
        T[k, k] = 1.0
        T[k + period, k] = -1.0
    return T


def disturbance_toeplitz(N: int, n_d: int, period: int = 1, eps: float = 0.0,
                         label: Optional[str] = None) -> MultiplierClass:
    """
    Toeplitz 核约束 ‖D T‖² ≤ eps：常值扰动（period=1）或周期扰动。

    Q_d = −TTᵀ 只是半负定，需与 quad/diag 等类组合后才满足定性条件。
    """
    T = toeplitz_difference(N, period)
    return disturbance_quadratic(-T @ T.T, np.zeros((N, n_d)), eps * np.eye(n_d),
                                 label=label or f"toeplitz(p={period})")


def nonlinear_norm_bound(gamma_p: float, n_zp: int, n_wp: int, label: str = "norm_bound") -> MultiplierClass:
    """非线性通道范数界 {λ diag(−I_{n_z′}, γ′² I_{n_w′}), λ ≥ 0}"""
    H = np.diag(np.concatenate([-np.ones(n_zp), gamma_p ** 2 * np.ones(n_wp)]))
    return prior_full_block(H, nz=n_zp, label=label)


# ---------------------------------------------------------------------------
# 组合与变换
# ---------------------------------------------------------------------------

def _shift_columns(coeff: sparse.spmatrix, start: int, total: int) -> sparse.csc_matrix:
    coo = coeff.tocoo()
    return sparse.csc_matrix((coo.data, (coo.row, coo.col + start)), shape=(coeff.shape[0], total))


def sum_classes(*classes: MultiplierClass, label: Optional[str] = None) -> MultiplierClass:
    """锥和：参数集不相交并，P(θ₁, θ₂, …) = Σ P_i(θ_i)"""
    if not classes:
        raise ValueError("至少需要一个乘子类")
    upper, lower = classes[0].upper, classes[0].lower
    for c in classes[1:]:
        if (c.upper, c.lower) != (upper, lower):
            raise DimensionMismatchError(
                f"乘子维数不一致: ({upper},{lower}) vs ({c.upper},{c.lower})")
    n_total = sum(c.n_params for c in classes)
    blocks: List[ParameterBlock] = []
    constraints: List[ParamLmi] = []
    gen_rows, gen_cols, gen_vals = [], [], []
    start = 0
    for idx, c in enumerate(classes):
        blocks.extend(ParameterBlock(f"{idx}.{c.label}.{b.name}", b.kind, b.size) for b in c.blocks)
        for con in c.constraints:
            constraints.append(ParamLmi(f"{idx}.{con.name}", con.size, _shift_columns(con.coeff, start, n_total)))
        coo = c.generator.tocoo()
        gen_rows.append(coo.row)
        gen_cols.append(coo.col + start)
        gen_vals.append(coo.data)
        start += c.n_params
    generator = sparse.csc_matrix(
        (np.concatenate(gen_vals), (np.concatenate(gen_rows), np.concatenate(gen_cols))),
        shape=((upper + lower) ** 2, n_total))
    return MultiplierClass(upper, lower, tuple(blocks), generator, tuple(constraints),
                           label or "+".join(c.label for c in classes))


def transform_prior(structure: UncertaintyStructure, B_w: np.ndarray,
                    classes: Sequence[MultiplierClass], label: str = "prior") -> MultiplierClass:
    """
    先验乘子变换：Σ_j diag(L_jᵀ, B_jᵀ)ᵀ P_j diag(L_jᵀ, B_jᵀ)，结果作用在 [Δ̃ᵀ; I] 上（n_z + n 阶）。
    """
    B_w = np.atleast_2d(np.asarray(B_w, dtype=float))
    n = B_w.shape[0]
    if len(classes) != len(structure.blocks):
        raise DimensionMismatchError(f"需要 {len(structure.blocks)} 个先验类，得到 {len(classes)}")
    if B_w.shape[1] != structure.n_w:
        raise DimensionMismatchError(f"B_w 列数 {B_w.shape[1]} 与结构 n_w={structure.n_w} 不符")
    n_z = structure.n_z
    transformed = []
    for j, (spec, c) in enumerate(zip(structure.blocks, classes)):
        if (c.upper, c.lower) != (spec.nz, spec.nw):
            raise DimensionMismatchError(
                f"块 {j} 的乘子维数 ({c.upper},{c.lower}) 与块尺寸 ({spec.nz},{spec.nw}) 不符")
        Lj, Bj = structure.L(j), B_w @ structure.R(j)
        T = np.zeros((spec.nz + spec.nw, n_z + n))
        T[:spec.nz, :n_z] = Lj.T
        T[spec.nz:, n_z:] = Bj.T
        transformed.append(c.transform(T, n_z, n, label=f"{c.label}{j + 1}"))
    if not transformed:
        return zero_class(n_z, n, label)
    return sum_classes(*transformed, label=label)


def learn_from_data(data: DataMatrices, B_d: np.ndarray, c_d: MultiplierClass,
                    label: str = "learnt") -> MultiplierClass:
    """
    数据学习乘子：Tᵀ P_d T，T = [−Zᵀ, Mᵀ; 0, B_dᵀ]，结果作用在 [Δ̃ᵀ; I] 上。
    """
    M, Z = data.M, data.Z
    B_d = np.atleast_2d(np.asarray(B_d, dtype=float))
    n, N = M.shape
    n_z = Z.shape[0]
    if B_d.shape[0] != n:
        raise DimensionMismatchError(f"B_d 行数应为状态维数 {n}，得到 {B_d.shape[0]}")
    n_d = B_d.shape[1]
    if Z.shape[1] != N:
        raise DimensionMismatchError("M 与 Z 列数不一致")
    if (c_d.upper, c_d.lower) != (N, n_d):
        raise DimensionMismatchError(
            f"扰动乘子维数 ({c_d.upper},{c_d.lower}) 与数据 (N={N}, n_d={n_d}) 不符")
    T = np.block([[-Z.T, M.T], [np.zeros((n_d, n_z)), B_d.T]])
    return c_d.transform(T, n_z, n, label=label)


def combine(prior: Optional[MultiplierClass], learnt: Optional[MultiplierClass],
            extra: Optional[Sequence[Tuple[MultiplierClass, str]]] = None,
            B_w: Optional[np.ndarray] = None, label: str = "com") -> MultiplierClass:
    """
    组合乘子 P̃_com = P̃ + P̃₀ (+ 额外类)。

    extra 中每项为 (类, "delta" | "delta_tilde")：作用于 Δ 的类先经 diag(I, B_wᵀ) 合同变换。
    """
    parts = [c for c in (prior, learnt) if c is not None]
    for c, target in extra or ():
        if target == "delta_tilde":
            parts.append(c)
        elif target == "delta":
            if B_w is None:
                raise ValueError("作用于 Δ 的额外乘子需要 B_w")
            B_w = np.atleast_2d(np.asarray(B_w, dtype=float))
            n, n_w = B_w.shape
            T = np.zeros((c.upper + n_w, c.upper + n))
            T[:c.upper, :c.upper] = np.eye(c.upper)
            T[c.upper:, c.upper:] = B_w.T
            if c.lower != n_w:
                raise DimensionMismatchError(f"额外乘子 lower={c.lower} 与 n_w={n_w} 不符")
            parts.append(c.transform(T, c.upper, n, label=f"{c.label}~"))
        else:
            raise ValueError(f"未知的额外乘子目标: {target}")
    if not parts:
        raise ValueError("combine 至少需要一个乘子类")
    if len(parts) == 1:
        return parts[0]
    return sum_classes(*parts, label=label)


# ---------------------------------------------------------------------------
# 检查
# ---------------------------------------------------------------------------

@dataclass
class DefinitenessResult:
    """定性条件检查结果"""
    holds: bool
    witness: Optional[np.ndarray] = None

    def __bool__(self) -> bool:
        return self.holds


def assumption_definiteness_check(c: MultiplierClass, settings: Optional[SolverSettings] = None) -> DefinitenessResult:
    """
    检查是否存在可行 θ 使 [I 0]P(θ)[I 0]ᵀ ⪯ −I（由锥性质等价于 ≺ 0）。

    Raises:
        NumericalFailureError: 求解器数值失败
    """
    settings = settings or SolverSettings.from_env()
    if c.upper == 0:
        return DefinitenessResult(True, np.zeros(c.n_params))
    if c.n_params == 0:
        return DefinitenessResult(False)
    prob = ConicProblem(f"definiteness[{c.label}]")
    P, variables = c.instantiate(prob, "theta")
    sel = np.vstack([np.eye(c.upper), np.zeros((c.lower, c.upper))])
    prob.add_lmi(-P.congruence(sel) - np.eye(c.upper), name="upper_le_minus_I")
    sol = prob.solve(settings)
    if sol.status is SolveStatus.OPTIMAL:
        return DefinitenessResult(True, c.value_from(sol, variables).theta)
    if sol.status is SolveStatus.INFEASIBLE:
        return DefinitenessResult(False)
    raise NumericalFailureError(f"定性检查求解失败: {sol.message}", sol)


@dataclass
class Member:
    """
    Δ̃ 属于乘子类描述的集合；margin 为找到的最小特征值（≥ −tol）

    certified 为 False 表示结论来自局部搜索：某个 PSD 块的 Choi 下界为负但没找到 vvᵀ 见证，
    或者走了耦合参数的交替搜索。对应的下界记在 details 里（键名以 .choi_bound 结尾）。
    """
    margin: float
    details: Dict[str, float] = field(default_factory=dict)
    certified: bool = True

    def __bool__(self) -> bool:
        return True


@dataclass
class NotMemberWitness:
    """分离见证：可行 θ 使 [Δ̃ᵀ; I]ᵀP(θ)[Δ̃ᵀ; I] 有负特征值 margin"""
    theta: np.ndarray
    margin: float
    details: Dict[str, float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return False


MembershipVerdict = Union[Member, NotMemberWitness]


def _mapped_generator(c: MultiplierClass, Phi: np.ndarray) -> np.ndarray:
    """每列为 vec(Φᵀ G_i Φ)"""
    if c.n_params == 0:
        return np.zeros((Phi.shape[1] ** 2, 0))
    return np.asarray(c.generator.T @ np.kron(Phi, Phi)).T


def _coupled_columns(c: MultiplierClass) -> set:
    cols = set()
    for con in c.constraints:
        cols.update(np.flatnonzero(np.asarray(abs(con.coeff).sum(axis=0)).ravel()).tolist())
    return cols


def _min_eig(flat: np.ndarray, n: int) -> Tuple[float, np.ndarray]:
    F = np.reshape(flat, (n, n), order="F")
    w, V = np.linalg.eigh(0.5 * (F + F.T))
    return float(w[0]), V[:, 0]


def _psd_block_search(Fcols: np.ndarray, s: int, n: int,
                      tol: float) -> Tuple[float, Optional[np.ndarray], float]:
    """
    对 PSD 参数块 Λ 搜索 min_{‖v‖=1} λ_min(F(vvᵀ))。

    先用 Choi 矩阵给出下界；若下界为负，再从其特征向量出发做局部优化，
    只有找到真实的 vvᵀ 见证才返回负值。第三个返回值是 Choi 下界。
    """
    idx = svec_index(s)
    coord = {pair: k for k, pair in enumerate(idx)}
    root2 = math.sqrt(2.0)

    def image(a: int, b: int) -> np.ndarray:
        i, j = min(a, b), max(a, b)
        col = Fcols[:, coord[(i, j)]]
        return col if i == j else col / root2

    choi = np.zeros((s * n, s * n))
    for a in range(s):
        for b in range(s):
            choi[a * n:(a + 1) * n, b * n:(b + 1) * n] = np.reshape(image(a, b), (n, n), order="F")
    choi = 0.5 * (choi + choi.T)
    w, V = np.linalg.eigh(choi)
    if w[0] >= -tol:
        return float(w[0]), None, float(w[0])

    def value(v: np.ndarray) -> float:
        v = v / max(np.linalg.norm(v), 1e-300)
        lam = np.outer(v, v)
        flat = sum(Fcols[:, k] * (lam[i, j] if i == j else root2 * lam[i, j]) for k, (i, j) in enumerate(idx))
        return _min_eig(flat, n)[0]

    starts = [np.linalg.svd(V[:, 0].reshape(s, n))[0][:, 0]]
    starts += [np.eye(s)[a] for a in range(s)]
    best_val, best_v = math.inf, None
    for v0 in starts:
        val0 = value(v0)
        if val0 < best_val:
            best_val, best_v = val0, v0
        if s > 1:
            res = optimize.minimize(value, v0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
            if res.fun < best_val:
                best_val, best_v = float(res.fun), res.x
    best_v = best_v / np.linalg.norm(best_v)
    if best_val < -tol:
        return best_val, svec_of_outer(best_v), float(w[0])
    return best_val, None, float(w[0])


def svec_of_outer(v: np.ndarray) -> np.ndarray:
    """svec(vvᵀ)"""
    lam = np.outer(v, v)
    root2 = math.sqrt(2.0)
    return np.array([lam[i, j] if i == j else root2 * lam[i, j] for i, j in svec_index(v.size)])


def _coupled_search(c: MultiplierClass, Fgen: np.ndarray, n: int, tol: float,
                    settings: SolverSettings, rng: np.random.Generator,
                    rounds: int = 4) -> Tuple[float, Optional[np.ndarray]]:
    """
    带耦合约束参数的交替搜索：固定方向 v 时 min vᵀF(θ)v 是 SDP，
    再用 F(θ*) 的最小特征向量更新 v。
    """
    starts = [np.eye(n)[i] for i in range(n)] + [rng.standard_normal(n) for _ in range(2)]
    best_val, best_theta = math.inf, None
    for v in starts:
        v = v / np.linalg.norm(v)
        for _ in range(rounds):
            prob = ConicProblem(f"membership[{c.label}]")
            P_theta, variables = _normalized_parameters(c, prob)
            objective = AffineExpr(np.zeros((1, 1)),
                                   {var: sparse.csr_matrix(np.kron(v, v) @ Fgen[:, start:start + size])
                                    for var, (start, size) in zip(variables, c.offsets)})
            prob.minimize(objective)
            sol = prob.solve(settings)
            if not sol.ok:
                break
            theta = c.value_from(sol, variables).theta
            lam, v_new = _min_eig(Fgen @ theta, n)
            if lam < best_val:
                best_val, best_theta = lam, theta
            if lam < -tol or np.allclose(np.abs(v_new @ v), 1.0, atol=1e-9):
                break
            v = v_new
        if best_val < -tol:
            break
    return best_val, (best_theta if best_val < -tol else None)


def _normalized_parameters(c: MultiplierClass, prob: ConicProblem) -> Tuple[AffineExpr, List[Variable]]:
    """声明参数变量并加入归一化：Σ 标量 + Σ tr(PSD) ≤ 1，自由对称块 −I ⪯ S ⪯ I"""
    P, variables = c.instantiate(prob, "theta")
    scale = AffineExpr(np.zeros((1, 1)))
    for var, block in zip(variables, c.blocks):
        if block.kind is ParamKind.SCALAR:
            scale = scale + var.expr
        elif block.kind is ParamKind.PSD:
            scale = scale + var.expr.trace()
        else:
            prob.add_lmi(np.eye(block.size) - var.expr, name=f"{var.name}<=I")
            prob.add_lmi(np.eye(block.size) + var.expr, name=f"{var.name}>=-I")
    if scale.coeffs:
        prob.add_lmi(1.0 - scale, name="normalization")
    return P, variables


def certify_membership(delta_tilde: np.ndarray, c: MultiplierClass, tol: float = 1e-7,
                       settings: Optional[SolverSettings] = None, seed: int = 0) -> MembershipVerdict:
    """
    判断 [Δ̃ᵀ; I]ᵀ P(θ) [Δ̃ᵀ; I] ⪰ 0 是否对所有可行 θ 成立。

    θ 按尺度归一化（标量之和 + PSD 块的迹 = 1）。标量参数逐个生成元精确检查，
    PSD 参数块先用 Choi 矩阵下界再局部搜索 vvᵀ 见证，带耦合约束的参数用交替 SDP 搜索。
    最小值 ≥ −tol 则判定 Member，否则返回违反的 θ。
    """
    settings = settings or SolverSettings.from_env()
    Phi = c.outer_factor(delta_tilde)
    n = c.lower
    Fgen = _mapped_generator(c, Phi)
    coupled = _coupled_columns(c)
    worst = math.inf
    details: Dict[str, float] = {}

    def witness(block_start: int, block_coords: np.ndarray, margin: float, name: str) -> NotMemberWitness:
        theta = np.zeros(c.n_params)
        theta[block_start:block_start + block_coords.size] = block_coords
        details[name] = margin
        return NotMemberWitness(theta, margin, details)

    has_coupled = False
    certified = True
    for block, (start, size) in zip(c.blocks, c.offsets):
        if set(range(start, start + size)) & coupled or block.kind is ParamKind.SYMMETRIC:
            has_coupled = True
            continue
        if block.kind is ParamKind.SCALAR:
            lam, _ = _min_eig(Fgen[:, start], n)
            details[block.name] = lam
            worst = min(worst, lam)
            if lam < -tol:
                return witness(start, np.ones(1), lam, block.name)
        else:
            lam, coords, bound = _psd_block_search(Fgen[:, start:start + size], block.size, n, tol)
            details[block.name] = lam
            if coords is None and bound < -tol:
                details[f"{block.name}.choi_bound"] = bound
                certified = False
            worst = min(worst, lam)
            if coords is not None:
                return witness(start, coords, lam, block.name)

    if has_coupled:
        lam, theta = _coupled_search(c, Fgen, n, tol, settings, np.random.default_rng(seed))
        details["coupled"] = lam
        worst = min(worst, lam)
        if theta is not None:
            return NotMemberWitness(theta, lam, details)
        certified = False

    margin = 0.0 if worst == math.inf else worst
    log("验证", f"{c.label}: member, margin={margin:.3e}" + ("" if certified else " (未证实)"), settings.verbose)
    return Member(margin, details, certified)


def sample_feasible(c: MultiplierClass, rng: np.random.Generator, count: int = 1,
                    settings: Optional[SolverSettings] = None) -> List[np.ndarray]:
    """
    用随机线性目标在归一化可行集上求解，得到 count 个可行 θ（位于可行集边界上）。
    """
    settings = settings or SolverSettings.from_env()
    if c.n_params == 0:
        return [np.zeros(0) for _ in range(count)]
    samples: List[np.ndarray] = []
    for k in range(count):
        prob = ConicProblem(f"sample[{c.label}]#{k}")
        _, variables = _normalized_parameters(c, prob)
        direction = rng.standard_normal(c.n_params)
        objective = AffineExpr(np.zeros((1, 1)),
                               {var: sparse.csr_matrix(direction[start:start + size].reshape(1, -1))
                                for var, (start, size) in zip(variables, c.offsets)})
        prob.minimize(objective)
        sol = prob.solve(settings)
        if sol.ok:
            samples.append(np.concatenate([np.asarray(sol.coordinates[v]).ravel() for v in variables]))
    return samples
