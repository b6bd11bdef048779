"""
LFT 模型模块 (LFT Plant Model)

功能：描述带结构不确定性的离散时间 LTI 系统

    x₊ = A x + B u + B_d d + B_w w (+ B_w′ w′)
    e  = C_e x + D_eu u + D_ed d
    z  = C_z x + D_z u (+ D_zw′ w′)
    z′ = C_z′ x + D_z′ u,     w = Δ z,   w′ = Δ′(x) z′

并提供数据矩阵组装、扩展状态输出反馈构造、ZOH 离散化。

核心功能：
- LftPlant: 已知矩阵（含可选非线性通道）
- UncertaintyStructure / BlockSpec: Δ 的分块结构与选择矩阵 L_j、R_j
- validate_plant: 维数与秩检查，返回带缓存选择矩阵的 ValidatedPlant
- Trajectory / DataMatrices / assemble_data_matrices: M = X₊ − AX − BU，Z = C_zX + D_zU
- PerformanceIndex: 二次性能指标及其对偶 P̃_p
- build_extended_state_plant / extended_state_trajectory / simulate_arx / partition_gain
- discretize_zoh: 精确零阶保持离散化
"""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .config import DEFAULT_RANK_TOL
from .errors import DimensionMismatchError, RankDeficientError


def _mat(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    return arr


def numerical_rank(M: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """奇异值相对阈值下的数值秩（阈值 = rank_tol × 最大奇异值）"""
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


# ---------------------------------------------------------------------------
# 不确定性结构
# ---------------------------------------------------------------------------

class BlockKind(Enum):
    """不确定性块类型"""
    FULL = "full"
    REPEATED = "repeated"


@dataclass(frozen=True)
class BlockSpec:
    """
    单个不确定性块 Δ_j（n_w,j × n_z,j）

    默认按顺序占用 w、z 的连续分量；也可显式给出 w_index / z_index。
    """
    kind: BlockKind
    nw: int
    nz: int
    w_index: Optional[Tuple[int, ...]] = None
    z_index: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.nw < 0 or self.nz < 0:
            raise DimensionMismatchError("块尺寸不能为负")
        if self.kind is BlockKind.REPEATED and self.nw != self.nz:
            raise DimensionMismatchError(f"重复标量块要求 n_w,j = n_z,j，得到 {self.nw}≠{self.nz}")

    @classmethod
    def full(cls, nw: int, nz: int) -> "BlockSpec":
        return cls(BlockKind.FULL, nw, nz)

    @classmethod
    def repeated(cls, n: int) -> "BlockSpec":
        return cls(BlockKind.REPEATED, n, n)


def _selector(index: Sequence[int], total: int) -> np.ndarray:
    S = np.zeros((total, len(index)))
    for col, row in enumerate(index):
        if not 0 <= row < total:
            raise DimensionMismatchError(f"选择索引 {row} 超出范围 [0, {total})")
        S[row, col] = 1.0
    return S


@dataclass(frozen=True)
class UncertaintyStructure:
    """Δ = Σ_j R_j Δ_j L_jᵀ 的分块结构"""
    blocks: Tuple[BlockSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def n_w(self) -> int:
        return sum(b.nw for b in self.blocks)

    @property
    def n_z(self) -> int:
        return sum(b.nz for b in self.blocks)

    def _indices(self) -> Tuple[List[Tuple[int, ...]], List[Tuple[int, ...]]]:
        w_idx, z_idx = [], []
        w_off = z_off = 0
        for b in self.blocks:
            w_idx.append(b.w_index if b.w_index is not None else tuple(range(w_off, w_off + b.nw)))
            z_idx.append(b.z_index if b.z_index is not None else tuple(range(z_off, z_off + b.nz)))
            w_off += b.nw
            z_off += b.nz
        return w_idx, z_idx

    def L(self, j: int) -> np.ndarray:
        """z 侧选择矩阵 L_j（n_z × n_z,j）"""
        return _selector(self._indices()[1][j], self.n_z)

    def R(self, j: int) -> np.ndarray:
        """w 侧选择矩阵 R_j（n_w × n_w,j）"""
        return _selector(self._indices()[0][j], self.n_w)

    def check(self) -> None:
        """检查 L_kᵀL_j = 0、R_kᵀR_j = 0（k ≠ j）以及索引个数"""
        w_idx, z_idx = self._indices()
        for j, b in enumerate(self.blocks):
            if len(w_idx[j]) != b.nw or len(z_idx[j]) != b.nz:
                raise DimensionMismatchError(f"块 {j} 的显式索引个数与尺寸不符")
        for name, groups in (("R", w_idx), ("L", z_idx)):
            seen: Dict[int, int] = {}
            for j, idx in enumerate(groups):
                for i in idx:
                    if i in seen:
                        raise DimensionMismatchError(
                            f"选择矩阵 {name}_{seen[i]} 与 {name}_{j} 重叠（分量 {i}），违反正交性")
                    seen[i] = j

    def compose(self, parts: Sequence[Union[float, np.ndarray]]) -> np.ndarray:
        """由各块取值拼出 Δ；重复标量块接受标量 δ"""
        if len(parts) != len(self.blocks):
            raise DimensionMismatchError(f"需要 {len(self.blocks)} 个块，得到 {len(parts)}")
        delta = np.zeros((self.n_w, self.n_z))
        for j, (b, part) in enumerate(zip(self.blocks, parts)):
            if b.kind is BlockKind.REPEATED:
                block = float(np.asarray(part).ravel()[0]) * np.eye(b.nw) if np.size(part) == 1 else _mat(part)
            else:
                block = _mat(part)
            if block.shape != (b.nw, b.nz):
                raise DimensionMismatchError(f"块 {j} 形状应为 {(b.nw, b.nz)}，得到 {block.shape}")
            delta += self.R(j) @ block @ self.L(j).T
        return delta

    def split(self, delta: np.ndarray) -> List[np.ndarray]:
        """Δ → [Δ_j]，Δ_j = R_jᵀ Δ L_j"""
        return [self.R(j).T @ delta @ self.L(j) for j in range(len(self.blocks))]

    def to_dict(self) -> List[dict]:
        return [{"kind": b.kind.value, "nw": b.nw, "nz": b.nz} for b in self.blocks]


# ---------------------------------------------------------------------------
# 系统
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LftPlant:
    """
    已知系统矩阵

    不确定性通道或扰动通道可以是零维（例如精确模型场景 n_w = n_z = 0）。
    非线性通道 (B_w′, D_zw′, C_z′, D_z′) 可选，缺省时视为零维。
    """
    A: np.ndarray
    B: np.ndarray
    B_d: np.ndarray
    B_w: np.ndarray
    C_e: np.ndarray
    D_eu: np.ndarray
    D_ed: np.ndarray
    C_z: np.ndarray
    D_z: np.ndarray
    B_wp: Optional[np.ndarray] = None
    D_zwp: Optional[np.ndarray] = None
    C_zp: Optional[np.ndarray] = None
    D_zp: Optional[np.ndarray] = None
    name: str = "plant"

    def __post_init__(self):
        for attr in ("A", "B", "B_d", "B_w", "C_e", "D_eu", "D_ed", "C_z", "D_z"):
            object.__setattr__(self, attr, _mat(getattr(self, attr)))
        n, m = self.A.shape[0], self.B.shape[1]
        if self.B_wp is not None or self.C_zp is not None:
            B_wp = _mat(self.B_wp) if self.B_wp is not None else np.zeros((n, 0))
            C_zp = _mat(self.C_zp) if self.C_zp is not None else np.zeros((0, n))
            n_wp, n_zp = B_wp.shape[1], C_zp.shape[0]
            D_zwp = _mat(self.D_zwp) if self.D_zwp is not None else np.zeros((self.C_z.shape[0], n_wp))
            D_zp = _mat(self.D_zp) if self.D_zp is not None else np.zeros((n_zp, m))
            object.__setattr__(self, "B_wp", B_wp)
            object.__setattr__(self, "C_zp", C_zp)
            object.__setattr__(self, "D_zwp", D_zwp)
            object.__setattr__(self, "D_zp", D_zp)

    # --- 维数 ---
    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def n_d(self) -> int:
        return self.B_d.shape[1]

    @property
    def n_w(self) -> int:
        return self.B_w.shape[1]

    @property
    def n_z(self) -> int:
        return self.C_z.shape[0]

    @property
    def n_e(self) -> int:
        return self.C_e.shape[0]

    @property
    def has_nonlinear(self) -> bool:
        return self.B_wp is not None

    @property
    def n_wp(self) -> int:
        return self.B_wp.shape[1] if self.has_nonlinear else 0

    @property
    def n_zp(self) -> int:
        return self.C_zp.shape[0] if self.has_nonlinear else 0

    def check_dimensions(self) -> None:
        """检查各矩阵维数是否相容"""
        n, m, n_d, n_w, n_z, n_e = self.n, self.m, self.n_d, self.n_w, self.n_z, self.n_e
        expected = {
            "A": (n, n), "B": (n, m), "B_d": (n, n_d), "B_w": (n, n_w),
            "C_e": (n_e, n), "D_eu": (n_e, m), "D_ed": (n_e, n_d),
            "C_z": (n_z, n), "D_z": (n_z, m),
        }
        if self.has_nonlinear:
            expected.update({
                "B_wp": (n, self.n_wp), "D_zwp": (n_z, self.n_wp),
                "C_zp": (self.n_zp, n), "D_zp": (self.n_zp, m),
            })
        for attr, shape in expected.items():
            actual = getattr(self, attr).shape
            if actual != shape:
                raise DimensionMismatchError(f"{self.name}.{attr} 形状应为 {shape}，得到 {actual}")

    def with_changes(self, **changes) -> "LftPlant":
        return replace(self, **changes)

    def close_uncertainty(self, delta: np.ndarray, name: Optional[str] = None) -> "LftPlant":
        """
        把已知 Δ 代入 A、B（精确模型场景），不确定性通道变为零维。
        """
        delta = _mat(delta)
        if delta.shape != (self.n_w, self.n_z):
            raise DimensionMismatchError(f"Δ 形状应为 {(self.n_w, self.n_z)}，得到 {delta.shape}")
        gain = self.B_w @ delta
        changes = dict(
            A=self.A + gain @ self.C_z,
            B=self.B + gain @ self.D_z,
            B_w=np.zeros((self.n, 0)),
            C_z=np.zeros((0, self.n)),
            D_z=np.zeros((0, self.m)),
            name=name or f"{self.name}[Δ fixed]",
        )
        if self.has_nonlinear:
            changes["B_wp"] = self.B_wp + gain @ self.D_zwp
            changes["D_zwp"] = np.zeros((0, self.n_wp))
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {"name": self.name}
        for attr in ("A", "B", "B_d", "B_w", "C_e", "D_eu", "D_ed", "C_z", "D_z"):
            out[attr] = getattr(self, attr).tolist()
        if self.has_nonlinear:
            for attr in ("B_wp", "D_zwp", "C_zp", "D_zp"):
                out[attr] = getattr(self, attr).tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


@dataclass(frozen=True, eq=False)
class ValidatedPlant:
    """通过检查的系统，缓存选择矩阵 L_j、R_j 与 B_j = B_w R_j"""
    plant: LftPlant
    structure: UncertaintyStructure
    L: Tuple[np.ndarray, ...]
    R: Tuple[np.ndarray, ...]
    B_blocks: Tuple[np.ndarray, ...]


def validate_plant(plant: LftPlant, structure: UncertaintyStructure,
                   tol: float = DEFAULT_RANK_TOL) -> ValidatedPlant:
    """
    检查维数、选择矩阵正交性、B_d 与各 B_j 的列满秩。

    Raises:
        DimensionMismatchError: 维数不相容或选择矩阵重叠
        RankDeficientError: B_d 或某个 B_j 列秩不足
    """
    plant.check_dimensions()
    if structure.n_w != plant.n_w or structure.n_z != plant.n_z:
        raise DimensionMismatchError(
            f"不确定性结构 ({structure.n_w}×{structure.n_z}) 与系统通道 ({plant.n_w}×{plant.n_z}) 不符")
    structure.check()

    rank = numerical_rank(plant.B_d, tol)
    if rank < plant.n_d:
        raise RankDeficientError("B_d", rank, plant.n_d)

    L = tuple(structure.L(j) for j in range(len(structure.blocks)))
    R = tuple(structure.R(j) for j in range(len(structure.blocks)))
    B_blocks = tuple(plant.B_w @ Rj for Rj in R)
    for j, Bj in enumerate(B_blocks):
        rank = numerical_rank(Bj, tol)
        if rank < Bj.shape[1]:
            raise RankDeficientError(f"B_{j + 1}", rank, Bj.shape[1])
    return ValidatedPlant(plant, structure, L, R, B_blocks)


# ---------------------------------------------------------------------------
# 数据
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    一段输入-状态轨迹：X 为 n×(N+1)，U 为 m×N。

    W_nl 为非线性通道 w′ 的记录（n_w′×N），D 为生成时记录下的扰动（仅用于验证）。
    """
    X: np.ndarray
    U: np.ndarray
    W_nl: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    seed: Optional[int] = None
    description: str = ""

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        U = np.asarray(self.U, dtype=float)
        U = U.reshape(-1, X.shape[1] - 1) if U.ndim < 2 else U
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        if X.shape[1] != U.shape[1] + 1:
            raise DimensionMismatchError(f"X 应比 U 多一列，得到 {X.shape[1]} 与 {U.shape[1]}")
        if self.W_nl is not None:
            W = np.atleast_2d(np.asarray(self.W_nl, dtype=float))
            if W.shape[1] != U.shape[1]:
                raise DimensionMismatchError("W′ 列数应与 U 相同")
            object.__setattr__(self, "W_nl", W)
        if self.D is not None:
            object.__setattr__(self, "D", np.atleast_2d(np.asarray(self.D, dtype=float)))

    @property
    def N(self) -> int:
        return self.U.shape[1]

    @property
    def X_minus(self) -> np.ndarray:
        return self.X[:, :-1]

    @property
    def X_plus(self) -> np.ndarray:
        return self.X[:, 1:]

    def head(self, N: int) -> "Trajectory":
        """截取前 N 个样本"""
        return Trajectory(
            X=self.X[:, :N + 1], U=self.U[:, :N],
            W_nl=None if self.W_nl is None else self.W_nl[:, :N],
            D=None if self.D is None else self.D[:, :N],
            seed=self.seed, description=f"{self.description}[:{N}]",
        )


@dataclass(frozen=True, eq=False)
class DataMatrices:
    """M（n×N）与 Z（n_z×N），以及来源信息"""
    M: np.ndarray
    Z: np.ndarray
    plant_id: str = ""
    trajectory_id: str = ""

    @property
    def N(self) -> int:
        return self.M.shape[1]


def assemble_data_matrices(plant: LftPlant,
                           traj: Union[Trajectory, Sequence[Trajectory]]) -> DataMatrices:
    """
    M = X₊ − AX − BU (− B_w′W′)，Z = C_zX + D_zU (+ D_zw′W′)。

    多段轨迹逐段计算后按列拼接（每段各自的 X、X₊、U 三元组）。
    """
    pieces = [traj] if isinstance(traj, Trajectory) else list(traj)
    if not pieces:
        raise DimensionMismatchError("至少需要一段轨迹")
    Ms, Zs = [], []
    for piece in pieces:
        if piece.X.shape[0] != plant.n or piece.U.shape[0] != plant.m:
            raise DimensionMismatchError(
                f"轨迹维数 (n={piece.X.shape[0]}, m={piece.U.shape[0]}) 与系统 (n={plant.n}, m={plant.m}) 不符")
        X, Xp, U = piece.X_minus, piece.X_plus, piece.U
        M = Xp - plant.A @ X - plant.B @ U
        Z = plant.C_z @ X + plant.D_z @ U
        if plant.has_nonlinear and plant.n_wp > 0:
            if piece.W_nl is None or piece.W_nl.shape[0] != plant.n_wp:
                raise DimensionMismatchError("系统含非线性通道，轨迹需要提供 n_w′ 行的 W′")
            M = M - plant.B_wp @ piece.W_nl
            Z = Z + plant.D_zwp @ piece.W_nl
        Ms.append(M)
        Zs.append(Z)
    trajectory_id = "+".join(p.description or "traj" for p in pieces)
    return DataMatrices(np.hstack(Ms), np.hstack(Zs), plant.name, trajectory_id)


# ---------------------------------------------------------------------------
# 性能指标
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerformanceIndex:
    """
    二次性能指标 P_p = [Q_p, S_p; S_pᵀ, R_p]（作用在 [d; e] 上）

    缓存 P_p⁻¹ = [Q̃_p, S̃_p; S̃_pᵀ, R̃_p] 以及对偶指标 P̃_p = [−R̃_p, S̃_pᵀ; S̃_p, −Q̃_p]。
    """
    Q_p: np.ndarray
    S_p: np.ndarray
    R_p: np.ndarray
    label: str = "custom"
    Q_tilde: np.ndarray = field(init=False)
    S_tilde: np.ndarray = field(init=False)
    R_tilde: np.ndarray = field(init=False)

    def __post_init__(self):
        Q, S, R = _mat(self.Q_p), _mat(self.S_p), _mat(self.R_p)
        n_d, n_e = Q.shape[0], R.shape[0]
        if S.size == 0:
            S = np.zeros((n_d, n_e))
        if S.shape != (n_d, n_e):
            raise DimensionMismatchError(f"S_p 形状应为 {(n_d, n_e)}，得到 {S.shape}")
        P = np.block([[Q, S], [S.T, R]])
        if np.linalg.matrix_rank(P) < P.shape[0]:
            raise RankDeficientError("P_p", int(np.linalg.matrix_rank(P)), P.shape[0])
        Pinv = np.linalg.inv(P)
        Pinv = 0.5 * (Pinv + Pinv.T)
        object.__setattr__(self, "Q_p", Q)
        object.__setattr__(self, "S_p", S)
        object.__setattr__(self, "R_p", R)
        object.__setattr__(self, "Q_tilde", Pinv[:n_d, :n_d])
        object.__setattr__(self, "S_tilde", Pinv[:n_d, n_d:])
        object.__setattr__(self, "R_tilde", Pinv[n_d:, n_d:])
        if np.max(np.linalg.eigvalsh(self.Q_tilde)) > 1e-10:
            raise ValueError("要求 Q̃_p ⪯ 0，当前指标不满足")

    @property
    def n_d(self) -> int:
        return self.Q_p.shape[0]

    @property
    def n_e(self) -> int:
        return self.R_p.shape[0]

    @property
    def P_tilde(self) -> np.ndarray:
        """对偶指标 P̃_p，作用在 [e; d] 上"""
        return np.block([[-self.R_tilde, self.S_tilde.T], [self.S_tilde, -self.Q_tilde]])

    @classmethod
    def hinf(cls, gamma: float, n_d: int, n_e: int) -> "PerformanceIndex":
        """ℓ2 增益界 γ：Q_p = −γ²I, S_p = 0, R_p = I"""
        return cls(-gamma ** 2 * np.eye(n_d), np.zeros((n_d, n_e)), np.eye(n_e), label=f"hinf({gamma:g})")

    @classmethod
    def passivity(cls, n: int) -> "PerformanceIndex":
        """严格无源：Q_p = 0, S_p = −I, R_p = 0"""
        return cls(np.zeros((n, n)), -np.eye(n), np.zeros((n, n)), label="passivity")

    def to_dict(self) -> dict:
        return {"label": self.label, "Q_p": self.Q_p.tolist(), "S_p": self.S_p.tolist(), "R_p": self.R_p.tolist()}


# ---------------------------------------------------------------------------
# 扩展状态（输出反馈）
# ---------------------------------------------------------------------------

def build_extended_state_plant(n: int, m: int, p: int, B_d0: np.ndarray,
                               name: str = "extended") -> Tuple[LftPlant, UncertaintyStructure]:
    """
    ARX 系统 y_k = Σ A_i y_{k−i} + Σ_{i≥0} B_i u_{k−i} + B_d⁰ d_k 的扩展状态 LFT。

    ξ_k = (u_{k−n}, …, u_{k−1}, y_{k−n}, …, y_{k−1})，z_k = [ξ_k; u_k]，
    Δ_tr = [B_n … B_1 A_n … A_1 B_0]（p × (n(m+p)+m) 的单个满块）。
    """
    if n < 1 or m < 1 or p < 1:
        raise DimensionMismatchError("需要 n ≥ 1, m ≥ 1, p ≥ 1")
    B_d0 = _mat(B_d0)
    if B_d0.shape[0] != p:
        raise DimensionMismatchError(f"B_d⁰ 应有 {p} 行，得到 {B_d0.shape[0]}")
    nu, ny = n * m, n * p
    nx = nu + ny
    n_d = B_d0.shape[1]

    A = np.zeros((nx, nx))
    # u 移位：u 块 i ← u 块 i+1
    for i in range(n - 1):
        A[i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = np.eye(m)
    # y 移位，最后一个 y 块由不确定性给出
    for i in range(n - 1):
        A[nu + i * p:nu + (i + 1) * p, nu + (i + 1) * p:nu + (i + 2) * p] = np.eye(p)

    B = np.zeros((nx, m))
    B[nu - m:nu, :] = np.eye(m)
    B_w = np.zeros((nx, p))
    B_w[nx - p:, :] = np.eye(p)
    B_d = np.zeros((nx, n_d))
    B_d[nx - p:, :] = B_d0

    C_z = np.vstack([np.eye(nx), np.zeros((m, nx))])
    D_z = np.vstack([np.zeros((nx, m)), np.eye(m)])
    plant = LftPlant(
        A=A, B=B, B_d=B_d, B_w=B_w,
        C_e=np.zeros((0, nx)), D_eu=np.zeros((0, m)), D_ed=np.zeros((0, n_d)),
        C_z=C_z, D_z=D_z, name=name,
    )
    return plant, UncertaintyStructure((BlockSpec.full(p, nx + m),))


def arx_uncertainty(A_coeffs: Sequence[np.ndarray], B_coeffs: Sequence[np.ndarray]) -> np.ndarray:
    """[B_n … B_1 A_n … A_1 B_0]；A_coeffs = [A_1..A_n]，B_coeffs = [B_0..B_n]"""
    n = len(A_coeffs)
    if len(B_coeffs) != n + 1:
        raise DimensionMismatchError("B 系数需要 n+1 个（B_0..B_n）")
    parts = [_mat(B_coeffs[i]) for i in range(n, 0, -1)]
    parts += [_mat(A_coeffs[i - 1]) for i in range(n, 0, -1)]
    parts.append(_mat(B_coeffs[0]))
    return np.hstack(parts)


def simulate_arx(A_coeffs: Sequence[np.ndarray], B_coeffs: Sequence[np.ndarray],
                 u: np.ndarray, d: np.ndarray, B_d0: np.ndarray) -> np.ndarray:
    """按 ARX 递推仿真，初值为零；u 为 m×T，d 为 n_d×T，返回 p×T"""
    n = len(A_coeffs)
    u, d, B_d0 = _mat(u), _mat(d), _mat(B_d0)
    if u.shape[0] != _mat(B_coeffs[0]).shape[1]:
        u = u.T
    p, T = B_d0.shape[0], u.shape[1]
    y = np.zeros((p, T))
    for k in range(T):
        yk = _mat(B_coeffs[0]) @ u[:, k] + B_d0 @ d[:, k]
        for i in range(1, n + 1):
            if k - i >= 0:
                yk = yk + _mat(A_coeffs[i - 1]) @ y[:, k - i] + _mat(B_coeffs[i]) @ u[:, k - i]
        y[:, k] = yk
    return y


def extended_state_trajectory(u: np.ndarray, y: np.ndarray, n: int, description: str = "io") -> Trajectory:
    """
    输入输出记录 → 扩展状态轨迹。

    u 为 m×T，y 为 p×T；得到 ξ_n … ξ_T（N = T − n 个样本）。
    """
    u, y = _mat(u), _mat(y)
    m, T = u.shape
    p = y.shape[0]
    if y.shape[1] != T:
        raise DimensionMismatchError("u 与 y 的样本数不一致")
    if T <= n:
        raise DimensionMismatchError(f"样本数 {T} 不足以构造阶数 {n} 的扩展状态")
    cols = []
    for k in range(n, T + 1):
        u_part = u[:, k - n:k].flatten(order="F")
        y_part = y[:, k - n:k].flatten(order="F")
        cols.append(np.concatenate([u_part, y_part]))
    X = np.column_stack(cols)
    U = u[:, n:T]
    return Trajectory(X=X, U=U, description=description)


def partition_gain(K: np.ndarray, n: int, m: int, p: int) -> Dict[str, List[np.ndarray]]:
    """
    K = [K_nᵘ … K_1ᵘ K_nʸ … K_1ʸ] → {"Ku": [K_1ᵘ..K_nᵘ], "Ky": [K_1ʸ..K_nʸ]}
    """
    K = _mat(K)
    if K.shape != (m, n * (m + p)):
        raise DimensionMismatchError(f"K 形状应为 {(m, n * (m + p))}，得到 {K.shape}")
    Ku = [K[:, (n - i) * m:(n - i + 1) * m] for i in range(1, n + 1)]
    Ky = [K[:, n * m + (n - i) * p:n * m + (n - i + 1) * p] for i in range(1, n + 1)]
    return {"Ku": Ku, "Ky": Ky}


# ---------------------------------------------------------------------------
# 离散化
# ---------------------------------------------------------------------------

def zoh_matrices(A_c: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (exp(A_c h), ∫₀ʰ exp(A_c τ) dτ)，由增广矩阵指数一次求出"""
    if h <= 0:
        raise ValueError(f"采样时间必须为正，得到 {h}")
    A_c = _mat(A_c)
    n = A_c.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A_c
    aug[:n, n:] = np.eye(n)
    E = linalg.expm(aug * h)
    return E[:n, :n], E[:n, n:]


def discretize_zoh(A_c: np.ndarray, B_c: np.ndarray, B_wc: np.ndarray, B_dc: np.ndarray,
                   C_z: np.ndarray, D_z: np.ndarray, h: float) -> Dict[str, np.ndarray]:
    """
    连续 LFT 的 ZOH 离散化：Ā = exp(A_c h)，每个输入矩阵左乘 ∫₀ʰ exp(A_c τ)dτ，
    输出通道矩阵不变（不确定性通道 w 同样按零阶保持处理）。
    """
    A_bar, integral = zoh_matrices(A_c, h)
    return {
        "A": A_bar,
        "B": integral @ _mat(B_c),
        "B_w": integral @ _mat(B_wc),
        "B_d": integral @ _mat(B_dc),
        "C_z": _mat(C_z),
        "D_z": _mat(D_z),
    }
