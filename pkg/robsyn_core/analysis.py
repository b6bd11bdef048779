"""
闭环分析模块 (Closed-Loop Analysis)

功能：独立于综合路径的模型验证：闭环构造、谱半径、H2 / H∞ 范数、
在组合不确定性集合上的采样验证，以及带先验界的最小二乘辨识基线。

核心功能：
- ClosedLoop: A + BK + B_wΔ(C_z + D_zK) 等闭环矩阵
- spectral_radius / h2_norm / hinf_norm / hinf_grid_peak
- verify_robust: 采样候选 Δ，经成员判定过滤后检查稳定性与性能界
- ls_identify: 结构化最小二乘估计 Δ（满足先验界）
"""

import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import linalg, sparse

from .config import SolverSettings, log
from .conic_backend import SolveStatus
from .errors import DimensionMismatchError, InfeasibleError, NumericalFailureError, UnstableSystemError
from .lft_model import BlockKind, DataMatrices, LftPlant, UncertaintyStructure
from .lmi_compiler import AffineExpr, ConicProblem, bmat
from .multiplier_engine import Member, MultiplierClass, certify_membership

GRAMIAN_RESIDUAL_TOL = 1e-10
FREQUENCY_GRID = 512


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """x₊ = A x + B d, e = C x + D d（对某个具体 Δ）"""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @classmethod
    def from_plant(cls, plant: LftPlant, K: np.ndarray, delta: Optional[np.ndarray] = None,
                   delta_tilde: Optional[np.ndarray] = None) -> "ClosedLoop":
        """
        A_cl = A + BK + Δ̃(C_z + D_zK)，Δ̃ = B_wΔ；缺省 Δ = 0。非线性通道按 Δ′ = 0 处理。
        """
        K = np.atleast_2d(np.asarray(K, dtype=float))
        if K.shape != (plant.m, plant.n):
            raise DimensionMismatchError(f"K 形状应为 {(plant.m, plant.n)}，得到 {K.shape}")
        A = plant.A + plant.B @ K
        if delta_tilde is None and delta is not None:
            delta_tilde = plant.B_w @ np.atleast_2d(np.asarray(delta, dtype=float))
        if delta_tilde is not None and plant.n_z > 0:
            A = A + np.atleast_2d(delta_tilde) @ (plant.C_z + plant.D_z @ K)
        return cls(A, plant.B_d, plant.C_e + plant.D_eu @ K, plant.D_ed)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def spectral_radius(A: np.ndarray) -> float:
    """最大特征值模"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"谱半径需要方阵，得到 {A.shape}")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _require_stable(cl: ClosedLoop) -> None:
    rho = spectral_radius(cl.A)
    if rho >= 1.0:
        raise UnstableSystemError(f"闭环不稳定，谱半径 {rho:.6g} ≥ 1")


def controllability_gramian(cl: ClosedLoop) -> np.ndarray:
    """P = A P Aᵀ + B Bᵀ"""
    _require_stable(cl)
    Q = cl.B @ cl.B.T
    method = "direct" if cl.n <= 30 else "bilinear"
    P = linalg.solve_discrete_lyapunov(cl.A, Q, method=method)
    P = 0.5 * (P + P.T)
    residual = float(np.max(np.abs(cl.A @ P @ cl.A.T + Q - P))) if P.size else 0.0
    if residual > GRAMIAN_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(P))) if P.size else 1.0):
        raise NumericalFailureError(f"Gramian 残差 {residual:.3e} 过大")
    return P


def h2_norm(cl: ClosedLoop) -> float:
    """√tr(C P Cᵀ + D Dᵀ)，P 为能控 Gramian"""
    P = controllability_gramian(cl)
    value = float(np.trace(cl.C @ P @ cl.C.T) + np.trace(cl.D @ cl.D.T))
    return math.sqrt(max(value, 0.0))


def hinf_grid_peak(cl: ClosedLoop, points: int = FREQUENCY_GRID) -> float:
    """频率网格 ω ∈ [0, π] 上 σ_max(G(e^{iω})) 的最大值（H∞ 范数的下界）"""
    if cl.B.shape[1] == 0 or cl.C.shape[0] == 0:
        return 0.0
    eye = np.eye(cl.n)
    peak = 0.0
    for omega in np.linspace(0.0, math.pi, points):
        z = complex(math.cos(omega), math.sin(omega))
        G = cl.C @ np.linalg.solve(z * eye - cl.A, cl.B) + cl.D
        peak = max(peak, float(np.linalg.norm(G, 2)))
    return peak


def _bounded_real_feasible(cl: ClosedLoop, gamma: float, settings: SolverSettings) -> bool:
    """离散有界实引理：∃P ≻ 0，[AᵀPA − P + CᵀC, AᵀPB + CᵀD; *, BᵀPB + DᵀD − γ²I] ≺ 0"""
    n, n_d = cl.n, cl.B.shape[1]
    prob = ConicProblem(f"brl[{gamma:.6g}]")
    P = prob.symmetric("P", n)
    prob.add_lmi(P, strict=True, name="P>0")
    AB = np.hstack([cl.A, cl.B])
    CD = np.hstack([cl.C, cl.D])
    lyap = P.expr.congruence(AB) - bmat([[P, np.zeros((n, n_d))], [np.zeros((n_d, n)), np.zeros((n_d, n_d))]])
    constant = CD.T @ CD - gamma ** 2 * np.diag(np.concatenate([np.zeros(n), np.ones(n_d)]))
    prob.add_lmi(-(lyap + constant), strict=True, name="bounded_real")
    sol = prob.solve(settings)
    if sol.status is SolveStatus.NUMERICAL_FAILURE:
        log("验证", f"BRL γ={gamma:.6g}: {sol.message}", settings.verbose)
    return sol.ok


def hinf_norm(cl: ClosedLoop, tol: float = 1e-4, settings: Optional[SolverSettings] = None) -> float:
    """
    H∞ 范数：频率网格下界 + 有界实引理可行性二分，返回上界（相对间隙 ≤ tol）。

    Raises:
        UnstableSystemError: 闭环不稳定
    """
    settings = settings or SolverSettings.from_env()
    _require_stable(cl)
    if cl.B.shape[1] == 0 or cl.C.shape[0] == 0 or not (np.any(cl.B) and np.any(cl.C)):
        return float(np.linalg.norm(cl.D, 2)) if cl.D.size else 0.0

    lower = hinf_grid_peak(cl)
    if lower == 0.0:
        return 0.0
    upper = 10.0 * lower
    expansions = 0
    while not _bounded_real_feasible(cl, upper, settings):
        lower, upper = upper, 10.0 * upper
        expansions += 1
        if expansions > 8:
            raise NumericalFailureError(f"H∞ 二分无法找到可行上界（已到 {upper:.3e}）")
    while upper - lower > tol * upper:
        mid = 0.5 * (lower + upper)
        if _bounded_real_feasible(cl, mid, settings):
            upper = mid
        else:
            lower = mid
    log("验证", f"H∞ ∈ [{lower:.6g}, {upper:.6g}]", settings.verbose)
    return upper


# ---------------------------------------------------------------------------
# 采样验证
# ---------------------------------------------------------------------------

@dataclass
class CandidateRecord:
    """一个候选 Δ 的验证记录"""
    source: str
    retained: bool
    spectral_radius: Optional[float] = None
    norm: Optional[float] = None
    ok: Optional[bool] = None


@dataclass
class RobustnessReport:
    """采样验证报告"""
    gamma_claim: Optional[float]
    norm_kind: str
    records: List[CandidateRecord] = field(default_factory=list)

    @property
    def retained(self) -> List[CandidateRecord]:
        return [r for r in self.records if r.retained]

    @property
    def violations(self) -> List[CandidateRecord]:
        return [r for r in self.retained if r.ok is False]

    @property
    def worst_spectral_radius(self) -> float:
        values = [r.spectral_radius for r in self.retained if r.spectral_radius is not None]
        return max(values) if values else 0.0

    @property
    def worst_norm(self) -> Optional[float]:
        values = [r.norm for r in self.retained if r.norm is not None and math.isfinite(r.norm)]
        return max(values) if values else None

    def count(self, source: str) -> int:
        return sum(1 for r in self.retained if r.source == source)

    def to_dict(self) -> dict:
        return {
            "gamma_claim": self.gamma_claim,
            "norm": self.norm_kind,
            "candidates": len(self.records),
            "retained": len(self.retained),
            "violations": len(self.violations),
            "worst_spectral_radius": self.worst_spectral_radius,
            "worst_norm": self.worst_norm,
            "retained_by_source": {s: self.count(s) for s in sorted({r.source for r in self.records})},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


def sample_prior_delta(structure: UncertaintyStructure, bounds: Sequence[float],
                       rng: np.random.Generator) -> np.ndarray:
    """
    在先验集合内随机取 Δ：满块满足 Δ_jΔ_jᵀ ⪯ bound_j·I，重复标量块满足 δ² ≤ bound_j。
    """
    if len(bounds) != len(structure.blocks):
        raise DimensionMismatchError(f"需要 {len(structure.blocks)} 个先验界，得到 {len(bounds)}")
    parts = []
    for spec, bound in zip(structure.blocks, bounds):
        radius = math.sqrt(max(bound, 0.0))
        if spec.kind is BlockKind.REPEATED:
            parts.append(radius * rng.uniform(-1.0, 1.0))
            continue
        G = rng.standard_normal((spec.nw, spec.nz))
        norm = np.linalg.norm(G, 2)
        parts.append(radius * rng.uniform() * G / norm if norm > 0 else G)
    return structure.compose(parts)


def _structured_regression(structure: UncertaintyStructure, B_w: np.ndarray, Z: np.ndarray) -> List[np.ndarray]:
    """每个块的回归矩阵 Φ_j：vec(B_jΔ_jL_jᵀZ) = Φ_j θ_j"""
    B_w = np.atleast_2d(B_w)
    columns = []
    for j, spec in enumerate(structure.blocks):
        Bj = B_w @ structure.R(j)
        LZ = structure.L(j).T @ Z
        if spec.kind is BlockKind.REPEATED:
            columns.append((Bj @ LZ).flatten(order="F").reshape(-1, 1))
        else:
            columns.append(np.kron(LZ.T, Bj))
    return columns


def _compose_from_params(structure: UncertaintyStructure, params: Sequence[np.ndarray]) -> List[np.ndarray]:
    parts = []
    for spec, theta in zip(structure.blocks, params):
        theta = np.asarray(theta, dtype=float).ravel()
        if spec.kind is BlockKind.REPEATED:
            parts.append(float(theta[0]))
        else:
            parts.append(theta.reshape(spec.nw, spec.nz, order="F"))
    return parts


def _split_params(structure: UncertaintyStructure, theta: np.ndarray) -> List[np.ndarray]:
    out, start = [], 0
    for spec in structure.blocks:
        size = 1 if spec.kind is BlockKind.REPEATED else spec.nw * spec.nz
        out.append(theta[start:start + size])
        start += size
    return out


def structured_least_squares(structure: UncertaintyStructure, B_w: np.ndarray, Z: np.ndarray,
                             target: np.ndarray) -> np.ndarray:
    """无约束结构化最小二乘：min ‖target − B_wΔZ‖_F"""
    Phi = np.hstack(_structured_regression(structure, B_w, Z))
    theta, *_ = np.linalg.lstsq(Phi, np.asarray(target, dtype=float).flatten(order="F"), rcond=None)
    return structure.compose(_compose_from_params(structure, _split_params(structure, theta)))


def verify_robust(plant: LftPlant, K: np.ndarray, multipliers: MultiplierClass,
                  gamma_claim: Optional[float] = None, norm: str = "h2",
                  structure: Optional[UncertaintyStructure] = None,
                  prior_bounds: Optional[Sequence[float]] = None,
                  data: Optional[DataMatrices] = None,
                  disturbance_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None,
                  delta_true: Optional[np.ndarray] = None,
                  count: int = 200, seed: int = 0, tol: float = 1e-6,
                  settings: Optional[SolverSettings] = None) -> RobustnessReport:
    """
    采样验证：候选 Δ 来自真值 Δ_tr、先验集合内的随机点、以及数据一致点
    （抽取 D′ 后对 M − B_dD′ = B_wΔZ 做结构化最小二乘）。只保留通过成员判定的候选，
    并检查谱半径 < 1 与范数 ≤ γ(1 + tol)。H∞ 情形用频率网格峰值检查。

    Args:
        multipliers: 组合乘子类 P̃_com（作用在 [Δ̃ᵀ; I] 上）
        norm: "h2" | "hinf"
        count: 随机候选总数（先验与数据一致两类平分）
        prior_bounds: 每个块的先验界；含 None 时不做先验采样

    Returns:
        RobustnessReport（只报告，不抛出验证失败）
    """
    settings = settings or SolverSettings.from_env()
    if norm not in ("h2", "hinf"):
        raise ValueError(f"未知范数类型: {norm}")
    rng = np.random.default_rng(seed)
    report = RobustnessReport(gamma_claim, norm)

    candidates: List[tuple] = []
    if delta_true is not None:
        candidates.append(("true", np.atleast_2d(delta_true)))
    sources = []
    if structure is not None and prior_bounds is not None and all(b is not None for b in prior_bounds):
        sources.append("prior")
    if structure is not None and data is not None and disturbance_sampler is not None:
        sources.append("data")
    for k in range(count if sources else 0):
        source = sources[k % len(sources)]
        if source == "prior":
            candidates.append(("prior", sample_prior_delta(structure, prior_bounds, rng)))
        else:
            D = np.atleast_2d(disturbance_sampler(rng))
            candidates.append(("data", structured_least_squares(structure, plant.B_w, data.Z, data.M - plant.B_d @ D)))

    seen: List[np.ndarray] = []
    for source, delta in candidates:
        if any(np.max(np.abs(delta - prev)) < 1e-9 for prev in seen):
            continue
        verdict = certify_membership(plant.B_w @ delta, multipliers, tol=tol, settings=settings)
        record = CandidateRecord(source, isinstance(verdict, Member))
        report.records.append(record)
        if not record.retained:
            continue
        seen.append(delta)
        cl = ClosedLoop.from_plant(plant, K, delta)
        record.spectral_radius = spectral_radius(cl.A)
        if record.spectral_radius >= 1.0:
            record.norm, record.ok = math.inf, False
            continue
        record.norm = h2_norm(cl) if norm == "h2" else hinf_grid_peak(cl)
        record.ok = gamma_claim is None or record.norm <= gamma_claim * (1.0 + tol)

    log("验证", f"保留 {len(report.retained)}/{len(report.records)} 个候选，违反 {len(report.violations)} 个",
        settings.verbose)
    return report


# ---------------------------------------------------------------------------
# 最小二乘基线
# ---------------------------------------------------------------------------

@dataclass
class LsEstimate:
    """带界最小二乘估计"""
    delta: np.ndarray
    blocks: List[np.ndarray]
    residual: float
    constrained: bool

    def to_dict(self) -> dict:
        return {
            "delta": self.delta.tolist(),
            "residual": self.residual,
            "constrained": self.constrained,
        }


def _within_bounds(structure: UncertaintyStructure, delta: np.ndarray,
                   bounds: Sequence[Optional[float]], tol: float) -> bool:
    for spec, block, bound in zip(structure.blocks, structure.split(delta), bounds):
        if bound is None:
            continue
        if spec.kind is BlockKind.REPEATED:
            value = float(block[0, 0]) ** 2 if block.size else 0.0
        else:
            value = float(np.max(np.linalg.eigvalsh(block @ block.T))) if block.size else 0.0
        if value > bound + tol:
            return False
    return True


def ls_identify(data: DataMatrices, B_w: np.ndarray, structure: UncertaintyStructure,
                prior_bounds: Sequence[Optional[float]], settings: Optional[SolverSettings] = None,
                tol: float = 1e-9) -> LsEstimate:
    """
    min ‖M − B_wΔZ‖_F，Δ 结构化并满足先验界（满块 Δ_jΔ_jᵀ ⪯ δ̄_jI，重复标量 δ_j² ≤ δ̄_j；None 表示无界）。

    无约束解满足先验界时直接返回；否则把目标经 QR 降维后写成锥规划求解。

    Raises:
        InfeasibleError: 先验界互相矛盾
    """
    settings = settings or SolverSettings.from_env()
    B_w = np.atleast_2d(np.asarray(B_w, dtype=float))
    if len(prior_bounds) != len(structure.blocks):
        raise DimensionMismatchError(f"需要 {len(structure.blocks)} 个先验界，得到 {len(prior_bounds)}")
    M, Z = data.M, data.Z

    delta = structured_least_squares(structure, B_w, Z, M)
    if _within_bounds(structure, delta, prior_bounds, tol):
        residual = float(np.linalg.norm(M - B_w @ delta @ Z))
        return LsEstimate(delta, structure.split(delta), residual, constrained=False)

    regressors = _structured_regression(structure, B_w, Z)
    Phi = np.hstack(regressors)
    Q, R = np.linalg.qr(Phi)
    target = Q.T @ M.flatten(order="F")

    prob = ConicProblem("ls_identify")
    t = prob.scalar("t", lower=0.0)
    variables = []
    for j, (spec, bound) in enumerate(zip(structure.blocks, prior_bounds)):
        if spec.kind is BlockKind.REPEATED:
            var = prob.scalar(f"delta{j + 1}")
            if bound is not None:
                prob.add_lmi(bmat([[AffineExpr(bound), var], [var, 1.0]]), name=f"bound{j + 1}")
        else:
            var = prob.full(f"Delta{j + 1}", spec.nw, spec.nz)
            if bound is not None:
                prob.add_lmi(bmat([[bound * np.eye(spec.nw), var], [var.T, np.eye(spec.nz)]]), name=f"bound{j + 1}")
        variables.append(var)

    # r = Qᵀvec(M) − Rθ，t ≥ ‖r‖²
    coeffs, start = {}, 0
    for var in variables:
        coeffs[var] = -np.asarray(R[:, start:start + var.size])
        start += var.size
    r = AffineExpr(target.reshape(-1, 1), {v: sparse.csr_matrix(c) for v, c in coeffs.items()})
    prob.add_lmi(bmat([[t, r.T], [r, np.eye(r.shape[0])]]), name="residual")
    prob.minimize(t.expr)
    sol = prob.solve(settings)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError("先验界与任何 Δ 都不相容", sol)
    if not sol.ok:
        raise NumericalFailureError(f"最小二乘求解失败: {sol.message}", sol)

    parts = []
    for spec, var in zip(structure.blocks, variables):
        value = sol.value(var)
        parts.append(float(value) if spec.kind is BlockKind.REPEATED else np.atleast_2d(value))
    delta = structure.compose(parts)
    residual = float(np.linalg.norm(M - B_w @ delta @ Z))
    log("验证", f"带界最小二乘残差 {residual:.6g}", settings.verbose)
    return LsEstimate(delta, structure.split(delta), residual, constrained=True)
