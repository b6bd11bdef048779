"""
控制器综合模块 (Controller Synthesis)

功能：把组合乘子 P̃_com(θ) 代入 LMI，求解状态反馈增益 K。所有综合都在变量
(𝒳 或 𝒴, L = K·𝒳) 中凸化，求解后回代得到 K = L𝒳⁻¹。

核心功能：
- synthesize_h2: 鲁棒 H2 综合（最小化 tr Γ，γ = √tr Γ）
- synthesize_stabilizing: 只求鲁棒镇定（去掉性能约束并令 B_d = 0）
- synthesize_quadratic_performance: 带非线性通道 Δ′ 的鲁棒二次性能综合（对偶指标 P̃_p）
- synthesize_hinf: H∞ 特例，μ = γ⁻² 作为决策变量直接最大化；可选定 γ 二分
- synthesize_output_feedback: 扩展状态输出反馈（ARX 数据 → 动态控制器系数）
"""

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import SolverSettings, log
from .conic_backend import SolveStatus
from .errors import (
    DimensionMismatchError,
    InertiaViolationError,
    InfeasibleError,
    NumericalFailureError,
    RankDeficientError,
)
from .lft_model import (
    LftPlant,
    PerformanceIndex,
    assemble_data_matrices,
    build_extended_state_plant,
    extended_state_trajectory,
    numerical_rank,
    partition_gain,
)
from .lmi_compiler import AffineExpr, ConicProblem, Solution, bmat
from .multiplier_engine import (
    MultiplierClass,
    MultiplierValue,
    combine,
    learn_from_data,
    nonlinear_norm_bound,
    transform_prior,
    zero_class,
)

OBJECTIVES = ("h2", "stabilize", "hinf")


@dataclass
class SynthesisResult:
    """
    综合结果

    - K: m×n 状态反馈增益
    - certificate: Lyapunov 证书（H2 为 𝒳，二次性能为 𝒴）
    - gamma: 性能界（H2 为 √tr Γ，H∞ 为 1/√μ；镇定与一般二次性能为 None）
    - Gamma: H2 的迹界松弛变量
    - multiplier / nonlinear_multiplier: P̃_com 与 P′ 的取值
    """
    kind: str
    K: np.ndarray
    certificate: np.ndarray
    L: np.ndarray
    solution: Solution
    gamma: Optional[float] = None
    Gamma: Optional[np.ndarray] = None
    multiplier: Optional[MultiplierValue] = None
    nonlinear_multiplier: Optional[MultiplierValue] = None
    controller: Optional[Dict[str, List[np.ndarray]]] = None
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def reconstruction_error(self) -> float:
        """‖K·certificate − L‖_max"""
        if self.K.size == 0:
            return 0.0
        return float(np.max(np.abs(self.K @ self.certificate - self.L)))

    def to_dict(self) -> dict:
        eig = np.linalg.eigvalsh(self.certificate)
        out = {
            "kind": self.kind,
            "K": self.K.tolist(),
            "gamma": self.gamma,
            "certificate_eig_min": float(eig[0]),
            "certificate_eig_max": float(eig[-1]),
            "solver": self.solution.to_dict(),
        }
        if self.Gamma is not None:
            out["Gamma"] = self.Gamma.tolist()
        if self.multiplier is not None:
            out["multiplier"] = self.multiplier.to_dict()
        if self.nonlinear_multiplier is not None:
            out["nonlinear_multiplier"] = self.nonlinear_multiplier.to_dict()
        if self.controller is not None:
            out["controller"] = {k: [b.tolist() for b in v] for k, v in self.controller.items()}
        if self.details:
            out["details"] = dict(self.details)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


@dataclass(frozen=True)
class NonlinearMultiplierSpec:
    """非线性通道 Δ′ 的乘子类 P′（作用在 [Δ′ᵀ; I] 上）"""
    multiplier: MultiplierClass

    @classmethod
    def norm_bound(cls, gamma_p: float, n_zp: int, n_wp: int) -> "NonlinearMultiplierSpec":
        """‖Δ′(x)‖ ≤ γ′ 对应的 {λ diag(−I, γ′²I), λ ≥ 0}"""
        return cls(nonlinear_norm_bound(gamma_p, n_zp, n_wp))


# ---------------------------------------------------------------------------
# 公共工具
# ---------------------------------------------------------------------------

def _check_status(sol: Solution, what: str) -> None:
    if sol.status is SolveStatus.OPTIMAL:
        return
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError(f"{what}: 对当前乘子类不存在证书 ({sol.message})", sol)
    raise NumericalFailureError(f"{what}: 求解失败 [{sol.status.value}] {sol.message}", sol)


def _ensure_class(plant: LftPlant, multipliers: Optional[MultiplierClass]) -> MultiplierClass:
    if multipliers is None:
        return zero_class(plant.n_z, plant.n)
    if (multipliers.upper, multipliers.lower) != (plant.n_z, plant.n):
        raise DimensionMismatchError(
            f"P̃_com 维数 ({multipliers.upper},{multipliers.lower}) 应为 (n_z={plant.n_z}, n={plant.n})")
    return multipliers


def _recover_gain(sol: Solution, what: str, certificate_var, gain_var) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    cert = np.atleast_2d(sol.value(certificate_var))
    L = np.atleast_2d(sol.value(gain_var))
    eig_min = float(np.linalg.eigvalsh(cert)[0])
    if eig_min <= 0.0:
        raise NumericalFailureError(f"{what}: 证书不是正定的 (λ_min = {eig_min:.3e})", sol)
    K = np.linalg.solve(cert, L.T).T
    return K, cert, L


def _swap(n: int, n_z: int) -> np.ndarray:
    """Π = [0, I_nz; I_n, 0]：把 [x; z] 坐标换成 [z; x]"""
    Pi = np.zeros((n_z + n, n + n_z))
    Pi[:n_z, n:] = np.eye(n_z)
    Pi[n_z:, :n] = np.eye(n)
    return Pi


# ---------------------------------------------------------------------------
# 鲁棒 H2 与鲁棒镇定
# ---------------------------------------------------------------------------

def _robust_h2_problem(plant: LftPlant, multipliers: MultiplierClass, with_performance: bool,
                       name: str) -> Tuple[ConicProblem, dict]:
    n, m, n_z, n_e = plant.n, plant.m, plant.n_z, plant.n_e
    prob = ConicProblem(name)
    X = prob.symmetric("X", n)
    L = prob.full("L", m, n)
    P, p_vars = multipliers.instantiate(prob, "P")

    B_d = plant.B_d if with_performance else np.zeros((n, 0))
    WX = bmat([[plant.A @ X + plant.B @ L], [plant.C_z @ X + plant.D_z @ L]])
    base = bmat([
        [B_d @ B_d.T - X, np.zeros((n, n_z))],
        [np.zeros((n_z, n)), np.zeros((n_z, n_z))],
    ])
    top = base + P.congruence(_swap(n, n_z))
    prob.add_lmi(-bmat([[top, WX], [WX.T, -X]]), strict=True, name="robust_lyapunov")

    handles = {"X": X, "L": L, "P": p_vars, "Gamma": None}
    if with_performance and n_e > 0:
        Gamma = prob.symmetric("Gamma", n_e)
        CX = plant.C_e @ X + plant.D_eu @ L
        prob.add_lmi(bmat([[Gamma, CX], [CX.T, X]]), strict=True, name="h2_trace_bound")
        prob.minimize(Gamma.expr.trace())
        handles["Gamma"] = Gamma
    return prob, handles


def synthesize_h2(plant: LftPlant, multipliers: Optional[MultiplierClass] = None,
                  settings: Optional[SolverSettings] = None) -> SynthesisResult:
    """
    鲁棒 H2 状态反馈综合。

    在 𝒳 ≻ 0、L、Γ、θ 上最小化 tr Γ：
        [Γ, C_e𝒳 + D_euL; *, 𝒳] ≻ 0
        [[B_dB_dᵀ − 𝒳, 0; 0, 0] + ΠᵀP̃_com(θ)Π, W𝒳; *, −𝒳] ≺ 0，W𝒳 = [A𝒳 + BL; C_z𝒳 + D_zL]

    Args:
        plant: 已知系统矩阵（要求 D_ed = 0）
        multipliers: 组合乘子类 P̃_com（n_z + n 维）；None 表示不确定性通道为零维
        settings: 求解器配置

    Returns:
        SynthesisResult，K = L𝒳⁻¹，γ = √tr Γ

    Raises:
        InfeasibleError: 该乘子类下不存在证书
        NumericalFailureError: 求解器失败或残差检查不通过
    """
    settings = settings or SolverSettings.from_env()
    plant.check_dimensions()
    if plant.D_ed.size and np.any(plant.D_ed != 0.0):
        raise ValueError("鲁棒 H2 综合要求 D_ed = 0")
    multipliers = _ensure_class(plant, multipliers)

    prob, h = _robust_h2_problem(plant, multipliers, True, f"h2[{plant.name}]")
    sol = prob.solve(settings)
    _check_status(sol, "H2 综合")
    K, X, L = _recover_gain(sol, "H2 综合", h["X"], h["L"])
    Gamma = None if h["Gamma"] is None else np.atleast_2d(sol.value(h["Gamma"]))
    gamma = 0.0 if Gamma is None else math.sqrt(max(float(np.trace(Gamma)), 0.0))
    log("综合", f"{plant.name}: H2 γ = {gamma:.6g} ({multipliers.label})", settings.verbose)
    return SynthesisResult(
        kind="h2", K=K, certificate=X, L=L, solution=sol, gamma=gamma, Gamma=Gamma,
        multiplier=multipliers.value_from(sol, h["P"]),
    )


def synthesize_stabilizing(plant: LftPlant, multipliers: Optional[MultiplierClass] = None,
                           settings: Optional[SolverSettings] = None) -> SynthesisResult:
    """鲁棒镇定：去掉迹约束并令 B_d = 0 后的可行性问题"""
    settings = settings or SolverSettings.from_env()
    plant.check_dimensions()
    multipliers = _ensure_class(plant, multipliers)
    prob, h = _robust_h2_problem(plant, multipliers, False, f"stabilize[{plant.name}]")
    sol = prob.solve(settings)
    _check_status(sol, "鲁棒镇定")
    K, X, L = _recover_gain(sol, "鲁棒镇定", h["X"], h["L"])
    log("综合", f"{plant.name}: 鲁棒镇定可行 ({multipliers.label})", settings.verbose)
    return SynthesisResult(kind="stabilize", K=K, certificate=X, L=L, solution=sol,
                           multiplier=multipliers.value_from(sol, h["P"]))


# ---------------------------------------------------------------------------
# 鲁棒二次性能（含非线性通道）
# ---------------------------------------------------------------------------

def _nonlinear_class(plant: LftPlant, nonlinear: Optional[NonlinearMultiplierSpec]) -> Optional[MultiplierClass]:
    if not plant.has_nonlinear or plant.n_wp + plant.n_zp == 0:
        if nonlinear is not None:
            raise DimensionMismatchError("系统没有非线性通道，却给出了 P′")
        return None
    if nonlinear is None:
        raise ValueError("系统含非线性通道，需要给出 P′ 乘子类")
    c = nonlinear.multiplier
    if (c.upper, c.lower) != (plant.n_zp, plant.n_wp):
        raise DimensionMismatchError(
            f"P′ 维数 ({c.upper},{c.lower}) 应为 (n_z′={plant.n_zp}, n_w′={plant.n_wp})")
    return c


def _quadratic_performance_problem(plant: LftPlant, multipliers: MultiplierClass,
                                   nl_class: Optional[MultiplierClass],
                                   dual_index: Callable[[ConicProblem], AffineExpr],
                                   name: str) -> Tuple[ConicProblem, dict]:
    """
    Schur 补形式（列块 [x | z′ | z | e]）：
        [−E₁ᵀ𝒴E₁ + V′ᵀP′V′ + VᵀP̃V + V_pᵀP̃_pV_p, G𝒴; *, −𝒴] ≺ 0
        G𝒴 = [A𝒴 + BL; C_z′𝒴 + D_z′L; C_z𝒴 + D_zL; C_e𝒴 + D_euL]
    """
    n, m, n_z, n_e, n_d = plant.n, plant.m, plant.n_z, plant.n_e, plant.n_d
    n_zp = plant.n_zp if nl_class is not None else 0
    n_wp = plant.n_wp if nl_class is not None else 0
    total = n + n_zp + n_z + n_e
    c1, c2, c3 = 0, n, n + n_zp
    c4 = c3 + n_z

    prob = ConicProblem(name)
    Y = prob.symmetric("Y", n)
    L = prob.full("L", m, n)
    P, p_vars = multipliers.instantiate(prob, "P")

    E1 = np.zeros((n, total))
    E1[:, c1:c1 + n] = np.eye(n)
    V = np.zeros((n_z + n, total))
    V[:n_z, c3:c3 + n_z] = np.eye(n_z)
    V[n_z:, c1:c1 + n] = np.eye(n)
    Vp = np.zeros((n_e + n_d, total))
    Vp[:n_e, c4:c4 + n_e] = np.eye(n_e)
    Vp[n_e:, c1:c1 + n] = plant.B_d.T
    Vp[n_e:, c4:c4 + n_e] = plant.D_ed.T

    M11 = -Y.expr.congruence(E1) + P.congruence(V) + dual_index(prob).congruence(Vp)
    rows = [[plant.A @ Y + plant.B @ L]]
    nl_vars: List = []
    if nl_class is not None:
        Vn = np.zeros((n_zp + n_wp, total))
        Vn[:n_zp, c2:c2 + n_zp] = np.eye(n_zp)
        Vn[n_zp:, c1:c1 + n] = plant.B_wp.T
        Vn[n_zp:, c3:c3 + n_z] = plant.D_zwp.T
        Pn, nl_vars = nl_class.instantiate(prob, "Pnl")
        M11 = M11 + Pn.congruence(Vn)
        rows.append([plant.C_zp @ Y + plant.D_zp @ L])
    rows.append([plant.C_z @ Y + plant.D_z @ L])
    rows.append([plant.C_e @ Y + plant.D_eu @ L])
    GY = bmat(rows)
    prob.add_lmi(-bmat([[M11, GY], [GY.T, -Y]]), strict=True, name="robust_performance")
    return prob, {"Y": Y, "L": L, "P": p_vars, "Pnl": nl_vars}


def _check_inertia(value: MultiplierValue, n_zp: int, n_wp: int, tol: float, sol: Solution) -> None:
    eig = np.linalg.eigvalsh(value.P)
    scale = tol * max(1.0, float(np.max(np.abs(eig)))) if eig.size else tol
    negative = int(np.sum(eig < -scale))
    positive = int(np.sum(eig > scale))
    if negative != n_zp or positive != n_wp:
        raise InertiaViolationError(
            f"P′ 惯性为 ({negative} 负, {positive} 正)，应为 ({n_zp} 负, {n_wp} 正)")


def _finish_quadratic(plant: LftPlant, sol: Solution, h: dict, multipliers: MultiplierClass,
                      nl_class: Optional[MultiplierClass], kind: str, what: str,
                      settings: SolverSettings) -> SynthesisResult:
    _check_status(sol, what)
    K, Y, L = _recover_gain(sol, what, h["Y"], h["L"])
    nl_value = None
    if nl_class is not None:
        nl_value = nl_class.value_from(sol, h["Pnl"])
        _check_inertia(nl_value, plant.n_zp, plant.n_wp, settings.rank_tol, sol)
    return SynthesisResult(kind=kind, K=K, certificate=Y, L=L, solution=sol,
                           multiplier=multipliers.value_from(sol, h["P"]),
                           nonlinear_multiplier=nl_value)


def synthesize_quadratic_performance(plant: LftPlant, multipliers: Optional[MultiplierClass],
                                     performance: PerformanceIndex,
                                     nonlinear: Optional[NonlinearMultiplierSpec] = None,
                                     settings: Optional[SolverSettings] = None) -> SynthesisResult:
    """
    鲁棒二次性能综合（可行性问题）。

    Args:
        plant: 系统（可含非线性通道 B_w′, D_zw′, C_z′, D_z′）
        multipliers: P̃_com（None 表示 Δ 通道为零维）
        performance: 性能指标 P_p（内部使用其对偶 P̃_p）
        nonlinear: P′ 乘子类；系统没有非线性通道时必须为 None

    Raises:
        InfeasibleError / NumericalFailureError: 求解失败
        InertiaViolationError: P′ 的惯性不是 (n_z′ 负, n_w′ 正)
    """
    settings = settings or SolverSettings.from_env()
    plant.check_dimensions()
    multipliers = _ensure_class(plant, multipliers)
    if (performance.n_d, performance.n_e) != (plant.n_d, plant.n_e):
        raise DimensionMismatchError(
            f"性能指标维数 ({performance.n_d},{performance.n_e}) 与系统 (n_d={plant.n_d}, n_e={plant.n_e}) 不符")
    nl_class = _nonlinear_class(plant, nonlinear)
    P_tilde = performance.P_tilde

    prob, h = _quadratic_performance_problem(
        plant, multipliers, nl_class, lambda _: AffineExpr(P_tilde), f"qp[{plant.name}]")
    sol = prob.solve(settings)
    result = _finish_quadratic(plant, sol, h, multipliers, nl_class, "quadratic", "二次性能综合", settings)
    log("综合", f"{plant.name}: 二次性能 {performance.label} 可行", settings.verbose)
    return result


def _hinf_mu(plant: LftPlant, multipliers: MultiplierClass, nl_class: Optional[MultiplierClass],
             settings: SolverSettings) -> SynthesisResult:
    n_e, n_d = plant.n_e, plant.n_d
    handles = {}

    def dual_index(prob: ConicProblem) -> AffineExpr:
        # P̃_p = diag(−I, μI)，对 μ = γ⁻² 是仿射的
        mu = prob.scalar("mu", lower=0.0)
        handles["mu"] = mu
        return bmat([
            [-np.eye(n_e), np.zeros((n_e, n_d))],
            [np.zeros((n_d, n_e)), mu.expr.times_matrix(np.eye(n_d))],
        ])

    prob, h = _quadratic_performance_problem(plant, multipliers, nl_class, dual_index, f"hinf[{plant.name}]")
    prob.maximize(handles["mu"].expr)
    sol = prob.solve(settings)
    result = _finish_quadratic(plant, sol, h, multipliers, nl_class, "hinf", "H∞ 综合", settings)
    mu = sol.value(handles["mu"])
    if mu <= 0.0:
        raise InfeasibleError(f"H∞ 综合: μ = {mu:.3e} 不为正", sol)
    result.gamma = 1.0 / math.sqrt(mu)
    result.details["mu"] = mu
    return result


def _hinf_bisection(plant: LftPlant, multipliers: MultiplierClass,
                    nonlinear: Optional[NonlinearMultiplierSpec], settings: SolverSettings,
                    tol: float, gamma_max: float,
                    start: Optional[SynthesisResult] = None) -> SynthesisResult:
    """start 给出已知可行的上界（及其结果）时从 (0, start.gamma] 开始二分"""
    def attempt(gamma: float) -> Optional[SynthesisResult]:
        try:
            return synthesize_quadratic_performance(
                plant, multipliers, PerformanceIndex.hinf(gamma, plant.n_d, plant.n_e), nonlinear, settings)
        except InfeasibleError:
            return None

    lo, hi = 0.0, 1.0
    best = start if start is not None else attempt(hi)
    if start is not None:
        hi = float(start.gamma)
    while best is None:
        lo, hi = hi, 4.0 * hi
        if hi > gamma_max:
            raise InfeasibleError(f"H∞ 二分: γ ≤ {gamma_max:g} 内不可行")
        best = attempt(hi)
    steps = 0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        candidate = attempt(mid)
        if candidate is None:
            lo = mid
        else:
            hi, best = mid, candidate
        steps += 1
    best.kind = "hinf"
    best.gamma = hi
    best.details.update({"gamma_lower": lo, "bisection_steps": float(steps)})
    return best


def synthesize_hinf(plant: LftPlant, multipliers: Optional[MultiplierClass] = None,
                    nonlinear: Optional[NonlinearMultiplierSpec] = None,
                    settings: Optional[SolverSettings] = None, method: str = "mu",
                    tol: float = 1e-4, gamma_max: float = 1e6) -> SynthesisResult:
    """
    鲁棒 H∞ 综合：Q_p = −γ²I, S_p = 0, R_p = I。

    method="mu" 时把 μ = γ⁻² 作为决策变量直接最大化，返回 γ = 1/√μ；
    method="bisection" 时对固定 γ 的可行性问题二分（相对精度 tol）；
    method="refined" 先做 μ 最大化，再在 (0, γ_μ] 上二分（μ 目标只解到 optimal_inaccurate 时 γ_μ 偏大）。
    """
    settings = settings or SolverSettings.from_env()
    plant.check_dimensions()
    if plant.n_e == 0 or plant.n_d == 0:
        raise DimensionMismatchError("H∞ 综合需要非零维的性能通道 (n_e ≥ 1, n_d ≥ 1)")
    multipliers = _ensure_class(plant, multipliers)
    if method == "mu":
        result = _hinf_mu(plant, multipliers, _nonlinear_class(plant, nonlinear), settings)
    elif method == "bisection":
        result = _hinf_bisection(plant, multipliers, nonlinear, settings, tol, gamma_max)
    elif method == "refined":
        first = _hinf_mu(plant, multipliers, _nonlinear_class(plant, nonlinear), settings)
        gamma_mu = first.gamma
        result = _hinf_bisection(plant, multipliers, nonlinear, settings, tol, gamma_max, start=first)
        result.details["gamma_mu"] = gamma_mu
    else:
        raise ValueError(f"未知的 H∞ 方法: {method}")
    log("综合", f"{plant.name}: H∞ γ = {result.gamma:.6g} ({method})", settings.verbose)
    return result


# ---------------------------------------------------------------------------
# 扩展状态输出反馈
# ---------------------------------------------------------------------------

DisturbanceFactory = Callable[[int, int], MultiplierClass]


def synthesize_output_feedback(u: np.ndarray, y: np.ndarray, n: int, B_d0: np.ndarray,
                               disturbance: Union[MultiplierClass, DisturbanceFactory],
                               prior: Optional[Sequence[MultiplierClass]] = None,
                               objective: str = "stabilize",
                               C_e: Optional[np.ndarray] = None, D_eu: Optional[np.ndarray] = None,
                               allow_rank_deficient: bool = False,
                               settings: Optional[SolverSettings] = None) -> SynthesisResult:
    """
    由输入输出数据综合形如 u_k = Σ K_iᵘ u_{k−i} + Σ K_iʸ y_{k−i} 的动态输出反馈。

    Args:
        u, y: m×T 输入与 p×T 输出记录
        n: 假定的系统阶数
        B_d0: p×n_d 扰动输入矩阵
        disturbance: 扰动乘子类（维数 N + n_d），或按 (N, n_d) 构造它的函数
        prior: 可选的先验乘子（单个满块，作用在 [Δ_trᵀ; I] 上）
        objective: "stabilize" | "h2" | "hinf"
        C_e, D_eu: 性能输出；缺省为 e = [ξ; u]
        allow_rank_deficient: Z 行秩不足时只告警并继续（通常导致不可行）

    Raises:
        RankDeficientError: Z 行秩不足且 allow_rank_deficient=False
    """
    settings = settings or SolverSettings.from_env()
    if objective not in OBJECTIVES:
        raise ValueError(f"objective 必须是 {OBJECTIVES} 之一，得到 {objective!r}")
    u, y = np.atleast_2d(u), np.atleast_2d(y)
    m, p = u.shape[0], y.shape[0]
    plant, structure = build_extended_state_plant(n, m, p, B_d0)
    data = assemble_data_matrices(plant, extended_state_trajectory(u, y, n))

    rank = numerical_rank(data.Z, settings.rank_tol)
    if rank < plant.n_z:
        if not allow_rank_deficient:
            raise RankDeficientError("Z", rank, plant.n_z)
        log("综合", f"⚠️ Z 行秩 {rank} < {plant.n_z}，数据学习的不确定性集合无界", True)

    c_d = disturbance if isinstance(disturbance, MultiplierClass) else disturbance(data.N, plant.n_d)
    learnt = learn_from_data(data, plant.B_d, c_d)
    prior_class = transform_prior(structure, plant.B_w, list(prior)) if prior else None
    multipliers = combine(prior_class, learnt)

    if objective != "stabilize":
        nx = plant.n
        C_e = np.vstack([np.eye(nx), np.zeros((m, nx))]) if C_e is None else np.atleast_2d(C_e)
        D_eu = np.vstack([np.zeros((nx, m)), np.eye(m)]) if D_eu is None else np.atleast_2d(D_eu)
        plant = plant.with_changes(C_e=C_e, D_eu=D_eu, D_ed=np.zeros((C_e.shape[0], plant.n_d)))

    if objective == "h2":
        result = synthesize_h2(plant, multipliers, settings)
    elif objective == "hinf":
        result = synthesize_hinf(plant, multipliers, settings=settings)
    else:
        result = synthesize_stabilizing(plant, multipliers, settings)
    result.controller = partition_gain(result.K, n, m, p)
    result.details["Z_rank"] = float(rank)
    return result
