"""
运行配置模块 (Runtime Configuration)

功能：集中管理求解器后端、数值容差与输出目录，统一从环境变量读取默认值。

核心功能：
- SolverSettings: 求解器与数值容差配置（不可变）
- output_dir: 结果输出目录
- log: 带前缀的控制台输出（由 verbose 控制）
"""

import os
from dataclasses import dataclass, replace
from typing import Optional, Tuple

SOLVER_ENV_VAR = "ROBSYN_SOLVER"
EPS_ENV_VAR = "ROBSYN_EPS"
FEAS_TOL_ENV_VAR = "ROBSYN_FEAS_TOL"
RESIDUAL_TOL_ENV_VAR = "ROBSYN_RESIDUAL_TOL"
RANK_TOL_ENV_VAR = "ROBSYN_RANK_TOL"
VERBOSE_ENV_VAR = "ROBSYN_VERBOSE"
OUTPUT_DIR_ENV_VAR = "ROBSYN_OUTPUT_DIR"
DUMP_DIR_ENV_VAR = "ROBSYN_DUMP_DIR"

DEFAULT_SOLVERS = ("CLARABEL", "SCS")
DEFAULT_EPS = 1e-7
DEFAULT_FEAS_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-8
DEFAULT_RESIDUAL_TOL = 1e-6
DEFAULT_RANK_TOL = 1e-9


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        print(f"⚠️ 环境变量 {name}={raw!r} 不是数字，使用默认值 {default}")
        return default


def _env_bool(name: str, default: bool) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class SolverSettings:
    """
    求解器配置

    - solvers: 依次尝试的 cvxpy 求解器名称
    - eps: 严格 LMI 的偏移量（F ≻ 0 编码为 F ⪰ eps·I，按块缩放后）
    - feas_tol / gap_tol: 传给后端的可行性与对偶间隙容差
    - residual_tol: 求解后相对残差检查阈值（按块系数量级归一化），超过则换下一个求解器，全部超过则不报告 OPTIMAL
    - rank_tol: 奇异值相对秩阈值
    - dump_dir: 非空时把每个编译后的标准形式写成稀疏三元组文本
    """
    solvers: Tuple[str, ...] = DEFAULT_SOLVERS
    eps: float = DEFAULT_EPS
    feas_tol: float = DEFAULT_FEAS_TOL
    gap_tol: float = DEFAULT_GAP_TOL
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    rank_tol: float = DEFAULT_RANK_TOL
    max_iters: int = 500
    verbose: bool = False
    dump_dir: Optional[str] = None

    @classmethod
    def from_env(cls, **overrides) -> "SolverSettings":
        """从环境变量构建配置，关键字参数优先级最高"""
        solvers_raw = os.environ.get(SOLVER_ENV_VAR, "")
        solvers = tuple(s.strip().upper() for s in solvers_raw.split(",") if s.strip()) or DEFAULT_SOLVERS
        settings = cls(
            solvers=solvers,
            eps=_env_float(EPS_ENV_VAR, DEFAULT_EPS),
            feas_tol=_env_float(FEAS_TOL_ENV_VAR, DEFAULT_FEAS_TOL),
            residual_tol=_env_float(RESIDUAL_TOL_ENV_VAR, DEFAULT_RESIDUAL_TOL),
            rank_tol=_env_float(RANK_TOL_ENV_VAR, DEFAULT_RANK_TOL),
            verbose=_env_bool(VERBOSE_ENV_VAR, False),
            dump_dir=os.environ.get(DUMP_DIR_ENV_VAR) or None,
        )
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(settings, **overrides) if overrides else settings

    def with_options(self, **changes) -> "SolverSettings":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self


def output_dir(default: str = "results") -> str:
    """结果输出目录（ROBSYN_OUTPUT_DIR 优先）"""
    return os.environ.get(OUTPUT_DIR_ENV_VAR, default)


def log(tag: str, message: str, verbose: bool = True) -> None:
    """打印一行带前缀的进度信息"""
    if verbose:
        print(f"[{tag}] {message}")
