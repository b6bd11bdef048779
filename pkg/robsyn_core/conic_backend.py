"""
锥规划求解后端 (Conic Solver Backend)

功能：把 lmi_compiler 产出的标准型（线性目标 + 线性等式 + 若干半正定块）交给
cvxpy 求解，返回状态和原始变量值。后端契约很窄：标准型进，状态 + 原始解出。

核心功能：
- SolveStatus: 求解状态枚举
- BackendResult: 后端返回值
- CvxpyBackend: 基于 cvxpy 的实现，按配置顺序依次尝试求解器（默认 CLARABEL → SCS）
"""

import time
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterator, Optional

import numpy as np

from .config import SolverSettings, log

if TYPE_CHECKING:
    from .lmi_compiler import StandardForm

try:
    import cvxpy as cp
    CVXPY_AVAILABLE = True
except ImportError:
    cp = None
    CVXPY_AVAILABLE = False


class SolveStatus(Enum):
    """求解状态"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"
    UNBOUNDED = "unbounded"


@dataclass
class BackendResult:
    """后端原始结果"""
    status: SolveStatus
    x: Optional[np.ndarray]
    solver: str
    message: str = ""
    solve_time: float = 0.0


class ConicBackend:
    """
    后端接口：solve(standard_form) -> BackendResult

    attempts() 依次给出每个求解器的结果，调用方可以在结果通不过回代检查时继续取下一个。
    """

    name = "abstract"

    def solve(self, form: "StandardForm") -> BackendResult:
        raise NotImplementedError

    def attempts(self, form: "StandardForm") -> Iterator[BackendResult]:
        yield self.solve(form)


def _map_status(status: str) -> SolveStatus:
    if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return SolveStatus.OPTIMAL
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolveStatus.INFEASIBLE
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return SolveStatus.UNBOUNDED
    return SolveStatus.NUMERICAL_FAILURE


class CvxpyBackend(ConicBackend):
    """
    cvxpy 后端

    每次调用 solve 都会新建 cvxpy 问题实例，不共享可变状态，可在不同问题上并发调用。
    """

    name = "cvxpy"

    def __init__(self, settings: Optional[SolverSettings] = None):
        if not CVXPY_AVAILABLE:
            raise ImportError("cvxpy 未安装，无法求解 LMI（pip install cvxpy clarabel）")
        self.settings = settings or SolverSettings.from_env()

    def _solver_options(self, solver: str) -> dict:
        s = self.settings
        if solver == "CLARABEL":
            return {
                "tol_feas": s.feas_tol,
                "tol_gap_abs": s.gap_tol,
                "tol_gap_rel": s.gap_tol,
                "max_iter": s.max_iters,
            }
        if solver == "SCS":
            # SCS 是一阶方法，需要更多迭代才能接近内点法精度
            return {"eps_abs": s.feas_tol, "eps_rel": s.gap_tol, "max_iters": 200 * s.max_iters}
        return {}

    def _build(self, form: "StandardForm"):
        x = cp.Variable(form.n)
        constraints = []
        for block in form.blocks:
            if block.size == 0:
                continue
            shifted = block.F0 - block.shift * np.eye(block.size).flatten(order="F")
            flat = shifted + block.F @ x
            if block.size == 1:
                constraints.append(flat >= 0)
                continue
            mat = cp.reshape(flat, (block.size, block.size), order="F")
            constraints.append(0.5 * (mat + mat.T) >> 0)
        if form.A_eq.shape[0] > 0:
            constraints.append(form.A_eq @ x == form.b_eq)
        objective = cp.Minimize(form.c @ x) if np.any(form.c) else cp.Minimize(0)
        return x, cp.Problem(objective, constraints)

    def _solve_constant(self, form: "StandardForm") -> BackendResult:
        # 没有决策变量：只需检查常数块本身
        x = np.zeros(0)
        feasible = form.worst_residual(x) <= self.settings.residual_tol
        status = SolveStatus.OPTIMAL if feasible else SolveStatus.INFEASIBLE
        return BackendResult(status=status, x=x, solver="none", message="constant problem")

    def solve(self, form: "StandardForm") -> BackendResult:
        last = BackendResult(status=SolveStatus.NUMERICAL_FAILURE, x=None, solver="", message="no solver available")
        for last in self.attempts(form):
            if last.status is not SolveStatus.NUMERICAL_FAILURE:
                break
        return last

    def attempts(self, form: "StandardForm") -> Iterator[BackendResult]:
        """按 settings.solvers 的顺序逐个求解；未安装的求解器跳过"""
        if form.n == 0:
            yield self._solve_constant(form)
            return

        x, problem = self._build(form)
        installed = set(cp.installed_solvers())
        tried = False

        for solver in self.settings.solvers:
            if solver not in installed:
                log("求解器", f"{solver} 未安装，跳过", self.settings.verbose)
                continue
            tried = True
            start = time.perf_counter()
            try:
                problem.solve(solver=solver, verbose=False, **self._solver_options(solver))
            except cp.error.SolverError as e:
                log("求解器", f"{solver} 失败: {e}", self.settings.verbose)
                yield BackendResult(SolveStatus.NUMERICAL_FAILURE, None, solver, str(e))
                continue
            elapsed = time.perf_counter() - start
            value = None if x.value is None else np.asarray(x.value, dtype=float).ravel()
            log("求解器", f"{solver}: {problem.status} ({elapsed:.3f}s)", self.settings.verbose)
            yield BackendResult(_map_status(problem.status), value, solver, str(problem.status), elapsed)

        if not tried:
            yield BackendResult(SolveStatus.NUMERICAL_FAILURE, None, "", "no solver available")
