"""
鲁棒综合核心 (Robsyn Core)

由先验知识与数据综合不确定离散时间 LTI 系统的鲁棒状态 / 输出反馈控制器，
并对闭环做独立验证。

核心模块：
- config: 求解器与容差配置（环境变量）
- errors: 异常层次
- lft_model: LFT 系统、不确定性结构、数据矩阵、性能指标、ZOH 离散化
- lmi_compiler: LMI 建模层与标准锥形式
- conic_backend: cvxpy 求解后端
- multiplier_engine: 乘子类的构造、变换、组合与成员判定
- synthesis: 鲁棒 H2 / 镇定 / 二次性能 / H∞ / 输出反馈综合
- analysis: 闭环范数、采样验证、带界最小二乘基线
- benchmarks: 三状态例子与柔性卫星
- problem_io: 问题文件、轨迹 CSV、报告
- experiments: 数据生成与数值研究
"""

from .config import SolverSettings
from .errors import (
    AsymmetricMatrixError,
    DimensionMismatchError,
    InertiaViolationError,
    InfeasibleError,
    NumericalFailureError,
    ProblemFileError,
    RankDeficientError,
    RobsynError,
    UnstableSystemError,
)
from .lft_model import (
    BlockSpec,
    DataMatrices,
    LftPlant,
    PerformanceIndex,
    Trajectory,
    UncertaintyStructure,
    assemble_data_matrices,
    build_extended_state_plant,
    discretize_zoh,
    validate_plant,
)
from .lmi_compiler import ConicProblem, Solution
from .multiplier_engine import (
    MultiplierClass,
    MultiplierValue,
    assumption_definiteness_check,
    certify_membership,
    combine,
    disturbance_convex_hull,
    disturbance_diagonal,
    disturbance_quadratic,
    disturbance_toeplitz,
    learn_from_data,
    prior_full_block,
    prior_repeated_scalar,
    transform_prior,
)
from .synthesis import (
    NonlinearMultiplierSpec,
    SynthesisResult,
    synthesize_h2,
    synthesize_hinf,
    synthesize_output_feedback,
    synthesize_quadratic_performance,
    synthesize_stabilizing,
)
from .analysis import ClosedLoop, h2_norm, hinf_norm, ls_identify, spectral_radius, verify_robust
from .experiments import ExperimentConfig, generate_trajectory
from .problem_io import load_problem

__all__ = [
    # 配置与异常
    "SolverSettings",
    "RobsynError",
    "DimensionMismatchError",
    "RankDeficientError",
    "AsymmetricMatrixError",
    "UnstableSystemError",
    "ProblemFileError",
    "InfeasibleError",
    "NumericalFailureError",
    "InertiaViolationError",
    # 模型
    "BlockSpec",
    "UncertaintyStructure",
    "LftPlant",
    "Trajectory",
    "DataMatrices",
    "PerformanceIndex",
    "validate_plant",
    "assemble_data_matrices",
    "build_extended_state_plant",
    "discretize_zoh",
    # LMI
    "ConicProblem",
    "Solution",
    # 乘子
    "MultiplierClass",
    "MultiplierValue",
    "prior_full_block",
    "prior_repeated_scalar",
    "disturbance_quadratic",
    "disturbance_diagonal",
    "disturbance_convex_hull",
    "disturbance_toeplitz",
    "transform_prior",
    "learn_from_data",
    "combine",
    "assumption_definiteness_check",
    "certify_membership",
    # 综合
    "SynthesisResult",
    "NonlinearMultiplierSpec",
    "synthesize_h2",
    "synthesize_stabilizing",
    "synthesize_quadratic_performance",
    "synthesize_hinf",
    "synthesize_output_feedback",
    # 分析
    "ClosedLoop",
    "spectral_radius",
    "h2_norm",
    "hinf_norm",
    "verify_robust",
    "ls_identify",
    # 研究与文件
    "ExperimentConfig",
    "generate_trajectory",
    "load_problem",
]
