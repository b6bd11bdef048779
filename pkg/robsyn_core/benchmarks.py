"""
基准系统模块 (Benchmark Plants)

功能：提供三个数值研究使用的系统、真值不确定性与先验乘子。

核心功能：
- 三状态学术例子：LFT 形式、纯数据形式、先验界与噪声模型
- 柔性卫星：连续 LFT、ZOH 离散化、低通加权滤波器增广
- augment_with_filter: 把离散加权滤波器并入性能通道
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .lft_model import BlockSpec, LftPlant, UncertaintyStructure, discretize_zoh, zoh_matrices
from .multiplier_engine import (
    MultiplierClass,
    disturbance_quadratic,
    prior_full_block,
    prior_repeated_scalar,
)

# 三状态例子的先验界：δ₁² ≤ 0.1，Δ₂Δ₂ᵀ ⪯ 0.5I
EXAMPLE_A_PRIOR_BOUNDS = (0.1, 0.5)
EXAMPLE_A_DELTA1 = 0.2
EXAMPLE_A_DELTA2 = np.array([[0.5, -0.2], [-0.1, 0.3]])

# 卫星参数
SATELLITE_J1 = 1.0
SATELLITE_J2 = 0.1
SATELLITE_K = 0.91
SATELLITE_B = 0.0036
SATELLITE_H = 0.05
SATELLITE_FILTER_GAIN = 0.5
SATELLITE_FILTER_POLE = 0.005
SATELLITE_INPUT_WEIGHT = 0.1


# ---------------------------------------------------------------------------
# 三状态学术例子
# ---------------------------------------------------------------------------

def example_a_structure() -> UncertaintyStructure:
    """Δ = diag(δ₁I₂, Δ₂)"""
    return UncertaintyStructure((BlockSpec.repeated(2), BlockSpec.full(2, 2)))


def example_a_plant() -> Tuple[LftPlant, UncertaintyStructure]:
    """
    x₊ = [0, .5, −.3; δ₁, Δ₁₁, Δ₁₂; .1, Δ₂₁, Δ₂₂] x + [δ₁; 1; .5] u + d

    z = [u; x₁; x₂; x₃]，w = Δz；性能输出 e = [x; u/5]。
    """
    plant = LftPlant(
        A=np.array([[0.0, 0.5, -0.3], [0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]),
        B=np.array([[0.0], [1.0], [0.5]]),
        B_d=np.eye(3),
        B_w=np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]),
        C_e=np.vstack([np.eye(3), np.zeros((1, 3))]),
        D_eu=np.array([[0.0], [0.0], [0.0], [0.2]]),
        D_ed=np.zeros((4, 3)),
        C_z=np.vstack([np.zeros((1, 3)), np.eye(3)]),
        D_z=np.array([[1.0], [0.0], [0.0], [0.0]]),
        name="example_a",
    )
    return plant, example_a_structure()


def example_a_delta() -> np.ndarray:
    """真值 Δ_tr（4×4）"""
    return example_a_structure().compose([EXAMPLE_A_DELTA1, EXAMPLE_A_DELTA2])


def example_a_true_matrices() -> Tuple[np.ndarray, np.ndarray]:
    """真实系统的 (A, B)"""
    plant, _ = example_a_plant()
    closed = plant.close_uncertainty(example_a_delta())
    return closed.A, closed.B


def example_a_priors() -> List[MultiplierClass]:
    """P_rep(δ₁² ≤ 0.1) 与 P_full(Δ₂Δ₂ᵀ ⪯ 0.5I)"""
    bound1, bound2 = EXAMPLE_A_PRIOR_BOUNDS
    return [
        prior_repeated_scalar(np.array([[-1.0, 0.0], [0.0, bound1]]), 2, label="P1"),
        prior_full_block(np.diag([-1.0, -1.0, bound2, bound2]), nz=2, label="P2"),
    ]


def example_a_data_driven_plant() -> Tuple[LftPlant, UncertaintyStructure, np.ndarray]:
    """
    纯数据场景：A = 0, B = 0, B_w = I, C_z = [I; 0], D_z = [0; I]，Δ_tr = [A_tr, B_tr]。
    """
    A_tr, B_tr = example_a_true_matrices()
    base, _ = example_a_plant()
    plant = LftPlant(
        A=np.zeros((3, 3)), B=np.zeros((3, 1)), B_d=np.eye(3), B_w=np.eye(3),
        C_e=base.C_e, D_eu=base.D_eu, D_ed=base.D_ed,
        C_z=np.vstack([np.eye(3), np.zeros((1, 3))]),
        D_z=np.vstack([np.zeros((3, 1)), np.ones((1, 1))]),
        name="example_a_data",
    )
    return plant, UncertaintyStructure((BlockSpec.full(3, 4),)), np.hstack([A_tr, B_tr])


def example_a_noise_class(d_bar: float, N: int, n_d: int = 3) -> MultiplierClass:
    """Q_d = −I, S_d = 0, R_d = d̄² n_d N I"""
    return disturbance_quadratic(-np.eye(N), np.zeros((N, n_d)), d_bar ** 2 * n_d * N * np.eye(n_d),
                                 label=f"quad(d={d_bar:g})")


# ---------------------------------------------------------------------------
# 柔性卫星
# ---------------------------------------------------------------------------

def satellite_continuous() -> Dict[str, np.ndarray]:
    """
    连续 LFT：x = (θ₂, θ̇₂, θ₁, θ̇₁)，ẋ = A_c x + B_wc w + B_dc d̃，z = [x; u]，w = Δ_tr z。
    已知部分不含 u（输入只经 Δ 进入）。
    """
    A_c = np.zeros((4, 4))
    A_c[0, 1] = 1.0
    A_c[2, 3] = 1.0
    B_wc = np.zeros((4, 2))
    B_wc[1, 0] = 1.0
    B_wc[3, 1] = 1.0
    B_dc = np.array([[0.0], [1.0], [0.0], [0.0]])
    return {
        "A_c": A_c,
        "B_c": np.zeros((4, 1)),
        "B_wc": B_wc,
        "B_dc": B_dc,
        "C_z": np.vstack([np.eye(4), np.zeros((1, 4))]),
        "D_z": np.vstack([np.zeros((4, 1)), np.ones((1, 1))]),
    }


def satellite_delta(J1: float = SATELLITE_J1, J2: float = SATELLITE_J2,
                    k: float = SATELLITE_K, b: float = SATELLITE_B) -> np.ndarray:
    """2×5 的 Δ_tr"""
    return np.array([
        [-k / J2, -b / J2, k / J2, b / J2, 0.0],
        [k / J1, b / J1, -k / J1, -b / J1, 1.0 / J1],
    ])


def lowpass_filter_zoh(gain: float, pole: float, h: float) -> Tuple[float, float]:
    """w̃(s) = gain/(s + pole) 的 ZOH 离散化：x_f₊ = a x_f + b·输入"""
    a, integral = zoh_matrices(np.array([[-pole]]), h)
    return float(a[0, 0]), float(integral[0, 0] * gain)


@dataclass(frozen=True)
class WeightingFilter:
    """离散加权滤波器 x_f₊ = A1 x_f + A2 x + Bf u（输出为 x_f）"""
    A1: np.ndarray
    A2: np.ndarray
    Bf: np.ndarray

    @property
    def n(self) -> int:
        return self.A1.shape[0]


def augment_with_filter(plant: LftPlant, filt: WeightingFilter, C_e: np.ndarray, D_eu: np.ndarray,
                        name: str = "") -> LftPlant:
    """
    A = [A, 0; A2, A1]，B = [B; Bf]，B_w = [B_w; 0]，B_d = [B_d; 0]，C_z = [C_z, 0]，
    性能通道 (C_e, D_eu) 按增广状态给出，D_ed = 0。
    """
    n, nf = plant.n, filt.n
    A = np.block([[plant.A, np.zeros((n, nf))], [filt.A2, filt.A1]])
    C_e = np.atleast_2d(C_e)
    return LftPlant(
        A=A,
        B=np.vstack([plant.B, filt.Bf]),
        B_d=np.vstack([plant.B_d, np.zeros((nf, plant.n_d))]),
        B_w=np.vstack([plant.B_w, np.zeros((nf, plant.n_w))]),
        C_e=C_e,
        D_eu=np.atleast_2d(D_eu),
        D_ed=np.zeros((C_e.shape[0], plant.n_d)),
        C_z=np.hstack([plant.C_z, np.zeros((plant.n_z, nf))]),
        D_z=plant.D_z,
        name=name or f"{plant.name}+filter",
    )


def satellite_discrete(h: float = SATELLITE_H) -> LftPlant:
    """卫星 LFT 的 ZOH 离散化（不含滤波器，无性能通道）"""
    c = satellite_continuous()
    d = discretize_zoh(c["A_c"], c["B_c"], c["B_wc"], c["B_dc"], c["C_z"], c["D_z"], h)
    return LftPlant(
        A=d["A"], B=d["B"], B_d=d["B_d"], B_w=d["B_w"],
        C_e=np.zeros((0, 4)), D_eu=np.zeros((0, 1)), D_ed=np.zeros((0, 1)),
        C_z=d["C_z"], D_z=d["D_z"], name="satellite",
    )


def satellite_filter(h: float = SATELLITE_H) -> WeightingFilter:
    """w₁ 作用在 θ₂ 上"""
    a, b = lowpass_filter_zoh(SATELLITE_FILTER_GAIN, SATELLITE_FILTER_POLE, h)
    A2 = np.zeros((1, 4))
    A2[0, 0] = b
    return WeightingFilter(A1=np.array([[a]]), A2=A2, Bf=np.zeros((1, 1)))


def satellite_plant(h: float = SATELLITE_H) -> Tuple[LftPlant, UncertaintyStructure, np.ndarray]:
    """
    带 w₁ 滤波器的卫星系统（5 状态）：e = [w₁θ₂; w₂u]，C_e = [0 | 1; 0 | 0]，D_eu = [0; w₂]。

    Returns:
        (plant, structure, Δ_tr)
    """
    base = satellite_discrete(h)
    C_e = np.zeros((2, 5))
    C_e[0, 4] = 1.0
    D_eu = np.array([[0.0], [SATELLITE_INPUT_WEIGHT]])
    plant = augment_with_filter(base, satellite_filter(h), C_e, D_eu, name="satellite_weighted")
    return plant, UncertaintyStructure((BlockSpec.full(2, 5),)), satellite_delta()
