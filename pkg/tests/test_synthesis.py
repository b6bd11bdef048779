"""
控制器综合测试 (Controller Synthesis Test)

需要求解器的用例在 cvxpy 不可用时跳过；输入检查类用例不依赖求解器。
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import linalg

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from robsyn_core.analysis import ClosedLoop, h2_norm, hinf_grid_peak, hinf_norm, spectral_radius, verify_robust
from robsyn_core.benchmarks import (
    EXAMPLE_A_PRIOR_BOUNDS,
    example_a_delta,
    example_a_noise_class,
    example_a_plant,
    example_a_priors,
)
from robsyn_core.conic_backend import CVXPY_AVAILABLE
from robsyn_core.errors import DimensionMismatchError, RankDeficientError
from robsyn_core.experiments import box_disturbance, example_a_trajectory
from robsyn_core.lft_model import (
    LftPlant,
    PerformanceIndex,
    assemble_data_matrices,
    build_extended_state_plant,
    simulate_arx,
)
from robsyn_core.multiplier_engine import (
    Member,
    certify_membership,
    combine,
    disturbance_quadratic,
    learn_from_data,
    prior_full_block,
    sum_classes,
    transform_prior,
    zero_class,
)
from robsyn_core.synthesis import (
    NonlinearMultiplierSpec,
    synthesize_h2,
    synthesize_hinf,
    synthesize_output_feedback,
    synthesize_quadratic_performance,
    synthesize_stabilizing,
)


def scalar_plant(a=0.5, b=0.0, **changes) -> LftPlant:
    """x₊ = a x + b u + d，e = x，不确定性通道为零维"""
    base = dict(A=a, B=b, B_d=1.0, B_w=np.zeros((1, 0)), C_e=1.0, D_eu=0.0, D_ed=0.0,
                C_z=np.zeros((0, 1)), D_z=np.zeros((0, 1)), name="scalar")
    base.update(changes)
    return LftPlant(**base)


def random_controllable_pair(rng: np.random.Generator, n: int = 2, radius: float = 1.2):
    """随机 (A, B)，可控性矩阵的最小奇异值不小于 0.2"""
    while True:
        A = rng.uniform(-1.0, 1.0, (n, n))
        rho = spectral_radius(A)
        if rho < 0.2:
            continue
        A *= radius * rng.uniform(0.3, 1.0) / rho
        B = rng.uniform(-1.0, 1.0, (n, 1))
        ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)])
        if np.linalg.svd(ctrb, compute_uv=False)[-1] > 0.2:
            return A, B


def weighted_state_plant(A: np.ndarray, B: np.ndarray, name: str = "lq") -> LftPlant:
    """x₊ = Ax + Bu + d，e = [x; u]，不确定性通道为零维"""
    n = A.shape[0]
    return LftPlant(A=A, B=B, B_d=np.eye(n), B_w=np.zeros((n, 0)),
                    C_e=np.vstack([np.eye(n), np.zeros((1, n))]), D_eu=np.vstack([np.zeros((n, 1)), np.ones((1, 1))]),
                    D_ed=np.zeros((n + 1, n)), C_z=np.zeros((0, n)), D_z=np.zeros((0, 1)), name=name)


def uncertain_scalar_plant(a: float, b: float, c: float) -> LftPlant:
    """x₊ = ax + bu + d + w，w = δ·cx，e = [x; u]"""
    return LftPlant(A=a, B=b, B_d=1.0, B_w=1.0, C_e=np.array([[1.0], [0.0]]), D_eu=np.array([[0.0], [1.0]]),
                    D_ed=np.zeros((2, 1)), C_z=c, D_z=0.0, name="uncertain_scalar")



class TestInputChecks(unittest.TestCase):
    """不需要求解器的输入检查"""

    def test_multiplier_dimension_mismatch(self):
        plant, _ = example_a_plant()
        with self.assertRaises(DimensionMismatchError):
            synthesize_h2(plant, zero_class(3, 3))

    def test_h2_requires_zero_feedthrough(self):
        with self.assertRaises(ValueError):
            synthesize_h2(scalar_plant(D_ed=1.0))

    def test_hinf_requires_performance_channel(self):
        plant = scalar_plant(C_e=np.zeros((0, 1)), D_eu=np.zeros((0, 1)), D_ed=np.zeros((0, 1)))
        with self.assertRaises(DimensionMismatchError):
            synthesize_hinf(plant)

    def test_missing_nonlinear_multiplier(self):
        plant = scalar_plant(b=1.0, B_wp=1.0, C_zp=1.0)
        with self.assertRaises(ValueError):
            synthesize_quadratic_performance(plant, None, PerformanceIndex.hinf(2.0, 1, 1))

    def test_performance_index_dimensions(self):
        with self.assertRaises(DimensionMismatchError):
            synthesize_quadratic_performance(scalar_plant(), None, PerformanceIndex.hinf(2.0, 2, 1))

    def test_output_feedback_rank_deficient_data(self):
        u = np.zeros((1, 30))
        y = np.zeros((1, 30))
        with self.assertRaises(RankDeficientError) as ctx:
            synthesize_output_feedback(u, y, 1, np.eye(1),
                                       lambda N, n_d: disturbance_quadratic(-np.eye(N), None, np.eye(n_d)))
        self.assertEqual(ctx.exception.what, "Z")

    def test_output_feedback_objective(self):
        with self.assertRaises(ValueError):
            synthesize_output_feedback(np.ones((1, 5)), np.ones((1, 5)), 1, np.eye(1),
                                       disturbance_quadratic(-np.eye(4), None, np.eye(1)), objective="h3")


@unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
class TestNominalSynthesis(unittest.TestCase):
    """无不确定性时与解析结果对照"""

    def test_scalar_hinf(self):
        result = synthesize_hinf(scalar_plant())
        self.assertAlmostEqual(result.gamma, 2.0, delta=2e-3)

    def test_scalar_hinf_bisection(self):
        result = synthesize_hinf(scalar_plant(), method="bisection", tol=1e-4)
        self.assertAlmostEqual(result.gamma, 2.0, delta=2e-3)
        self.assertLessEqual(result.details["gamma_lower"], result.gamma)

    def test_scalar_hinf_refined(self):
        result = synthesize_hinf(scalar_plant(), method="refined", tol=1e-4)
        self.assertAlmostEqual(result.gamma, 2.0, delta=2e-3)
        self.assertLessEqual(result.gamma, result.details["gamma_mu"])
        self.assertEqual(result.kind, "hinf")

    def test_scalar_h2(self):
        result = synthesize_h2(scalar_plant())
        self.assertAlmostEqual(result.gamma, 2.0 / math.sqrt(3.0), delta=1e-3)

    def test_h2_matches_riccati(self):
        A = np.array([[1.1, 0.2], [0.0, 0.9]])
        B = np.array([[0.0], [1.0]])
        plant = LftPlant(A=A, B=B, B_d=np.eye(2), B_w=np.zeros((2, 0)),
                         C_e=np.vstack([np.eye(2), np.zeros((1, 2))]), D_eu=np.array([[0.0], [0.0], [1.0]]),
                         D_ed=np.zeros((3, 2)), C_z=np.zeros((0, 2)), D_z=np.zeros((0, 1)), name="lq")
        P = linalg.solve_discrete_are(A, B, np.eye(2), np.eye(1))
        result = synthesize_h2(plant)
        self.assertAlmostEqual(result.gamma, math.sqrt(np.trace(P)), delta=2e-3 * math.sqrt(np.trace(P)))
        cl = ClosedLoop.from_plant(plant, result.K)
        self.assertLess(spectral_radius(cl.A), 1.0)
        self.assertLessEqual(h2_norm(cl), result.gamma * (1.0 + 1e-6))
        self.assertLess(result.reconstruction_error, 1e-6)

    def test_h2_matches_riccati_on_random_plants(self):
        rng = np.random.default_rng(11)
        for k in range(20):
            A, B = random_controllable_pair(rng)
            P = linalg.solve_discrete_are(A, B, np.eye(2), np.eye(1))
            expected = math.sqrt(np.trace(P))
            result = synthesize_h2(weighted_state_plant(A, B, name=f"lq{k}"))
            self.assertAlmostEqual(result.gamma, expected, delta=1e-3 * expected, msg=f"plant {k}")

    def test_hinf_matches_closed_loop_norm_on_random_plants(self):
        """静态状态反馈 H∞ 综合是精确的：闭环范数既不超过 γ，也不会明显低于 γ"""
        rng = np.random.default_rng(12)
        for k in range(20):
            A, B = random_controllable_pair(rng)
            result = synthesize_hinf(weighted_state_plant(A, B, name=f"hinf{k}"))
            cl = ClosedLoop.from_plant(weighted_state_plant(A, B), result.K)
            self.assertLess(spectral_radius(cl.A), 1.0)
            self.assertLessEqual(hinf_grid_peak(cl), result.gamma * (1.0 + 1e-6), msg=f"plant {k}")
            self.assertAlmostEqual(hinf_norm(cl), result.gamma, delta=1e-2 * result.gamma, msg=f"plant {k}")


    def test_exact_model_bound(self):
        plant, _ = example_a_plant()
        nominal = plant.close_uncertainty(example_a_delta())
        result = synthesize_h2(nominal)
        self.assertAlmostEqual(result.gamma, 1.93, delta=0.02 * 1.93)


@unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
class TestRobustSynthesis(unittest.TestCase):
    """先验 + 数据的鲁棒综合"""

    def setUp(self):
        self.plant, self.structure = example_a_plant()
        self.prior = transform_prior(self.structure, self.plant.B_w, example_a_priors())

    def _combined(self, d_bar=0.05, N=50):
        traj = example_a_trajectory(d_bar, N, seed=1)
        data = assemble_data_matrices(self.plant, traj)
        learnt = learn_from_data(data, self.plant.B_d, example_a_noise_class(d_bar, N))
        return combine(self.prior, learnt), data

    def test_data_tightens_prior_bound(self):
        prior_only = synthesize_h2(self.plant, self.prior)
        combined, _ = self._combined()
        both = synthesize_h2(self.plant, combined)
        self.assertLessEqual(both.gamma, prior_only.gamma * (1.0 + 1e-4))

    def test_bound_holds_on_true_system(self):
        combined, data = self._combined()
        result = synthesize_h2(self.plant, combined)
        cl = ClosedLoop.from_plant(self.plant, result.K, example_a_delta())
        self.assertLess(spectral_radius(cl.A), 1.0)
        self.assertLessEqual(h2_norm(cl), result.gamma * (1.0 + 1e-6))

        law = box_disturbance(0.05)
        report = verify_robust(self.plant, result.K, combined, result.gamma, "h2", self.structure,
                               list(EXAMPLE_A_PRIOR_BOUNDS), data, lambda rng: law(rng, 3, data.N),
                               example_a_delta(), count=10, seed=2)
        self.assertEqual(len(report.violations), 0)
        self.assertGreaterEqual(report.count("true"), 1)

    def test_stabilizing(self):
        combined, _ = self._combined()
        result = synthesize_stabilizing(self.plant, combined)
        self.assertIsNone(result.gamma)
        cl = ClosedLoop.from_plant(self.plant, result.K, example_a_delta())
        self.assertLess(spectral_radius(cl.A), 1.0)


@unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
class TestSoundness(unittest.TestCase):
    """保证界对集合内每个 Δ 都成立；加入乘子类只会让界变紧"""

    def test_bound_holds_for_every_member(self):
        rng = np.random.default_rng(21)
        radius = 0.5
        prior = prior_full_block(np.diag([-1.0, radius ** 2]), nz=1)
        cases = 0
        for k in range(10):
            plant = uncertain_scalar_plant(rng.uniform(0.6, 1.4), rng.uniform(0.5, 1.5), rng.uniform(0.3, 0.8))
            result = synthesize_h2(plant, prior)
            for delta in np.linspace(-radius, radius, 5):
                delta = np.array([[delta]])
                self.assertIsInstance(certify_membership(plant.B_w @ delta, prior), Member)
                cl = ClosedLoop.from_plant(plant, result.K, delta)
                self.assertLess(spectral_radius(cl.A), 1.0, msg=f"plant {k}, δ={delta[0, 0]:g}")
                self.assertLessEqual(h2_norm(cl), result.gamma * (1.0 + 1e-6), msg=f"plant {k}, δ={delta[0, 0]:g}")
                cases += 1
        self.assertGreaterEqual(cases, 50)

    def test_adding_classes_never_increases_bound(self):
        plant, structure = example_a_plant()
        prior = transform_prior(structure, plant.B_w, example_a_priors())
        learnt = []
        for seed in (1, 2):
            traj = example_a_trajectory(0.05, 40, seed=seed)
            data = assemble_data_matrices(plant, traj)
            learnt.append(learn_from_data(data, plant.B_d, example_a_noise_class(0.05, 40)))

        gammas = [synthesize_h2(plant, prior).gamma,
                  synthesize_h2(plant, sum_classes(prior, learnt[0])).gamma,
                  synthesize_h2(plant, sum_classes(prior, learnt[0], learnt[1])).gamma]
        for wider, narrower in zip(gammas, gammas[1:]):
            self.assertLessEqual(narrower, wider * (1.0 + 1e-4))


@unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
class TestNonlinearChannel(unittest.TestCase):
    """带范数有界非线性通道的 H∞ 综合"""

    def _plant(self, with_nonlinear: bool) -> LftPlant:
        changes = dict(C_e=np.array([[1.0], [0.0]]), D_eu=np.array([[0.0], [1.0]]), D_ed=np.zeros((2, 1)))
        if with_nonlinear:
            changes.update(B_wp=1.0, C_zp=1.0)
        return scalar_plant(b=1.0, **changes)

    def test_nonlinearity_costs_performance(self):
        linear = synthesize_hinf(self._plant(False))
        spec = NonlinearMultiplierSpec.norm_bound(0.1, 1, 1)
        result = synthesize_hinf(self._plant(True), nonlinear=spec)
        self.assertGreaterEqual(result.gamma, linear.gamma * (1.0 - 1e-3))
        eig = np.linalg.eigvalsh(result.nonlinear_multiplier.P)
        self.assertLess(eig[0], 0.0)
        self.assertGreater(eig[-1], 0.0)

    def test_closed_loop_gain_with_zero_nonlinearity(self):
        plant = self._plant(True)
        result = synthesize_hinf(plant, nonlinear=NonlinearMultiplierSpec.norm_bound(0.1, 1, 1))
        cl = ClosedLoop.from_plant(plant, result.K)
        self.assertLess(spectral_radius(cl.A), 1.0)
        self.assertLessEqual(hinf_grid_peak(cl), result.gamma * (1.0 + 1e-6))


@unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
class TestOutputFeedback(unittest.TestCase):
    """ARX 数据 → 动态输出反馈"""

    def test_first_order_arx(self):
        rng = np.random.default_rng(3)
        A_coeffs = [np.array([[1.2]])]
        B_coeffs = [np.array([[0.0]]), np.array([[1.0]])]
        T = 60
        u = rng.uniform(-1.0, 1.0, (1, T))
        d = rng.uniform(-1e-3, 1e-3, (1, T))
        y = simulate_arx(A_coeffs, B_coeffs, u, d, np.eye(1))

        def factory(N, n_d):
            return disturbance_quadratic(-np.eye(N), None, 1e-6 * N * np.eye(n_d))

        result = synthesize_output_feedback(u, y, 1, np.eye(1), factory)
        self.assertEqual(set(result.controller), {"Ku", "Ky"})
        self.assertEqual(result.details["Z_rank"], 3.0)

        plant, _ = build_extended_state_plant(1, 1, 1, np.eye(1))
        delta_true = np.array([[1.0, 1.2, 0.0]])
        cl = ClosedLoop.from_plant(plant, result.K, delta_true)
        self.assertLess(spectral_radius(cl.A), 1.0)


if __name__ == "__main__":
    unittest.main()
