"""
LFT 模型测试 (LFT Model Test)

覆盖：维数 / 秩检查、数据矩阵组装、扩展状态构造、ZOH 离散化、性能指标。
"""

import os
import sys
import unittest

import numpy as np
from scipy import linalg

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from robsyn_core.benchmarks import example_a_delta, example_a_plant
from robsyn_core.errors import DimensionMismatchError, RankDeficientError
from robsyn_core.experiments import box_disturbance, generate_trajectory
from robsyn_core.lft_model import (
    BlockKind,
    BlockSpec,
    LftPlant,
    PerformanceIndex,
    Trajectory,
    UncertaintyStructure,
    arx_uncertainty,
    assemble_data_matrices,
    build_extended_state_plant,
    discretize_zoh,
    extended_state_trajectory,
    partition_gain,
    simulate_arx,
    validate_plant,
    zoh_matrices,
)


def scalar_plant(**changes) -> LftPlant:
    base = dict(A=0.0, B=0.0, B_d=1.0, B_w=1.0, C_e=np.zeros((0, 1)), D_eu=np.zeros((0, 1)),
                D_ed=np.zeros((0, 1)), C_z=1.0, D_z=0.0, name="scalar")
    base.update(changes)
    return LftPlant(**base)


class TestValidatePlant(unittest.TestCase):
    """维数与秩检查"""

    def test_example_a_is_valid(self):
        plant, structure = example_a_plant()
        validated = validate_plant(plant, structure)
        self.assertEqual(len(validated.B_blocks), 2)
        np.testing.assert_array_equal(validated.L[0], np.eye(4)[:, :2])
        np.testing.assert_array_equal(validated.R[1], np.eye(4)[:, 2:])

    def test_zero_disturbance_column_is_rank_deficient(self):
        plant, structure = example_a_plant()
        bad = plant.with_changes(B_d=np.hstack([np.eye(3), np.zeros((3, 1))]),
                                 D_ed=np.zeros((plant.n_e, 4)))
        with self.assertRaises(RankDeficientError) as ctx:
            validate_plant(bad, structure)
        self.assertEqual(ctx.exception.what, "B_d")

    def test_overlapping_selectors_are_rejected(self):
        plant = LftPlant(A=np.zeros((2, 2)), B=np.zeros((2, 1)), B_d=np.eye(2), B_w=np.eye(2),
                         C_e=np.zeros((0, 2)), D_eu=np.zeros((0, 1)), D_ed=np.zeros((0, 2)),
                         C_z=np.eye(2), D_z=np.zeros((2, 1)))
        structure = UncertaintyStructure((
            BlockSpec(BlockKind.FULL, 1, 1, w_index=(0,), z_index=(0,)),
            BlockSpec(BlockKind.FULL, 1, 1, w_index=(1,), z_index=(0,)),
        ))
        with self.assertRaises(DimensionMismatchError):
            validate_plant(plant, structure)

    def test_rank_deficient_block_input(self):
        plant = scalar_plant(B_w=np.array([[1.0, 1.0]]), C_z=np.ones((2, 1)), D_z=np.zeros((2, 1)))
        structure = UncertaintyStructure((BlockSpec.full(2, 2),))
        with self.assertRaises(RankDeficientError) as ctx:
            validate_plant(plant, structure)
        self.assertEqual(ctx.exception.what, "B_1")

    def test_repeated_block_requires_square(self):
        with self.assertRaises(DimensionMismatchError):
            BlockSpec(BlockKind.REPEATED, 2, 3)

    def test_compose_and_split(self):
        _, structure = example_a_plant()
        delta = example_a_delta()
        np.testing.assert_allclose(delta[:2, :2], 0.2 * np.eye(2))
        parts = structure.split(delta)
        np.testing.assert_allclose(parts[1], np.array([[0.5, -0.2], [-0.1, 0.3]]))


class TestDataMatrices(unittest.TestCase):
    """M = X₊ − AX − BU，Z = C_zX + D_zU"""

    def test_scalar_hand_example(self):
        traj = Trajectory(X=np.array([[1.0, 2.0, 6.0]]), U=np.zeros((1, 2)))
        data = assemble_data_matrices(scalar_plant(), traj)
        np.testing.assert_allclose(data.M, [[2.0, 6.0]])
        np.testing.assert_allclose(data.Z, [[1.0, 2.0]])

    def test_pure_data_driven_case(self):
        rng = np.random.default_rng(0)
        X, U = rng.standard_normal((2, 6)), rng.standard_normal((1, 5))
        plant = LftPlant(A=np.zeros((2, 2)), B=np.zeros((2, 1)), B_d=np.eye(2), B_w=np.eye(2),
                         C_e=np.zeros((0, 2)), D_eu=np.zeros((0, 1)), D_ed=np.zeros((0, 2)),
                         C_z=np.vstack([np.eye(2), np.zeros((1, 2))]), D_z=np.array([[0.0], [0.0], [1.0]]))
        data = assemble_data_matrices(plant, Trajectory(X=X, U=U))
        np.testing.assert_allclose(data.M, X[:, 1:])
        np.testing.assert_allclose(data.Z, np.vstack([X[:, :-1], U]))

    def test_residual_identity_with_recorded_disturbance(self):
        plant, _ = example_a_plant()
        delta = example_a_delta()
        traj = generate_trajectory(plant, delta, 50, seed=3, disturbance_law=box_disturbance(0.1))
        data = assemble_data_matrices(plant, traj)
        residual = data.M - plant.B_w @ delta @ data.Z - plant.B_d @ traj.D
        self.assertLess(np.max(np.abs(residual)), 1e-10)

    def test_exact_model_gives_zero_residual(self):
        plant, _ = example_a_plant()
        nominal = plant.close_uncertainty(example_a_delta())
        traj = generate_trajectory(nominal, None, 20, seed=1)
        data = assemble_data_matrices(nominal, traj)
        self.assertEqual(data.Z.shape, (0, 20))
        self.assertLess(np.max(np.abs(data.M)), 1e-12)

    def test_multiple_trajectories_are_stacked(self):
        plant, _ = example_a_plant()
        delta = example_a_delta()
        a = generate_trajectory(plant, delta, 10, seed=1)
        b = generate_trajectory(plant, delta, 7, seed=2)
        data = assemble_data_matrices(plant, [a, b])
        self.assertEqual(data.N, 17)
        np.testing.assert_allclose(data.M[:, 10:], assemble_data_matrices(plant, b).M)

    def test_dimension_mismatch(self):
        plant, _ = example_a_plant()
        with self.assertRaises(DimensionMismatchError):
            assemble_data_matrices(plant, Trajectory(X=np.zeros((2, 4)), U=np.zeros((1, 3))))

    def test_trajectory_column_counts(self):
        with self.assertRaises(DimensionMismatchError):
            Trajectory(X=np.zeros((2, 4)), U=np.zeros((1, 4)))


class TestExtendedState(unittest.TestCase):
    """ARX 扩展状态 LFT"""

    def test_first_order_structure(self):
        plant, structure = build_extended_state_plant(1, 1, 1, np.array([[1.0]]))
        np.testing.assert_array_equal(plant.A, np.zeros((2, 2)))
        np.testing.assert_array_equal(plant.B, [[1.0], [0.0]])
        np.testing.assert_array_equal(plant.B_w, [[0.0], [1.0]])
        np.testing.assert_array_equal(plant.B_d, [[0.0], [1.0]])
        np.testing.assert_array_equal(plant.C_z, np.vstack([np.eye(2), np.zeros((1, 2))]))
        np.testing.assert_array_equal(plant.D_z, [[0.0], [0.0], [1.0]])
        self.assertEqual((structure.n_w, structure.n_z), (1, 3))

    def test_second_order_dimensions(self):
        plant, structure = build_extended_state_plant(2, 1, 1, np.array([[1.0]]))
        self.assertEqual(plant.n, 4)
        self.assertEqual((structure.n_w, structure.n_z), (1, 5))

    def test_recursion_matches_arx_simulation(self):
        rng = np.random.default_rng(7)
        n, m, p, T = 2, 2, 1, 40
        A_coeffs = [0.3 * rng.standard_normal((p, p)) for _ in range(n)]
        B_coeffs = [rng.standard_normal((p, m)) for _ in range(n + 1)]
        B_d0 = np.array([[1.0]])
        u, d = rng.uniform(-1, 1, (m, T)), rng.uniform(-0.1, 0.1, (1, T))
        y = simulate_arx(A_coeffs, B_coeffs, u, d, B_d0)

        plant, _ = build_extended_state_plant(n, m, p, B_d0)
        data = assemble_data_matrices(plant, extended_state_trajectory(u, y, n))
        delta = arx_uncertainty(A_coeffs, B_coeffs)
        residual = data.M - plant.B_w @ delta @ data.Z - plant.B_d @ d[:, n:T]
        self.assertLess(np.max(np.abs(residual)), 1e-10)

    def test_gain_partition(self):
        K = np.arange(4.0).reshape(1, 4)
        parts = partition_gain(K, 2, 1, 1)
        # K = [K_2ᵘ K_1ᵘ K_2ʸ K_1ʸ]
        self.assertEqual(float(parts["Ku"][0][0, 0]), 1.0)
        self.assertEqual(float(parts["Ku"][1][0, 0]), 0.0)
        self.assertEqual(float(parts["Ky"][0][0, 0]), 3.0)
        self.assertEqual(float(parts["Ky"][1][0, 0]), 2.0)


class TestDiscretization(unittest.TestCase):
    """ZOH 离散化"""

    def test_double_integrator(self):
        A_c = np.array([[0.0, 1.0], [0.0, 0.0]])
        out = discretize_zoh(A_c, np.array([[0.0], [1.0]]), np.zeros((2, 1)), np.zeros((2, 1)),
                             np.zeros((1, 2)), np.zeros((1, 1)), 0.05)
        np.testing.assert_allclose(out["A"], [[1.0, 0.05], [0.0, 1.0]], atol=1e-14)
        np.testing.assert_allclose(out["B"], [[0.00125], [0.05]], atol=1e-14)

    def test_zero_dynamics(self):
        B_c = np.array([[1.0], [2.0]])
        out = discretize_zoh(np.zeros((2, 2)), B_c, B_c, B_c, np.eye(2), np.zeros((2, 1)), 0.3)
        np.testing.assert_allclose(out["A"], np.eye(2))
        np.testing.assert_allclose(out["B"], 0.3 * B_c)
        np.testing.assert_allclose(out["C_z"], np.eye(2))

    def test_half_steps_compose(self):
        rng = np.random.default_rng(2)
        A_c = rng.standard_normal((3, 3))
        h = 0.2
        A_full, I_full = zoh_matrices(A_c, h)
        A_half, I_half = zoh_matrices(A_c, h / 2)
        np.testing.assert_allclose(A_half @ A_half, A_full, atol=1e-10)
        np.testing.assert_allclose(A_half @ I_half + I_half, I_full, atol=1e-10)
        np.testing.assert_allclose(A_full, linalg.expm(A_c * h), atol=1e-12)

    def test_nonpositive_step(self):
        with self.assertRaises(ValueError):
            zoh_matrices(np.eye(2), 0.0)


class TestPerformanceIndex(unittest.TestCase):
    """二次性能指标与对偶"""

    def test_hinf_dual(self):
        index = PerformanceIndex.hinf(2.0, 1, 1)
        np.testing.assert_allclose(index.P_tilde, [[-1.0, 0.0], [0.0, 0.25]])

    def test_passivity_dual(self):
        index = PerformanceIndex.passivity(1)
        # P_p⁻¹ = [[0, −1], [−1, 0]]
        np.testing.assert_allclose(index.P_tilde, [[0.0, -1.0], [-1.0, 0.0]])

    def test_singular_index_rejected(self):
        with self.assertRaises(RankDeficientError):
            PerformanceIndex(np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1))


if __name__ == "__main__":
    unittest.main()
