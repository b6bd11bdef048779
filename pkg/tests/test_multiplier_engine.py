"""
乘子引擎测试 (Multiplier Engine Test)

覆盖：各构造器的取值、合同变换、数据学习乘子的不变式、
成员判定（真值 Δ̃ 必须属于组合集合）、变换后先验集合的正反两个方向，
以及需要求解器的定性检查与采样。
"""

import math
import os
import sys
import unittest

import numpy as np

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from robsyn_core.analysis import sample_prior_delta
from robsyn_core.benchmarks import (
    EXAMPLE_A_PRIOR_BOUNDS,
    example_a_delta,
    example_a_noise_class,
    example_a_plant,
    example_a_priors,
)
from robsyn_core.conic_backend import CVXPY_AVAILABLE
from robsyn_core.errors import AsymmetricMatrixError, DimensionMismatchError
from robsyn_core.experiments import box_disturbance, generate_trajectory
from robsyn_core.lft_model import assemble_data_matrices
from robsyn_core.lmi_compiler import svec, symmetric_basis_map
from robsyn_core.multiplier_engine import (
    Member,
    MultiplierClass,
    NotMemberWitness,
    ParameterBlock,
    ParamKind,
    assumption_definiteness_check,
    certify_membership,
    combine,
    disturbance_convex_hull,
    disturbance_diagonal,
    disturbance_quadratic,
    infinity_ball_vertices,
    learn_from_data,
    nonlinear_norm_bound,
    prior_full_block,
    prior_repeated_scalar,
    sample_feasible,
    sum_classes,
    toeplitz_difference,
    transform_prior,
    zero_class,
)


def example_a_setup(N=30, d_bar=0.1, seed=4):
    plant, structure = example_a_plant()
    delta = example_a_delta()
    traj = generate_trajectory(plant, delta, N, seed=seed, disturbance_law=box_disturbance(d_bar))
    data = assemble_data_matrices(plant, traj)
    return plant, structure, delta, traj, data


class TestConstructors(unittest.TestCase):
    """构造器取值"""

    def test_full_block_scalar(self):
        c = prior_full_block(np.diag([-1.0, 0.25]), nz=1)
        self.assertEqual((c.upper, c.lower, c.n_params), (1, 1, 1))
        self.assertAlmostEqual(float(c.quadratic_form([1.0], [[0.5]])[0, 0]), 0.0)
        self.assertGreater(float(c.quadratic_form([1.0], [[0.4]])[0, 0]), 0.0)
        self.assertLess(float(c.quadratic_form([1.0], [[0.6]])[0, 0]), 0.0)

    def test_full_block_requires_symmetric(self):
        with self.assertRaises(AsymmetricMatrixError):
            prior_full_block(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_full_block_odd_dimension_needs_nz(self):
        with self.assertRaises(DimensionMismatchError):
            prior_full_block(np.eye(3))

    def test_repeated_scalar_kron(self):
        h = np.array([[-1.0, 0.0], [0.0, 0.1]])
        c = prior_repeated_scalar(h, 2)
        self.assertEqual(c.n_params, 3)
        np.testing.assert_allclose(c.evaluate(svec(np.eye(2))), np.diag([-1.0, -1.0, 0.1, 0.1]))

    def test_diagonal_class(self):
        c = disturbance_diagonal(0.5, N=2, n_d=1)
        np.testing.assert_allclose(c.evaluate([1.0, 2.0]), np.diag([-1.0, -2.0, 0.75]))

    def test_quadratic_requires_negative_semidefinite_q(self):
        with self.assertRaises(ValueError):
            disturbance_quadratic(np.eye(2), None, np.eye(1))

    def test_vertices(self):
        vertices = infinity_ball_vertices(0.1, 1, 3)
        self.assertEqual(len(vertices), 8)
        self.assertTrue(all(np.max(np.abs(v)) == 0.1 for v in vertices))
        with self.assertRaises(ValueError):
            infinity_ball_vertices(0.1, 3, 6)

    def test_convex_hull_feasibility(self):
        c = disturbance_convex_hull(infinity_ball_vertices(1.0, 1, 2))
        self.assertTrue(c.is_feasible(svec(np.diag([-1.0, -1.0, 2.0]))))
        self.assertFalse(c.is_feasible(svec(np.diag([-1.0, -1.0, 1.0]))))

    def test_toeplitz_kernel(self):
        T = toeplitz_difference(5)
        np.testing.assert_allclose(np.ones((2, 5)) @ T, np.zeros((2, 4)))
        with self.assertRaises(ValueError):
            toeplitz_difference(3, period=3)

    def test_nonlinear_norm_bound(self):
        c = nonlinear_norm_bound(2.0, 1, 1)
        np.testing.assert_allclose(c.evaluate([1.0]), np.diag([-1.0, 4.0]))


class TestCombination(unittest.TestCase):
    """组合与变换"""

    def test_identity_transform(self):
        c = prior_repeated_scalar(np.array([[-1.0, 0.0], [0.0, 0.3]]), 2)
        same = c.transform(np.eye(4), 2, 2)
        theta = svec(np.array([[2.0, 0.5], [0.5, 1.0]]))
        np.testing.assert_allclose(same.evaluate(theta), c.evaluate(theta))

    def test_sum_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            sum_classes(zero_class(1, 1), zero_class(2, 1))

    def test_sum_adds_values(self):
        a = prior_full_block(np.diag([-1.0, 1.0]), nz=1)
        b = prior_full_block(np.diag([-2.0, 3.0]), nz=1)
        s = sum_classes(a, b)
        self.assertEqual(s.n_params, 2)
        np.testing.assert_allclose(s.evaluate([1.0, 2.0]), np.diag([-5.0, 7.0]))

    def test_prior_dimensions(self):
        plant, structure = example_a_plant()
        prior = transform_prior(structure, plant.B_w, example_a_priors())
        self.assertEqual((prior.upper, prior.lower), (4, 3))

    def test_prior_class_count(self):
        plant, structure = example_a_plant()
        with self.assertRaises(DimensionMismatchError):
            transform_prior(structure, plant.B_w, example_a_priors()[:1])

    def test_learnt_identity(self):
        plant, _, delta, traj, data = example_a_setup()
        c_d = example_a_noise_class(0.1, data.N)
        learnt = learn_from_data(data, plant.B_d, c_d)
        self.assertEqual((learnt.upper, learnt.lower), (4, 3))
        delta_tilde = plant.B_w @ delta
        Phi_d = np.vstack([traj.D.T, np.eye(plant.n_d)])
        expected = plant.B_d @ Phi_d.T @ c_d.evaluate([1.0]) @ Phi_d @ plant.B_d.T
        np.testing.assert_allclose(learnt.quadratic_form([1.0], delta_tilde), expected, atol=1e-9)

    def test_learnt_rejects_wrong_disturbance_rows(self):
        plant, _, _, _, data = example_a_setup()
        c_d = example_a_noise_class(0.1, data.N)
        with self.assertRaises(DimensionMismatchError):
            learn_from_data(data, np.vstack([plant.B_d, plant.B_d]), c_d)
        with self.assertRaises(DimensionMismatchError):
            learn_from_data(data, plant.B_d.ravel(), c_d)

    def test_combine_with_delta_extra(self):
        plant, structure = example_a_plant()
        extra = prior_full_block(np.diag([-1.0] * 4 + [10.0] * 4), nz=4)
        com = combine(None, None, extra=[(extra, "delta")], B_w=plant.B_w)
        self.assertEqual((com.upper, com.lower), (4, 3))
        with self.assertRaises(ValueError):
            combine(None, None)


class TestMembership(unittest.TestCase):
    """成员判定"""

    def test_true_delta_is_member_of_learnt_set(self):
        plant, _, delta, _, data = example_a_setup()
        learnt = learn_from_data(data, plant.B_d, example_a_noise_class(0.1, data.N))
        verdict = certify_membership(plant.B_w @ delta, learnt)
        self.assertIsInstance(verdict, Member)
        self.assertTrue(verdict)

    def test_far_delta_is_rejected(self):
        plant, _, delta, _, data = example_a_setup()
        learnt = learn_from_data(data, plant.B_d, example_a_noise_class(0.1, data.N))
        verdict = certify_membership(plant.B_w @ delta + 5.0, learnt)
        self.assertIsInstance(verdict, NotMemberWitness)
        self.assertFalse(verdict)
        self.assertLess(verdict.margin, 0.0)

    def test_true_delta_is_member_of_prior_set(self):
        plant, structure = example_a_plant()
        prior = transform_prior(structure, plant.B_w, example_a_priors())
        self.assertTrue(certify_membership(plant.B_w @ example_a_delta(), prior))

    def test_prior_violation_has_witness(self):
        plant, structure = example_a_plant()
        prior = transform_prior(structure, plant.B_w, example_a_priors())
        delta = example_a_delta()
        delta[:2, :2] = 0.5 * np.eye(2)
        verdict = certify_membership(plant.B_w @ delta, prior)
        self.assertIsInstance(verdict, NotMemberWitness)
        self.assertTrue(prior.is_feasible(verdict.theta))

    def test_scalar_member_is_certified(self):
        c = prior_full_block(np.diag([-1.0, 0.25]), nz=1)
        verdict = certify_membership(np.array([[0.4]]), c)
        self.assertIsInstance(verdict, Member)
        self.assertTrue(verdict.certified)
        self.assertIn("lambda", verdict.details)

    def test_negative_choi_bound_without_witness_is_not_certified(self):
        """Λ ↦ tr(Λ)I − Λ 在所有 vvᵀ 上半正定，但 Choi 矩阵有负特征值"""
        basis = symmetric_basis_map(2).toarray()
        cols = []
        for k in range(basis.shape[1]):
            E = basis[:, k].reshape(2, 2, order="F")
            G = np.zeros((3, 3))
            G[1:, 1:] = np.trace(E) * np.eye(2) - E
            cols.append(G.flatten(order="F"))
        c = MultiplierClass(1, 2, (ParameterBlock("L", ParamKind.PSD, 2),), np.column_stack(cols))
        verdict = certify_membership(np.zeros((2, 1)), c)
        self.assertIsInstance(verdict, Member)
        self.assertFalse(verdict.certified)
        self.assertLess(verdict.details["L.choi_bound"], -0.1)
        self.assertAlmostEqual(verdict.margin, 0.0, places=6)


class TestPriorSets(unittest.TestCase):
    """变换后先验集合与原结构化集合一致；重复标量块只接受标量"""

    def setUp(self):
        self.plant, self.structure = example_a_plant()
        self.prior = transform_prior(self.structure, self.plant.B_w, example_a_priors())

    def test_prior_samples_are_members(self):
        rng = np.random.default_rng(31)
        for k in range(200):
            delta = sample_prior_delta(self.structure, EXAMPLE_A_PRIOR_BOUNDS, rng)
            verdict = certify_membership(self.plant.B_w @ delta, self.prior)
            self.assertIsInstance(verdict, Member, msg=f"sample {k}")

    def test_samples_outside_prior_are_rejected(self):
        rng = np.random.default_rng(32)
        bound1, bound2 = EXAMPLE_A_PRIOR_BOUNDS
        for k in range(40):
            delta1, delta2 = self.structure.split(sample_prior_delta(self.structure, EXAMPLE_A_PRIOR_BOUNDS, rng))
            delta1 = float(delta1[0, 0])
            scale = rng.uniform(1.2, 3.0)
            if k % 2:
                delta1 = math.copysign(math.sqrt(scale * bound1), delta1 if delta1 else 1.0)
            else:
                G = rng.standard_normal((2, 2))
                delta2 = math.sqrt(scale * bound2) * G / np.linalg.norm(G, 2)
            delta = self.structure.compose([delta1, delta2])
            verdict = certify_membership(self.plant.B_w @ delta, self.prior)
            self.assertIsInstance(verdict, NotMemberWitness, msg=f"sample {k}")
            self.assertTrue(self.prior.is_feasible(verdict.theta))

    def test_repeated_block_rejects_non_scalar(self):
        c = prior_repeated_scalar(np.array([[-1.0, 0.0], [0.0, 0.1]]), 2)
        rng = np.random.default_rng(33)
        for k in range(30):
            N = rng.standard_normal((2, 2))
            N -= 0.5 * np.trace(N) * np.eye(2)
            delta = rng.uniform(-0.2, 0.2) * np.eye(2) + 0.1 * N / np.linalg.norm(N, 2)
            self.assertIsInstance(certify_membership(delta, c), NotMemberWitness, msg=f"sample {k}")

    def test_repeated_block_accepts_scalar(self):
        c = prior_repeated_scalar(np.array([[-1.0, 0.0], [0.0, 0.1]]), 2)
        for value in np.linspace(-0.3, 0.3, 7):
            verdict = certify_membership(value * np.eye(2), c)
            self.assertIsInstance(verdict, Member)
            self.assertTrue(verdict.certified)


class TestDefiniteness(unittest.TestCase):
    """定性条件"""

    def test_trivial_cases(self):
        self.assertTrue(assumption_definiteness_check(zero_class(0, 2)))
        self.assertFalse(assumption_definiteness_check(zero_class(2, 2)))

    @unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
    def test_learnt_class_with_rich_data(self):
        plant, _, _, _, data = example_a_setup(N=40)
        learnt = learn_from_data(data, plant.B_d, example_a_noise_class(0.1, data.N))
        self.assertTrue(assumption_definiteness_check(learnt))

    @unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
    def test_prior_class(self):
        plant, structure = example_a_plant()
        prior = transform_prior(structure, plant.B_w, example_a_priors())
        self.assertTrue(assumption_definiteness_check(prior))

    @unittest.skipUnless(CVXPY_AVAILABLE, "需要 cvxpy")
    def test_samples_are_feasible(self):
        c = disturbance_diagonal(0.5, N=3, n_d=1)
        samples = sample_feasible(c, np.random.default_rng(0), count=3)
        self.assertEqual(len(samples), 3)
        for theta in samples:
            self.assertTrue(c.is_feasible(theta, tol=1e-6))


if __name__ == "__main__":
    unittest.main()
