"""
数值研究与基准系统测试 (Experiments & Benchmarks Test)

只覆盖不需要求解器的部分：数据生成、基准系统、乘子选择解析、
问题文件流水线的前半段以及命令行的错误出口。
"""

import math
import os
import sys
import tempfile
import unittest

import numpy as np
from scipy import linalg

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import main
from robsyn_core.benchmarks import (
    SATELLITE_FILTER_GAIN,
    SATELLITE_FILTER_POLE,
    SATELLITE_H,
    example_a_data_driven_plant,
    example_a_delta,
    example_a_plant,
    example_a_true_matrices,
    lowpass_filter_zoh,
    satellite_continuous,
    satellite_delta,
    satellite_discrete,
    satellite_plant,
)
from robsyn_core.config import SolverSettings
from robsyn_core.experiments import (
    ExperimentConfig,
    ball_disturbance,
    box_disturbance,
    build_problem_multipliers,
    disturbance_class_for,
    generate_trajectory,
    STUDIES,
    parse_multiplier_choice,
    run_studies,
    satellite_bode,
    satellite_data_diagnostics,
    satellite_trajectory,
    simulate_problem,
)
from robsyn_core.lft_model import assemble_data_matrices
from robsyn_core.problem_io import parse_problem

SCALAR_PROBLEM = {
    "name": "scalar",
    "plant": {"A": [[0.5]], "B": [[1.0]], "B_d": [[1.0]], "B_w": [[1.0]],
              "C_z": [[1.0]], "D_z": [[0.0]], "C_e": [[1.0]]},
    "uncertainty_blocks": [{"kind": "full", "nw": 1, "nz": 1}],
    "prior_multipliers": [{"type": "norm_bound", "bound": 0.04}],
    "delta_true": [[0.1]],
    "simulate": {"N": 12, "disturbance": {"type": "box", "bound": 0.05}},
}


class TestTrajectories(unittest.TestCase):
    """数据生成"""

    def setUp(self):
        self.plant, _ = example_a_plant()
        self.delta = example_a_delta()

    def test_shapes_and_bounds(self):
        traj = generate_trajectory(self.plant, self.delta, 200, seed=1, disturbance_law=box_disturbance(0.1))
        self.assertEqual(traj.X.shape, (3, 201))
        self.assertEqual(traj.U.shape, (1, 200))
        self.assertEqual(traj.D.shape, (3, 200))
        self.assertLessEqual(np.max(np.abs(traj.D)), 0.1)
        self.assertLessEqual(np.max(np.abs(traj.U)), 1.0)
        np.testing.assert_array_equal(traj.X[:, 0], np.zeros(3))

    def test_no_disturbance(self):
        traj = generate_trajectory(self.plant, self.delta, 10, seed=1)
        np.testing.assert_array_equal(traj.D, np.zeros((3, 10)))

    def test_seed_determinism(self):
        a = generate_trajectory(self.plant, self.delta, 30, seed=7, disturbance_law=box_disturbance(0.1))
        b = generate_trajectory(self.plant, self.delta, 30, seed=7, disturbance_law=box_disturbance(0.1))
        np.testing.assert_array_equal(a.X, b.X)
        c = generate_trajectory(self.plant, self.delta, 30, seed=8, disturbance_law=box_disturbance(0.1))
        self.assertFalse(np.allclose(a.U, c.U))

    def test_inputs_shared_across_noise_levels(self):
        quiet = generate_trajectory(self.plant, self.delta, 30, seed=3, disturbance_law=box_disturbance(0.0))
        noisy = generate_trajectory(self.plant, self.delta, 30, seed=3, disturbance_law=box_disturbance(0.2))
        np.testing.assert_array_equal(quiet.U, noisy.U)

    def test_matches_true_system(self):
        traj = generate_trajectory(self.plant, self.delta, 25, seed=2, disturbance_law=box_disturbance(0.05))
        A_tr, B_tr = example_a_true_matrices()
        predicted = A_tr @ traj.X[:, :-1] + B_tr @ traj.U + traj.D
        np.testing.assert_allclose(traj.X[:, 1:], predicted, atol=1e-12)

    def test_ball_disturbance(self):
        law = ball_disturbance(2.0)
        rng = np.random.default_rng(0)
        for _ in range(10):
            D = law(rng, 2, 50)
            self.assertEqual(D.shape, (2, 50))
            self.assertLessEqual(np.linalg.norm(D), 2.0 + 1e-12)

    def test_head(self):
        traj = generate_trajectory(self.plant, self.delta, 20, seed=1, disturbance_law=box_disturbance(0.1))
        piece = traj.head(5)
        self.assertEqual(piece.N, 5)
        np.testing.assert_array_equal(piece.X, traj.X[:, :6])


class TestBenchmarks(unittest.TestCase):
    """基准系统"""

    def test_data_driven_form(self):
        plant, structure, delta_tr = example_a_data_driven_plant()
        A_tr, B_tr = example_a_true_matrices()
        closed = plant.close_uncertainty(delta_tr)
        np.testing.assert_allclose(closed.A, A_tr)
        np.testing.assert_allclose(closed.B, B_tr)
        self.assertEqual((structure.n_w, structure.n_z), (3, 4))

    def test_satellite_dimensions(self):
        plant, structure, delta = satellite_plant()
        self.assertEqual(plant.n, 5)
        self.assertEqual((structure.n_w, structure.n_z), (2, 5))
        self.assertEqual(delta.shape, (2, 5))
        self.assertEqual(plant.C_e[0, 4], 1.0)
        self.assertEqual(plant.n_e, 2)
        np.testing.assert_array_equal(plant.B, np.zeros((5, 1)))

    def test_satellite_discretization(self):
        c = satellite_continuous()
        discrete = satellite_discrete()
        np.testing.assert_allclose(discrete.A, linalg.expm(c["A_c"] * SATELLITE_H), atol=1e-12)
        self.assertEqual(satellite_delta().shape, (2, 5))
        self.assertEqual((discrete.n_w, discrete.n_z), (2, 5))

    def test_lowpass_filter(self):
        a, b = lowpass_filter_zoh(SATELLITE_FILTER_GAIN, SATELLITE_FILTER_POLE, SATELLITE_H)
        expected_a = math.exp(-SATELLITE_FILTER_POLE * SATELLITE_H)
        self.assertAlmostEqual(a, expected_a, places=12)
        self.assertAlmostEqual(b, SATELLITE_FILTER_GAIN * (1.0 - expected_a) / SATELLITE_FILTER_POLE, places=10)

    def test_satellite_bode(self):
        plant, _, delta = satellite_plant()
        frame = satellite_bode(plant, delta, np.zeros((1, 5)), points=16)
        self.assertEqual(list(frame.columns),
                         ["omega", "open_theta2", "closed_theta2", "closed_u", "inv_w1", "inv_w2"])
        self.assertEqual(len(frame), 16)
        np.testing.assert_allclose(frame["open_theta2"], frame["closed_theta2"])
        np.testing.assert_allclose(frame["closed_u"], 0.0)
        np.testing.assert_allclose(frame["inv_w2"], 10.0)
        self.assertAlmostEqual(frame["omega"].iloc[-1], math.pi / SATELLITE_H)

    def test_satellite_data_diagnostics(self):
        plant, _, _ = satellite_plant()
        traj = satellite_trajectory(30, 0.5, seed=3)
        report = satellite_data_diagnostics(assemble_data_matrices(plant, traj), plant.B_d, 0.5)
        self.assertGreater(report["data_min_singular_value"], 0.0)
        self.assertGreaterEqual(report["data_slack"], -1e-9)
        self.assertLessEqual(report["data_slack"], 0.25)
        # 与数据一致的最小扰动就是记录扰动在 Z 零空间上的投影
        Z = assemble_data_matrices(plant, traj).Z
        projected = traj.D @ (np.eye(Z.shape[1]) - np.linalg.pinv(Z) @ Z)
        self.assertAlmostEqual(report["data_slack"], 0.25 - float(np.sum(projected ** 2)), places=8)



class TestMultiplierChoices(unittest.TestCase):
    """扰动乘子选择"""

    def test_parse(self):
        self.assertEqual(parse_multiplier_choice("diag20"), ("diag", 20))
        self.assertEqual(parse_multiplier_choice("hull5"), ("hull", 5))
        self.assertEqual(parse_multiplier_choice("quad200"), ("quad", 200))
        for bad in ("quad", "box10", "diag-1"):
            with self.assertRaises(ValueError):
                parse_multiplier_choice(bad)

    def test_classes(self):
        quad = disturbance_class_for("quad", 0.1, 5)
        np.testing.assert_allclose(quad.evaluate([1.0])[5:, 5:], 0.15 * np.eye(3))
        diag = disturbance_class_for("diag", 0.1, 5)
        self.assertEqual((diag.upper, diag.lower, diag.n_params), (5, 3, 5))
        with self.assertRaises(ValueError):
            disturbance_class_for("box", 0.1, 5)

    def test_config_paths(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = ExperimentConfig(out_dir=tmp, settings=SolverSettings())
            self.assertEqual(config.path("fig3.csv"), os.path.join(tmp, "fig3.csv"))
            summary = config.to_dict()
            self.assertEqual(summary["settings"]["eps"], SolverSettings().eps)
            self.assertEqual(summary["multipliers"], ("quad200", "hull5", "diag5", "diag20"))


class TestProblemPipeline(unittest.TestCase):
    """问题文件流水线（求解之前）"""

    def test_simulate_problem(self):
        spec = parse_problem(dict(SCALAR_PROBLEM))
        traj = simulate_problem(spec, seed=4)
        self.assertEqual(traj.N, 12)
        self.assertLessEqual(np.max(np.abs(traj.D)), 0.05)
        self.assertEqual(simulate_problem(spec, N=5).N, 5)

    def test_simulate_requires_delta(self):
        raw = dict(SCALAR_PROBLEM)
        raw.pop("delta_true")
        with self.assertRaises(ValueError):
            simulate_problem(parse_problem(raw))

    def test_prior_only_multipliers(self):
        multipliers, data = build_problem_multipliers(parse_problem(dict(SCALAR_PROBLEM)))
        self.assertIsNone(data)
        self.assertEqual((multipliers.upper, multipliers.lower), (1, 1))

    def test_data_without_disturbance_model(self):
        raw = dict(SCALAR_PROBLEM, data={"X": [[0.0, 1.0, 0.5]], "U": [[1.0, 0.0]]})
        with self.assertRaises(ValueError):
            build_problem_multipliers(parse_problem(raw))


class TestCommandLine(unittest.TestCase):
    """命令行错误出口"""

    def test_missing_problem_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(main.main(["synth", os.path.join(tmp, "missing.json"), "--out", tmp]), 1)

    def test_unknown_study(self):
        with self.assertRaises(SystemExit):
            main.main(["repro", "figures"])

    def test_study_names(self):
        self.assertEqual(main.STUDY_NAMES, ("fig3", "fig4", "fig5", "satellite"))
        self.assertEqual(tuple(STUDIES), main.STUDY_NAMES)
        for name in main.STUDY_NAMES + ("all",):
            self.assertEqual(main.build_parser().parse_args(["repro", name]).study, name)
        with self.assertRaises(SystemExit):
            main.main(["repro", "multipliers"])

    def test_run_studies_rejects_unknown_name(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValueError):
                run_studies(["scenarios"], ExperimentConfig(out_dir=tmp, settings=SolverSettings()))



if __name__ == "__main__":
    unittest.main()
