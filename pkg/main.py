"""
robsyn - 命令行入口

由先验知识与数据综合鲁棒控制器：
    python main.py synth problem.json --objective h2 --verify
    python main.py repro fig3 --seed 1 --out results
    python main.py simulate problem.json --N 200 --out traj.csv
"""

import argparse
import os
import sys
import time
from typing import List, Optional

from colorama import Fore, Style, init

from robsyn_core.config import SolverSettings, output_dir
from robsyn_core.errors import InfeasibleError, ProblemFileError, RobsynError
from robsyn_core.experiments import (
    MULTIPLIER_CHOICES,
    NOISE_GRID,
    STUDIES,
    ExperimentConfig,
    run_studies,
    simulate_problem,
    synth_problem,
)
from robsyn_core.problem_io import load_problem, write_json, write_text_report, write_trajectory_csv
from robsyn_core.synthesis import OBJECTIVES

# 初始化 colorama（Windows 需要）
init(autoreset=True)

# 颜色常量定义
COLOR_SYSTEM = Fore.GREEN  # 系统提示
COLOR_RESULT = Fore.CYAN  # 结果
COLOR_STATUS = Fore.YELLOW  # 警告与状态
COLOR_ERROR = Fore.RED  # 错误信息

STUDY_NAMES = tuple(STUDIES)  # fig3 | fig4 | fig5 | satellite


def _float_list(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的数值: {raw!r}")


def _settings_from_args(args: argparse.Namespace) -> SolverSettings:
    overrides = {
        "eps": args.eps,
        "feas_tol": args.solver_tol,
        "gap_tol": args.solver_tol,
        "verbose": True if args.verbose else None,
        "dump_dir": getattr(args, "dump", None),
    }
    if args.solver:
        overrides["solvers"] = tuple(s.strip().upper() for s in args.solver.split(",") if s.strip())
    return SolverSettings.from_env(**overrides)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=1, help="随机种子（默认 1）")
    parser.add_argument("--out", default=None, help="输出目录（默认 $ROBSYN_OUTPUT_DIR 或 results）")
    parser.add_argument("--solver-tol", type=float, default=None, help="后端可行性 / 间隙容差")
    parser.add_argument("--eps", type=float, default=None, help="严格 LMI 偏移量")
    parser.add_argument("--solver", default=None, help="cvxpy 求解器列表，例如 CLARABEL,SCS")
    parser.add_argument("--verbose", action="store_true", help="打印求解器与综合过程")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robsyn", description="由先验知识与数据综合鲁棒控制器")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="按问题文件综合控制器")
    synth.add_argument("problem", help="JSON 问题文件")
    synth.add_argument("--objective", choices=OBJECTIVES + ("quadratic",), default=None,
                       help="综合目标（默认取问题文件中的 objective）")
    synth.add_argument("--verify", action="store_true", help="综合后做采样验证")
    synth.add_argument("--count", type=int, default=50, help="采样验证候选数")
    synth.add_argument("--dump", default=None, help="把编译后的标准形式写入该目录")
    _add_common(synth)

    repro = sub.add_parser("repro", help="复现数值研究（只输出 CSV / 报告）")
    repro.add_argument("study", choices=STUDY_NAMES + ("all",))
    repro.add_argument("--noise-levels", type=_float_list, default=None,
                       help=f"噪声网格（默认 {','.join(map(str, NOISE_GRID))}）")
    repro.add_argument("--multipliers", default=None,
                       help=f"扰动乘子选择（默认 {','.join(MULTIPLIER_CHOICES)}）")
    repro.add_argument("--verify-count", type=int, default=20, help="每个单元格的验证候选数")
    repro.add_argument("--no-verify", action="store_true", help="跳过采样验证")
    _add_common(repro)

    simulate = sub.add_parser("simulate", help="按问题文件的 delta_true 生成轨迹 CSV")
    simulate.add_argument("problem", help="JSON 问题文件")
    simulate.add_argument("--N", type=int, default=None, help="样本数（默认取 simulate.N）")
    _add_common(simulate)
    return parser


def cmd_synth(args: argparse.Namespace) -> int:
    settings = _settings_from_args(args)
    spec = load_problem(args.problem)
    out = args.out or output_dir()
    print(f"{COLOR_SYSTEM}📂 问题: {spec.name}（{args.problem}）")
    started = time.time()
    outcome = synth_problem(spec, args.objective, settings, verify=args.verify,
                            verify_count=args.count, seed=args.seed)
    result = outcome["result"]
    gamma = "—" if result.gamma is None else f"{result.gamma:.6g}"
    print(f"{COLOR_RESULT}✅ {result.kind}: γ = {gamma}，用时 {time.time() - started:.2f}s")
    print(f"{COLOR_RESULT}   K = {result.K.tolist()}")

    payload = {"problem": outcome["summary"], "result": result.to_dict()}
    report = outcome["report"]
    if report is not None:
        payload["verification"] = report if isinstance(report, dict) else report.to_dict()
        violations = payload["verification"]["violations"]
        color = COLOR_RESULT if violations == 0 else COLOR_STATUS
        print(f"{color}🔎 采样验证: 违反 {violations} 个")
    base = os.path.join(out, f"{spec.name}_{result.kind}")
    write_json(payload, base + ".json")
    write_text_report(spec.name, payload, base + ".txt")
    print(f"{COLOR_SYSTEM}💾 已写入 {base}.json / .txt")
    return 0


def cmd_repro(args: argparse.Namespace) -> int:
    settings = _settings_from_args(args)
    changes = {"seed": args.seed, "out_dir": args.out or output_dir(), "settings": settings,
               "verify": not args.no_verify, "verify_count": args.verify_count}
    if args.noise_levels:
        changes["noise_levels"] = tuple(args.noise_levels)
    if args.multipliers:
        changes["multipliers"] = tuple(m.strip() for m in args.multipliers.split(",") if m.strip())
    config = ExperimentConfig(**changes)
    names = STUDY_NAMES if args.study == "all" else (args.study,)
    print(f"{COLOR_SYSTEM}🧪 运行研究 {', '.join(names)}（seed={config.seed}，输出 {config.out_dir}）")
    started = time.time()
    results = run_studies(names, config)
    for name, value in results.items():
        if isinstance(value, dict) and "gamma" in value:
            print(f"{COLOR_RESULT}📈 {name}: γ = {value['gamma']}")
        elif isinstance(value, dict) and "error" in value:
            print(f"{COLOR_STATUS}⚠️ {name}: {value['error']}")
        else:
            print(f"{COLOR_RESULT}📈 {name}: 完成")
    print(f"{COLOR_SYSTEM}✅ 全部完成，用时 {time.time() - started:.1f}s")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = load_problem(args.problem)
    traj = simulate_problem(spec, args.N, args.seed)
    out = args.out or os.path.join(output_dir(), f"{spec.name}_traj.csv")
    if os.path.isdir(out) or not out.endswith(".csv"):
        out = os.path.join(out, f"{spec.name}_traj.csv")
    write_trajectory_csv(traj, out)
    print(f"{COLOR_SYSTEM}💾 {traj.N} 个样本已写入 {out}")
    return 0


COMMANDS = {"synth": cmd_synth, "repro": cmd_repro, "simulate": cmd_simulate}


def main(argv: Optional[List[str]] = None) -> int:
    """主程序入口；预期内的错误只打印一行，不输出 traceback"""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ProblemFileError as e:
        print(f"{COLOR_ERROR}❌ 问题文件错误 [{e.field}]: {e}")
    except InfeasibleError as e:
        print(f"{COLOR_ERROR}❌ 不可行: {e}")
    except (RobsynError, ValueError, OSError) as e:
        print(f"{COLOR_ERROR}❌ {type(e).__name__}: {e}")
    except KeyboardInterrupt:
        print(f"\n{COLOR_SYSTEM}程序已退出{Style.RESET_ALL}")
        return 130
    return 1


if __name__ == "__main__":
    sys.exit(main())
