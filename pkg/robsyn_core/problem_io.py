"""
问题文件模块 (Problem Files & Reports)

功能：读取 JSON 问题文件、CSV 轨迹，写出 CSV 结果与结构化报告。

核心功能：
- load_problem: JSON → ProblemSpec（出错时 ProblemFileError 指明字段路径）
- read_trajectory_csv / write_trajectory_csv: 每行一个样本 k, x0.., u0..（末行 u 为空）
- disturbance_factory: 按数据长度 N 构造扰动乘子类
- write_csv / write_json / write_text_report: 统一的结果输出

问题文件字段（完整说明见 问题文件格式说明.md）：
    name, plant{A,B,B_d,B_w,C_e,D_eu,D_ed,C_z,D_z[,B_wp,D_zwp,C_zp,D_zp]},
    uncertainty_blocks[{kind,nw,nz}], prior_multipliers[...], prior_bounds[...],
    disturbance_model{type,...}, performance{type,...}, nonlinear{type,gamma},
    data{csv | X,U[,W_nl]} 或其列表, delta_true, objective, simulate{...}
"""

import json
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .errors import DimensionMismatchError, ProblemFileError
from .lft_model import BlockSpec, LftPlant, PerformanceIndex, Trajectory, UncertaintyStructure
from .multiplier_engine import (
    MultiplierClass,
    disturbance_convex_hull,
    disturbance_diagonal,
    disturbance_quadratic,
    disturbance_toeplitz,
    infinity_ball_vertices,
    prior_full_block,
    prior_repeated_scalar,
    sum_classes,
)

CSV_FLOAT_FORMAT = "%.10g"
PLANT_REQUIRED = ("A", "B", "B_d", "B_w", "C_z", "D_z")
PLANT_OPTIONAL = ("B_wp", "D_zwp", "C_zp", "D_zp")
OBJECTIVE_CHOICES = ("h2", "stabilize", "hinf", "quadratic")

DisturbanceFactory = Callable[[int, int], MultiplierClass]


@dataclass
class ProblemSpec:
    """解析后的问题文件"""
    name: str
    plant: LftPlant
    structure: UncertaintyStructure
    priors: Optional[List[MultiplierClass]] = None
    prior_bounds: Optional[List[Optional[float]]] = None
    disturbance: Optional[DisturbanceFactory] = None
    disturbance_config: Optional[dict] = None
    performance: Optional[PerformanceIndex] = None
    performance_type: str = "h2"
    nonlinear_gamma: Optional[float] = None
    trajectories: List[Trajectory] = field(default_factory=list)
    delta_true: Optional[np.ndarray] = None
    objective: str = "h2"
    simulate: Dict[str, Any] = field(default_factory=dict)
    source: str = ""


# ---------------------------------------------------------------------------
# 字段解析工具
# ---------------------------------------------------------------------------

def _matrix(value: Any, path: str, shape: Optional[tuple] = None) -> np.ndarray:
    """数组的行列表 → 二维矩阵；标量视为 1×1，一维列表视为列向量"""
    if value is None:
        raise ProblemFileError(path, "缺少矩阵字段")
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise ProblemFileError(path, f"不是数值矩阵 ({e})")
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim > 2:
        raise ProblemFileError(path, f"期望二维矩阵，得到 {arr.ndim} 维")
    if shape is not None and arr.shape != shape:
        raise ProblemFileError(path, f"形状应为 {shape}，得到 {arr.shape}")
    return arr


def _number(value: Any, path: str, minimum: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(path, f"期望数值，得到 {value!r}")
    if minimum is not None and value < minimum:
        raise ProblemFileError(path, f"必须 ≥ {minimum}，得到 {value}")
    return float(value)


def _require(obj: dict, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise ProblemFileError(path, "期望对象")
    if key not in obj:
        raise ProblemFileError(f"{path}.{key}" if path else key, "缺少必需字段")
    return obj[key]


# ---------------------------------------------------------------------------
# 各部分
# ---------------------------------------------------------------------------

def parse_plant(raw: dict, name: str = "plant") -> LftPlant:
    """plant 字段 → LftPlant；C_e/D_eu/D_ed 缺省为零维性能通道"""
    if not isinstance(raw, dict):
        raise ProblemFileError("plant", "期望对象")
    mats = {key: _matrix(_require(raw, key, "plant"), f"plant.{key}") for key in PLANT_REQUIRED}
    n, m, n_d = mats["A"].shape[0], mats["B"].shape[1], mats["B_d"].shape[1]
    if "C_e" in raw:
        mats["C_e"] = _matrix(raw["C_e"], "plant.C_e")
        n_e = mats["C_e"].shape[0]
        mats["D_eu"] = _matrix(raw["D_eu"], "plant.D_eu") if "D_eu" in raw else np.zeros((n_e, m))
        mats["D_ed"] = _matrix(raw["D_ed"], "plant.D_ed") if "D_ed" in raw else np.zeros((n_e, n_d))
    else:
        mats["C_e"], mats["D_eu"], mats["D_ed"] = np.zeros((0, n)), np.zeros((0, m)), np.zeros((0, n_d))
    for key in PLANT_OPTIONAL:
        if key in raw:
            mats[key] = _matrix(raw[key], f"plant.{key}")
    plant = LftPlant(name=name, **mats)
    try:
        plant.check_dimensions()
    except DimensionMismatchError as e:
        raise ProblemFileError("plant", str(e))
    return plant


def parse_structure(raw: Any) -> UncertaintyStructure:
    if not isinstance(raw, list):
        raise ProblemFileError("uncertainty_blocks", "期望块列表")
    blocks = []
    for i, item in enumerate(raw):
        path = f"uncertainty_blocks[{i}]"
        kind = str(_require(item, "kind", path)).lower()
        if kind == "full":
            blocks.append(BlockSpec.full(int(_require(item, "nw", path)), int(_require(item, "nz", path))))
        elif kind in ("repeated", "repeated_scalar"):
            size = int(item.get("n", item.get("nw", 0)))
            if size < 1:
                raise ProblemFileError(f"{path}.n", "重复标量块需要 n ≥ 1")
            blocks.append(BlockSpec.repeated(size))
        else:
            raise ProblemFileError(f"{path}.kind", f"未知块类型 {kind!r}（full | repeated）")
    return UncertaintyStructure(tuple(blocks))


def parse_priors(raw: Any, structure: UncertaintyStructure) -> List[MultiplierClass]:
    """
    每个块一个先验乘子：
      {"type": "full", "H": [[...]]} | {"type": "norm_bound", "bound": δ̄} | {"type": "repeated", "h": [[...]]}
    """
    if not isinstance(raw, list) or len(raw) != len(structure.blocks):
        raise ProblemFileError("prior_multipliers", f"需要与块数相同的 {len(structure.blocks)} 个条目")
    out = []
    for j, (item, spec) in enumerate(zip(raw, structure.blocks)):
        path = f"prior_multipliers[{j}]"
        kind = str(_require(item, "type", path)).lower()
        if kind == "full":
            H = _matrix(_require(item, "H", path), f"{path}.H", (spec.nz + spec.nw,) * 2)
            out.append(prior_full_block(H, nz=spec.nz, label=f"P{j + 1}"))
        elif kind == "norm_bound":
            bound = _number(_require(item, "bound", path), f"{path}.bound", 0.0)
            H = np.diag(np.concatenate([-np.ones(spec.nz), bound * np.ones(spec.nw)]))
            out.append(prior_full_block(H, nz=spec.nz, label=f"P{j + 1}"))
        elif kind == "repeated":
            h = _matrix(_require(item, "h", path), f"{path}.h", (2, 2))
            out.append(prior_repeated_scalar(h, spec.nz, label=f"P{j + 1}"))
        else:
            raise ProblemFileError(f"{path}.type", f"未知先验类型 {kind!r}")
    return out


def _disturbance_class(raw: dict, N: int, n_d: int, path: str) -> MultiplierClass:
    kind = str(_require(raw, "type", path)).lower()
    if kind == "quad":
        R_d = (_matrix(raw["R_d"], f"{path}.R_d", (n_d, n_d)) if "R_d" in raw
               else _number(_require(raw, "energy_bound", path), f"{path}.energy_bound", 0.0) * np.eye(n_d))
        Q_d = _matrix(raw["Q_d"], f"{path}.Q_d", (N, N)) if "Q_d" in raw else -np.eye(N)
        S_d = _matrix(raw["S_d"], f"{path}.S_d", (N, n_d)) if "S_d" in raw else None
        return disturbance_quadratic(Q_d, S_d, R_d)
    if kind == "diag":
        return disturbance_diagonal(_number(_require(raw, "d2_bar", path), f"{path}.d2_bar", 0.0), N, n_d)
    if kind == "convex_hull":
        if "vertices" in raw:
            vertices = [_matrix(v, f"{path}.vertices[{i}]", (n_d, N)) for i, v in enumerate(raw["vertices"])]
        else:
            d_bar = _number(_require(raw, "d_inf_bar", path), f"{path}.d_inf_bar", 0.0)
            try:
                vertices = infinity_ball_vertices(d_bar, n_d, N)
            except ValueError as e:
                raise ProblemFileError(path, str(e))
        return disturbance_convex_hull(vertices)
    if kind == "toeplitz":
        period = int(raw.get("period", 1))
        return disturbance_toeplitz(N, n_d, period, _number(raw.get("eps", 0.0), f"{path}.eps", 0.0))
    if kind == "sum":
        parts = _require(raw, "parts", path)
        if not isinstance(parts, list) or not parts:
            raise ProblemFileError(f"{path}.parts", "期望非空列表")
        return sum_classes(*[_disturbance_class(p, N, n_d, f"{path}.parts[{i}]") for i, p in enumerate(parts)])
    raise ProblemFileError(f"{path}.type", f"未知扰动模型 {kind!r}（quad | diag | convex_hull | toeplitz | sum）")


def disturbance_factory(raw: dict, path: str = "disturbance_model") -> DisturbanceFactory:
    """扰动乘子类依赖数据长度 N，返回 (N, n_d) → MultiplierClass"""
    if not isinstance(raw, dict):
        raise ProblemFileError(path, "期望对象")
    _require(raw, "type", path)
    return lambda N, n_d: _disturbance_class(raw, N, n_d, path)


def parse_performance(raw: Optional[dict], plant: LftPlant) -> tuple:
    """返回 (type, PerformanceIndex 或 None)"""
    if raw is None:
        return "h2", None
    kind = str(_require(raw, "type", "performance")).lower()
    if kind in ("h2", "hinf"):
        return kind, None
    if kind == "passivity":
        if plant.n_d != plant.n_e:
            raise ProblemFileError("performance", "无源性要求 n_d = n_e")
        return kind, PerformanceIndex.passivity(plant.n_d)
    if kind == "quadratic":
        Q = _matrix(_require(raw, "Q_p", "performance"), "performance.Q_p", (plant.n_d, plant.n_d))
        R = _matrix(_require(raw, "R_p", "performance"), "performance.R_p", (plant.n_e, plant.n_e))
        S = (_matrix(raw["S_p"], "performance.S_p", (plant.n_d, plant.n_e)) if "S_p" in raw
             else np.zeros((plant.n_d, plant.n_e)))
        try:
            return kind, PerformanceIndex(Q, S, R)
        except ValueError as e:
            raise ProblemFileError("performance", str(e))
    raise ProblemFileError("performance.type", f"未知性能类型 {kind!r}")


def _parse_data(raw: Any, plant: LftPlant, base_dir: str) -> List[Trajectory]:
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for i, item in enumerate(items):
        path = f"data[{i}]" if isinstance(raw, list) else "data"
        if not isinstance(item, dict):
            raise ProblemFileError(path, "期望对象")
        if "csv" in item:
            csv_path = item["csv"]
            if not os.path.isabs(csv_path):
                csv_path = os.path.join(base_dir, csv_path)
            try:
                out.append(read_trajectory_csv(csv_path, plant.n, plant.m, plant.n_wp))
            except (OSError, ValueError) as e:
                raise ProblemFileError(f"{path}.csv", str(e))
            continue
        X = _matrix(_require(item, "X", path), f"{path}.X")
        U = _matrix(_require(item, "U", path), f"{path}.U")
        W = _matrix(item["W_nl"], f"{path}.W_nl") if "W_nl" in item else None
        try:
            out.append(Trajectory(X=X, U=U, W_nl=W, description=item.get("description", path)))
        except DimensionMismatchError as e:
            raise ProblemFileError(path, str(e))
    return out


def parse_problem(raw: dict, base_dir: str = ".", source: str = "") -> ProblemSpec:
    """已解码的 JSON 对象 → ProblemSpec"""
    if not isinstance(raw, dict):
        raise ProblemFileError("<root>", "问题文件顶层必须是对象")
    name = str(raw.get("name", os.path.splitext(os.path.basename(source))[0] or "problem"))
    plant = parse_plant(_require(raw, "plant", ""), name)
    structure = parse_structure(raw.get("uncertainty_blocks", []))
    if structure.n_w != plant.n_w or structure.n_z != plant.n_z:
        raise ProblemFileError("uncertainty_blocks",
                               f"块尺寸之和 ({structure.n_w}×{structure.n_z}) 与 B_w/C_z ({plant.n_w}×{plant.n_z}) 不符")
    spec = ProblemSpec(name=name, plant=plant, structure=structure, source=source)

    if raw.get("prior_multipliers") is not None:
        spec.priors = parse_priors(raw["prior_multipliers"], structure)
    if raw.get("prior_bounds") is not None:
        bounds = raw["prior_bounds"]
        if not isinstance(bounds, list) or len(bounds) != len(structure.blocks):
            raise ProblemFileError("prior_bounds", f"需要 {len(structure.blocks)} 个数值（或 null）")
        spec.prior_bounds = [None if b is None else _number(b, f"prior_bounds[{i}]", 0.0)
                             for i, b in enumerate(bounds)]
    if raw.get("disturbance_model") is not None:
        spec.disturbance_config = raw["disturbance_model"]
        spec.disturbance = disturbance_factory(raw["disturbance_model"])
    spec.performance_type, spec.performance = parse_performance(raw.get("performance"), plant)
    if raw.get("nonlinear") is not None:
        nl = raw["nonlinear"]
        if str(_require(nl, "type", "nonlinear")).lower() != "norm_bound":
            raise ProblemFileError("nonlinear.type", "目前只支持 norm_bound")
        spec.nonlinear_gamma = _number(_require(nl, "gamma", "nonlinear"), "nonlinear.gamma", 0.0)
    if raw.get("data") is not None:
        spec.trajectories = _parse_data(raw["data"], plant, base_dir)
    if raw.get("delta_true") is not None:
        spec.delta_true = _matrix(raw["delta_true"], "delta_true", (plant.n_w, plant.n_z))
    objective = str(raw.get("objective", spec.performance_type if spec.performance_type != "passivity" else "quadratic"))
    if objective not in OBJECTIVE_CHOICES:
        raise ProblemFileError("objective", f"必须是 {OBJECTIVE_CHOICES} 之一，得到 {objective!r}")
    spec.objective = objective
    spec.simulate = dict(raw.get("simulate", {}))
    return spec


def load_problem(path: str) -> ProblemSpec:
    """
    读取问题文件

    Raises:
        ProblemFileError: 文件不存在、JSON 无效或字段错误
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ProblemFileError("<file>", f"找不到问题文件 {path}")
    except json.JSONDecodeError as e:
        raise ProblemFileError("<file>", f"JSON 解析失败: {e}")
    return parse_problem(raw, os.path.dirname(os.path.abspath(path)), path)


# ---------------------------------------------------------------------------
# 轨迹 CSV
# ---------------------------------------------------------------------------

def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """每行一个时刻：k, x0.., u0..（, wp0..）；最后一行只有状态"""
    N = traj.N
    frame = pd.DataFrame({"k": np.arange(N + 1)})
    for i in range(traj.X.shape[0]):
        frame[f"x{i}"] = traj.X[i, :]
    for i in range(traj.U.shape[0]):
        frame[f"u{i}"] = np.append(traj.U[i, :], np.nan)
    if traj.W_nl is not None:
        for i in range(traj.W_nl.shape[0]):
            frame[f"wp{i}"] = np.append(traj.W_nl[i, :], np.nan)
    return frame


def write_trajectory_csv(traj: Trajectory, path: str) -> str:
    return write_csv(trajectory_frame(traj), path)


def read_trajectory_csv(path: str, n: int, m: int, n_wp: int = 0) -> Trajectory:
    """
    读取轨迹 CSV（列 k, x0..x{n−1}, u0..u{m−1}[, wp0..]）

    Raises:
        ValueError: 缺列或 u 在非末行缺失
    """
    frame = pd.read_csv(path)
    x_cols = [f"x{i}" for i in range(n)]
    u_cols = [f"u{i}" for i in range(m)]
    wp_cols = [f"wp{i}" for i in range(n_wp)]
    missing = [c for c in x_cols + u_cols + wp_cols if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} 缺少列 {missing}")
    if "k" in frame.columns:
        frame = frame.sort_values("k")
    X = frame[x_cols].to_numpy(dtype=float).T
    U = frame[u_cols].to_numpy(dtype=float).T[:, :-1]
    if np.isnan(X).any() or np.isnan(U).any():
        raise ValueError(f"{path} 含有缺失值（只有最后一行的 u 可以为空）")
    W = frame[wp_cols].to_numpy(dtype=float).T[:, :-1] if n_wp else None
    return Trajectory(X=X, U=U, W_nl=W, description=os.path.basename(path))


# ---------------------------------------------------------------------------
# 输出
# ---------------------------------------------------------------------------

def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """表头 + 固定浮点格式，无索引；缺失值写为空"""
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(payload: dict, path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, ensure_ascii=False, indent=2)
    return path


def format_report(title: str, payload: Dict[str, Any], indent: int = 0) -> str:
    """嵌套字典 → 缩进文本报告（矩阵按行输出）"""
    pad = "  " * indent
    lines = [f"{pad}== {title} ==" if indent == 0 else f"{pad}[{title}]"]
    for key, value in payload.items():
        value = _jsonable(value)
        if isinstance(value, dict):
            lines.append(format_report(str(key), value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], list):
            lines.append(f"{pad}  {key}:")
            for row in value:
                lines.append(f"{pad}    " + "  ".join(f"{v: .6g}" if isinstance(v, (int, float)) else str(v)
                                                     for v in row))
        elif isinstance(value, float):
            lines.append(f"{pad}  {key}: {value:.6g}")
        else:
            lines.append(f"{pad}  {key}: {value}")
    return "\n".join(lines)


def write_text_report(title: str, payload: Dict[str, Any], path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_report(title, payload) + "\n")
    return path


def problem_summary(spec: ProblemSpec) -> Dict[str, Union[str, int, List[dict]]]:
    """报告中使用的问题概要"""
    plant = spec.plant
    return {
        "name": spec.name,
        "source": spec.source,
        "dimensions": {"n": plant.n, "m": plant.m, "n_d": plant.n_d, "n_w": plant.n_w,
                       "n_z": plant.n_z, "n_e": plant.n_e, "n_wp": plant.n_wp, "n_zp": plant.n_zp},
        "blocks": spec.structure.to_dict(),
        "objective": spec.objective,
        "trajectories": [{"description": t.description, "N": t.N} for t in spec.trajectories],
        "disturbance_model": spec.disturbance_config,
    }
