import os
import configparser
from typing import Dict, Any, Optional

from dotenv import load_dotenv

from utils.defaults import get_default


def _as_bool(s: str) -> bool:
    return str(s).strip().lower() in ("1", "true", "yes", "on")


def load_ini(path: Optional[str] = None) -> Dict[str, Any]:
    """
    加载配置，优先级：环境变量 > config.ini 文件 > 内置默认值

    环境变量命名规则：MHDSC_<SECTION>_<KEY>（全大写，下划线分隔）
    例如：
      - MHDSC_SOLVER_GAMMA1
      - MHDSC_GRAPH_NEIGHBORS
      - MHDSC_LOGGING_LEVEL
    """
    # 以当前文件所在目录为基准，定位到项目根目录
    base_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
    # .env 中的变量不覆盖已存在的环境变量
    load_dotenv(os.path.join(base_dir, ".env"), override=False)

    # 关闭插值功能，避免 ini 值中含有 % 时触发格式化错误
    cfg = configparser.ConfigParser(interpolation=None)

    ini = path or os.getenv("MHDSC_INI", "")
    if not ini or not os.path.exists(ini):
        for candidate in (os.path.join(base_dir, "config.ini"), os.path.join(base_dir, "mhdsc.ini")):
            if os.path.exists(candidate):
                ini = candidate
                break

    ini_loaded = False
    if ini and os.path.exists(ini):
        cfg.read(ini, encoding="utf-8")
        ini_loaded = True

    def get_config(sec: str, key: str) -> str:
        """获取配置值，优先级：环境变量 > ini 文件 > 默认值"""
        env_val = os.getenv(f"MHDSC_{sec.upper()}_{key.upper()}")
        if env_val is not None:
            return env_val
        if ini_loaded and cfg.has_section(sec):
            return cfg.get(sec, key, fallback=get_default(sec, key))
        return get_default(sec, key)

    # 简写
    g = get_config

    return {
        "config_path": ini if ini_loaded else "",

        # 交替优化
        "solver_gamma1": float(g("solver", "gamma1")),
        "solver_gamma2": float(g("solver", "gamma2")),
        "solver_gamma3": float(g("solver", "gamma3")),
        "solver_r": float(g("solver", "r")),
        "solver_atoms": int(g("solver", "atoms")),
        "solver_inner_max_iters": int(g("solver", "inner_max_iters")),
        "solver_outer_max_iters": int(g("solver", "outer_max_iters")),
        "solver_inner_tol": float(g("solver", "inner_tol")),
        "solver_outer_tol": float(g("solver", "outer_tol")),
        "solver_regularizer": g("solver", "regularizer").strip().lower(),
        "solver_include_label_view": _as_bool(g("solver", "include_label_view")),
        "solver_trace_normalize": _as_bool(g("solver", "trace_normalize")),
        "solver_supervised": _as_bool(g("solver", "supervised")),

        # 图正则
        "graph_neighbors": int(g("graph", "neighbors")),
        "graph_tangent_dim": int(g("graph", "tangent_dim")),
        "graph_ridge": float(g("graph", "ridge")),
        "graph_laplacian_weighting": g("graph", "laplacian_weighting").strip().lower(),
        "graph_heat_sigma": float(g("graph", "heat_sigma")),
        "graph_workers": int(g("graph", "workers")),

        # 推断
        "inference_gamma1_infer": float(g("inference", "gamma1_infer")),
        "inference_max_iters": int(g("inference", "max_iters")),
        "inference_tol": float(g("inference", "tol")),
        "inference_ls_ridge": float(g("inference", "ls_ridge")),
        "inference_threshold": float(g("inference", "threshold")),

        # 合成数据
        "synth_views": int(g("synth", "views")),
        "synth_dim": int(g("synth", "dim")),
        "synth_classes": int(g("synth", "classes")),
        "synth_n": int(g("synth", "n")),
        "synth_atoms_true": int(g("synth", "atoms_true")),
        "synth_sparsity": int(g("synth", "sparsity")),
        "synth_noise": float(g("synth", "noise")),
        "synth_manifold": g("synth", "manifold").strip().lower(),

        # 数据预处理
        "data_normalize": g("data", "normalize").strip().lower(),

        # 日志
        "logging_level": g("logging", "level").strip().upper(),
    }
