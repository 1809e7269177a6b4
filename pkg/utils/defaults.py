# -*- coding: utf-8 -*-
"""
默认参数配置
每个配置节对应一组默认值，config.ini 与环境变量可以覆盖
"""

# 配置节 -> 键 -> 默认值（字符串形式，与 ini 文件保持一致）
DEFAULTS = {
    "solver": {
        "gamma1": "0.01",
        "gamma2": "0.001",
        "gamma3": "0.01",
        "r": "5",                    # α^r 技巧的指数，经验值
        "atoms": "20",
        "inner_max_iters": "500",
        "outer_max_iters": "100",
        "inner_tol": "1e-6",
        "outer_tol": "1e-5",
        "regularizer": "hessian",
        "include_label_view": "true",
        "trace_normalize": "true",   # 各视图正则矩阵缩放到迹为 N
        "supervised": "true",        # false 时不重构标签视图（mSC）
    },
    "graph": {
        "neighbors": "10",           # 小规模数据取 10，大规模数据可取 100
        "tangent_dim": "2",
        "ridge": "1e-6",
        "laplacian_weighting": "binary",
        "heat_sigma": "1.0",
        "workers": "1",
    },
    "inference": {
        "gamma1_infer": "0.01",
        "max_iters": "1000",
        "tol": "1e-8",
        "ls_ridge": "1e-8",
        "threshold": "0.5",
    },
    "synth": {
        "views": "3",
        "dim": "8",
        "classes": "4",
        "n": "120",
        "atoms_true": "10",
        "sparsity": "2",
        "noise": "0.01",
        "manifold": "none",
    },
    "data": {
        "normalize": "unit",
    },
    "logging": {
        "level": "INFO",
    },
}

# 正则项类型（用于 CLI 下拉选项）
REGULARIZER_KINDS = ("hessian", "laplacian", "none")

# 归一化方式
NORMALIZE_METHODS = ("unit", "zscore", "none")

# 合成数据的流形类型
MANIFOLDS = ("none", "grid2d", "swiss_roll")

# 拉普拉斯边权方式
LAPLACIAN_WEIGHTINGS = ("binary", "heat")


def get_default(section: str, key: str) -> str:
    """
    获取默认值

    Args:
        section: 配置节名称
        key: 键名

    Returns:
        默认值字符串，未知键返回空字符串
    """
    return DEFAULTS.get(section, {}).get(key, "")
