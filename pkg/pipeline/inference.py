"""
Inference on unseen samples.

- ``encode``: lasso code of one sample against the stacked feature-view dictionaries
- ``predict_labels``: class scores ``D_label · w`` (raw, ranked by the evaluation)
- ``train_ls_head`` / ``predict_ls``: ridge least-squares classifier over codes

**Feature: mhdsc-inference**
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import scipy.linalg

from pipeline.errors import NumericalError, ValidationError
from pipeline.prox import soft_threshold
from pipeline.solver import LIPSCHITZ_FLOOR, accelerated_prox_descent, spectral_norm

logger = logging.getLogger(__name__)


@dataclass
class EncodeConfig:
    gamma1_infer: float = 0.01
    max_iters: int = 1000
    tol: float = 1e-8

    def validate(self) -> "EncodeConfig":
        if not self.gamma1_infer >= 0:
            raise ValidationError(f"gamma1_infer must be nonnegative, got {self.gamma1_infer}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be positive, got {self.tol}")
        return self

    @classmethod
    def from_config(cls, cfg: dict) -> "EncodeConfig":
        return cls(gamma1_infer=cfg["inference_gamma1_infer"], max_iters=cfg["inference_max_iters"],
                   tol=cfg["inference_tol"])


@dataclass(frozen=True)
class LabelScores:
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("non-finite label scores")


def _stack(x: Sequence[np.ndarray], D: Sequence[np.ndarray]):
    if len(x) != len(D):
        raise ValidationError(f"dimension mismatch: {len(x)} views given, model has {len(D)}")
    for v, (xv, dv) in enumerate(zip(x, D)):
        if np.shape(xv)[0] != dv.shape[0]:
            raise ValidationError(
                f"dimension mismatch: view {v} has {np.shape(xv)[0]} features, dictionary has {dv.shape[0]}")
    return np.concatenate([np.asarray(xv, dtype=float) for xv in x]), np.vstack(D)


def encode(x: Sequence[np.ndarray], D: Sequence[np.ndarray], cfg: EncodeConfig) -> np.ndarray:
    """min_w ½ Σ_v ‖x^v − D^v w‖² + γ‖w‖₁ by accelerated proximal gradient, step 1/σ_max(D₁)²."""
    cfg.validate()
    target, D1 = _stack(x, D)
    L = max(spectral_norm(D1) ** 2, LIPSCHITZ_FLOOR)
    gram = D1.T @ D1
    corr = D1.T @ target

    def value(w: np.ndarray) -> float:
        return 0.5 * float(np.sum((target - D1 @ w) ** 2)) + cfg.gamma1_infer * float(np.abs(w).sum())

    result = accelerated_prox_descent(
        np.zeros(D1.shape[1]),
        lambda w: gram @ w - corr,
        lambda u, tau: soft_threshold(u, cfg.gamma1_infer / (tau * L)),
        value, L, cfg.max_iters, cfg.tol, label="encode")
    return result.values


def encode_batch(views: Sequence[np.ndarray], D: Sequence[np.ndarray], cfg: EncodeConfig,
                 workers: int = 1) -> np.ndarray:
    """
    对一批样本逐列编码

    Args:
        views: 每个视图一个 P_v × n 矩阵
        workers: >1 时用线程池并行（每个样本的编码相互独立）

    Returns:
        N_d × n 的编码矩阵
    """
    views = [np.atleast_2d(np.asarray(v, dtype=float)) for v in views]
    n = views[0].shape[1]
    if any(v.shape[1] != n for v in views):
        raise ValidationError("dimension mismatch: views have different sample counts")

    def one(j: int) -> np.ndarray:
        return encode([v[:, j] for v in views], D, cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns: List[np.ndarray] = list(pool.map(one, range(n)))
    else:
        columns = [one(j) for j in range(n)]
    logger.info(f"编码完成: {n} 个样本")
    return np.column_stack(columns) if columns else np.zeros((D[0].shape[1], 0))


def predict_labels(w: np.ndarray, D_label: np.ndarray) -> LabelScores:
    w = np.asarray(w, dtype=float)
    if D_label.shape[1] != w.shape[0]:
        raise ValidationError(f"dimension mismatch: label dictionary {D_label.shape}, code length {w.shape[0]}")
    return LabelScores(values=D_label @ w)


def predict_batch(codes: np.ndarray, D_label: np.ndarray) -> np.ndarray:
    """P_c × n score matrix, one column per sample."""
    return predict_labels(codes, D_label).values


def train_ls_head(W_L: np.ndarray, Y: np.ndarray, ridge: float = 1e-8) -> np.ndarray:
    """
    A = argmin ‖Y − A W_L‖² + ridge‖A‖², via the normal equations

    Raises:
        ValidationError: ridge < 0 or shape mismatch
        NumericalError: W_L W_Lᵀ is singular and ridge = 0
    """
    if not ridge >= 0:
        raise ValidationError(f"ridge must be nonnegative, got {ridge}")
    W_L = np.asarray(W_L, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if W_L.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: {W_L.shape[1]} codes, {Y.shape[1]} label columns")
    gram = W_L @ W_L.T
    if ridge == 0.0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise NumericalError("least-squares head is singular without regularization; pass a positive ridge")
    system = gram + ridge * np.eye(gram.shape[0])
    try:
        return scipy.linalg.solve(system, W_L @ Y.T, assume_a="pos").T
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        raise NumericalError("least-squares head is singular; pass a larger ridge")


def predict_ls(A: np.ndarray, codes: np.ndarray) -> np.ndarray:
    if A.shape[1] != codes.shape[0]:
        raise ValidationError(f"dimension mismatch: head {A.shape}, codes {codes.shape}")
    return A @ codes


def binarize(scores: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """分数 >= threshold 记为 1"""
    return (np.asarray(scores) >= threshold).astype(float)
