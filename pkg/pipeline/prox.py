"""
Proximal and projection operators.

``‖M‖_{1,∞}`` is the sum over rows of the row-wise max-abs entry. Its prox is
computed row by row through the Moreau decomposition
``prox_{λ‖·‖∞}(v) = v − P_{‖·‖₁ ≤ λ}(v)``, with a sort-based ℓ1-ball projection.

**Feature: mhdsc-prox**
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pipeline.errors import ValidationError


@dataclass
class ProxResult:
    values: np.ndarray
    objective_gap: Optional[float] = None


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0.0:
        raise ValidationError(f"prox weight must be nonnegative, got {lam}")
    return lam


def l1inf_norm(M: np.ndarray) -> float:
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    return float(np.abs(M).max(axis=1).sum())


def soft_threshold(v: np.ndarray, lam: float) -> np.ndarray:
    lam = _check_lambda(lam)
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def _ball_thresholds(A: np.ndarray, radius: float) -> np.ndarray:
    """
    Row-wise threshold θ with Σ max(|a|−θ, 0) = radius, for rows of ``A = |M|``
    whose ℓ1 norm exceeds ``radius > 0``.
    """
    n = A.shape[1]
    u = -np.sort(-A, axis=1)
    cssv = np.cumsum(u, axis=1)
    k = np.arange(1, n + 1)
    active = u * k > cssv - radius
    # 最后一个满足条件的位置
    rho = n - 1 - np.argmax(active[:, ::-1], axis=1)
    rows = np.arange(A.shape[0])
    return (cssv[rows, rho] - radius) / (rho + 1.0)


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {u : ‖u‖₁ ≤ radius}, O(n log n)."""
    radius = float(radius)
    if not radius > 0.0:
        raise ValidationError(f"l1-ball radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    theta = _ball_thresholds(a[None, :], radius)[0]
    return np.sign(v) * np.maximum(a - theta, 0.0)


def prox_linf(v: np.ndarray, lam: float) -> np.ndarray:
    """argmin_u ½‖u − v‖² + λ‖u‖∞"""
    lam = _check_lambda(lam)
    v = np.asarray(v, dtype=float)
    if lam == 0.0:
        return v.copy()
    if np.abs(v).sum() <= lam:
        return np.zeros_like(v)
    return v - project_l1_ball(v, lam)


def prox_l1inf_rows(M: np.ndarray, lam: float) -> np.ndarray:
    """Row-separable prox of λ‖M‖_{1,∞}; equals prox_linf applied to every row."""
    lam = _check_lambda(lam)
    M = np.asarray(M, dtype=float)
    if lam == 0.0 or M.size == 0:
        return M.copy()
    A = np.abs(M)
    out = np.zeros_like(M)
    big = A.sum(axis=1) > lam
    if np.any(big):
        theta = _ball_thresholds(A[big], lam)
        projected = np.sign(M[big]) * np.maximum(A[big] - theta[:, None], 0.0)
        out[big] = M[big] - projected
    return out


def project_unit_columns(D: np.ndarray) -> np.ndarray:
    """Rescale every column with Euclidean norm above 1 onto the unit sphere."""
    D = np.asarray(D, dtype=float)
    norms = np.linalg.norm(D, axis=0)
    return D / np.where(norms > 1.0, norms, 1.0)[None, :]


def prox_with_gap(v: np.ndarray, lam: float, norm: str = "linf") -> ProxResult:
    """
    Prox of ``λ‖·‖∞`` (norm="linf") or ``λ‖·‖₁`` (norm="l1") together with the
    primal–dual gap of ``min_u ½‖u − v‖² + λ‖u‖``.

    The dual variable is the projection of ``v`` on the dual-norm ball of radius
    λ, so the gap is zero up to round-off at the exact prox.
    """
    lam = _check_lambda(lam)
    v = np.asarray(v, dtype=float)
    if norm == "linf":
        u = prox_linf(v, lam)
        z = v - u
        penalty = lam * (float(np.abs(u).max()) if u.size else 0.0)
    elif norm == "l1":
        u = soft_threshold(v, lam)
        z = np.clip(v, -lam, lam)
        penalty = lam * float(np.abs(u).sum())
    else:
        raise ValidationError(f"unknown norm '{norm}', choose 'linf' or 'l1'")
    primal = 0.5 * float(np.sum((u - v) ** 2)) + penalty
    dual = 0.5 * float(np.sum(v ** 2)) - 0.5 * float(np.sum((v - z) ** 2))
    return ProxResult(values=u, objective_gap=primal - dual)
