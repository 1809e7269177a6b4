"""
Graph regularizers over the samples of one view.

- ``hessian_energy``: second-order (Hessian energy) regularizer. Every sample's
  neighbourhood gets a local tangent basis (PCA), a ridge-regularized quadratic
  fit, and the squared Frobenius norm of the fitted Hessian is accumulated as
  ``H = Σ_i B_iᵀ diag(w) B_i``.
- ``laplacian``: first-order regularizer ``L = Deg − A`` on the symmetrized kNN graph.

Both are symmetric PSD with the constants in their null space; the Hessian
additionally annihilates functions that are linear along the manifold.

**Feature: mhdsc-graph**
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from pipeline.dataset import MultiviewDataset, ViewMatrix
from pipeline.errors import InvariantError, NumericalError, ValidationError
from utils.defaults import LAPLACIAN_WEIGHTINGS, REGULARIZER_KINDS

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
PSD_REJECT_TOL = 1e-8
PSD_CLAMP_TOL = 1e-12
SIMPLEX_TOL = 1e-10

ArrayLike = Union[ViewMatrix, np.ndarray]


def _values(X: ArrayLike) -> np.ndarray:
    return X.values if isinstance(X, ViewMatrix) else np.asarray(X, dtype=float)


@dataclass(frozen=True)
class NeighborGraph:
    neighbor_ids: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return self.neighbor_ids.shape[0]


@dataclass(frozen=True)
class RegularizerMatrix:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError(f"regularizer must be square, got shape {values.shape}")
        if values.size and np.max(np.abs(values - values.T)) > SYMMETRY_TOL:
            raise ValidationError("regularizer matrix is not symmetric")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def energy(self, f: np.ndarray) -> float:
        """fᵀHf for a vector, tr(W H Wᵀ) for a matrix whose columns are samples."""
        f = np.asarray(f, dtype=float)
        if f.ndim == 1:
            return float(f @ self.values @ f)
        return float(np.sum((f @ self.values) * f))


@dataclass
class HessianConfig:
    k: int = 10
    m: int = 2
    ridge: float = 1e-6

    def validate(self) -> "HessianConfig":
        if self.m < 1:
            raise ValidationError(f"tangent dimension m must be >= 1, got {self.m}")
        need = self.m * (self.m + 3) // 2
        if self.k < need:
            raise ValidationError(
                f"k={self.k} neighbours cannot fit a quadratic model in {self.m} dimensions (need >= {need})")
        if self.ridge < 0:
            raise ValidationError(f"ridge must be nonnegative, got {self.ridge}")
        return self

    @classmethod
    def from_config(cls, cfg: dict) -> "HessianConfig":
        return cls(k=cfg["graph_neighbors"], m=cfg["graph_tangent_dim"], ridge=cfg["graph_ridge"])


@dataclass
class GraphConfig:
    """Everything needed to build the per-view regularizers."""
    kind: str = "hessian"
    neighbors: int = 10
    tangent_dim: int = 2
    ridge: float = 1e-6
    laplacian_weighting: str = "binary"
    heat_sigma: float = 1.0
    include_label_view: bool = True
    trace_normalize: bool = True
    workers: int = 1

    def hessian_config(self) -> HessianConfig:
        return HessianConfig(k=self.neighbors, m=self.tangent_dim, ridge=self.ridge)

    @classmethod
    def from_config(cls, cfg: dict) -> "GraphConfig":
        return cls(kind=cfg["solver_regularizer"], neighbors=cfg["graph_neighbors"],
                   tangent_dim=cfg["graph_tangent_dim"], ridge=cfg["graph_ridge"],
                   laplacian_weighting=cfg["graph_laplacian_weighting"], heat_sigma=cfg["graph_heat_sigma"],
                   include_label_view=cfg["solver_include_label_view"],
                   trace_normalize=cfg["solver_trace_normalize"], workers=cfg["graph_workers"])


def knn_graph(X: ArrayLike, k: int) -> NeighborGraph:
    """Exact k nearest neighbours of every column; ties go to the lower index."""
    x = _values(X)
    n = x.shape[1]
    if not 1 <= k < n:
        raise ValidationError(f"neighbour count k={k} must satisfy 1 <= k < N={n}")
    dist = cdist(x.T, x.T, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    ids = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return NeighborGraph(neighbor_ids=ids, k=k)


def _quadratic_pairs(m: int) -> List[Tuple[int, int]]:
    return [(r, s) for r in range(m) for s in range(r, m)]


def frobenius_weights(m: int) -> np.ndarray:
    """‖Hess‖_F² = Σ 4c_rr² + Σ_{r<s} 2c_rs² for f = Σ c_rs t_r t_s."""
    return np.array([4.0 if r == s else 2.0 for r, s in _quadratic_pairs(m)])


def local_hessian_operator(points: np.ndarray, m: int, ridge: float, sample_id: int = 0) -> np.ndarray:
    """
    Map from function values on a neighbourhood to the quadratic coefficients of
    the local second-order fit in tangent coordinates.

    Args:
        points: (k+1) × P neighbourhood, the owning sample included
        m: tangent dimension
        ridge: relative ridge on the non-constant coefficients, scaled by trace(G)

    Returns:
        q × (k+1) matrix, q = m(m+1)/2, rows ordered as (r, s) with r <= s
    """
    centered = points - points.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    tangent = np.zeros((points.shape[0], m))
    d = min(m, vt.shape[0])
    tangent[:, :d] = centered @ vt[:d].T

    radius = float(np.max(np.linalg.norm(tangent, axis=1)))
    if radius <= 0.0:
        radius = 1.0
    t = tangent / radius

    pairs = _quadratic_pairs(m)
    quad = np.column_stack([t[:, r] * t[:, s] for r, s in pairs])
    design = np.hstack([np.ones((t.shape[0], 1)), t, quad])
    gram = design.T @ design
    # intercept is unpenalized so constants are fitted exactly
    penalty = np.full(design.shape[1], ridge * np.trace(gram))
    penalty[0] = 0.0
    system = gram + np.diag(penalty)
    if ridge == 0.0 and np.linalg.cond(system) > 1e12:
        raise NumericalError(f"neighbourhood of sample {sample_id} is rank deficient; increase the ridge")
    try:
        coef = scipy.linalg.solve(system, design.T, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        raise NumericalError(f"neighbourhood of sample {sample_id} is rank deficient; increase the ridge")
    # coefficients in scaled coordinates: c' = c·radius²
    return coef[1 + m:, :] / radius ** 2


def _checked_psd(values: np.ndarray, kind: str) -> RegularizerMatrix:
    values = 0.5 * (values + values.T)
    if values.size:
        eig, vec = scipy.linalg.eigh(values)
        scale = max(float(np.max(np.abs(eig))), 1e-300)
        if eig[0] < -PSD_REJECT_TOL * scale:
            raise InvariantError(f"{kind} regularizer has eigenvalue {eig[0]:.3e}, not PSD")
        if eig[0] < -PSD_CLAMP_TOL * scale:
            values = (vec * np.maximum(eig, 0.0)) @ vec.T
            values = 0.5 * (values + values.T)
    return RegularizerMatrix(values=values, kind=kind)


def hessian_energy(X: ArrayLike, cfg: HessianConfig, workers: int = 1) -> RegularizerMatrix:
    """
    Hessian energy regularizer of one view

    Local fits are independent and run on a thread pool when ``workers > 1``;
    assembly is serial, so the result does not depend on ``workers``.
    """
    cfg.validate()
    x = _values(X)
    n = x.shape[1]
    if n <= cfg.k:
        raise ValidationError(f"N={n} samples cannot have k={cfg.k} neighbours")
    graph = knn_graph(x, cfg.k)
    points = x.T
    weights = frobenius_weights(cfg.m)

    def local_block(i: int) -> Tuple[np.ndarray, np.ndarray]:
        idx = np.concatenate([[i], graph.neighbor_ids[i]])
        b = local_hessian_operator(points[idx], cfg.m, cfg.ridge, sample_id=i)
        return idx, b.T @ (weights[:, None] * b)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(local_block, range(n)))
    else:
        blocks = [local_block(i) for i in range(n)]

    H = np.zeros((n, n))
    for idx, block in blocks:
        H[np.ix_(idx, idx)] += block
    return _checked_psd(H, "hessian")


def laplacian(X: ArrayLike, k: int, weighting: str = "binary", sigma: Optional[float] = None) -> RegularizerMatrix:
    """L = Deg − A on the symmetrized kNN graph, binary or heat-kernel weights."""
    if weighting not in LAPLACIAN_WEIGHTINGS:
        raise ValidationError(f"unknown weighting '{weighting}', choose from {LAPLACIAN_WEIGHTINGS}")
    if weighting == "heat" and (sigma is None or not sigma > 0):
        raise ValidationError(f"heat weighting needs sigma > 0, got {sigma}")
    x = _values(X)
    graph = knn_graph(x, k)
    n = x.shape[1]
    rows = np.repeat(np.arange(n), k)
    cols = graph.neighbor_ids.ravel()
    if weighting == "binary":
        w = np.ones(rows.size)
    else:
        d2 = np.sum((x[:, rows] - x[:, cols]) ** 2, axis=0)
        w = np.exp(-d2 / sigma ** 2)
    A = np.zeros((n, n))
    A[rows, cols] = w
    A = np.maximum(A, A.T)
    L = np.diag(A.sum(axis=1)) - A
    return _checked_psd(L, "laplacian")


def weighted_sum(regs: Sequence[RegularizerMatrix], weights: Sequence[float]) -> RegularizerMatrix:
    """Σ_v weights_v · regs_v without any constraint on the weights."""
    if len(regs) != len(weights) or not regs:
        raise ValidationError(f"need one weight per regularizer: {len(regs)} matrices, {len(weights)} weights")
    total = np.zeros_like(regs[0].values)
    for reg, w in zip(regs, weights):
        if reg.values.shape != total.shape:
            raise ValidationError("regularizers have different sizes")
        total = total + float(w) * reg.values
    return RegularizerMatrix(values=total, kind=regs[0].kind)


def combine(regs: Sequence[RegularizerMatrix], alpha: Sequence[float]) -> RegularizerMatrix:
    """Convex combination Σ α_v H_v; α must lie on the simplex."""
    alpha = np.asarray(alpha, dtype=float)
    if len(regs) != alpha.size:
        raise ValidationError(f"need one weight per regularizer: {len(regs)} matrices, {alpha.size} weights")
    if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"view weights must lie on the simplex, got {alpha.tolist()}")
    return weighted_sum(regs, alpha)


def trace_normalize(reg: RegularizerMatrix) -> RegularizerMatrix:
    """Rescale to trace N so views with different feature scales weigh alike."""
    tr = float(np.trace(reg.values))
    if tr <= 0.0:
        return reg
    return RegularizerMatrix(values=reg.values * (reg.n / tr), kind=reg.kind)


def build_regularizer(X: ArrayLike, cfg: GraphConfig) -> RegularizerMatrix:
    if cfg.kind == "hessian":
        return hessian_energy(X, cfg.hessian_config(), workers=cfg.workers)
    if cfg.kind == "laplacian":
        return laplacian(X, cfg.neighbors, cfg.laplacian_weighting, cfg.heat_sigma)
    raise ValidationError(f"no regularizer for kind '{cfg.kind}'")


def label_view_regularizer(Y: np.ndarray, n: int, cfg: GraphConfig) -> Optional[RegularizerMatrix]:
    """
    Label-view regularizer: built on the l labelled samples, zero-padded to N×N

    Returns:
        None when there are too few labels (l <= k) to build the neighbourhood graph
    """
    l = Y.shape[1]
    if l <= cfg.neighbors:
        logger.warning(f"标签视图只有 l={l} 个样本，不足以构建 k={cfg.neighbors} 近邻图，跳过")
        return None
    small = build_regularizer(Y, cfg)
    padded = np.zeros((n, n))
    padded[:l, :l] = small.values
    return RegularizerMatrix(values=padded, kind=small.kind)


def build_view_regularizers(data: MultiviewDataset, cfg: GraphConfig) -> List[RegularizerMatrix]:
    """
    One regularizer per feature view, plus the label view when enabled

    Returns:
        V or V+1 matrices, each scaled to trace N when ``trace_normalize`` is set; [] for kind none
    """
    if cfg.kind not in REGULARIZER_KINDS:
        raise ValidationError(f"unknown regularizer '{cfg.kind}', choose from {REGULARIZER_KINDS}")
    if cfg.kind == "none":
        return []
    regs = [build_regularizer(view, cfg) for view in data.views]
    if cfg.include_label_view:
        label_reg = label_view_regularizer(data.Y, data.total_count, cfg)
        if label_reg is not None:
            regs.append(label_reg)
    if cfg.trace_normalize:
        regs = [trace_normalize(r) for r in regs]
    logger.debug(f"built {len(regs)} {cfg.kind} regularizers for N={data.total_count}")
    return regs
