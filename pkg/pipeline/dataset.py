"""
Multiview semi-supervised datasets.

Columns are samples. The first ``labelled_count`` columns of every view are the
labelled block, the rest are unlabelled; the label matrix only covers the
labelled block. All arrays held by these types are read-only.

**Feature: mhdsc-dataset**
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pipeline.errors import DatasetFormatError, ValidationError
from utils.defaults import MANIFOLDS, NORMALIZE_METHODS
from utils.matrix_io import (
    ensure_parent_dir,
    format_row,
    header_int,
    parse_header,
    parse_row,
    read_data_lines,
    read_matrix_bundle,
    write_matrix_bundle,
)

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ViewMatrix:
    """一个视图的特征矩阵，P_v 行 × n 列"""
    values: np.ndarray
    view_id: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError(f"view {self.view_id}: expected a 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"view {self.view_id}: non-finite feature values")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelMatrix:
    """0/1 多标签矩阵，P_c 行 × l 列"""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError(f"labels: expected a 2-D matrix, got shape {values.shape}")
        if not np.all((values == 0.0) | (values == 1.0)):
            raise ValidationError("label not in {0,1}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MultiviewDataset:
    views: Tuple[ViewMatrix, ...]
    labels: LabelMatrix
    labelled_count: int
    total_count: int

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        if not self.views:
            raise ValidationError("dataset needs at least one view")
        if not 1 <= self.labelled_count <= self.total_count:
            raise ValidationError(
                f"labelled count l={self.labelled_count} outside [1, N={self.total_count}]")
        for view in self.views:
            if view.n != self.total_count:
                raise ValidationError(
                    f"dimension mismatch: view {view.view_id} has {view.n} columns, N={self.total_count}")
        if self.labels.values.shape[1] != self.labelled_count:
            raise ValidationError(
                f"dimension mismatch: labels have {self.labels.values.shape[1]} columns, l={self.labelled_count}")

    @classmethod
    def from_arrays(cls, views: Sequence[np.ndarray], labels: np.ndarray,
                    labelled_count: Optional[int] = None) -> "MultiviewDataset":
        labels = np.atleast_2d(np.asarray(labels, dtype=float))
        l = labels.shape[1] if labelled_count is None else labelled_count
        mats = tuple(ViewMatrix(v, view_id=i) for i, v in enumerate(views))
        return cls(views=mats, labels=LabelMatrix(labels), labelled_count=l, total_count=mats[0].n)

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> List[int]:
        return [v.dim for v in self.views]

    @property
    def n_classes(self) -> int:
        return self.labels.n_classes

    @property
    def n_unlabelled(self) -> int:
        return self.total_count - self.labelled_count

    @property
    def Y(self) -> np.ndarray:
        return self.labels.values

    def X(self, v: int) -> np.ndarray:
        return self.views[v].values

    def X_L(self, v: int) -> np.ndarray:
        return self.views[v].values[:, :self.labelled_count]

    def X_U(self, v: int) -> np.ndarray:
        return self.views[v].values[:, self.labelled_count:]


@dataclass
class SynthSpec:
    views: int = 3
    dims: Tuple[int, ...] = (8, 8, 8)
    n_classes: int = 4
    n_samples: int = 120
    n_atoms_true: int = 10
    sparsity: int = 2
    noise_sigma: float = 0.01
    manifold: str = "none"
    seed: int = 0

    def validate(self) -> "SynthSpec":
        self.dims = tuple(int(p) for p in self.dims)
        if len(self.dims) == 1 and self.views > 1:
            self.dims = self.dims * self.views
        if self.views < 1 or len(self.dims) != self.views:
            raise ValidationError(f"need one dimension per view: V={self.views}, dims={self.dims}")
        for name, value in (("n_classes", self.n_classes), ("n_samples", self.n_samples),
                            ("n_atoms_true", self.n_atoms_true), ("sparsity", self.sparsity)):
            if value < 1:
                raise ValidationError(f"{name} must be positive, got {value}")
        if min(self.dims) < 1:
            raise ValidationError(f"view dimensions must be positive, got {self.dims}")
        if self.sparsity > self.n_atoms_true:
            raise ValidationError(
                f"sparsity {self.sparsity} exceeds the number of atoms {self.n_atoms_true}")
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")
        if self.manifold not in MANIFOLDS:
            raise ValidationError(f"unknown manifold '{self.manifold}', choose from {MANIFOLDS}")
        need = {"none": 1, "grid2d": 2, "swiss_roll": 3}[self.manifold]
        if self.sparsity < need:
            raise ValidationError(f"manifold '{self.manifold}' needs sparsity >= {need}")
        return self

    @classmethod
    def from_config(cls, cfg: dict, seed: int = 0) -> "SynthSpec":
        views = cfg["synth_views"]
        return cls(views=views, dims=(cfg["synth_dim"],) * views, n_classes=cfg["synth_classes"],
                   n_samples=cfg["synth_n"], n_atoms_true=cfg["synth_atoms_true"],
                   sparsity=cfg["synth_sparsity"], noise_sigma=cfg["synth_noise"],
                   manifold=cfg["synth_manifold"], seed=seed)


@dataclass
class GroundTruth:
    dictionaries: List[np.ndarray]
    codes: np.ndarray
    label_map: np.ndarray
    thresholds: np.ndarray
    manifold_coords: Optional[np.ndarray] = None
    supports: List[np.ndarray] = field(default_factory=list)


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q[:, :cols]


def _grid_coords(n: int) -> np.ndarray:
    side = int(np.ceil(np.sqrt(n)))
    step = 1.0 / (side - 1) if side > 1 else 0.0
    ii, jj = np.divmod(np.arange(n), side)
    return np.vstack([jj * step, ii * step])


def _manifold_codes(rng: np.random.Generator, spec: SynthSpec) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
    n, nd, s = spec.n_samples, spec.n_atoms_true, spec.sparsity
    codes = np.zeros((nd, n))
    support = np.sort(rng.choice(nd, s, replace=False))
    if spec.manifold == "grid2d":
        coords = _grid_coords(n)
        points = coords - 0.5
    else:
        a = rng.uniform(0.0, 1.0, n)
        h = rng.uniform(0.0, 1.0, n)
        t = 1.5 * np.pi * (1.0 + 2.0 * a)
        points = np.vstack([t * np.cos(t), 3.0 * np.pi * h, t * np.sin(t)]) / (4.5 * np.pi)
        points = points - points.mean(axis=1, keepdims=True)
        coords = np.vstack([a, h])
    q = _orthonormal(rng, s, points.shape[0])
    # 偏置的绝对值大于嵌入点的范数，保证支撑集上的系数都不为零
    offset = rng.choice([-1.0, 1.0], s) * rng.uniform(3.0, 4.0, s)
    codes[support, :] = q @ points + offset[:, None]
    return codes, coords, [support] * n


def synth_multiview(spec: SynthSpec) -> Tuple[MultiviewDataset, GroundTruth]:
    """
    生成多视图合成数据：X^(v) = D_true^(v) W_true + 噪声，标签由 W_true 的线性映射阈值化得到

    Args:
        spec: 合成数据参数

    Returns:
        (数据集, 真实字典与编码)，固定 seed 时结果逐位一致
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    nd, n = spec.n_atoms_true, spec.n_samples

    dictionaries = []
    for p in spec.dims:
        d = rng.standard_normal((p, nd))
        dictionaries.append(d / np.linalg.norm(d, axis=0, keepdims=True))

    coords = None
    if spec.manifold == "none":
        codes = np.zeros((nd, n))
        supports = []
        for j in range(n):
            support = np.sort(rng.choice(nd, spec.sparsity, replace=False))
            signs = rng.choice([-1.0, 1.0], spec.sparsity)
            codes[support, j] = signs * rng.uniform(0.5, 1.5, spec.sparsity)
            supports.append(support)
    else:
        codes, coords, supports = _manifold_codes(rng, spec)

    views = []
    for d in dictionaries:
        x = d @ codes
        if spec.noise_sigma > 0:
            x = x + spec.noise_sigma * rng.standard_normal(x.shape)
        views.append(x)

    label_map = rng.standard_normal((spec.n_classes, nd))
    scores = label_map @ codes
    thresholds = np.median(scores, axis=1)
    labels = (scores > thresholds[:, None]).astype(float)

    data = MultiviewDataset.from_arrays(views, labels)
    truth = GroundTruth(dictionaries=dictionaries, codes=codes, label_map=label_map,
                        thresholds=thresholds, manifold_coords=coords, supports=supports)
    logger.info(f"合成数据: V={spec.views}, N={n}, P={spec.dims}, Pc={spec.n_classes}, "
                f"manifold={spec.manifold}, noise={spec.noise_sigma}")
    return data, truth


def _replace_views(d: MultiviewDataset, views: Sequence[np.ndarray]) -> MultiviewDataset:
    mats = tuple(ViewMatrix(v, view_id=i) for i, v in enumerate(views))
    return MultiviewDataset(views=mats, labels=d.labels, labelled_count=d.labelled_count,
                            total_count=d.total_count)


def normalize_views(d: MultiviewDataset, method: str = "unit") -> MultiviewDataset:
    """
    视图归一化

    - unit: 每个样本列缩放到单位欧氏范数（零列保持不变）
    - zscore: 每个特征维度减均值除标准差（标准差为零的维度只做中心化）
    - none: 原样返回
    """
    if method not in NORMALIZE_METHODS:
        raise ValidationError(f"unknown normalization '{method}', choose from {NORMALIZE_METHODS}")
    if method == "none":
        return d
    out = []
    for view in d.views:
        x = view.values
        if method == "unit":
            norms = np.linalg.norm(x, axis=0)
            out.append(x / np.where(norms > 0, norms, 1.0)[None, :])
        else:
            mean = x.mean(axis=1, keepdims=True)
            std = x.std(axis=1, keepdims=True)
            out.append((x - mean) / np.where(std > 0, std, 1.0))
    return _replace_views(d, out)


def take_columns(d: MultiviewDataset, columns: np.ndarray, labelled_count: int,
                 labels: np.ndarray) -> MultiviewDataset:
    views = [view.values[:, columns] for view in d.views]
    return MultiviewDataset.from_arrays(views, labels, labelled_count)


def split_labelled(d: MultiviewDataset, fraction: float, seed: int = 0) -> MultiviewDataset:
    """
    随机选取一部分已标注样本作为标注块，移到最前面；其余样本的标签被丢弃

    Raises:
        ValidationError: fraction 不在 (0,1] 内，或得到的 l < 1 或超过可用标签数
    """
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"labelled fraction must lie in (0, 1], got {fraction}")
    n = d.total_count
    l_new = int(np.floor(fraction * n + 1e-9))
    if l_new < 1:
        raise ValidationError(f"fraction {fraction} of N={n} leaves no labelled sample")
    if l_new > d.labelled_count:
        raise ValidationError(
            f"fraction {fraction} asks for {l_new} labels but only {d.labelled_count} are available")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(d.labelled_count, l_new, replace=False))
    rest = np.setdiff1d(np.arange(n), chosen)
    columns = np.concatenate([chosen, rest])
    return take_columns(d, columns, l_new, d.Y[:, chosen])


def holdout_indices(n: int, n_test: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """(train, test) 列下标，各自升序"""
    if not 1 <= n_test < n:
        raise ValidationError(f"test size must lie in [1, N-1], got {n_test}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split_holdout(d: MultiviewDataset, n_test: int, seed: int = 0) -> Tuple[MultiviewDataset, MultiviewDataset]:
    """把全标注数据集随机划分为训练集和测试集（两者均保留全部标签）"""
    if d.labelled_count != d.total_count:
        raise ValidationError("hold-out split needs a fully labelled dataset")
    train, test = holdout_indices(d.total_count, n_test, seed)
    return (take_columns(d, train, train.size, d.Y[:, train]),
            take_columns(d, test, test.size, d.Y[:, test]))


def select_view(d: MultiviewDataset, v: int) -> MultiviewDataset:
    if not 0 <= v < d.n_views:
        raise ValidationError(f"view index {v} outside [0, {d.n_views})")
    return MultiviewDataset.from_arrays([d.X(v)], d.Y, d.labelled_count)


def concatenate_views(d: MultiviewDataset) -> MultiviewDataset:
    """把所有视图拼接成一个长特征向量（拼接基线）"""
    return MultiviewDataset.from_arrays([np.vstack([view.values for view in d.views])], d.Y, d.labelled_count)


def save_dataset(d: MultiviewDataset, path: str) -> str:
    ensure_parent_dir(path)
    dims = ",".join(str(p) for p in d.dims)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"MVDS v1 V={d.n_views} N={d.total_count} l={d.labelled_count} "
                 f"Pc={d.n_classes} P={dims}\n")
        for view in d.views:
            for row in view.values:
                fh.write(format_row(row) + "\n")
        for row in d.Y:
            fh.write(format_row(row) + "\n")
    return path


def load_dataset(path: str) -> MultiviewDataset:
    """
    读取 MVDS v1 文本数据集

    Raises:
        DatasetFormatError: 表头错误、维度不符、非有限值或标签不是 0/1，附带行列位置
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = read_data_lines(fh)
    if not lines:
        raise DatasetFormatError("empty dataset file", 1)
    head_no, head = lines[0]
    fields = parse_header(head, "MVDS", head_no)
    v = header_int(fields, "V", head_no)
    n = header_int(fields, "N", head_no)
    l = header_int(fields, "l", head_no)
    pc = header_int(fields, "Pc", head_no)
    try:
        dims = [int(p) for p in fields.get("P", "").split(",") if p]
    except ValueError:
        raise DatasetFormatError(f"malformed view dimension list P={fields.get('P')!r}", head_no)
    if v < 1 or len(dims) != v or min(dims) < 1:
        raise DatasetFormatError(f"header declares V={v} but P={fields.get('P')!r}", head_no)
    if n < 1 or pc < 1 or not 1 <= l <= n:
        raise DatasetFormatError(f"inconsistent header counts N={n}, l={l}, Pc={pc}", head_no)

    body = lines[1:]
    expected = sum(dims) + pc
    if len(body) != expected:
        last = body[-1][0] if body else head_no
        raise DatasetFormatError(f"dimension mismatch: expected {expected} data rows, found {len(body)}", last)

    views = []
    pos = 0
    for p in dims:
        x = np.empty((p, n))
        for i in range(p):
            line_no, text = body[pos]
            x[i] = parse_row(text, n, line_no)
            pos += 1
        views.append(x)
    y = np.empty((pc, l))
    for i in range(pc):
        line_no, text = body[pos]
        y[i] = parse_row(text, l, line_no)
        bad = np.flatnonzero((y[i] != 0.0) & (y[i] != 1.0))
        if bad.size:
            raise DatasetFormatError("label not in {0,1}", line_no, int(bad[0]) + 1)
        pos += 1
    return MultiviewDataset.from_arrays(views, y, l)


def take_truth_columns(truth: GroundTruth, columns: np.ndarray) -> GroundTruth:
    coords = None if truth.manifold_coords is None else truth.manifold_coords[:, columns]
    supports = [truth.supports[j] for j in columns] if truth.supports else []
    return GroundTruth(dictionaries=truth.dictionaries, codes=truth.codes[:, columns], label_map=truth.label_map,
                       thresholds=truth.thresholds, manifold_coords=coords, supports=supports)


def save_ground_truth(truth: GroundTruth, path: str) -> str:
    """以 MVGT v1 文本格式保存真实字典、编码与标签映射（支撑集可由编码恢复，不单独保存）"""
    blocks = [(f"dictionary_{v}", d) for v, d in enumerate(truth.dictionaries)]
    blocks += [("codes", truth.codes), ("label_map", truth.label_map), ("thresholds", truth.thresholds[None, :])]
    if truth.manifold_coords is not None:
        blocks.append(("manifold_coords", truth.manifold_coords))
    return write_matrix_bundle(path, "MVGT", blocks)


def load_ground_truth(path: str) -> GroundTruth:
    blocks = read_matrix_bundle(path, "MVGT")
    n_dicts = sum(1 for kind in blocks if kind.startswith("dictionary_"))
    try:
        dictionaries = [blocks[f"dictionary_{v}"] for v in range(n_dicts)]
        codes = blocks["codes"]
        truth = GroundTruth(dictionaries=dictionaries, codes=codes, label_map=blocks["label_map"],
                            thresholds=blocks["thresholds"][0], manifold_coords=blocks.get("manifold_coords"))
    except KeyError as e:
        raise DatasetFormatError(f"ground truth file is missing block {e}")
    truth.supports = [np.flatnonzero(codes[:, j]) for j in range(codes.shape[1])]
    return truth
