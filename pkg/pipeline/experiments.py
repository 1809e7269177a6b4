"""
Method comparison: the multiview model against its first-order, unregularized,
unsupervised, single-view and concatenated-view variants, scored by test-set mAP.

Method names:
  mhdsc / mldsc / mdsc            all views; hessian / laplacian / no manifold term
  msc                             all views, label view not reconstructed, scored by the LS head
  hdsc:<v> / ldsc:<v> / dsc:<v>   view v only
  bhdsc / bldsc / bdsc            best single view by mean mAP over the compared seeds
  concat-hdsc / -ldsc / -dsc      all views concatenated into one
  <name>+ls                       score with the least-squares head instead of the label dictionary
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from pipeline.dataset import MultiviewDataset, concatenate_views, select_view, split_holdout, split_labelled
from pipeline.errors import ValidationError
from pipeline.evaluation import mean_ap, per_class_ap
from pipeline.inference import EncodeConfig, encode_batch, predict_batch, predict_ls, train_ls_head
from pipeline.solver import Hyperparams, fit
from utils.matrix_io import NUMBER_FORMAT

logger = logging.getLogger(__name__)

DEFAULT_METHODS = ("mhdsc", "mldsc", "mdsc", "msc", "bhdsc", "bldsc", "bdsc",
                   "concat-hdsc", "concat-ldsc", "concat-dsc", "mhdsc+ls")

_KIND_BY_PREFIX = {"h": "hessian", "l": "laplacian", "": "none"}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    regularizer: str
    view: Optional[int] = None
    concatenate: bool = False
    best_view: bool = False
    supervised: bool = True
    head: str = "inference"

    def prepare(self, data: MultiviewDataset) -> MultiviewDataset:
        if self.best_view:
            raise ValidationError(f"'{self.name}' picks a view across seeds; run it through compare_methods")
        if self.concatenate:
            return concatenate_views(data)
        if self.view is not None:
            return select_view(data, self.view)
        return data

    def for_view(self, v: int) -> "MethodSpec":
        base = self.name[1:].split("+")[0]
        suffix = "+ls" if self.head == "ls" else ""
        return replace(self, name=f"{base}:{v}{suffix}", view=v, best_view=False)


def _parse_base(name: str) -> MethodSpec:
    if name == "msc":
        return MethodSpec(name, "none", supervised=False, head="ls")
    if name.startswith("concat-"):
        prefix = name[len("concat-"):-3]
        if name.endswith("dsc") and prefix in _KIND_BY_PREFIX:
            return MethodSpec(name, _KIND_BY_PREFIX[prefix], concatenate=True)
        raise ValidationError(f"unknown method '{name}'")
    base, sep, view = name.partition(":")
    if base.endswith("dsc"):
        prefix = base[:-3]
        if sep:
            if prefix.startswith("m") or prefix.startswith("b") or not view.isdigit():
                raise ValidationError(f"unknown method '{name}'")
            if prefix in _KIND_BY_PREFIX:
                return MethodSpec(name, _KIND_BY_PREFIX[prefix], view=int(view))
        elif prefix[:1] in ("m", "b") and prefix[1:] in _KIND_BY_PREFIX:
            return MethodSpec(name, _KIND_BY_PREFIX[prefix[1:]], best_view=prefix[0] == "b")
    raise ValidationError(f"unknown method '{name}'")


def parse_method(name: str) -> MethodSpec:
    base, sep, head = name.partition("+")
    if sep and head != "ls":
        raise ValidationError(f"unknown method '{name}'")
    spec = _parse_base(base)
    return replace(spec, name=name, head="ls") if sep else spec


def run_method(train: MultiviewDataset, test: MultiviewDataset, method: Union[str, MethodSpec], hp: Hyperparams,
               encode_cfg: EncodeConfig, seed: int = 0, ls_ridge: float = 1e-8) -> float:
    """Fit on ``train``, then encode and score the fully labelled ``test`` set; returns its mAP."""
    spec = method if isinstance(method, MethodSpec) else parse_method(method)
    train_m, test_m = spec.prepare(train), spec.prepare(test)
    result = fit(train_m, replace(hp, regularizer=spec.regularizer, supervised=spec.supervised), seed=seed)
    codes = encode_batch([view.values for view in test_m.views], result.state.feature_dictionaries, encode_cfg)
    if spec.head == "ls":
        head = train_ls_head(result.state.W_L, train_m.Y, ls_ridge)
        scores = predict_ls(head, codes)
    else:
        scores = predict_batch(codes, result.state.label_dictionary)
    aps = [ap for ap in per_class_ap(scores, test_m.Y) if ap is not None]
    if not aps:
        raise ValidationError("test set has no class with a positive sample")
    value = mean_ap(aps)
    logger.info(f"{spec.name}: mAP={value:.4f}")
    return value


@dataclass
class ComparisonRow:
    method: str
    values: List[float] = field(default_factory=list)
    selected: str = "-"

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def stderr(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1) / np.sqrt(len(self.values)))


def compare_methods(data_for_seed: Callable[[int], MultiviewDataset], methods: Sequence[str], hp: Hyperparams,
                    encode_cfg: EncodeConfig, seeds: Sequence[int], labelled_fraction: float,
                    n_test: int, ls_ridge: float = 1e-8) -> List[ComparisonRow]:
    """
    Per seed: draw data, hold out a test set, subsample the labels, then fit and score every method

    Best-view methods (bhdsc etc.) run every single view per seed and keep the view with the
    highest mean mAP.

    Args:
        data_for_seed: fully labelled dataset for a seed (synthetic data may vary with it)
    """
    specs = {m: parse_method(m) for m in methods}
    rows: Dict[str, ComparisonRow] = {m: ComparisonRow(m) for m in methods}
    per_view: Dict[str, Dict[str, List[float]]] = {m: {} for m in methods if specs[m].best_view}
    for seed in seeds:
        data = data_for_seed(seed)
        train, test = split_holdout(data, n_test, seed=seed)
        train = split_labelled(train, labelled_fraction, seed=seed)
        for m in methods:
            spec = specs[m]
            if not spec.best_view:
                rows[m].values.append(run_method(train, test, spec, hp, encode_cfg, seed=seed, ls_ridge=ls_ridge))
                continue
            for v in range(data.n_views):
                single = spec.for_view(v)
                value = run_method(train, test, single, hp, encode_cfg, seed=seed, ls_ridge=ls_ridge)
                per_view[m].setdefault(single.name, []).append(value)

    for m, candidates in per_view.items():
        # ties go to the lower view index
        best = max(candidates, key=lambda name: float(np.mean(candidates[name])))
        rows[m].values = list(candidates[best])
        rows[m].selected = best
        logger.info(f"{m}: 最佳单视图 {best}")
    return [rows[m] for m in methods]


def format_comparison_tsv(rows: Sequence[ComparisonRow]) -> str:
    lines = ["method\tmean_mAP\tstderr\tn_seeds\tselected"]
    for row in rows:
        lines.append(f"{row.method}\t{NUMBER_FORMAT % row.mean}\t{NUMBER_FORMAT % row.stderr}\t"
                     f"{len(row.values)}\t{row.selected}")
    return "\n".join(lines) + "\n"
