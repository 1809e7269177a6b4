"""
Ranking metrics: 11-point interpolated average precision and mean AP.

**Feature: mhdsc-eval**
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from pipeline.errors import ValidationError
from utils.matrix_io import NUMBER_FORMAT

logger = logging.getLogger(__name__)

RECALL_LEVELS = 11


@dataclass(frozen=True)
class RankedPredictions:
    scores: np.ndarray
    relevance: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float).ravel()
        relevance = np.asarray(self.relevance, dtype=float).ravel()
        if scores.shape != relevance.shape:
            raise ValidationError(f"{scores.size} scores but {relevance.size} relevance flags")
        if not np.all((relevance == 0) | (relevance == 1)):
            raise ValidationError("relevance must be 0/1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "relevance", relevance)


def average_precision(rp: RankedPredictions) -> float:
    """
    11-point interpolated AP.

    Items are ranked by descending score, ties by original index. Recall
    thresholds are compared as exact rationals and the eleven maxima are summed
    as fractions, so hand-traced cases come out exact.

    Raises:
        ValidationError: no relevant item (AP undefined)
    """
    n_rel = int(rp.relevance.sum())
    if n_rel == 0:
        raise ValidationError("average precision is undefined without relevant items")
    order = np.argsort(-rp.scores, kind="stable")
    tp = np.cumsum(rp.relevance[order]).astype(np.int64)
    ranks = np.arange(1, tp.size + 1)
    precision = tp / ranks

    total = Fraction(0)
    for i in range(RECALL_LEVELS):
        # recall = tp / n_rel >= i / 10
        reached = 10 * tp >= i * n_rel
        j = int(np.argmax(np.where(reached, precision, -1.0)))
        total += Fraction(int(tp[j]), int(ranks[j]))
    return float(total / RECALL_LEVELS)


def mean_ap(aps: Sequence[float]) -> float:
    if len(aps) == 0:
        raise ValidationError("mean AP of an empty list")
    return float(np.mean(np.asarray(aps, dtype=float)))


def per_class_ap(scores: np.ndarray, labels: np.ndarray) -> List[Optional[float]]:
    """
    逐类计算 AP；没有正样本的类记为 None（输出 NA，不计入 mAP）

    Args:
        scores: P_c × n 分数矩阵
        labels: P_c × n 0/1 标签矩阵
    """
    scores = np.atleast_2d(scores)
    labels = np.atleast_2d(labels)
    if scores.shape != labels.shape:
        raise ValidationError(f"dimension mismatch: scores {scores.shape}, labels {labels.shape}")
    out: List[Optional[float]] = []
    for c in range(scores.shape[0]):
        if not np.any(labels[c] == 1):
            logger.warning(f"类别 {c} 没有正样本，AP 记为 NA")
            out.append(None)
            continue
        out.append(average_precision(RankedPredictions(scores[c], labels[c])))
    return out


def format_metrics_tsv(aps: Sequence[Optional[float]]) -> str:
    lines = ["class\tAP"]
    for c, ap in enumerate(aps):
        lines.append(f"{c}\t{'NA' if ap is None else NUMBER_FORMAT % ap}")
    defined = [ap for ap in aps if ap is not None]
    lines.append(f"mAP\t{NUMBER_FORMAT % mean_ap(defined) if defined else 'NA'}")
    return "\n".join(lines) + "\n"
