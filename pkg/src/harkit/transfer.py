"""Personalization: freeze everything except the classification layer and
fine-tune it on a few labeled segments from the target subject."""

from collections import defaultdict
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .model import CLASSIFIER_NAMES, TrainedModel, train

DEFAULT_K = 3


@dataclass
class TransferSpec:
    k: int = DEFAULT_K
    epochs: int = 30
    learning_rate: float = 1e-3
    seed: int = 0


@dataclass
class TransferSplit:
    """Disjoint split of one subject's segments: k per class go to transfer,
    the rest become the evaluation holdout."""

    transfer: list
    holdout: list


def freeze_all_but_classifier(model: TrainedModel) -> TrainedModel:
    """Mark every parameter frozen except the classification layer. Idempotent."""
    for p in model.params:
        p.frozen = p.name not in CLASSIFIER_NAMES
    return model


def sample_transfer_instances(segments, k: int, seed: int) -> TransferSplit:
    """Draw exactly k segments per class uniformly without replacement.

    Classes with fewer than k segments are an error; the complement of the
    draw, in original order, is the holdout.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    segments = list(segments)
    by_class = defaultdict(list)
    for i, seg in enumerate(segments):
        by_class[seg.label.index].append(i)
    deficient = [segments[idxs[0]].label.name
                 for cls, idxs in sorted(by_class.items()) if len(idxs) < k]
    if deficient:
        raise DataError(
            f"classes with fewer than k={k} segments: {', '.join(deficient)}")
    rng = np.random.default_rng(seed)
    chosen: set[int] = set()
    for cls in sorted(by_class):
        idxs = by_class[cls]
        picked = rng.choice(len(idxs), size=k, replace=False)
        chosen.update(idxs[j] for j in picked)
    transfer = [segments[i] for i in sorted(chosen)]
    holdout = [seg for i, seg in enumerate(segments) if i not in chosen]
    return TransferSplit(transfer=transfer, holdout=holdout)


def fine_tune(model: TrainedModel, split: TransferSplit, spec: TransferSpec) -> TrainedModel:
    """Retrain the classification layer on the transfer instances, in place.

    The model must already be frozen via freeze_all_but_classifier; everything
    frozen stays bit-identical. Optimizer state always starts fresh.
    """
    frozen_wrong = [p.name for p in model.params
                    if p.frozen == (p.name in CLASSIFIER_NAMES)]
    if frozen_wrong:
        raise ValueError(
            "fine_tune expects a model frozen via freeze_all_but_classifier; "
            f"offending parameters: {', '.join(frozen_wrong)}")
    cfg = replace(model.config, epochs=spec.epochs,
                  learning_rate=spec.learning_rate, seed=spec.seed)
    train(model, split.transfer, cfg)
    return model
