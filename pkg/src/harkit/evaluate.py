"""Leave-one-subject-out experiment driver.

Per fold and seed: train a source model on every other subject, draw k
transfer instances per class from the held-out subject, then score the
requested variants on that subject's remaining segments:

  trc           -- source model with the classification layer fine-tuned on
                   the transfer instances (everything else frozen)
  frozen_source -- source model with no adaptation
  lr_baseline   -- multinomial logistic regression on statistical features,
                   trained on the source pool plus the transfer instances

Folds are independent, fully seeded work units; any degree of parallelism
produces the identical report.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .datasets import Dataset, config_digest
from .errors import DataError, FormatError, HarkitError, ProtocolError
from .model import NetworkConfig, build_network, predict, train
from .transfer import (TransferSpec, fine_tune, freeze_all_but_classifier,
                       sample_transfer_instances)
from .signal import fit_discretizer

log = logging.getLogger("harkit.evaluate")

VARIANTS = ("trc", "frozen_source", "lr_baseline")
CSV_COLUMNS = ["dataset", "fold", "subject", "variant", "seed", "accuracy",
               "macro_f1", "n_train", "n_transfer", "n_test"]
LR_STEPS = 500
LR_LEARNING_RATE = 0.1


def derive_seed(*parts) -> int:
    """Stable sub-seed from integer key parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass
class FoldResult:
    fold: int
    subject: str
    variant: str
    seed: int
    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    n_train: int
    n_transfer: int
    n_test: int

    def csv_row(self, dataset: str) -> list:
        return [dataset, self.fold, self.subject, self.variant, self.seed,
                repr(self.accuracy), repr(self.macro_f1),
                self.n_train, self.n_transfer, self.n_test]


@dataclass
class EvalReport:
    dataset: str
    config_digest: str
    rows: list

    def aggregates(self) -> dict:
        """Per-variant mean/std (population) of accuracy and macro-F1."""
        out = {}
        for variant in VARIANTS:
            accs = [r.accuracy for r in self.rows if r.variant == variant]
            if not accs:
                continue
            f1s = [r.macro_f1 for r in self.rows if r.variant == variant]
            out[variant] = {
                "mean_accuracy": float(np.mean(accs)),
                "std_accuracy": float(np.std(accs)),
                "mean_macro_f1": float(np.mean(f1s)),
                "std_macro_f1": float(np.std(f1s)),
                "rows": len(accs),
            }
        return out


def loso_folds(dataset: Dataset) -> list:
    """One (test subject, train subjects) pair per subject, lexicographic."""
    subjects = sorted(dataset.subjects)
    if len(subjects) < 2:
        raise ProtocolError(
            f"leave-one-subject-out needs at least 2 subjects, got {len(subjects)}")
    return [(s, [t for t in subjects if t != s]) for s in subjects]


# ---------------------------------------------------------------------------
# metrics


def evaluate(predict_fn, segments, num_classes: int):
    """Accuracy, macro-F1 and the confusion matrix (rows = truth, cols = prediction).

    Macro-F1 averages per-class F1 over classes present in either the labels
    or the predictions; a class with no true and no predicted instances is
    excluded from the average.
    """
    segments = list(segments)
    if not segments:
        raise ProtocolError("cannot evaluate an empty segment list")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for seg in segments:
        confusion[seg.label.index, predict_fn(seg)] += 1
    accuracy = float(np.trace(confusion)) / len(segments)
    f1s = []
    for c in range(num_classes):
        tp = confusion[c, c]
        fn = confusion[c].sum() - tp
        fp = confusion[:, c].sum() - tp
        if tp + fn + fp == 0:
            continue
        f1s.append(2.0 * tp / (2.0 * tp + fp + fn) if tp else 0.0)
    macro_f1 = float(np.mean(f1s)) if f1s else 0.0
    return accuracy, macro_f1, confusion


# ---------------------------------------------------------------------------
# shallow baseline


def extract_shallow_features(segment) -> np.ndarray:
    """Per channel: mean, population std, min, max, mean |v|; channel-major."""
    ch = segment.channels
    feats = np.stack([ch.mean(axis=1), ch.std(axis=1), ch.min(axis=1),
                      ch.max(axis=1), np.abs(ch).mean(axis=1)], axis=1)
    return feats.reshape(-1)


def standardize_fit(features: np.ndarray):
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def lr_loss_and_grads(weights, bias, features, labels):
    """Mean softmax cross-entropy and its gradients for a linear scorer."""
    n = features.shape[0]
    logits = features @ weights.T + bias
    logits -= logits.max(axis=1, keepdims=True)
    ez = np.exp(logits)
    probs = ez / ez.sum(axis=1, keepdims=True)
    loss = float(-np.log(probs[np.arange(n), labels]).mean())
    probs[np.arange(n), labels] -= 1.0
    return loss, probs.T @ features / n, probs.mean(axis=0)


def train_lr_baseline(features, labels, num_classes: int, steps: int = LR_STEPS,
                      learning_rate: float = LR_LEARNING_RATE, seed: int = 0):
    """Zero-initialized multinomial logistic regression by full-batch gradient
    descent; expects standardized features. Returns (W, b).

    The seed argument is accepted for interface parity; full-batch descent
    from zero is deterministic and never draws from it.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    present = np.unique(labels)
    if features.shape[0] == 0 or len(present) < num_classes:
        missing = sorted(set(range(num_classes)) - set(present.tolist()))
        raise DataError(f"baseline training data misses classes {missing}")
    weights = np.zeros((num_classes, features.shape[1]))
    bias = np.zeros(num_classes)
    for _ in range(steps):
        _, gw, gb = lr_loss_and_grads(weights, bias, features, labels)
        weights -= learning_rate * gw
        bias -= learning_rate * gb
    return weights, bias


# ---------------------------------------------------------------------------
# experiment driver


def _fold_task(dataset: Dataset, config: NetworkConfig, spec: TransferSpec,
               variants, fold: int, subject: str, seed: int) -> list:
    train_segments = [s for s in dataset.segments if s.subject_id != subject]
    target_segments = dataset.for_subject(subject)
    num_classes = len(dataset.labels)
    cfg = replace(config, channels=dataset.num_channels, window=dataset.window,
                  classes=num_classes, seed=derive_seed(seed, fold, 0))
    disc = fit_discretizer(train_segments, cfg.bins)
    source = build_network(cfg, np.random.default_rng(derive_seed(seed, fold, 1)),
                           labels=dataset.labels, discretizer=disc)
    train(source, train_segments, cfg)
    split = sample_transfer_instances(target_segments, spec.k,
                                      derive_seed(seed, fold, 2))
    transfer_uids = {s.uid for s in split.transfer}
    holdout_uids = {s.uid for s in split.holdout}
    if transfer_uids & holdout_uids:
        raise ProtocolError(f"transfer/holdout overlap in fold {fold}")
    counts = np.bincount([s.label.index for s in split.transfer], minlength=num_classes)
    if not np.all(counts == spec.k):
        raise ProtocolError(f"per-class transfer counts {counts.tolist()} != k={spec.k}")
    results = []
    for variant in variants:
        if variant == "frozen_source":
            acc, f1, conf = evaluate(lambda s: predict(source, s).index,
                                     split.holdout, num_classes)
        elif variant == "trc":
            personal = freeze_all_but_classifier(source.clone())
            fine_tune(personal, split,
                      replace(spec, seed=derive_seed(seed, fold, 3)))
            acc, f1, conf = evaluate(lambda s: predict(personal, s).index,
                                     split.holdout, num_classes)
        elif variant == "lr_baseline":
            pool = train_segments + split.transfer
            feats = np.array([extract_shallow_features(s) for s in pool])
            labels = np.array([s.label.index for s in pool])
            mean, std = standardize_fit(feats)
            weights, bias = train_lr_baseline((feats - mean) / std, labels, num_classes)

            def lr_predict(s):
                z = (extract_shallow_features(s) - mean) / std
                return int(np.argmax(weights @ z + bias))

            acc, f1, conf = evaluate(lr_predict, split.holdout, num_classes)
        else:
            raise ProtocolError(f"unknown variant {variant!r}")
        results.append(FoldResult(
            fold=fold, subject=subject, variant=variant, seed=seed,
            accuracy=acc, macro_f1=f1, confusion=conf,
            n_train=len(train_segments), n_transfer=len(split.transfer),
            n_test=len(split.holdout)))
    return results


def _fold_task_wrapped(args):
    dataset, config, spec, variants, fold, subject, seed = args
    try:
        return _fold_task(dataset, config, spec, variants, fold, subject, seed)
    except HarkitError as exc:
        raise type(exc)(f"fold {fold} (subject {subject}, seed {seed}): {exc}") from exc


def run_experiment(dataset: Dataset, config: NetworkConfig, spec: TransferSpec,
                   variants=VARIANTS, seeds=(0,), parallel: int = 1) -> EvalReport:
    """Full LOSO sweep; the report is identical for any parallelism degree."""
    variants = tuple(variants)
    for v in variants:
        if v not in VARIANTS:
            raise ProtocolError(f"unknown variant {v!r}; choose from {VARIANTS}")
    folds = loso_folds(dataset)
    tasks = [(dataset, config, spec, variants, fold, subject, seed)
             for fold, (subject, _) in enumerate(folds)
             for seed in seeds]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            chunks = list(pool.map(_fold_task_wrapped, tasks))
    else:
        chunks = [_fold_task_wrapped(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.fold, variants.index(r.variant), r.seed))
    digest = config_digest({"network": config.to_dict(),
                            "transfer": {"k": spec.k, "epochs": spec.epochs,
                                         "learning_rate": spec.learning_rate,
                                         "seed": spec.seed},
                            "seeds": list(seeds), "variants": list(variants)})
    return EvalReport(dataset=dataset.name, config_digest=digest, rows=rows)


# ---------------------------------------------------------------------------
# report emission


def export_report(report: EvalReport, csv_path, md_path=None):
    """Write the per-row CSV and a per-variant mean/std markdown summary."""
    if md_path is None:
        md_path = str(csv_path)[: -len(".csv")] + ".md" \
            if str(csv_path).endswith(".csv") else str(csv_path) + ".md"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            writer.writerow(row.csv_row(report.dataset))
    agg = report.aggregates()
    lines = [f"# LOSO report: {report.dataset}", "",
             f"Config digest: `{report.config_digest}`", "",
             "| variant | accuracy mean | accuracy std | macro-F1 mean | macro-F1 std | rows |",
             "|---|---|---|---|---|---|"]
    for variant, a in agg.items():
        lines.append(
            f"| {variant} | {a['mean_accuracy']!r} | {a['std_accuracy']!r} "
            f"| {a['mean_macro_f1']!r} | {a['std_macro_f1']!r} | {a['rows']} |")
    with open(md_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return csv_path, md_path


def read_report_csv(path):
    """Parse an exported CSV back into (dataset, rows-without-confusion)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise FormatError(f"unexpected report header {header}")
        dataset = None
        rows = []
        for rec in reader:
            dataset = rec[0]
            rows.append(FoldResult(
                fold=int(rec[1]), subject=rec[2], variant=rec[3], seed=int(rec[4]),
                accuracy=float(rec[5]), macro_f1=float(rec[6]), confusion=None,
                n_train=int(rec[7]), n_transfer=int(rec[8]), n_test=int(rec[9])))
    return dataset, rows
