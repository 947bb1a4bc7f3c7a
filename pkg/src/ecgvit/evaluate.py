"""k-fold cross-validation and holdout evaluation of a model/training setup."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LeadDataset
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics, confusion
from .splits import holdout_split, kfold_split
from .trainer import TrainConfig, predict, train

logger = logging.getLogger(__name__)


def majority_vote(report_ids, predictions, truths):
    """Collapse per-lead predictions to one per report (ties go to the lower class)."""
    preds: dict[str, list[int]] = {}
    truth: dict[str, int] = {}
    for r, p, t in zip(report_ids, predictions, truths):
        preds.setdefault(r, []).append(int(p))
        truth[r] = int(t)
    reports = list(preds)
    voted = [int(np.bincount(preds[r]).argmax()) for r in reports]
    return np.array(voted), np.array([truth[r] for r in reports])


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    cm: ConfusionMatrix
    report: MetricsReport


@dataclass
class CVResult:
    folds: list[FoldResult]
    pooled_cm: ConfusionMatrix
    pooled: MetricsReport

    def fold_mean(self) -> dict[str, float]:
        rows = [f.report.table_row() for f in self.folds]
        return {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}

    def to_dict(self) -> dict:
        return {
            "folds": [
                {"fold": f.fold, "n_train": f.n_train, "n_test": f.n_test, "confusion": f.cm.counts.tolist(), "metrics": f.report.to_dict()}
                for f in self.folds
            ],
            "pooled": {"confusion": self.pooled_cm.counts.tolist(), "metrics": self.pooled.to_dict()},
            "fold_mean": self.fold_mean(),
        }


def _evaluate_split(dataset, train_idx, test_idx, model_cfg, train_cfg, reducer):
    result = train(dataset.subset(train_idx), model_cfg, train_cfg)
    test = dataset.subset(test_idx)
    preds = predict(model_cfg, result.params, test.images)
    truths = test.labels
    if reducer == "majority":
        preds, truths = majority_vote(test.report_ids, preds, truths)
    return confusion(preds, truths, model_cfg.num_classes)


def _fold_job(args):
    i, dataset, train_idx, test_idx, model_cfg, train_cfg, reducer = args
    return i, _evaluate_split(dataset, train_idx, test_idx, model_cfg, train_cfg, reducer)


def cross_validate(
    dataset: LeadDataset,
    model_cfg,
    train_cfg: TrainConfig,
    k: int = 5,
    stratified: bool = True,
    group_by_report: bool = True,
    reducer: str | None = None,
    jobs: int = 1,
) -> CVResult:
    """Train on k-1 folds, test on the held-out fold, pool the confusion matrices.

    ``reducer="majority"`` scores one vote per report instead of per lead.
    """
    ids = list(range(len(dataset)))
    groups = dataset.report_ids if group_by_report else None
    split = kfold_split(ids, dataset.labels, k=k, seed=train_cfg.seed, stratified=stratified, groups=groups)
    jobs_args = []
    for i in range(k):
        tr, te = split.train_test(i)
        jobs_args.append((i, dataset, tr, te, model_cfg, train_cfg, reducer))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            cms = dict(ex.map(_fold_job, jobs_args))
    else:
        cms = dict(_fold_job(a) for a in jobs_args)
    folds = []
    for i, a in enumerate(jobs_args):
        cm = cms[i]
        folds.append(FoldResult(i, len(a[2]), len(a[3]), cm, compute_metrics(cm)))
        logger.info("fold %d: accuracy %.4f", i, folds[-1].report.accuracy)
    pooled_cm = folds[0].cm
    for f in folds[1:]:
        pooled_cm = pooled_cm + f.cm
    return CVResult(folds, pooled_cm, compute_metrics(pooled_cm))


@dataclass
class HoldoutResult:
    n_train: int
    n_val: int
    n_test: int
    cm: ConfusionMatrix
    report: MetricsReport

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "confusion": self.cm.counts.tolist(),
            "metrics": self.report.to_dict(),
        }


def holdout_evaluate(
    dataset: LeadDataset,
    model_cfg,
    train_cfg: TrainConfig,
    ratios: tuple[float, float, float] = (0.8, 0.0, 0.2),
    stratified: bool = True,
    group_by_report: bool = True,
    reducer: str | None = None,
) -> HoldoutResult:
    ids = list(range(len(dataset)))
    groups = dataset.report_ids if group_by_report else None
    tr, va, te = holdout_split(ids, dataset.labels, ratios, seed=train_cfg.seed, stratified=stratified, groups=groups)
    cm = _evaluate_split(dataset, tr, te, model_cfg, train_cfg, reducer)
    return HoldoutResult(len(tr), len(va), len(te), cm, compute_metrics(cm))
