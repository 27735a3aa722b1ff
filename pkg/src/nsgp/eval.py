"""Predictive metrics, k-fold cross-validation and the 8-variant ablation grid."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, kfold, standardize
from .errors import NonPositiveVariance, NsgpError
from .model import ALL_VARIANTS, Prediction, Variant
from .train import fit

log = logging.getLogger(__name__)


def nlpd(pred: Prediction, y) -> float:
    """Negative log predictive density summed over the points."""
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != len(pred):
        raise ValueError("prediction and targets differ in length")
    var = pred.var_y
    if np.any(var <= 0):
        raise NonPositiveVariance("predictive variance must be positive")
    return float(np.sum(0.5 * np.log(2.0 * math.pi * var) + (y - pred.mean) ** 2 / (2.0 * var)))


def rmse(pred: Prediction, y) -> float:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != len(pred):
        raise ValueError("prediction and targets differ in length")
    return float(np.sqrt(np.mean((pred.mean - y) ** 2)))


def default_M(d: Dataset) -> int:
    return 10 if d.D == 1 else 25


@dataclass
class MetricRow:
    dataset: str
    variant: str
    nlpd: float
    rmse: float
    fold_nlpd: list = field(default_factory=list)
    fold_rmse: list = field(default_factory=list)
    seed: int = 0
    M: int = 10
    epochs: int = 1000
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def cross_validate(
    d: Dataset,
    variant: Variant,
    k: int = 5,
    M: int | None = None,
    seed: int = 0,
    epochs: int = 1000,
    lr: float = 0.05,
) -> MetricRow:
    """k-fold CV on the standardized scale of each training split.

    Each fold standardizes every input column and the target with
    training-split statistics, fits ``variant`` and scores NLPD (fold sum) and
    RMSE on the held-out points.
    """
    M = default_M(d) if M is None else M
    plan = kfold(len(d), k, seed)
    fold_nlpd, fold_rmse = [], []
    for fold, (train_idx, test_idx) in enumerate(plan):
        train, scaler = standardize(d.subset(train_idx))
        test = scaler.apply(d.subset(test_idx))
        model, _ = fit(variant, train, M=min(M, len(train)), epochs=epochs, lr=lr, seed=seed)
        pred = model.predict(test.X)
        fold_nlpd.append(nlpd(pred, test.y))
        fold_rmse.append(rmse(pred, test.y))
        log.debug("%s %s fold %d: nlpd %.3f rmse %.3f", d.name, variant.label, fold, fold_nlpd[-1], fold_rmse[-1])
    return MetricRow(
        d.name, variant.label, float(np.mean(fold_nlpd)), float(np.mean(fold_rmse)),
        fold_nlpd, fold_rmse, seed, M, epochs,
    )


def _cell(args):
    d, variant, k, M, seed, epochs, lr = args
    try:
        return cross_validate(d, variant, k, M, seed, epochs, lr)
    except (NsgpError, np.linalg.LinAlgError) as exc:
        log.warning("%s %s failed: %s", d.name, variant.label, exc)
        return MetricRow(d.name, variant.label, math.nan, math.nan, seed=seed,
                         M=default_M(d) if M is None else M, epochs=epochs, error=f"{type(exc).__name__}: {exc}")


def ablation(
    datasets,
    M: int | None = None,
    seed: int = 0,
    k: int = 5,
    epochs: int = 1000,
    lr: float = 0.05,
    variants=ALL_VARIANTS,
    n_jobs: int = 1,
) -> list:
    """Cross-validate every variant on every dataset.

    Failed cells are returned with ``error`` set and NaN metrics.  Rows come
    back in (dataset, variant) order regardless of ``n_jobs``.
    """
    tasks = [(d, v, k, M, seed, epochs, lr) for d in datasets for v in variants]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_cell, tasks))
    return [_cell(t) for t in tasks]


def rank(rows, metric: str = "nlpd") -> dict:
    """Rank (1 = best) of each variant within each dataset; failed cells rank last."""
    out = {}
    for name in dict.fromkeys(r.dataset for r in rows):
        group = [r for r in rows if r.dataset == name]
        order = sorted(group, key=lambda r: (not r.ok, getattr(r, metric)))
        for i, r in enumerate(order, start=1):
            out[(name, r.variant)] = i
    return out


CSV_COLUMNS = ["dataset", "variant", "nlpd_mean", "rmse_mean", "nlpd_rank", "fold_nlpd", "fold_rmse", "seed", "M", "epochs", "error"]


def write_csv(rows, path) -> None:
    ranks = rank(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([
                r.dataset, r.variant, repr(r.nlpd), repr(r.rmse), ranks[(r.dataset, r.variant)],
                ";".join(repr(v) for v in r.fold_nlpd), ";".join(repr(v) for v in r.fold_rmse),
                r.seed, r.M, r.epochs, r.error,
            ])


def format_table(rows) -> str:
    """Aligned text table, one block per dataset, rows in input order."""
    ranks = rank(rows)
    width = max(len(r.variant) for r in rows) if rows else 10
    lines = []
    for name in dict.fromkeys(r.dataset for r in rows):
        lines.append(f"{name}")
        lines.append(f"  {'model':<{width}}  {'NLPD':>10}  {'RMSE':>8}  rank")
        for r in (r for r in rows if r.dataset == name):
            if r.ok:
                lines.append(f"  {r.variant:<{width}}  {r.nlpd:>10.2f}  {r.rmse:>8.3f}  {ranks[(name, r.variant)]:>4}")
            else:
                lines.append(f"  {r.variant:<{width}}  {'FAILED':>10}  {'':>8}  {ranks[(name, r.variant)]:>4}  {r.error}")
        lines.append("")
    return "\n".join(lines)
