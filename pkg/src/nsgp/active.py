"""Pool-based active learning with overall vs epistemic uncertainty acquisition."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Standardizer
from .errors import ConfigError, EmptyPool
from .model import FULL, NsgpModel, Prediction, Variant
from .rng import substream
from .train import fit

ACQUISITIONS = ("var_y", "var_f")
RETRAIN = ("none", "full")


@dataclass(frozen=True)
class AlConfig:
    initial_n: int = 30
    acquisitions: int = 50
    acquisition: str = "var_f"
    retrain: str = "none"
    seed: int = 0
    M: int = 10
    epochs: int = 1000
    lr: float = 0.05
    retrain_epochs: int = 100
    variant: Variant = FULL

    def __post_init__(self):
        if self.acquisition not in ACQUISITIONS:
            raise ConfigError(f"acquisition must be one of {ACQUISITIONS}")
        if self.retrain not in RETRAIN:
            raise ConfigError(f"retrain must be one of {RETRAIN}")
        if self.initial_n < 1 or self.acquisitions < 0:
            raise ConfigError("initial_n must be positive and acquisitions non-negative")


@dataclass
class AlStep:
    step: int
    index: int
    x: np.ndarray
    value: float
    mae: float
    mse: float


@dataclass
class AlTrace:
    acquisition: str
    initial: np.ndarray
    initial_mae: float
    initial_mse: float
    steps: list = field(default_factory=list)
    model: NsgpModel | None = None
    prediction: Prediction | None = None
    grid: np.ndarray | None = None

    def __len__(self):
        return len(self.steps)

    @property
    def chosen(self) -> list:
        return [s.index for s in self.steps]

    @property
    def mae(self) -> np.ndarray:
        return np.array([s.mae for s in self.steps])

    def mae_auc(self) -> float:
        """Trapezoidal area under MAE against acquisitions, starting from the initial fit."""
        curve = np.concatenate([[self.initial_mae], self.mae])
        return float(np.sum(0.5 * (curve[1:] + curve[:-1]))) if curve.size > 1 else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "chosen_x", "acquisition_value", "mae", "mse"])
            w.writerow([0, "", "", repr(self.initial_mae), repr(self.initial_mse)])
            for s in self.steps:
                w.writerow([s.step, ";".join(repr(float(v)) for v in s.x), repr(s.value), repr(s.mae), repr(s.mse)])

    def predictions_to_csv(self, path) -> None:
        p, X = self.prediction, self.grid
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" if X.shape[1] > 1 else "x" for i in range(X.shape[1])] + ["mean", "var_f", "var_y"])
            for i in range(X.shape[0]):
                w.writerow([repr(float(v)) for v in X[i]] + [repr(float(p.mean[i])), repr(float(p.var_f[i])), repr(float(p.var_y[i]))])


def acquire(pred: Prediction, kind: str = "var_f") -> int:
    """Index of the largest ``var_f`` (epistemic) or ``var_y`` (overall) value; ties go to the lowest index."""
    if len(pred) == 0:
        raise EmptyPool("no candidates left in the pool")
    if kind not in ACQUISITIONS:
        raise ConfigError(f"unknown acquisition {kind!r}")
    return int(np.argmax(getattr(pred, kind)))


def initial_indices(n: int, cfg: AlConfig) -> np.ndarray:
    if cfg.initial_n + cfg.acquisitions > n:
        raise ConfigError(f"initial_n + acquisitions = {cfg.initial_n + cfg.acquisitions} exceeds pool of {n}")
    return np.sort(substream(cfg.seed, "al-initial").choice(n, size=cfg.initial_n, replace=False))


def fit_initial(d: Dataset, cfg: AlConfig):
    """Fit on the seeded initial subset; returns ``(model, scaler, initial indices)``.

    Targets are standardized with the initial subset's statistics; inputs stay
    in their native units.
    """
    idx = initial_indices(len(d), cfg)
    start = d.subset(idx)
    scaler = Standardizer.fit(start, x=False, y=True)
    model, _ = fit(cfg.variant, scaler.apply(start), M=min(cfg.M, cfg.initial_n), epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed)
    return model, scaler, idx


def _errors(model: NsgpModel, scaler: Standardizer, d: Dataset):
    pred = model.predict(d.X)
    mean = scaler.inverse_y(pred.mean)
    diff = mean - d.truth["f"]
    return pred, float(np.mean(np.abs(diff))), float(np.mean(diff**2))


def run_al(d: Dataset, cfg: AlConfig, initial=None) -> AlTrace:
    """Sequentially acquire ``cfg.acquisitions`` points from the unlabeled pool.

    ``initial`` may carry a precomputed ``fit_initial`` result so that several
    acquisition rules share one initial fit.  With ``retrain="none"`` the
    hyper-functions stay fixed and the GP is only re-conditioned on the growing
    labeled set; ``"full"`` warm-starts a short refit after every label.
    MAE and MSE compare the predictive mean with the true latent function on
    the whole dataset grid.
    """
    if d.truth is None:
        raise ConfigError("active learning needs a dataset with ground-truth f")
    model, scaler, idx = initial if initial is not None else fit_initial(d, cfg)
    labeled = list(idx)
    in_pool = np.ones(len(d), dtype=bool)
    in_pool[labeled] = False
    y_std = scaler.transform_y(d.y)

    current = model.with_data(d.X[labeled], y_std[labeled])
    pred, mae, mse = _errors(current, scaler, d)
    trace = AlTrace(cfg.acquisition, np.array(labeled), mae, mse)
    for step in range(1, cfg.acquisitions + 1):
        pool = np.flatnonzero(in_pool)
        choice = pool[acquire(_subset(pred, pool), cfg.acquisition)]
        value = float(getattr(pred, cfg.acquisition)[choice])
        labeled.append(int(choice))
        in_pool[choice] = False
        current = current.with_data(d.X[labeled], y_std[labeled])
        if cfg.retrain == "full":
            current, _ = fit(cfg.variant, current, epochs=cfg.retrain_epochs, lr=cfg.lr, seed=cfg.seed, start=current)
        pred, mae, mse = _errors(current, scaler, d)
        trace.steps.append(AlStep(step, int(choice), d.X[choice].copy(), value, mae, mse))
    trace.model, trace.prediction, trace.grid = current, pred, d.X
    return trace


def run_both(d: Dataset, cfg: AlConfig) -> dict:
    """Run the ``var_y`` and ``var_f`` arms from one shared initial fit."""
    initial = fit_initial(d, cfg)
    out = {}
    for kind in ACQUISITIONS:
        arm = AlConfig(**{**cfg.__dict__, "acquisition": kind})
        out[kind] = run_al(d, arm, initial)
    return out


def _subset(pred: Prediction, idx) -> Prediction:
    return Prediction(pred.mean[idx], pred.var_f[idx], pred.var_noise[idx])

