"""Datasets: synthetic generators, CSV ingestion, standardization and k-fold splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import ConfigError, DegenerateColumn, EmptyDataset, ParseError, UnknownDataset
from .kernels import GibbsInputs, gibbs_cross, rbf_cross, RbfParams
from .numerics import cholesky_psd
from .rng import substream

TRUTH_KEYS = ("ell", "sigma", "omega", "f")


@dataclass
class Dataset:
    """Inputs ``X`` (N, D), targets ``y`` (N,) and optional ground truth.

    ``truth`` maps ``ell``, ``sigma``, ``omega`` and ``f`` to per-point arrays
    for synthetic data.
    """

    X: np.ndarray
    y: np.ndarray
    name: str = "data"
    truth: dict | None = None
    columns: list | None = None
    target: str = "y"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        self.X, self.y = X, y
        if self.columns is None:
            self.columns = ["x"] if X.shape[1] == 1 else [f"x{i + 1}" for i in range(X.shape[1])]

    def __len__(self):
        return self.y.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        truth = None if self.truth is None else {k: v[idx] for k, v in self.truth.items()}
        return replace(self, X=self.X[idx], y=self.y[idx], truth=truth)

    def to_csv(self, path) -> None:
        header = list(self.columns) + [self.target]
        cols = [self.X[:, i] for i in range(self.D)] + [self.y]
        if self.truth is not None:
            for key in TRUTH_KEYS:
                arr = self.truth[key]
                if arr.ndim == 2 and arr.shape[1] > 1:
                    header += [f"{key}_true_{i + 1}" for i in range(arr.shape[1])]
                    cols += [arr[:, i] for i in range(arr.shape[1])]
                else:
                    header.append(f"{key}_true")
                    cols.append(arr.ravel())
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------- generators


def synth1d_trends(x):
    """Closed-form length scale, amplitude and noise trends of SYNTH-1D."""
    x = np.asarray(x, dtype=float)
    ell = 0.5 * np.sin(x / 8.0) + 1.5
    sigma = 1.5 * np.exp(np.sin(0.2 * x))
    omega = 2.5 * np.log1p(np.exp(np.sin(-0.2 * x)))
    return ell, sigma, omega


def _draw_gp(K, rng):
    F = cholesky_psd(K, base_jitter=1e-8 * float(np.mean(np.diag(K))))
    return F.lower @ rng.standard_normal(K.shape[0])


def gen_synth1d(seed: int = 0, n: int = 200) -> Dataset:
    """SYNTH-1D: a Gibbs-kernel GP draw with known input-dependent hyper-parameters."""
    rng = substream(seed, "synth1d")
    x = np.linspace(-30.0, 30.0, n)
    ell, sigma, omega = synth1d_trends(x)
    inputs = GibbsInputs(ell, sigma)
    f = _draw_gp(gibbs_cross(x, x, inputs, inputs), rng)
    y = f + omega * rng.standard_normal(n)
    truth = {"ell": ell, "sigma": sigma, "omega": omega, "f": f}
    return Dataset(x[:, None], y, "synth1d", truth)


def gen_jump1d(
    seed: int = 0,
    n: int = 100,
    jump: float = 2.0,
    noise: float = 0.3,
    smooth_lengthscale: float = 0.3,
    smooth_var: float = 0.25,
) -> Dataset:
    """Step function ``jump * sign(x)`` plus a smooth GP component on [-1, 1]."""
    rng = substream(seed, "jump1d")
    x = np.linspace(-1.0, 1.0, n)
    K = rbf_cross(x, x, RbfParams(smooth_lengthscale, smooth_var))
    f = jump * np.sign(x) + _draw_gp(K, rng)
    y = f + noise * rng.standard_normal(n)
    truth = {
        "ell": np.full(n, smooth_lengthscale),
        "sigma": np.full(n, math.sqrt(smooth_var)),
        "omega": np.full(n, noise),
        "f": f,
    }
    return Dataset(x[:, None], y, "jump1d", truth)


def nonstat2d_lengthscale(X, short: float = 1.0, long: float = 3.0, center=(5.0, 5.0), radius: float = 2.0):
    """Bump-shaped length-scale field: ``short`` near ``center``, ``long`` far away."""
    X = np.asarray(X, dtype=float)
    r2 = np.sum((X - np.asarray(center)) ** 2, axis=1)
    return long - (long - short) * np.exp(-r2 / (2.0 * radius**2))


def gen_nonstat2d(
    seed: int = 0,
    n_side: int = 15,
    noise_low: float = 0.01,
    noise_high: float = 0.1,
    **field_kw,
) -> Dataset:
    """Grid on [0, 10]^2; GP with a spatially varying length scale and noise
    standard deviation rising linearly along the first coordinate."""
    rng = substream(seed, "nonstat2d")
    g = np.linspace(0.0, 10.0, n_side)
    X = np.array([(a, b) for a in g for b in g])
    ell = nonstat2d_lengthscale(X, **field_kw)
    sigma = np.ones(X.shape[0])
    inputs = GibbsInputs(ell, sigma)
    f = _draw_gp(gibbs_cross(X, X, inputs, inputs), rng)
    x1 = X[:, 0]
    omega = noise_low + (noise_high - noise_low) * (x1 - x1.min()) / (x1.max() - x1.min())
    y = f + omega * rng.standard_normal(X.shape[0])
    truth = {"ell": ell, "sigma": sigma, "omega": omega, "f": f}
    return Dataset(X, y, "nonstat2d", truth)


GENERATORS = {"synth1d": gen_synth1d, "jump1d": gen_jump1d, "nonstat2d": gen_nonstat2d}


def generate(name: str, seed: int = 0) -> Dataset:
    try:
        return GENERATORS[name](seed)
    except KeyError:
        raise UnknownDataset(f"unknown synthetic dataset {name!r}; choose from {sorted(GENERATORS)}") from None


# ---------------------------------------------------------------- CSV


def load_csv(path, x_cols, y_col: str, name: str | None = None) -> Dataset:
    """Read a headered CSV into a :class:`Dataset`.

    Raises
    ------
    ParseError
        Missing columns, unparseable or missing values, NaN entries.
    EmptyDataset
        No data rows.
    """
    if isinstance(x_cols, str):
        x_cols = [x_cols]
    x_cols = list(x_cols)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyDataset(f"{path}: file is empty")
        missing = [c for c in x_cols + [y_col] if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: missing column(s) {missing}; header has {reader.fieldnames}")
        X, y = [], []
        for row in reader:
            lineno = reader.line_num
            try:
                values = [float(row[c]) for c in x_cols + [y_col]]
            except (TypeError, ValueError):
                raise ParseError(f"{path}: row {lineno} has a missing or non-numeric value") from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(f"{path}: row {lineno} contains NaN or infinite values")
            X.append(values[:-1])
            y.append(values[-1])
    if not y:
        raise EmptyDataset(f"{path}: no data rows")
    stem = name or str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return Dataset(np.array(X), np.array(y), stem, columns=x_cols, target=y_col)


def load_inputs(path, x_cols) -> np.ndarray:
    """Read only the input columns of a headered CSV, e.g. a prediction query file."""
    x_cols = [x_cols] if isinstance(x_cols, str) else list(x_cols)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyDataset(f"{path}: file is empty")
        missing = [c for c in x_cols if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: missing column(s) {missing}; header has {reader.fieldnames}")
        rows = []
        for row in reader:
            try:
                rows.append([float(row[c]) for c in x_cols])
            except (TypeError, ValueError):
                raise ParseError(f"{path}: row {reader.line_num} has a missing or non-numeric value") from None
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    X = np.array(rows)
    if not np.all(np.isfinite(X)):
        raise ParseError(f"{path}: query contains NaN or infinite values")
    return X


def motorcycle_path():
    return resources.files("nsgp").joinpath("datasets/mcycle.csv")


def load_motorcycle() -> Dataset:
    """Silverman's motorcycle-helmet acceleration data (133 rows)."""
    with resources.as_file(motorcycle_path()) as p:
        return load_csv(p, ["times"], "accel", name="motorcycle")


def load_named(name: str, seed: int = 0) -> Dataset:
    if name in ("motorcycle", "mcycle"):
        return load_motorcycle()
    return generate(name, seed)


# ---------------------------------------------------------------- standardization


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine maps to zero mean and unit variance."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, d: Dataset, x: bool = True, y: bool = True) -> "Standardizer":
        D = d.D
        x_mean, x_std = np.zeros(D), np.ones(D)
        if x:
            x_mean, x_std = d.X.mean(axis=0), d.X.std(axis=0)
            bad = np.flatnonzero(x_std == 0)
            if bad.size:
                raise DegenerateColumn(f"input column(s) {bad.tolist()} have zero variance")
        y_mean, y_std = 0.0, 1.0
        if y:
            y_mean, y_std = float(d.y.mean()), float(d.y.std())
            if y_std == 0:
                raise DegenerateColumn("target has zero variance")
        return cls(x_mean, x_std, y_mean, y_std)

    def transform_X(self, X):
        return (np.asarray(X, float).reshape(-1, self.x_mean.size) - self.x_mean) / self.x_std

    def inverse_X(self, Xs):
        return np.asarray(Xs, float) * self.x_std + self.x_mean

    def transform_y(self, y):
        return (np.asarray(y, float) - self.y_mean) / self.y_std

    def inverse_y(self, ys):
        return np.asarray(ys, float) * self.y_std + self.y_mean

    def _length_scale(self):
        return float(np.exp(np.mean(np.log(self.x_std))))

    def apply(self, d: Dataset) -> Dataset:
        truth = None
        if d.truth is not None:
            truth = {
                "ell": d.truth["ell"] / (self.x_std if d.truth["ell"].ndim == 2 else self._length_scale()),
                "sigma": d.truth["sigma"] / self.y_std,
                "omega": d.truth["omega"] / self.y_std,
                "f": self.transform_y(d.truth["f"]),
            }
        return replace(d, X=self.transform_X(d.X), y=self.transform_y(d.y), truth=truth)

    def inverse(self, d: Dataset) -> Dataset:
        truth = None
        if d.truth is not None:
            truth = {
                "ell": d.truth["ell"] * (self.x_std if d.truth["ell"].ndim == 2 else self._length_scale()),
                "sigma": d.truth["sigma"] * self.y_std,
                "omega": d.truth["omega"] * self.y_std,
                "f": self.inverse_y(d.truth["f"]),
            }
        return replace(d, X=self.inverse_X(d.X), y=self.inverse_y(d.y), truth=truth)

    def to_dict(self) -> dict:
        return {
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardizer":
        return cls(np.array(doc["x_mean"], float), np.array(doc["x_std"], float), float(doc["y_mean"]), float(doc["y_std"]))


def standardize(d: Dataset, x: bool = True, y: bool = True):
    """Return ``(standardized dataset, Standardizer)``."""
    s = Standardizer.fit(d, x=x, y=y)
    return s.apply(d), s


# ---------------------------------------------------------------- folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int = 0

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def __iter__(self):
        for i in range(self.k):
            yield self.train_indices(i), self.test_indices(i)


def kfold(N: int, k: int = 5, seed: int = 0) -> FoldPlan:
    if not 2 <= k <= N:
        raise ConfigError(f"need 2 <= k <= N, got k={k}, N={N}")
    perm = substream(seed, "folds").permutation(N)
    assignment = np.empty(N, dtype=int)
    assignment[perm] = np.arange(N) % k
    return FoldPlan(k, assignment, seed)
