"""The non-stationary heteroscedastic GP: layout, objective and prediction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import product

import numpy as np
from scipy.special import gammaln

from .errors import LayoutMismatch, NegativeVariance
from .kernels import GibbsInputs, _as_points, gibbs_cross
from .latent import TAGS, LatentConstant, LatentGp, predict_log
from .numerics import cholesky_psd, logdet, solve_chol, solve_lower

SCHEMA = "nsgp-model/1"
LOG_2PI = math.log(2.0 * math.pi)
SYMBOLS = {"ell": "ℓ", "sigma": "σ", "omega": "ω"}


@dataclass(frozen=True)
class Variant:
    """Which hyper-functions are input dependent (latent GP) vs learned constants."""

    ell: bool = True
    sigma: bool = True
    omega: bool = True

    @property
    def latent_tags(self) -> tuple:
        return tuple(t for t in TAGS if getattr(self, t))

    def is_latent(self, tag: str) -> bool:
        return getattr(self, tag)

    @property
    def label(self) -> str:
        tags = self.latent_tags
        if not tags:
            return "Stationary Homoskedastic GP"
        return "(" + ",".join(SYMBOLS[t] for t in tags) + ")-GP"

    @property
    def key(self) -> str:
        """ASCII identifier, e.g. ``ell+omega`` or ``stationary``."""
        return "+".join(self.latent_tags) or "stationary"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        if text in ("stationary", "none", ""):
            return cls(False, False, False)
        if text == "full":
            return cls()
        for v in ALL_VARIANTS:
            if text in (v.key, v.label):
                return v
        parts = set(text.split("+"))
        if not parts <= set(TAGS):
            raise ValueError(f"unknown variant {text!r}")
        return cls(*(t in parts for t in TAGS))


# Table order: stationary first, then single, pairs, full
ALL_VARIANTS = tuple(
    sorted(
        (Variant(*flags) for flags in product((False, True), repeat=3)),
        key=lambda v: (len(v.latent_tags), [("ell", "omega", "sigma").index(t) for t in v.latent_tags]),
    )
)
FULL = Variant(True, True, True)
STATIONARY = Variant(False, False, False)


@dataclass(frozen=True)
class PriorSet:
    """Gamma(shape, rate) priors on latent RBF parameters and N(0, 1) on gamma."""

    lengthscale_shape: float = 5.0
    lengthscale_rate: float = 1.0
    amplitude_shape: float = 0.5
    amplitude_rate: float = 1.0


PRIORS = PriorSet()


def gamma_logpdf(x, shape, rate=1.0):
    x = np.asarray(x, dtype=float)
    return shape * np.log(rate) + (shape - 1.0) * np.log(x) - rate * x - gammaln(shape)


def normal_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x**2 - 0.5 * LOG_2PI


# ---------------------------------------------------------------- layout


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: tuple
    transform: str  # "identity" or "log"

    @property
    def length(self) -> int:
        return math.prod(self.shape)

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class Layout:
    variant: Variant
    M: int
    D: int
    segments: tuple

    @cached_property
    def _index(self) -> dict:
        return {s.name: s for s in self.segments}

    @cached_property
    def size(self) -> int:
        return sum(s.length for s in self.segments)

    def __getitem__(self, name: str) -> Segment:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def names(self) -> list:
        return [s.name for s in self.segments]

    def to_dict(self) -> dict:
        return {
            "variant": {t: self.variant.is_latent(t) for t in TAGS},
            "M": self.M,
            "D": self.D,
            "segments": [
                {"name": s.name, "offset": s.offset, "length": s.length, "shape": list(s.shape), "transform": s.transform}
                for s in self.segments
            ],
        }


def channels(tag: str, D: int) -> int:
    return D if tag == "ell" else 1


def build_layout(variant: Variant, M: int, D: int) -> Layout:
    if M < 1 or D < 1:
        raise ValueError("M and D must be at least 1")
    specs = []
    if variant.latent_tags:
        specs.append(("inducing", (M, D), "identity"))
    for tag in TAGS:
        if variant.is_latent(tag):
            specs += [
                (f"{tag}.mean", (1,), "identity"),
                (f"{tag}.lengthscale", (1,), "log"),
                (f"{tag}.amplitude", (1,), "log"),
                (f"{tag}.gamma", (M, channels(tag, D)), "identity"),
            ]
        else:
            specs.append((f"{tag}.value", (1,), "log"))
    segments, offset = [], 0
    for name, shape, transform in specs:
        segments.append(Segment(name, offset, shape, transform))
        offset += int(np.prod(shape))
    return Layout(variant, M, D, tuple(segments))


def param_count(variant: Variant, M: int, D: int) -> int:
    return build_layout(variant, M, D).size


@dataclass
class ParamVector:
    """Unconstrained parameters with the layout that interprets them."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.layout.size:
            raise LayoutMismatch(f"vector has {self.values.size} entries, layout expects {self.layout.size}")

    def __len__(self):
        return self.values.size

    def segment(self, name: str) -> np.ndarray:
        s = self.layout[name]
        return self.values[s.slice].reshape(s.shape)


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    var_f: np.ndarray
    var_noise: np.ndarray
    var_y: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "var_y", self.var_f + self.var_noise)

    def __len__(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class HyperValues:
    """Hyper-function values at a set of points."""

    log_ell: np.ndarray  # (N, D) or (N, 1)
    log_sigma: np.ndarray  # (N,)
    log_omega: np.ndarray  # (N,)

    @property
    def gibbs(self) -> GibbsInputs:
        return GibbsInputs(np.exp(self.log_ell), np.exp(self.log_sigma))

    @property
    def noise_var(self) -> np.ndarray:
        return np.exp(2.0 * self.log_omega)


@dataclass(frozen=True)
class NsgpModel:
    """Gibbs-kernel GP whose length scale, amplitude and noise are hyper-functions.

    ``hypers`` maps each of ``ell``, ``sigma``, ``omega`` to a
    :class:`LatentGp` or :class:`LatentConstant`; all latent GPs share the
    ``inducing`` inputs.
    """

    hypers: dict
    inducing: np.ndarray | None
    X: np.ndarray
    y: np.ndarray
    priors: PriorSet = PRIORS

    def __post_init__(self):
        X = _as_points(self.X)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if set(self.hypers) != set(TAGS):
            raise ValueError(f"hypers must be keyed by exactly {TAGS}")
        if self.inducing is not None:
            Z = _as_points(self.inducing)
            if Z.shape[1] != X.shape[1]:
                raise ValueError("inducing inputs and data have different dimensions")
            object.__setattr__(self, "inducing", Z)
        elif any(isinstance(h, LatentGp) for h in self.hypers.values()):
            raise ValueError("latent hyper-functions need inducing inputs")

    @property
    def variant(self) -> Variant:
        return Variant(*(isinstance(self.hypers[t], LatentGp) for t in TAGS))

    @property
    def D(self) -> int:
        return self.X.shape[1]

    @property
    def M(self) -> int:
        return 0 if self.inducing is None else self.inducing.shape[0]

    def with_data(self, X, y) -> "NsgpModel":
        """Same hyper-functions conditioned on different training data."""
        return replace(self, X=X, y=y)

    def hyper_values(self, X) -> HyperValues:
        X = _as_points(X)
        logs = {t: predict_log(self.hypers[t], X, self.inducing) for t in TAGS}
        return HyperValues(logs["ell"], logs["sigma"][:, 0], logs["omega"][:, 0])

    def _train_factor(self):
        hv = self.hyper_values(self.X)
        K = gibbs_cross(self.X, self.X, hv.gibbs, hv.gibbs)
        C = 0.5 * (K + K.T) + np.diag(hv.noise_var)
        return hv, cholesky_psd(C, base_jitter=0.0)

    def nlml(self) -> float:
        """Negative log marginal likelihood of the training targets."""
        _, F = self._train_factor()
        beta = solve_chol(F, self.y)
        n = self.y.shape[0]
        return float(0.5 * self.y @ beta + 0.5 * logdet(F) + 0.5 * n * LOG_2PI)

    def log_prior(self) -> float:
        """Log density of the latent-GP priors; constants, means and inducing inputs are flat."""
        p = self.priors
        total = 0.0
        for h in self.hypers.values():
            if isinstance(h, LatentGp):
                total += gamma_logpdf(h.lengthscale, p.lengthscale_shape, p.lengthscale_rate)
                total += gamma_logpdf(h.amplitude, p.amplitude_shape, p.amplitude_rate)
                total += float(np.sum(normal_logpdf(h.gamma)))
        return float(total)

    def objective(self) -> float:
        """MAP type-II loss: ``nlml - log_prior``."""
        return self.nlml() - self.log_prior()

    def predict(self, Xs) -> Prediction:
        """Predictive mean and epistemic/aleatoric variances at ``Xs``."""
        Xs = _as_points(Xs)
        hv, F = self._train_factor()
        hs = self.hyper_values(Xs)
        Ks = gibbs_cross(self.X, Xs, hv.gibbs, hs.gibbs)
        mean = Ks.T @ solve_chol(F, self.y)
        V = solve_lower(F, Ks)
        prior_var = np.exp(2.0 * hs.log_sigma)
        var_f = prior_var - np.einsum("ij,ij->j", V, V)
        floor = -1e-8 * np.maximum(prior_var, 1.0)
        if np.any(var_f < floor):
            raise NegativeVariance(f"posterior variance {var_f.min():.3g} is below round-off level")
        var_f = np.maximum(var_f, 0.0)
        return Prediction(mean, var_f, hs.noise_var)


# ---------------------------------------------------------------- packing


def layout_of(m: NsgpModel) -> Layout:
    return build_layout(m.variant, max(m.M, 1), m.D)


def pack(m: NsgpModel) -> ParamVector:
    layout = layout_of(m)
    v = np.empty(layout.size)
    for s in layout.segments:
        if s.name == "inducing":
            v[s.slice] = m.inducing.ravel()
            continue
        tag, part = s.name.split(".")
        h = m.hypers[tag]
        if part == "value":
            v[s.slice] = h.value
        elif part == "mean":
            v[s.slice] = h.mean
        elif part == "lengthscale":
            v[s.slice] = math.log(h.lengthscale)
        elif part == "amplitude":
            v[s.slice] = math.log(h.amplitude)
        elif part == "gamma":
            if h.gamma.shape != s.shape:
                raise LayoutMismatch(f"{s.name} has shape {h.gamma.shape}, layout expects {s.shape}")
            v[s.slice] = h.gamma.ravel()
    return ParamVector(v, layout)


def unpack(v: ParamVector, X, y, priors: PriorSet = PRIORS) -> NsgpModel:
    layout = v.layout
    X = _as_points(X)
    if X.shape[1] != layout.D:
        raise LayoutMismatch(f"layout is for D={layout.D}, data has D={X.shape[1]}")
    hypers = {}
    for tag in TAGS:
        if layout.variant.is_latent(tag):
            hypers[tag] = LatentGp(
                mean=float(v.segment(f"{tag}.mean")[0]),
                lengthscale=math.exp(v.segment(f"{tag}.lengthscale")[0]),
                amplitude=math.exp(v.segment(f"{tag}.amplitude")[0]),
                gamma=v.segment(f"{tag}.gamma").copy(),
            )
        else:
            hypers[tag] = LatentConstant(float(v.segment(f"{tag}.value")[0]))
    inducing = v.segment("inducing").copy() if "inducing" in layout else None
    return NsgpModel(hypers, inducing, X, y, priors)


# ---------------------------------------------------------------- serialization


def model_to_dict(m: NsgpModel, standardization: dict | None = None) -> dict:
    v = pack(m)
    return {
        "schema": SCHEMA,
        "variant": {t: m.variant.is_latent(t) for t in TAGS},
        "M": m.M,
        "D": m.D,
        "layout": v.layout.to_dict()["segments"],
        "params": v.values.tolist(),
        "train_X": m.X.tolist(),
        "train_y": m.y.tolist(),
        "standardization": standardization,
    }


def model_from_dict(doc: dict) -> tuple:
    """Inverse of :func:`model_to_dict`; returns ``(model, standardization)``."""
    if doc.get("schema") != SCHEMA:
        raise LayoutMismatch(f"unsupported model schema {doc.get('schema')!r}")
    variant = Variant(*(bool(doc["variant"][t]) for t in TAGS))
    layout = build_layout(variant, max(int(doc["M"]), 1), int(doc["D"]))
    stored = [(s["name"], s["offset"], s["length"]) for s in doc["layout"]]
    if stored != [(s.name, s.offset, s.length) for s in layout.segments]:
        raise LayoutMismatch("stored layout does not match the variant")
    v = ParamVector(np.array(doc["params"], dtype=float), layout)
    return unpack(v, np.array(doc["train_X"]), np.array(doc["train_y"])), doc.get("standardization")


def save_model(path, m: NsgpModel, standardization: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m, standardization), fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
