"""MAP type-II training: exact gradients, Adam, prior-based initialization."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import numpy as np

from .errors import Diverged, MTooLarge, NonFinite, NsgpError
from .kernels import _as_points, sqdist
from .latent import LATENT_JITTER, TAGS, LatentConstant, LatentGp
from .model import (
    LOG_2PI,
    PRIORS,
    Layout,
    NsgpModel,
    ParamVector,
    PriorSet,
    Variant,
    channels,
    gamma_logpdf,
    pack,
    unpack,
)
from .numerics import chol_backward, chol_inverse, cholesky_psd, logdet, solve_chol, solve_lower, solve_upper
from .rng import substream

log = logging.getLogger(__name__)

_LOG2 = math.log(2.0)


# ---------------------------------------------------------------- gradient


def _latent_forward(v, tag, Z, X, D2zz, D2xz, stats):
    mu = float(v.segment(f"{tag}.mean")[0])
    lh = math.exp(v.segment(f"{tag}.lengthscale")[0])
    sh = math.exp(v.segment(f"{tag}.amplitude")[0])
    gam = v.segment(f"{tag}.gamma")
    Kzz = sh * np.exp(-D2zz / (2.0 * lh**2))
    F = cholesky_psd(Kzz, base_jitter=LATENT_JITTER * sh)
    if stats is not None and F.jitter_used > LATENT_JITTER * sh:
        stats["jitter_events"] = stats.get("jitter_events", 0) + 1
    W = solve_upper(F, gam)
    Kxz = sh * np.exp(-D2xz / (2.0 * lh**2))
    H = mu + Kxz @ W
    return dict(mu=mu, lh=lh, sh=sh, gam=gam, Kzz=Kzz, F=F, W=W, Kxz=Kxz, H=H)


def _latent_backward(c, Hbar, Z, X, D2zz, D2xz, priors):
    """Adjoints of one latent GP given the adjoint of its log predictions."""
    lh, sh, F, W, Kzz, Kxz = c["lh"], c["sh"], c["F"], c["W"], c["Kzz"], c["Kxz"]
    g_mu = Hbar.sum()
    Wbar = Kxz.T @ Hbar
    Kxz_bar = Hbar @ W.T
    g_gam = solve_lower(F, Wbar)
    Abar = chol_backward(F, -W @ g_gam.T)
    A = Kzz + F.jitter_used * np.eye(Kzz.shape[0])
    KK = Kxz_bar * Kxz
    AK = Abar * Kzz
    g_logsh = np.sum(Abar * A) + KK.sum()
    g_loglh = (np.sum(AK * D2zz) + np.sum(KK * D2xz)) / lh**2
    g_Z = -(2.0 / lh**2) * (AK.sum(1)[:, None] * Z - AK @ Z)
    g_Z += (KK.T @ X - KK.sum(0)[:, None] * Z) / lh**2
    # priors (objective subtracts the log densities)
    g_loglh += -(priors.lengthscale_shape - 1.0) + priors.lengthscale_rate * lh
    g_logsh += -(priors.amplitude_shape - 1.0) + priors.amplitude_rate * sh
    g_gam = g_gam + c["gam"]
    return g_mu, g_loglh, g_logsh, g_gam, g_Z


def value_and_grad(theta, layout: Layout, X, y, priors: PriorSet = PRIORS, stats: dict | None = None):
    """Objective and its exact gradient with respect to the unconstrained vector.

    Parameters
    ----------
    theta : array_like or ParamVector
    layout : Layout
    X, y : training data
    stats : dict, optional
        Receives a ``jitter_events`` counter when factorizations needed
        more than their base jitter.

    Returns
    -------
    value : float
    grad : ndarray, same length as ``theta``
    """
    v = theta if isinstance(theta, ParamVector) else ParamVector(theta, layout)
    X = _as_points(X)
    y = np.asarray(y, dtype=float).ravel()
    N, D = X.shape
    variant = layout.variant
    grad = np.zeros(layout.size)
    prior_term = 0.0

    latent = {}
    if variant.latent_tags:
        Z = v.segment("inducing")
        D2zz, D2xz = sqdist(Z, Z), sqdist(X, Z)
    logs = {}
    for tag in TAGS:
        if variant.is_latent(tag):
            c = _latent_forward(v, tag, Z, X, D2zz, D2xz, stats)
            latent[tag] = c
            logs[tag] = c["H"]
            prior_term -= gamma_logpdf(c["lh"], priors.lengthscale_shape, priors.lengthscale_rate)
            prior_term -= gamma_logpdf(c["sh"], priors.amplitude_shape, priors.amplitude_rate)
            prior_term += float(0.5 * np.sum(c["gam"] ** 2) + 0.5 * c["gam"].size * LOG_2PI)
        else:
            logs[tag] = np.full((N, 1), float(v.segment(f"{tag}.value")[0]))

    log_ell = np.broadcast_to(logs["ell"], (N, D))
    ell2 = np.exp(2.0 * log_ell)
    s = logs["sigma"][:, 0]
    omega2 = np.exp(2.0 * logs["omega"][:, 0])

    # per-dimension (N, N) blocks keep memory at O(N^2)
    logK = s[:, None] + s[None, :]
    blocks = []
    for d in range(D):
        P = ell2[:, d, None] + ell2[None, :, d]
        r2 = (X[:, d, None] - X[None, :, d]) ** 2
        logK += 0.5 * (_LOG2 + log_ell[:, d, None] + log_ell[None, :, d] - np.log(P)) - r2 / P
        blocks.append((P, r2))
    K = np.exp(logK)
    K = 0.5 * (K + K.T)
    C = K + np.diag(omega2)
    F = cholesky_psd(C, base_jitter=0.0)
    if stats is not None and F.jitter_used > 0:
        stats["jitter_events"] = stats.get("jitter_events", 0) + 1
    beta = solve_chol(F, y)
    value = 0.5 * y @ beta + 0.5 * logdet(F) + 0.5 * N * LOG_2PI + prior_term

    G = 0.5 * (chol_inverse(F) - np.outer(beta, beta))
    GK = G * K
    bar = {
        "sigma": (2.0 * GK.sum(axis=1))[:, None],
        "omega": (2.0 * omega2 * np.diag(G))[:, None],
    }
    ell_bar = np.empty((N, D))
    for d, (P, r2) in enumerate(blocks):
        li2 = ell2[:, d, None]
        ell_bar[:, d] = 2.0 * np.sum(GK * (0.5 - li2 / P + 2.0 * r2 * li2 / P**2), axis=1)
    bar["ell"] = ell_bar

    g_Z = np.zeros((layout.M, D)) if variant.latent_tags else None
    for tag in TAGS:
        Hbar = bar[tag]
        if not variant.is_latent(tag):
            grad[layout[f"{tag}.value"].slice] = Hbar.sum()
            continue
        if channels(tag, D) == 1 and Hbar.shape[1] != 1:
            Hbar = Hbar.sum(axis=1, keepdims=True)
        g_mu, g_lh, g_sh, g_gam, gz = _latent_backward(latent[tag], Hbar, Z, X, D2zz, D2xz, priors)
        grad[layout[f"{tag}.mean"].slice] = g_mu
        grad[layout[f"{tag}.lengthscale"].slice] = g_lh
        grad[layout[f"{tag}.amplitude"].slice] = g_sh
        grad[layout[f"{tag}.gamma"].slice] = g_gam.ravel()
        g_Z += gz
    if g_Z is not None:
        grad[layout["inducing"].slice] = g_Z.ravel()

    value = float(value)
    if not np.isfinite(value):
        raise NonFinite("objective is not finite")
    if not np.all(np.isfinite(grad)):
        raise NonFinite("gradient has non-finite entries")
    return value, grad


def gradient(theta, layout: Layout, X, y, priors: PriorSet = PRIORS) -> np.ndarray:
    return value_and_grad(theta, layout, X, y, priors)[1]


def objective_at(theta, layout: Layout, X, y, priors: PriorSet = PRIORS) -> float:
    """Objective through the model path (no gradient machinery)."""
    return unpack(ParamVector(np.array(theta, dtype=float), layout), X, y, priors).objective()


def finite_difference(
    theta, layout: Layout, X, y, step: float = 1e-5, priors: PriorSet = PRIORS, richardson: bool = False
) -> np.ndarray:
    """Central-difference gradient of the objective evaluated through the model.

    With ``richardson=True`` the central differences at ``step`` and
    ``2 * step`` are combined as ``(4 D(h) - D(2h)) / 3``, which cancels the
    second-order truncation term and allows a larger, less noise-sensitive
    step.
    """
    theta = np.array(theta, dtype=float)

    def central(i, h):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        return (objective_at(up, layout, X, y, priors) - objective_at(down, layout, X, y, priors)) / (2 * h)

    out = np.empty_like(theta)
    for i in range(theta.size):
        d1 = central(i, step)
        out[i] = (4.0 * d1 - central(i, 2.0 * step)) / 3.0 if richardson else d1
    return out


@dataclass
class GradCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    rtol: float = 1e-4
    atol: float = 1e-6

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.analytic - self.numeric)

    @property
    def tolerance(self) -> np.ndarray:
        return np.maximum(self.rtol * np.abs(self.numeric), self.atol)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.abs_error <= self.tolerance))

    @property
    def max_rel_error(self) -> float:
        """Largest error relative to ``max(|numeric|, atol / rtol)``."""
        scale = np.maximum(np.abs(self.numeric), self.atol / self.rtol)
        return float(np.max(self.abs_error / scale, initial=0.0))


def check_gradient(
    theta, layout: Layout, X, y, step: float = 1e-5, rtol: float = 1e-4, atol: float = 1e-6, richardson: bool = False
) -> GradCheck:
    analytic = gradient(theta, layout, X, y)
    numeric = finite_difference(theta, layout, X, y, step, richardson=richardson)
    return GradCheck(analytic, numeric, rtol, atol)


# ---------------------------------------------------------------- Adam


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_size: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def zeros(cls, n: int, step_size: float = 0.05) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), step_size)


def adam_step(s: AdamState, theta, g):
    """One bias-corrected Adam update; returns ``(new_state, new_theta)``."""
    theta, g = np.asarray(theta, float), np.asarray(g, float)
    if theta.shape != g.shape or s.m.shape != g.shape:
        raise ValueError("parameter, gradient and moment shapes disagree")
    t = s.t + 1
    m = s.beta1 * s.m + (1.0 - s.beta1) * g
    v = s.beta2 * s.v + (1.0 - s.beta2) * g * g
    m_hat = m / (1.0 - s.beta1**t)
    v_hat = v / (1.0 - s.beta2**t)
    new = theta - s.step_size * m_hat / (np.sqrt(v_hat) + s.eps)
    return replace(s, m=m, v=v, t=t), new


# ---------------------------------------------------------------- init / fit


def median_pairwise_distance(X) -> float:
    X = _as_points(X)
    d = np.sqrt(sqdist(X, X)[np.triu_indices(X.shape[0], k=1)])
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def init(variant: Variant, data, M: int, seed: int = 0, priors: PriorSet = PRIORS) -> NsgpModel:
    """Initial model: latent RBF parameters and whitened outputs from their priors.

    Inducing inputs are ``M`` training inputs drawn without replacement; the
    latent means and learned constants start from data-scale heuristics.
    """
    X, y = _as_points(data.X), np.asarray(data.y, float).ravel()
    N, D = X.shape
    if variant.latent_tags and M > N:
        raise MTooLarge(f"M={M} exceeds the {N} training points")
    rng = substream(seed, "init")
    y_std = float(np.std(y)) or 1.0
    start = {
        "ell": math.log(median_pairwise_distance(X)),
        "sigma": math.log(y_std),
        "omega": math.log(0.1 * y_std),
    }
    inducing = X[rng.choice(N, size=M, replace=False)] if variant.latent_tags else None
    hypers = {}
    for tag in TAGS:
        if variant.is_latent(tag):
            lh = rng.gamma(priors.lengthscale_shape, 1.0 / priors.lengthscale_rate)
            sh = rng.gamma(priors.amplitude_shape, 1.0 / priors.amplitude_rate)
            gam = rng.standard_normal((M, channels(tag, D)))
            hypers[tag] = LatentGp(start[tag], float(lh), float(max(sh, 1e-12)), gam)
        else:
            hypers[tag] = LatentConstant(start[tag])
    return NsgpModel(hypers, inducing, X, y, priors)


@dataclass
class FitReport:
    objective: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    final_objective: float = float("nan")
    best_epoch: int = 0
    jitter_events: int = 0
    retries: int = 0
    wall_time: float = 0.0
    seed: int = 0
    epochs: int = 0
    lr: float = 0.05

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "objective", "grad_norm"])
            for i, (f, g) in enumerate(zip(self.objective, self.grad_norm)):
                w.writerow([i, repr(f), repr(g)])


def _safe_eval(theta, layout, X, y, priors, stats):
    try:
        return value_and_grad(theta, layout, X, y, priors, stats)
    except (NsgpError, FloatingPointError, np.linalg.LinAlgError, ValueError):
        return None


def fit(
    variant: Variant,
    data,
    M: int = 10,
    epochs: int = 1000,
    lr: float = 0.05,
    seed: int = 0,
    priors: PriorSet = PRIORS,
    max_retries: int = 3,
    start: NsgpModel | None = None,
):
    """Minimize the MAP objective with full-batch Adam.

    Returns the best parameters seen (not necessarily the last iterate) and a
    :class:`FitReport`.  ``start`` replaces the prior-sampled initialization
    with an existing model (warm start).

    Raises
    ------
    Diverged
        If the objective stops being finite and halving the step size from
        the last finite iterate ``max_retries`` times does not help.
    """
    t0 = time.perf_counter()
    if start is not None:
        model0 = start.with_data(data.X, data.y)
    else:
        model0 = init(variant, data, M, seed, priors)
    v0 = pack(model0)
    layout, X, y = v0.layout, model0.X, model0.y
    stats: dict = {}
    first = _safe_eval(v0.values, layout, X, y, priors, stats)
    if first is None:
        raise Diverged("objective is not finite at the initial parameters")
    f, g = first
    theta = v0.values
    state = AdamState.zeros(layout.size, lr)
    report = FitReport(seed=seed, epochs=epochs, lr=lr)
    report.objective.append(f)
    report.grad_norm.append(float(np.linalg.norm(g)))
    best_f, best_theta = f, theta.copy()

    for epoch in range(1, epochs + 1):
        trial_state = state
        for attempt in range(max_retries + 1):
            new_state, new_theta = adam_step(trial_state, theta, g)
            out = _safe_eval(new_theta, layout, X, y, priors, stats)
            if out is not None:
                break
            report.retries += 1
            if attempt == max_retries:
                raise Diverged(f"objective became non-finite at epoch {epoch}")
            trial_state = replace(trial_state, step_size=0.5 * trial_state.step_size)
            log.debug("epoch %d: non-finite objective, step size -> %g", epoch, trial_state.step_size)
        state, theta = new_state, new_theta
        f, g = out
        report.objective.append(f)
        report.grad_norm.append(float(np.linalg.norm(g)))
        if f < best_f:
            best_f, best_theta, report.best_epoch = f, theta.copy(), epoch

    report.final_objective = best_f
    report.jitter_events = stats.get("jitter_events", 0)
    report.wall_time = time.perf_counter() - t0
    model = model0 if report.best_epoch == 0 else unpack(ParamVector(best_theta, layout), X, y, priors)
    return model, report


# ---------------------------------------------------------------- gradient battery


def random_problem(variant: Variant, seed: int, max_n: int = 20, max_m: int = 5, max_d: int = 2):
    """Random small problem for gradient checks: ``(theta, layout, X, y)``.

    Parameters start from :func:`init` and are then jittered so that no entry
    sits exactly at its initial value.
    """
    rng = substream(seed, f"gradcheck-{variant.key}")
    D = int(rng.integers(1, max_d + 1))
    N = int(rng.integers(max(max_m, 6), max_n + 1))
    M = int(rng.integers(2, max_m + 1))
    X = rng.uniform(-3.0, 3.0, (N, D))
    y = np.sin(X.sum(axis=1)) + 0.2 * rng.standard_normal(N)
    v = pack(init(variant, SimpleNamespace(X=X, y=y), M, seed))
    theta = v.values + 0.1 * rng.standard_normal(v.values.size)
    return theta, v.layout, X, y


def gradient_battery(
    variants, n_configs: int, seed: int = 0, perturb: float = 0.0, step: float = 1e-3, richardson: bool = True
) -> list:
    """Check the analytic gradient on ``n_configs`` random problems cycling through ``variants``.

    The default oracle is a Richardson-extrapolated central difference with
    step 1e-3: random latent grams can have condition numbers near 1e7, which
    puts round-off noise of order 1e-10 on the objective and makes a plain
    1e-5 central difference unreliable for small partials.
    """
    results = []
    variants = list(variants)
    for i in range(n_configs):
        variant = variants[i % len(variants)]
        theta, layout, X, y = random_problem(variant, seed * 1000 + i)
        check = check_gradient(theta, layout, X, y, step=step, richardson=richardson)
        if perturb:
            check.analytic = check.analytic + perturb * np.maximum(np.abs(check.analytic), 1.0)
        results.append((variant, check))
    return results
