"""Command-line entry point: ``nsgp <command> [options]``.

Every command resolves its flags into a :class:`RunConfig`, validates it,
and only then touches the output directory.  The directory receives a
``manifest.json`` holding the resolved config, library versions and seed;
``nsgp replay manifest.json`` re-runs the exact same command.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 IO.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .active import ACQUISITIONS, RETRAIN, AlConfig, fit_initial, run_al
from .data import GENERATORS, Dataset, Standardizer, load_csv, load_inputs, load_named, standardize
from .errors import ConfigError, EmptyDataset, LayoutMismatch, NsgpError, NumericError, ParseError
from .eval import ablation, default_M, format_table, write_csv
from .model import ALL_VARIANTS, TAGS, Variant, load_model, save_model
from .train import fit, gradient_battery

log = logging.getLogger("nsgp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
MANIFEST = "manifest.json"
MANIFEST_SCHEMA = "nsgp-manifest/1"
COMMANDS = ("synth", "fit", "predict", "ablate", "active", "gradcheck")
NAMED = tuple(GENERATORS) + ("motorcycle",)


@dataclass
class RunConfig:
    """Fully resolved settings of one CLI invocation."""

    command: str
    out: str | None = None
    seed: int = 0
    dataset: str | None = None
    csv: str | None = None
    x_cols: list = field(default_factory=list)
    y_col: str | None = None
    latent_ell: bool = False
    latent_sigma: bool = False
    latent_omega: bool = False
    M: int | None = None
    epochs: int = 1000
    lr: float = 0.05
    k: int = 5
    datasets: list = field(default_factory=list)
    jobs: int = 1
    model: str | None = None
    query: str | None = None
    grid: int = 200
    arms: list = field(default_factory=lambda: list(ACQUISITIONS))
    initial_n: int = 30
    acquisitions: int = 50
    retrain: str = "none"
    retrain_epochs: int = 100
    configs: int = 24
    tol: float = 1e-4
    perturb: float = 0.0

    @property
    def variant(self) -> Variant:
        return Variant(self.latent_ell, self.latent_sigma, self.latent_omega)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "command" not in doc:
            raise ConfigError("config lacks a command")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Raise :class:`ConfigError` on any inconsistent setting."""
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command != "gradcheck" and not self.out:
            raise ConfigError("--out is required")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.M is not None and self.M < 1:
            raise ConfigError("M must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")
        if self.command == "synth":
            if self.dataset not in GENERATORS:
                raise ConfigError(f"synth needs --dataset in {sorted(GENERATORS)}, got {self.dataset!r}")
        if self.command in ("fit", "active"):
            self._validate_source(self.dataset, self.csv)
        if self.command == "ablate":
            if not self.datasets and not self.csv:
                raise ConfigError("ablate needs --datasets or --csv")
            for name in self.datasets:
                if name not in NAMED:
                    raise ConfigError(f"unknown dataset {name!r}; choose from {NAMED}")
            if self.csv:
                self._validate_source(None, self.csv)
        if self.command == "predict":
            if not self.model:
                raise ConfigError("predict needs --model")
            if self.grid < 1:
                raise ConfigError("grid must be positive")
        if self.command == "active":
            for arm in self.arms:
                if arm not in ACQUISITIONS:
                    raise ConfigError(f"unknown acquisition arm {arm!r}")
            if not self.arms:
                raise ConfigError("at least one acquisition arm is needed")
            if self.retrain not in RETRAIN:
                raise ConfigError(f"retrain must be one of {RETRAIN}")
            if self.initial_n < 1 or self.acquisitions < 0:
                raise ConfigError("initial_n must be positive and acquisitions non-negative")
        if self.command == "gradcheck":
            if self.configs < 1:
                raise ConfigError("configs must be positive")

    def _validate_source(self, name, path) -> None:
        if (name is None) == (path is None):
            raise ConfigError("give exactly one of --dataset or --csv")
        if name is not None and name not in NAMED:
            raise ConfigError(f"unknown dataset {name!r}; choose from {NAMED}")
        if path is not None and (not self.x_cols or not self.y_col):
            raise ConfigError("--csv needs --x-cols and --y-col")


# ---------------------------------------------------------------- file plumbing


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temporary sibling of ``path`` that replaces it on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    mask = os.umask(0)
    os.umask(mask)
    os.chmod(tmp, 0o666 & ~mask)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_text(path, text: str) -> None:
    with atomic_path(path) as tmp, open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)


def versions() -> dict:
    return {"nsgp": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def write_manifest(cfg: RunConfig, out: Path, outputs: list) -> None:
    doc = {
        "schema": MANIFEST_SCHEMA,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": versions(),
        "outputs": sorted(outputs),
    }
    write_text(out / MANIFEST, json.dumps(doc, indent=1) + "\n")


def read_manifest(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("schema") != MANIFEST_SCHEMA:
        raise ConfigError(f"{path} is not an nsgp manifest")
    return RunConfig.from_dict(doc["config"])


def load_source(cfg: RunConfig, name: str | None = None) -> Dataset:
    if cfg.csv and name is None:
        return load_csv(cfg.csv, cfg.x_cols, cfg.y_col)
    return load_named(name or cfg.dataset, cfg.seed)


def write_predictions(path, X, pred, names) -> None:
    header = list(names) + ["mean", "var_f", "var_noise", "var_y"]
    rows = np.column_stack([X, pred.mean, pred.var_f, pred.var_noise, pred.var_y])
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in rows]
    write_text(path, "\n".join(lines) + "\n")


def query_grid(model, n: int) -> np.ndarray:
    """Regular grid spanning the training inputs: ``n`` points in 1-D, ``n x n`` in 2-D."""
    lo, hi = model.X.min(axis=0), model.X.max(axis=0)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    if model.D == 1:
        return axes[0][:, None]
    if model.D == 2:
        g1, g2 = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])
    raise ConfigError("--grid only supports D <= 2; pass --query for higher dimensions")


# ---------------------------------------------------------------- commands


def cmd_synth(cfg: RunConfig, out: Path) -> list:
    d = GENERATORS[cfg.dataset](cfg.seed)
    name = f"{cfg.dataset}.csv"
    with atomic_path(out / name) as tmp:
        d.to_csv(tmp)
    return [name]


def cmd_fit(cfg: RunConfig, out: Path) -> list:
    d = load_source(cfg)
    train, scaler = standardize(d, x=False)
    cfg.M = default_M(d) if cfg.M is None else cfg.M
    model, report = fit(cfg.variant, train, M=cfg.M, epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed)
    doc = scaler.to_dict()
    doc["columns"] = list(d.columns)
    with atomic_path(out / "model.json") as tmp:
        save_model(tmp, model, doc)
    with atomic_path(out / "fit_report.csv") as tmp:
        report.to_csv(tmp)
    print(f"{cfg.variant.label}: objective {report.final_objective:.4f} (best epoch {report.best_epoch})")
    return ["model.json", "fit_report.csv"]


def cmd_predict(cfg: RunConfig, out: Path) -> list:
    model, std = load_model(cfg.model)
    std = std or {}
    names = std.get("columns") or [f"x{i + 1}" for i in range(model.D)]
    scaler = Standardizer.from_dict({k: v for k, v in std.items() if k != "columns"}) if "y_mean" in std else None
    if cfg.query:
        X = load_inputs(cfg.query, names)
    else:
        X = query_grid(model, cfg.grid)
    Xs = scaler.transform_X(X) if scaler is not None else X
    pred = model.predict(Xs)
    if scaler is not None:
        s2 = scaler.y_std**2
        pred = type(pred)(scaler.inverse_y(pred.mean), pred.var_f * s2, pred.var_noise * s2)
    write_predictions(out / "predictions.csv", X, pred, names)
    return ["predictions.csv"]


def cmd_ablate(cfg: RunConfig, out: Path) -> list:
    sets = [load_named(n, cfg.seed) for n in cfg.datasets]
    if cfg.csv:
        sets.append(load_csv(cfg.csv, cfg.x_cols, cfg.y_col))
    rows = ablation(sets, M=cfg.M, seed=cfg.seed, k=cfg.k, epochs=cfg.epochs, lr=cfg.lr, n_jobs=cfg.jobs)
    with atomic_path(out / "ablation.csv") as tmp:
        write_csv(rows, tmp)
    table = format_table(rows)
    write_text(out / "ablation.txt", table + "\n")
    print(table)
    return ["ablation.csv", "ablation.txt"]


def cmd_active(cfg: RunConfig, out: Path) -> list:
    d = load_source(cfg)
    cfg.M = default_M(d) if cfg.M is None else cfg.M
    base = AlConfig(
        initial_n=cfg.initial_n, acquisitions=cfg.acquisitions, retrain=cfg.retrain, seed=cfg.seed,
        M=cfg.M, epochs=cfg.epochs, lr=cfg.lr, retrain_epochs=cfg.retrain_epochs, variant=cfg.variant,
    )
    initial = fit_initial(d, base)
    written = []
    for arm in cfg.arms:
        trace = run_al(d, dataclasses.replace(base, acquisition=arm), initial)
        with atomic_path(out / f"al_{arm}.csv") as tmp:
            trace.to_csv(tmp)
        with atomic_path(out / f"al_{arm}_predictions.csv") as tmp:
            trace.predictions_to_csv(tmp)
        written += [f"al_{arm}.csv", f"al_{arm}_predictions.csv"]
        print(f"{arm}: final MAE {trace.mae[-1] if len(trace) else trace.initial_mae:.4f}  MAE AUC {trace.mae_auc():.4f}")
    return written


def cmd_gradcheck(cfg: RunConfig, out: Path | None) -> tuple:
    variants = ALL_VARIANTS if not (cfg.latent_ell or cfg.latent_sigma or cfg.latent_omega) else [cfg.variant]
    results = gradient_battery(variants, cfg.configs, cfg.seed, cfg.perturb)
    worst = max(c.max_rel_error for _, c in results)
    ok = all(c.ok for _, c in results) and worst < cfg.tol
    lines = [f"{v.label:<32} n={c.analytic.size:<4} max_rel_error={c.max_rel_error:.3e} {'ok' if c.ok else 'FAIL'}" for v, c in results]
    lines.append(f"max relative gradient error {worst:.3e} over {len(results)} configurations (tolerance {cfg.tol:g}): {'PASS' if ok else 'FAIL'}")
    report = "\n".join(lines)
    print(report)
    written = []
    if out is not None:
        write_text(out / "gradcheck.txt", report + "\n")
        written.append("gradcheck.txt")
    return written, ok


# ---------------------------------------------------------------- argument parsing


def _csv_list(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsgp", description="Non-stationary heteroscedastic GP experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=out_required, help="output directory")

    def variant_flags(sp):
        for tag in TAGS:
            sp.add_argument(f"--latent-{tag}", action="store_true", help=f"model {tag} with a latent GP")

    def source(sp):
        sp.add_argument("--dataset", choices=NAMED)
        sp.add_argument("--csv", help="CSV file with a header row")
        sp.add_argument("--x-cols", type=_csv_list, default=[], help="comma-separated input columns")
        sp.add_argument("--y-col")

    def training(sp):
        sp.add_argument("--M", type=int, default=None, help="inducing points (default 10 for 1-D, 25 otherwise)")
        sp.add_argument("--epochs", type=int, default=1000)
        sp.add_argument("--lr", type=float, default=0.05)

    sp = sub.add_parser("synth", help="write a synthetic dataset with truth columns")
    sp.add_argument("--dataset", required=True, help=f"one of {sorted(GENERATORS)}")
    common(sp)

    sp = sub.add_parser("fit", help="fit one variant and save the model")
    source(sp), variant_flags(sp), training(sp), common(sp)

    sp = sub.add_parser("predict", help="predict with a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--query", help="CSV with the model's input columns")
    sp.add_argument("--grid", type=int, default=200, help="grid size per dimension when no --query is given")
    common(sp)

    sp = sub.add_parser("ablate", help="cross-validate all 8 variants")
    sp.add_argument("--datasets", type=_csv_list, default=[], help=f"comma-separated names from {NAMED}")
    sp.add_argument("--csv"), sp.add_argument("--x-cols", type=_csv_list, default=[]), sp.add_argument("--y-col")
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--jobs", type=int, default=1)
    training(sp), common(sp)

    sp = sub.add_parser("active", help="active learning with var_f and/or var_y acquisition")
    source(sp), variant_flags(sp), training(sp)
    sp.add_argument("--arms", type=_csv_list, default=list(ACQUISITIONS))
    sp.add_argument("--initial-n", type=int, default=30)
    sp.add_argument("--acquisitions", type=int, default=50)
    sp.add_argument("--retrain", default="none")
    sp.add_argument("--retrain-epochs", type=int, default=100)
    common(sp)

    sp = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    variant_flags(sp)
    sp.add_argument("--configs", type=int, default=24)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    common(sp, out_required=False)

    sp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", help="write into this directory instead of the recorded one")
    return p


def config_from_args(args) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    doc = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    doc["command"] = args.command
    doc.setdefault("M", None)
    cfg = RunConfig(**doc)
    if cfg.command == "active" and cfg.dataset is None and cfg.csv is None:
        cfg.dataset = "synth1d"
    cfg.validate()
    return cfg


RUNNERS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "ablate": cmd_ablate,
    "active": cmd_active,
}


def preflight(cfg: RunConfig) -> None:
    """Fail on missing input files before the output directory is touched."""
    for path in (cfg.csv, cfg.model, cfg.query):
        if path is not None and not Path(path).is_file():
            raise FileNotFoundError(f"no such file: {path}")


def execute(cfg: RunConfig) -> int:
    preflight(cfg)
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if cfg.command == "gradcheck":
        written, ok = cmd_gradcheck(cfg, out)
        if out is not None:
            write_manifest(cfg, out, written)
        return EXIT_OK if ok else EXIT_NUMERIC
    written = RUNNERS[cfg.command](cfg, out)
    write_manifest(cfg, out, written)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            cfg = read_manifest(args.manifest)
            if args.out:
                cfg.out = args.out
        else:
            cfg = config_from_args(args)
        return execute(cfg)
    except ConfigError as exc:
        print(f"nsgp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"nsgp: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ParseError, EmptyDataset, LayoutMismatch, json.JSONDecodeError) as exc:
        print(f"nsgp: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NsgpError, KeyError, ValueError) as exc:
        print(f"nsgp: config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
