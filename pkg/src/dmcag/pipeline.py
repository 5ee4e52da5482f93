"""End-to-end clustering: pretrain, anchor graphs, self-training, contrastive finetuning.

Seeding
-------
Every random draw derives from the master ``config.seed`` through
``derive_seed(seed, stage, view, index)``, which hashes the tuple with
:class:`numpy.random.SeedSequence`. Stages are ``init`` (autoencoder
weights), ``centroids`` (per-view k-means for the soft-assignment centres),
``anchors`` (anchor k-means, ``index`` = round) and ``global`` (k-means on
the concatenated embedding, ``index`` = round). k-means restarts further
split their seed by restart index.
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from pathlib import Path

import numpy as np

from .anchor_graph import build_anchor_graph
from .autoencoder import MlpAutoencoder, encode, train_reconstruction
from .contrastive import ContrastiveConfig, train_contrastive
from .errors import DMCAGError, InputError
from .metrics import evaluate
from .selfsup import align_centroids, init_centroids, train_selfsup
from .spectral import compute_target, predict

STAGES = {"init": 1, "centroids": 2, "anchors": 3, "global": 4}

FINAL_ROUND = -1


def derive_seed(seed, stage, view=0, index=0):
    seq = np.random.SeedSequence([int(seed), STAGES[stage], int(view), int(index) + 1])
    return int(seq.generate_state(1)[0])


@dataclass
class PipelineConfig:
    k: int = 4
    m: int = 20
    gamma: float = 1.0
    alpha: float = 1e-3
    tau: float = 1.0
    latent_dim: int = 10
    hidden_dims: tuple = (500, 500, 2000)
    rounds: int = 3
    pretrain_epochs: int = 200
    pretrain_lr: float = 1e-3
    selfsup_epochs: int = 100
    selfsup_lr: float = 1e-3
    kl_weight: float = 1.0
    selfsup_tol: float = 1e-3
    contrastive_epochs: int = 50
    contrastive_lr: float = 1e-4
    entropy_weight: float = 1.0
    train_centroids: bool = True
    contrastive_recon_weight: float = 0.0
    use_selfsup: bool = True
    use_contrastive: bool = True
    normalize_graph: bool = True
    kmeans_n_init: int = 10
    standardize: bool = False
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        self.validate()

    def validate(self):
        for name in ("k", "m", "latent_dim", "kmeans_n_init"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be positive")
        for name in ("rounds", "pretrain_epochs", "selfsup_epochs", "contrastive_epochs"):
            if int(getattr(self, name)) < 0:
                raise InputError(f"{name} must be non-negative")
        if self.m < self.k:
            raise InputError(f"anchor count m={self.m} must be >= k={self.k}")
        if self.gamma < 0:
            raise InputError("gamma must be non-negative")
        if not (self.alpha > 0 and self.tau > 0):
            raise InputError("alpha and tau must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise InputError("hidden widths must be positive")

    def to_dict(self):
        out = asdict(self)
        out["hidden_dims"] = list(self.hidden_dims)
        return out

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**values)

    @classmethod
    def load(cls, path):
        try:
            values = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise InputError(f"{path}: config file not found") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        return cls.from_dict(values)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def replace(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return type(self).from_dict(values)


@dataclass
class RunResult:
    labels: np.ndarray
    metrics: dict
    config: dict
    pretrain_trace: list = field(default_factory=list)
    selfsup_trace: list = field(default_factory=list)
    contrastive_trace: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    models: list = field(default_factory=list)
    mus: list = field(default_factory=list)
    spectral: object = None
    graphs: list = field(default_factory=list)


def _standardize(views):
    out = []
    for v in views:
        std = v.std(axis=0)
        out.append((v - v.mean(axis=0)) / np.where(std > 0, std, 1.0))
    return out


class _Timer:
    def __init__(self, timings, name):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.start = time.perf_counter()

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self.start
        self.timings[self.name] = self.timings.get(self.name, 0.0) + elapsed


def _graphs_and_target(models, views, config, round_index, timings):
    zs = [encode(model, x) for model, x in zip(models, views)]
    index = round_index if round_index >= 0 else config.rounds + 1
    with _Timer(timings, "anchor_graph"):
        graphs = [build_anchor_graph(z, config.m, config.gamma,
                                     seed=derive_seed(config.seed, "anchors", v, index),
                                     n_init=config.kmeans_n_init)
                  for v, z in enumerate(zs)]
    with _Timer(timings, "spectral"):
        state = compute_target(graphs, config.k, config.alpha,
                               seed=derive_seed(config.seed, "global", 0, index),
                               n_init=config.kmeans_n_init,
                               normalize=config.normalize_graph)
    return zs, graphs, state


def _tagged(stage, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except DMCAGError as exc:
        if not str(exc).startswith("["):
            exc.args = (f"[{stage}] {exc}",) + exc.args[1:]
        raise


def init_models(dataset, config):
    return [MlpAutoencoder.create(d, config.hidden_dims, config.latent_dim,
                                  seed=derive_seed(config.seed, "init", v))
            for v, d in enumerate(dataset.dims)]


def prepare_views(dataset, config):
    return _standardize(dataset.views) if config.standardize else list(dataset.views)


def pretrain(dataset, config, models=None):
    """Reconstruction pretraining of one autoencoder per view; returns ``(models, trace)``."""
    views = prepare_views(dataset, config)
    models = models if models is not None else init_models(dataset, config)
    trace = []
    for v, (model, x) in enumerate(zip(models, views)):
        losses = _tagged("pretrain", train_reconstruction, model, x,
                         config.pretrain_epochs, lr=config.pretrain_lr)
        trace += [{"view": v, "epoch": e, "L_r": l} for e, l in enumerate(losses)]
    return models, trace


def run_pipeline(dataset, config, models=None):
    """Run every enabled stage and return labels, metrics and traces.

    Stage order: pretraining, initial anchor graphs and target, ``rounds``
    alternations of {anchor graphs, target, self-training}, contrastive
    finetuning, then final anchor graphs and target from the finetuned
    encoders. The labels are the row-wise argmax of the final target.

    Passing already pretrained ``models`` skips the pretraining stage; they
    are updated in place.
    """
    config.validate()
    if config.k > dataset.n or config.m > dataset.n:
        raise InputError(f"k={config.k} and m={config.m} must not exceed n={dataset.n}")
    views = prepare_views(dataset, config)
    timings = {}
    pretrain_trace = []
    if models is None:
        with _Timer(timings, "pretrain"):
            models, pretrain_trace = pretrain(dataset, config)
    else:
        expected = [(d, config.latent_dim) for d in dataset.dims]
        found = [(m.input_dim, m.latent_dim) for m in models]
        if found != expected:
            raise InputError(f"models (input, latent) dims {found} do not match {expected}")

    zs, graphs, state = _tagged("init", _graphs_and_target, models, views, config, 0, timings)
    with _Timer(timings, "centroids"):
        mus = [align_centroids(init_centroids(z, config.k,
                                              seed=derive_seed(config.seed, "centroids", v),
                                              n_init=config.kmeans_n_init),
                               z, state.target)
               for v, z in enumerate(zs)]

    selfsup_trace = []
    if config.use_selfsup:
        for r in range(config.rounds):
            if r > 0:
                zs, graphs, state = _tagged("selfsup", _graphs_and_target,
                                            models, views, config, r, timings)
                mus = [align_centroids(mu, z, state.target) for mu, z in zip(mus, zs)]
            with _Timer(timings, "selfsup"):
                result = _tagged("selfsup", train_selfsup, models, views, mus, state.target,
                                 epochs=config.selfsup_epochs, lr=config.selfsup_lr,
                                 kl_weight=config.kl_weight, tol=config.selfsup_tol,
                                 round_index=r)
            mus = result.mus
            selfsup_trace += result.trace

    contrastive_trace = []
    if config.use_contrastive and len(views) > 1:
        cc = ContrastiveConfig(tau=config.tau, entropy_weight=config.entropy_weight,
                               epochs=config.contrastive_epochs, lr=config.contrastive_lr,
                               train_centroids=config.train_centroids,
                               recon_weight=config.contrastive_recon_weight)
        with _Timer(timings, "contrastive"):
            result = _tagged("contrastive", train_contrastive, models, views, mus, cc,
                             round_index=config.rounds)
        mus = result.mus
        contrastive_trace = result.trace

    zs, graphs, state = _tagged("final", _graphs_and_target, models, views, config,
                                FINAL_ROUND, timings)
    labels = predict(state.target)
    metrics = evaluate(labels, dataset.truth) if dataset.truth is not None else {}
    return RunResult(labels=labels, metrics=metrics, config=config.to_dict(),
                     pretrain_trace=pretrain_trace, selfsup_trace=selfsup_trace,
                     contrastive_trace=contrastive_trace, timings=timings,
                     models=models, mus=mus, spectral=state, graphs=graphs)


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: (repr(row[c]) if isinstance(row.get(c), float) else row.get(c, ""))
                             for c in columns})


def write_run(result, directory):
    """Persist ``labels.csv``, ``metrics.json``, ``trace.csv``, ``contrastive_trace.csv`` and ``config.lock.json``."""
    from .data import write_labels

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_labels(directory / "labels.csv", result.labels)
    (directory / "metrics.json").write_text(json.dumps(result.metrics, indent=2, sort_keys=True) + "\n")
    _write_csv(directory / "trace.csv", result.selfsup_trace, ["round", "epoch", "view", "L_r", "L_c"])
    _write_csv(directory / "contrastive_trace.csv", result.contrastive_trace,
               ["round", "epoch", "L_Q", "entropy"])
    (directory / "config.lock.json").write_text(json.dumps(result.config, indent=2, sort_keys=True) + "\n")
    (directory / "timings.json").write_text(json.dumps(result.timings, indent=2, sort_keys=True) + "\n")
    return directory


SWEEP_COLUMNS = ["m", "gamma", "acc", "nmi", "ari", "runtime", "error"]


def sweep(dataset, config, grid):
    """One pipeline run per point of the Cartesian ``grid`` (e.g. ``{"m": [...], "gamma": [...]}``).

    A failing cell is recorded with its error message and the sweep moves on.
    """
    grid = {key: list(values) for key, values in grid.items()}
    unknown = set(grid) - {f.name for f in fields(PipelineConfig)}
    if unknown:
        raise InputError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    keys = list(grid)
    rows = []
    for combo in product(*(grid[k] for k in keys)):
        cell = dict(zip(keys, combo))
        row = {"m": config.m, "gamma": config.gamma, **cell}
        start = time.perf_counter()
        try:
            result = run_pipeline(dataset, config.replace(**cell))
            row.update({key: result.metrics.get(key, "") for key in ("acc", "nmi", "ari")})
            row["error"] = ""
        except DMCAGError as exc:
            row.update({"acc": "", "nmi": "", "ari": "", "error": str(exc)})
        row["runtime"] = time.perf_counter() - start
        rows.append(row)
    return rows


def write_sweep(rows, path):
    columns = SWEEP_COLUMNS + sorted({k for r in rows for k in r} - set(SWEEP_COLUMNS))
    _write_csv(path, rows, columns)
    return path
