"""Multi-view datasets: synthetic generation and CSV manifests.

Manifest format (JSON)::

    {"name": "toy", "views": ["view0.csv", "view1.csv"], "labels": "labels.csv"}

Paths are relative to the manifest. Each view CSV holds one sample per row
(n rows x d_v comma-separated numbers, optional header row). The labels file
holds one integer per line; it may be omitted.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, LoadError


@dataclass
class MultiViewDataset:
    views: list
    truth: np.ndarray = None
    name: str = "dataset"

    def __post_init__(self):
        self.views = [np.asarray(v, dtype=np.float64) for v in self.views]
        if not self.views:
            raise InputError("a dataset needs at least one view")
        sizes = [v.shape[0] for v in self.views]
        if any(v.ndim != 2 for v in self.views) or len(set(sizes)) != 1:
            raise InputError(f"views must be 2-D with a shared sample count, got {sizes}")
        for i, v in enumerate(self.views):
            if not np.all(np.isfinite(v)):
                raise InputError(f"view {i} contains NaN or Inf")
        if self.truth is not None:
            self.truth = np.asarray(self.truth).astype(np.int64).ravel()
            if self.truth.size != sizes[0]:
                raise InputError(f"{self.truth.size} labels for {sizes[0]} samples")

    @property
    def n(self):
        return self.views[0].shape[0]

    @property
    def n_views(self):
        return len(self.views)

    @property
    def dims(self):
        return [v.shape[1] for v in self.views]


@dataclass
class SyntheticSpec:
    n: int = 500
    k: int = 4
    n_views: int = 2
    view_dims: tuple = (20, 20)
    separation: float = 6.0
    noise: float = 0.1
    latent_dim: int = None
    informative: tuple = None
    seed: int = 0
    name: str = "blobs"

    def validate(self):
        if self.n < 1 or self.k < 1 or self.n_views < 1:
            raise InputError("n, k and n_views must be positive")
        if self.k > self.n:
            raise InputError(f"k={self.k} exceeds n={self.n}")
        if len(self.view_dims) != self.n_views or min(self.view_dims) < 1:
            raise InputError(f"need {self.n_views} positive view dims, got {self.view_dims}")
        if self.separation < 0 or self.noise < 0:
            raise InputError("separation and noise must be non-negative")
        latent = self.latent_dim or self.k
        if latent < self.k:
            raise InputError(f"latent_dim={latent} must be >= k={self.k}")
        if self.informative is not None and len(self.informative) != self.n_views:
            raise InputError("informative flags must match n_views")


def generate_synthetic(spec):
    """Gaussian blobs with shared cluster identity across views.

    Cluster centres sit at mutual distance ``separation`` (in units of the
    unit within-cluster standard deviation) in a shared latent space. Each
    view applies its own random linear map and adds isotropic noise. A view
    flagged non-informative maps an independent, cluster-free latent instead.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    latent = spec.latent_dim or spec.k
    labels = rng.permutation(np.arange(spec.n) % spec.k)
    basis = np.linalg.qr(rng.normal(size=(latent, latent)))[0][:, : spec.k]
    centres = (spec.separation / np.sqrt(2.0)) * basis.T
    shared = centres[labels] + rng.normal(size=(spec.n, latent))
    informative = spec.informative or (True,) * spec.n_views
    views = []
    for d, useful in zip(spec.view_dims, informative):
        proj = rng.normal(size=(latent, d)) / np.sqrt(latent)
        source = shared if useful else rng.normal(size=(spec.n, latent))
        views.append(source @ proj + spec.noise * rng.normal(size=(spec.n, d)))
    return MultiViewDataset(views, labels, spec.name)


def _parse_number(token, path, line):
    try:
        value = float(token)
    except ValueError:
        raise LoadError(f"{path}:{line}: non-numeric cell {token!r}") from None
    if not np.isfinite(value):
        raise LoadError(f"{path}:{line}: non-finite cell {token!r}")
    return value


def read_matrix_csv(path):
    """Read a numeric CSV; a first row that is not fully numeric is treated as a header."""
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"{path}: file not found")
    rows = []
    width = None
    with open(path, newline="") as fh:
        for line, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            if line == 1:
                try:
                    [float(c) for c in record]
                except ValueError:
                    continue
            values = [_parse_number(c.strip(), path, line) for c in record]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise LoadError(f"{path}:{line}: expected {width} columns, found {len(values)}")
            rows.append(values)
    if not rows:
        raise LoadError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def read_labels(path):
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"{path}: file not found")
    labels = []
    with open(path) as fh:
        for line, text in enumerate(fh, start=1):
            text = text.strip()
            if not text:
                continue
            try:
                labels.append(int(text))
            except ValueError:
                if line == 1 and not labels:
                    continue
                raise LoadError(f"{path}:{line}: label {text!r} is not an integer") from None
    return np.array(labels, dtype=np.int64)


def write_labels(path, labels):
    Path(path).write_text("".join(f"{int(y)}\n" for y in labels))


def load_dataset(manifest_path):
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise LoadError(f"{manifest_path}: manifest not found")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise LoadError(f"{manifest_path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(manifest, dict) or not manifest.get("views"):
        raise LoadError(f"{manifest_path}: manifest must list at least one view")
    base = manifest_path.parent
    paths = [base / p for p in manifest["views"]]
    views = [read_matrix_csv(p) for p in paths]
    counts = [v.shape[0] for v in views]
    if len(set(counts)) != 1:
        detail = ", ".join(f"{p.name} has {c} rows" for p, c in zip(paths, counts))
        raise LoadError(f"{manifest_path}: views disagree on sample count ({detail})")
    truth = None
    if manifest.get("labels"):
        label_path = base / manifest["labels"]
        truth = read_labels(label_path)
        if truth.size != counts[0]:
            raise LoadError(f"{label_path}: {truth.size} labels for {counts[0]} samples")
    return MultiViewDataset(views, truth, manifest.get("name", manifest_path.stem))


def save_dataset(dataset, directory):
    """Write view CSVs, labels and ``manifest.json`` into ``directory``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"name": dataset.name, "views": []}
    for i, view in enumerate(dataset.views):
        fname = f"view{i}.csv"
        np.savetxt(directory / fname, view, delimiter=",", fmt="%.17g")
        manifest["views"].append(fname)
    if dataset.truth is not None:
        write_labels(directory / "labels.csv", dataset.truth)
        manifest["labels"] = "labels.csv"
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
