"""Fully connected per-view autoencoder with hand-written backprop and Adam.

Samples are rows: ``x`` has shape (n, d_v) and the latent code ``z`` has
shape (n, l). The decoder mirrors the encoder widths. Hidden layers use
ReLU; the latent layer and the reconstruction layer are linear.

Checkpoint format
-----------------
A checkpoint is a NumPy ``.npz`` archive with the keys

``format_version``  int, currently 1
``layer_dims``      int array, encoder widths ``[d_v, h_1, ..., l]``
``seed``            int, initialisation seed (-1 if unknown)
``W{i}``, ``b{i}``  float64 weight (fan_in, fan_out) and bias arrays,
                    ``i = 0 .. 2L-1`` where the first L are the encoder

Values are stored in binary float64, so a save/load round trip is exact.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, LoadError, ShapeError, TrainingError
from .linalg import as_matrix, frobenius_norm_sq

CHECKPOINT_VERSION = 1


@dataclass
class MlpAutoencoder:
    layer_dims: tuple
    weights: list
    biases: list
    seed: int = -1

    @classmethod
    def create(cls, input_dim, hidden_dims, latent_dim, seed=0):
        dims = (int(input_dim), *[int(h) for h in hidden_dims], int(latent_dim))
        if min(dims) < 1:
            raise InputError(f"layer widths must be positive, got {dims}")
        rng = np.random.default_rng(seed)
        shapes = list(zip(dims[:-1], dims[1:]))
        shapes += [(b, a) for a, b in reversed(shapes)]
        weights, biases = [], []
        for fan_in, fan_out in shapes:
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases, int(seed))

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def latent_dim(self):
        return self.layer_dims[-1]

    @property
    def n_encoder_layers(self):
        return len(self.layer_dims) - 1

    @property
    def activations(self):
        depth = self.n_encoder_layers
        tags = ["relu"] * (depth - 1) + ["linear"]
        return tags + tags

    def params(self):
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (live references)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def encoder_params(self):
        return self.params()[: 2 * self.n_encoder_layers]

    def copy(self):
        return MlpAutoencoder(self.layer_dims,
                              [w.copy() for w in self.weights],
                              [b.copy() for b in self.biases],
                              self.seed)


def _check_input(model, x):
    x = as_matrix(x, "x")
    if x.shape[1] != model.input_dim:
        raise ShapeError(f"input has {x.shape[1]} features, model expects {model.input_dim}")
    return x


def _run(model, h, layers, cache=None):
    acts = model.activations
    for i in layers:
        pre = h @ model.weights[i] + model.biases[i]
        h = np.maximum(pre, 0.0) if acts[i] == "relu" else pre
        if cache is not None:
            cache.append(h)
    return h


def encode(model, x):
    x = _check_input(model, x)
    return _run(model, x, range(model.n_encoder_layers))


def decode(model, z):
    z = as_matrix(z, "z")
    if z.shape[1] != model.latent_dim:
        raise ShapeError(f"latent has {z.shape[1]} columns, model expects {model.latent_dim}")
    depth = model.n_encoder_layers
    return _run(model, z, range(depth, 2 * depth))


def reconstruction_loss(model, x):
    x = _check_input(model, x)
    return frobenius_norm_sq(x - decode(model, encode(model, x)))


def backward(model, x, latent_grad=None, recon_weight=1.0):
    """Gradients of ``recon_weight * ||x - g(f(x))||_F^2 + <latent_grad, f(x)>``.

    Parameters
    ----------
    latent_grad : array (n, l) or None
        Upstream gradient of an extra loss with respect to the latent code,
        e.g. from the KL or contrastive objectives.
    recon_weight : float
        With ``0`` the decoder is skipped and its gradients are zero.

    Returns
    -------
    grads : list
        Same order as :meth:`MlpAutoencoder.params`.
    loss : float
        Weighted reconstruction loss (the latent pathway is not included).
    """
    x = _check_input(model, x)
    depth = model.n_encoder_layers
    acts = model.activations
    cache = [x]
    z = _run(model, x, range(depth), cache)
    if latent_grad is not None:
        latent_grad = np.asarray(latent_grad, dtype=np.float64)
        if latent_grad.shape != z.shape:
            raise ShapeError(f"latent_grad shape {latent_grad.shape} != latent shape {z.shape}")

    grads_w = [np.zeros_like(w) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]

    loss = 0.0
    if recon_weight != 0.0:
        _run(model, z, range(depth, 2 * depth), cache)
        resid = cache[-1] - x
        loss = recon_weight * frobenius_norm_sq(resid)
        delta = 2.0 * recon_weight * resid
        for i in reversed(range(depth, 2 * depth)):
            if acts[i] == "relu":
                delta = delta * (cache[i + 1] > 0)
            grads_w[i] = cache[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ model.weights[i].T
        if latent_grad is not None:
            delta = delta + latent_grad
    elif latent_grad is not None:
        delta = latent_grad
    else:
        delta = np.zeros_like(z)

    for i in reversed(range(depth)):
        if acts[i] == "relu":
            delta = delta * (cache[i + 1] > 0)
        grads_w[i] = cache[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i:
            delta = delta @ model.weights[i].T

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads += [gw, gb]
    return grads, loss


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper):
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **hyper)


def adam_step(params, grads, state):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("params, grads and Adam moments differ in length")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"parameter {p.shape} vs gradient {np.shape(g)}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def train_reconstruction(model, x, epochs, lr=1e-3, state=None):
    """Full-batch Adam on the reconstruction loss; returns the per-epoch loss."""
    x = _check_input(model, x)
    params = model.params()
    if state is None:
        state = AdamState.for_params(params, lr=lr)
    trace = []
    for epoch in range(epochs):
        grads, loss = backward(model, x)
        if not np.isfinite(loss):
            raise TrainingError("reconstruction loss is not finite", epoch=epoch, stage="pretrain")
        trace.append(loss)
        adam_step(params, grads, state)
    return trace


def save_checkpoint(model, path):
    arrays = {"format_version": np.array(CHECKPOINT_VERSION),
              "layer_dims": np.array(model.layer_dims, dtype=np.int64),
              "seed": np.array(model.seed, dtype=np.int64)}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        with np.load(path) as data:
            version = int(data["format_version"])
            if version != CHECKPOINT_VERSION:
                raise LoadError(f"{path}: unsupported checkpoint version {version}")
            dims = tuple(int(d) for d in data["layer_dims"])
            n_layers = 2 * (len(dims) - 1)
            weights = [data[f"W{i}"].astype(np.float64) for i in range(n_layers)]
            biases = [data[f"b{i}"].astype(np.float64) for i in range(n_layers)]
            seed = int(data["seed"])
    except (OSError, KeyError, ValueError) as exc:
        raise LoadError(f"{path}: cannot read checkpoint ({exc})") from exc
    model = MlpAutoencoder(dims, weights, biases, seed)
    expected = MlpAutoencoder.create(dims[0], dims[1:-1], dims[-1], seed=0)
    for w, ref in zip(weights, expected.weights):
        if w.shape != ref.shape:
            raise LoadError(f"{path}: weight shape {w.shape} does not match layer_dims {dims}")
    return model
