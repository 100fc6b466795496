"""A small dense-network engine: fragment-wise layers, exact reverse-mode
gradients (parameters and inputs), MSE losses and Adam.

Everything runs in float64 on numpy arrays. Each row of an input matrix is
one fragment; layers act on rows independently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu", "linear")


@dataclass
class Layer:
    W: np.ndarray  # out x in
    b: np.ndarray  # out
    activation: str = "linear"

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"bad layer shapes W{self.W.shape} b{self.b.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]


@dataclass
class Network:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ValueError(f"layer dims do not chain: {prev.n_out} -> {nxt.n_in}")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...). Views, not copies."""
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Network":
        return Network([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def param_bytes(self) -> bytes:
        return b"".join(p.tobytes() for p in self.params())

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)[0]

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "in": l.n_in,
                    "out": l.n_out,
                    "activation": l.activation,
                    "W": l.W.ravel().tolist(),
                    "b": l.b.tolist(),
                }
                for l in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        layers = []
        for spec in d["layers"]:
            W = np.array(spec["W"], dtype=np.float64).reshape(spec["out"], spec["in"])
            layers.append(Layer(W, np.array(spec["b"], dtype=np.float64), spec["activation"]))
        return cls(layers)


def init_network(sizes: Sequence[int], activations: Sequence[str], seed) -> Network:
    """Glorot-uniform weights, zero biases, drawn from a seeded generator.

    ``sizes`` lists the widths ``[in, h1, ..., out]``; ``activations`` has one
    entry per layer.
    """
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
        bound = math.sqrt(6.0 / (n_in + n_out))
        layers.append(Layer(rng.uniform(-bound, bound, (n_out, n_in)), np.zeros(n_out), act))
    return Network(layers)


def identity_network(n: int) -> Network:
    return Network([Layer(np.eye(n), np.zeros(n), "linear")])


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "tanh":
        return np.tanh(z)
    if act == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, act: str, grad: np.ndarray) -> np.ndarray:
    if act == "tanh":
        return grad * (1.0 - a * a)
    if act == "relu":
        return grad * (z > 0.0)
    return grad


@dataclass
class Cache:
    """Per-layer inputs, pre-activations and outputs from one forward pass."""

    net_id: int
    shapes: tuple
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)


def _shape_signature(net: Network) -> tuple:
    return tuple((l.W.shape, l.activation) for l in net.layers)


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ValueError(f"input has shape {x.shape}; network expects K x {net.n_in}")
    cache = Cache(id(net), _shape_signature(net))
    a = x
    for layer in net.layers:
        cache.inputs.append(a)
        z = a @ layer.W.T + layer.b
        a = _activate(z, layer.activation)
        cache.pre.append(z)
        cache.post.append(a)
    return a, cache


def backward(net: Network, cache: Cache, loss_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse-mode pass given dLoss/dOutput.

    Returns ``(param_grads, input_grad)``; ``param_grads`` is ordered like
    :meth:`Network.params`.
    """
    if cache.net_id != id(net) or cache.shapes != _shape_signature(net):
        raise ValueError("cache does not belong to this network")
    grad = np.asarray(loss_grad, dtype=np.float64)
    if grad.shape != cache.post[-1].shape:
        raise ValueError(f"loss gradient shape {grad.shape} != output shape {cache.post[-1].shape}")
    grads: list[np.ndarray] = []
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dz = _activation_grad(cache.pre[i], cache.post[i], layer.activation, grad)
        grads.append(dz.sum(axis=0))
        grads.append(dz.T @ cache.inputs[i])
        grad = dz @ layer.W
    grads.reverse()
    return grads, grad


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(pred, target) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_same_shape(pred, target)
    d = pred - target
    return float(np.mean(d * d))


def mse_grad(pred, target) -> tuple[float, np.ndarray]:
    """Loss value and dLoss/dPred for :func:`mse`."""
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_same_shape(pred, target)
    d = pred - target
    return float(np.mean(d * d)), 2.0 * d / d.size


def channel_mse(preds: Sequence, targets: Sequence) -> float:
    """Average of per-channel MSEs."""
    if len(preds) == 0 or len(preds) != len(targets):
        raise ValueError(f"need matching nonempty channel lists, got {len(preds)} and {len(targets)}")
    return sum(mse(p, t) for p, t in zip(preds, targets)) / len(preds)


def channel_mse_grad(preds: Sequence, targets: Sequence) -> tuple[float, list[np.ndarray]]:
    if len(preds) == 0 or len(preds) != len(targets):
        raise ValueError(f"need matching nonempty channel lists, got {len(preds)} and {len(targets)}")
    c = len(preds)
    total, grads = 0.0, []
    for p, t in zip(preds, targets):
        loss, g = mse_grad(p, t)
        total += loss
        grads.append(g / c)
    return total / c, grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch in adam_step: {p.shape} / {g.shape} / {m.shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int | None = None  # None means full batch
    seed: int = 0


def fit(
    params: Sequence[np.ndarray],
    batch_loss_grad: Callable[[np.ndarray], tuple[float, list[np.ndarray]]],
    full_loss: Callable[[], float],
    n_samples: int,
    config: TrainConfig,
) -> list[float]:
    """Generic mini-batch Adam loop over ``n_samples`` rows.

    ``batch_loss_grad(idx)`` returns the loss and gradients (aligned with
    ``params``) on the rows ``idx``. Returns the loss curve: entry 0 is the
    loss before any update, entry ``e`` the full-data loss after epoch ``e``.
    """
    if n_samples < 1:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    state = AdamState(lr=config.lr)
    batch = n_samples if not config.batch_size else min(config.batch_size, n_samples)
    curve = [full_loss()]
    for _ in range(config.epochs):
        order = rng.permutation(n_samples) if batch < n_samples else np.arange(n_samples)
        for start in range(0, n_samples, batch):
            idx = order[start : start + batch]
            _, grads = batch_loss_grad(idx)
            adam_step(params, grads, state)
        curve.append(full_loss())
    return curve


def train(net: Network, dataset, config: TrainConfig | None = None) -> tuple[Network, list[float]]:
    """Fit ``net`` in place to ``(inputs, targets)`` rows under MSE.

    ``dataset`` is a pair of 2-D arrays or a sequence of ``(x, target)`` row
    pairs.
    """
    config = config or TrainConfig()
    X, Y = _as_xy(dataset)
    params = net.params()

    def batch_loss_grad(idx):
        y, cache = forward(net, X[idx])
        loss, g = mse_grad(y, Y[idx])
        return loss, backward(net, cache, g)[0]

    curve = fit(params, batch_loss_grad, lambda: mse(forward(net, X)[0], Y), len(X), config)
    return net, curve


def _as_xy(dataset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 2 and isinstance(dataset[0], np.ndarray):
        X, Y = dataset
    else:
        pairs = list(dataset)
        if not pairs:
            raise ValueError("cannot train on an empty dataset")
        X = np.array([np.ravel(p[0]) for p in pairs])
        Y = np.array([np.ravel(p[1]) for p in pairs])
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {Y.shape[0]} targets")
    return X, Y


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, networks: dict[str, Network], **meta) -> None:
    """Write named networks plus metadata as JSON.

    Floats go through ``repr`` (shortest round-trip form), so load is exact.
    """
    doc = {"format": "chansep-checkpoint", "version": CHECKPOINT_VERSION, **meta}
    doc["networks"] = {name: net.to_dict() for name, net in networks.items()}
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n")


def load_checkpoint(path) -> tuple[dict[str, Network], dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "chansep-checkpoint":
        raise ValueError(f"{path} is not a chansep checkpoint")
    nets = {name: Network.from_dict(d) for name, d in doc.pop("networks").items()}
    return nets, doc
