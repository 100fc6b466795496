"""Fixed-channel separation: every output channel is bound to one source class.

Three ways to get there:

* ``train_alg1``: one shared encoder, one decoder per channel, trained end
  to end on mixtures with zero targets for absent classes.
* ``train_autoencoder`` per class, then ``latent_search`` at test time:
  gradient descent on the inputs of the frozen decoders so their summed
  outputs reconstruct the mixture.
* ``train_autoencoder`` per class, then ``train_separator``: a network maps
  the mixture into each frozen decoder's latent space.

All networks act on 50%-overlapping fragments; outputs are reassembled with
:func:`chansep.signals.overlap_add`. Channels are never permuted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import (
    AdamState,
    Network,
    TrainConfig,
    adam_step,
    backward,
    channel_mse_grad,
    fit,
    forward,
    init_network,
    load_checkpoint,
    mse,
    mse_grad,
    save_checkpoint,
)
from .signals import FrameMatrix, Waveform, frame, overlap_add

log = logging.getLogger(__name__)

DEFAULT_CLASSES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class Arch:
    """Layer widths. ``hidden=0`` gives single-layer encoders and decoders."""

    frame_len: int = 64
    latent: int = 32
    hidden: int = 64
    trunk: int = 64
    activation: str = "tanh"

    def to_dict(self) -> dict:
        return {
            "frame_len": self.frame_len,
            "latent": self.latent,
            "hidden": self.hidden,
            "trunk": self.trunk,
            "activation": self.activation,
        }


def _seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(n)


def _mlp(n_in: int, n_out: int, arch: Arch, seed) -> Network:
    if arch.hidden:
        return init_network([n_in, arch.hidden, n_out], [arch.activation, "linear"], seed)
    return init_network([n_in, n_out], ["linear"], seed)


def make_encoder(arch: Arch, seed) -> Network:
    return _mlp(arch.frame_len, arch.latent, arch, seed)


def make_decoder(arch: Arch, seed) -> Network:
    return _mlp(arch.latent, arch.frame_len, arch, seed)


def stack_frames(waves: Sequence, frame_len: int) -> np.ndarray:
    return np.concatenate([frame(w, frame_len).frames for w in waves], axis=0)


# ---------------------------------------------------------------------------
# Model types
# ---------------------------------------------------------------------------


@dataclass
class Autoencoder:
    class_id: str
    encoder: Network
    decoder: Network
    loss_curve: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.encoder.n_out != self.decoder.n_in:
            raise ValueError("encoder output width must equal decoder input width")

    def reconstruct(self, frames: np.ndarray) -> np.ndarray:
        return forward(self.decoder, forward(self.encoder, frames)[0])[0]


@dataclass
class Alg1Model:
    encoder: Network
    decoders: list[Network]
    channel_classes: tuple
    loss_curve: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.channel_classes = tuple(self.channel_classes)
        if not self.decoders or len(self.decoders) != len(self.channel_classes):
            raise ValueError("need one decoder per channel and at least one channel")
        for d in self.decoders:
            if d.n_in != self.encoder.n_out or d.n_out != self.encoder.n_in:
                raise ValueError("every decoder must map latent -> frame length")

    @property
    def frame_len(self) -> int:
        return self.encoder.n_in

    def channel_frames(self, frames: np.ndarray) -> list[np.ndarray]:
        h = forward(self.encoder, frames)[0]
        return [forward(d, h)[0] for d in self.decoders]


@dataclass
class SeparatorModel:
    trunk: Network
    heads: list[Network]
    decoders: list[Network]
    channel_classes: tuple
    loss_curve: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.channel_classes = tuple(self.channel_classes)
        if not (len(self.heads) == len(self.decoders) == len(self.channel_classes) >= 1):
            raise ValueError("head count, decoder count and channel count must agree")
        for h, d in zip(self.heads, self.decoders):
            if h.n_in != self.trunk.n_out or h.n_out != d.n_in:
                raise ValueError(f"head {h.n_in}->{h.n_out} does not fit trunk/decoder")

    @property
    def frame_len(self) -> int:
        return self.trunk.n_in

    def latents(self, frames: np.ndarray) -> list[np.ndarray]:
        t = forward(self.trunk, frames)[0]
        return [forward(h, t)[0] for h in self.heads]

    def channel_frames(self, frames: np.ndarray) -> list[np.ndarray]:
        return [forward(d, h)[0] for d, h in zip(self.decoders, self.latents(frames))]


@dataclass
class LatentSearchConfig:
    lr_candidates: tuple = (0.1, 0.01, 0.001)
    epochs: int = 100
    zero_init: bool = True
    restarts: int = 1  # seeded-Gaussian restarts per learning rate
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.lr_candidates = tuple(float(v) for v in self.lr_candidates)
        if not self.lr_candidates or any(v <= 0 for v in self.lr_candidates):
            raise ValueError("need at least one positive learning rate")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.zero_init and self.restarts < 1:
            raise ValueError("no initializations requested")

    def to_dict(self) -> dict:
        return {
            "lr_candidates": list(self.lr_candidates),
            "epochs": self.epochs,
            "zero_init": self.zero_init,
            "restarts": self.restarts,
            "sigma": self.sigma,
            "seed": self.seed,
        }


@dataclass
class Alg2Model:
    """Frozen per-class decoders plus the search settings used at inference."""

    decoders: list[Network]
    channel_classes: tuple
    search: LatentSearchConfig = field(default_factory=LatentSearchConfig)

    def __post_init__(self):
        self.channel_classes = tuple(self.channel_classes)
        if not self.decoders or len(self.decoders) != len(self.channel_classes):
            raise ValueError("need one decoder per channel")

    @property
    def frame_len(self) -> int:
        return self.decoders[0].n_out


@dataclass
class SearchRun:
    lr: float
    init: str
    final_loss: float


@dataclass
class LatentSearchResult:
    latents: list[np.ndarray]  # one K x R array per channel
    outputs: list[Waveform]
    best_loss: float
    best_lr: float
    runs: list[SearchRun]


# ---------------------------------------------------------------------------
# Step one: per-class autoencoders
# ---------------------------------------------------------------------------


def train_autoencoder(
    class_samples: Sequence,
    arch: Arch = Arch(),
    config: TrainConfig | None = None,
    class_id: str = "",
) -> Autoencoder:
    """Train encoder and decoder jointly to reconstruct the fragments of one class."""
    config = config or TrainConfig()
    if len(class_samples) == 0:
        raise ValueError(f"no training samples for class {class_id!r}")
    X = stack_frames(class_samples, arch.frame_len)
    s_enc, s_dec = _seeds(config.seed, 2)
    enc, dec = make_encoder(arch, s_enc), make_decoder(arch, s_dec)

    def loss_grad(idx):
        h, c_enc = forward(enc, X[idx])
        y, c_dec = forward(dec, h)
        loss, g = mse_grad(y, X[idx])
        g_dec, g_h = backward(dec, c_dec, g)
        g_enc, _ = backward(enc, c_enc, g_h)
        return loss, g_enc + g_dec

    def full_loss():
        return mse(forward(dec, forward(enc, X)[0])[0], X)

    curve = fit(enc.params() + dec.params(), loss_grad, full_loss, len(X), config)
    log.info("autoencoder %s: loss %.3e -> %.3e", class_id, curve[0], curve[-1])
    return Autoencoder(class_id, enc, dec, curve)


# ---------------------------------------------------------------------------
# Algorithm 1: shared encoder, per-channel decoders
# ---------------------------------------------------------------------------


def _training_frames(pairs, frame_len: int, n_channels: int | None = None):
    """Stack mixture frames and per-channel target frames from (mixture, targets) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty training set")
    c = len(pairs[0][1]) if n_channels is None else n_channels
    xs, ts = [], [[] for _ in range(c)]
    for mixture, targets in pairs:
        if len(targets) != c:
            raise ValueError(f"record has {len(targets)} targets, expected {c}")
        xs.append(frame(mixture, frame_len).frames)
        for i, t in enumerate(targets):
            ts[i].append(frame(t, frame_len).frames)
    return np.concatenate(xs), [np.concatenate(t) for t in ts]


def train_alg1(
    dataset,
    arch: Arch = Arch(),
    config: TrainConfig | None = None,
    channel_classes: Sequence[str] = DEFAULT_CLASSES,
) -> Alg1Model:
    """Joint training on ``(mixture, [target_1..target_C])`` pairs, zeros for absent classes."""
    config = config or TrainConfig()
    c = len(channel_classes)
    X, T = _training_frames(dataset, arch.frame_len, c)
    seeds = _seeds(config.seed, c + 1)
    enc = make_encoder(arch, seeds[0])
    decs = [make_decoder(arch, s) for s in seeds[1:]]
    params = enc.params() + [p for d in decs for p in d.params()]

    def loss_grad(idx):
        h, c_enc = forward(enc, X[idx])
        outs = [forward(d, h) for d in decs]
        loss, gs = channel_mse_grad([o[0] for o in outs], [t[idx] for t in T])
        g_dec_all, g_h = [], np.zeros_like(h)
        for d, (_, cache), g in zip(decs, outs, gs):
            g_d, g_in = backward(d, cache, g)
            g_dec_all += g_d
            g_h += g_in
        g_enc, _ = backward(enc, c_enc, g_h)
        return loss, g_enc + g_dec_all

    def full_loss():
        h = forward(enc, X)[0]
        return float(np.mean([mse(forward(d, h)[0], t) for d, t in zip(decs, T)]))

    curve = fit(params, loss_grad, full_loss, len(X), config)
    log.info("alg1: loss %.3e -> %.3e", curve[0], curve[-1])
    return Alg1Model(enc, decs, tuple(channel_classes), curve)


# ---------------------------------------------------------------------------
# Algorithm 2: latent search over frozen decoders
# ---------------------------------------------------------------------------


def _search_once(X, decoders, latents, lr, epochs):
    state = AdamState(lr=lr)
    for _ in range(epochs):
        outs = [forward(d, h) for d, h in zip(decoders, latents)]
        _, g = mse_grad(sum(o[0] for o in outs), X)
        grads = [backward(d, cache, g)[1] for d, (_, cache) in zip(decoders, outs)]
        adam_step(latents, grads, state)
    final = mse(sum(forward(d, h)[0] for d, h in zip(decoders, latents)), X)
    return latents, final


def latent_search(x, decoders: Sequence[Network], cfg: LatentSearchConfig | None = None) -> LatentSearchResult:
    """Find decoder inputs whose summed outputs best reconstruct the fragments of ``x``.

    Every (learning rate, initialization) pair runs ``cfg.epochs`` Adam steps
    on the latents only; the run with the smallest final loss wins. Decoder
    parameters are only read.
    """
    cfg = cfg or LatentSearchConfig()
    if len(decoders) == 0:
        raise ValueError("latent search needs at least one decoder")
    frame_len = decoders[0].n_out
    fm = frame(x, frame_len)
    X, k = fm.frames, fm.n_frames
    inits = (["zeros"] if cfg.zero_init else []) + [f"gaussian{r}" for r in range(cfg.restarts)]
    runs, best = [], None
    for li, lr in enumerate(cfg.lr_candidates):
        for ri, init in enumerate(inits):
            if init == "zeros":
                latents = [np.zeros((k, d.n_in)) for d in decoders]
            else:
                rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed), spawn_key=(li, ri)))
                latents = [cfg.sigma * rng.standard_normal((k, d.n_in)) for d in decoders]
            latents, final = _search_once(X, decoders, latents, lr, cfg.epochs)
            runs.append(SearchRun(lr, init, final))
            if best is None or final < best[0]:
                best = (final, lr, latents)
    best_loss, best_lr, latents = best
    outputs = [
        overlap_add(FrameMatrix(forward(d, h)[0], frame_len, fm.original_len, fm.sample_rate))
        for d, h in zip(decoders, latents)
    ]
    return LatentSearchResult(latents, outputs, best_loss, best_lr, runs)


# ---------------------------------------------------------------------------
# Algorithm 3: separator into frozen latent spaces
# ---------------------------------------------------------------------------


def train_separator(
    dataset,
    decoders: Sequence[Network],
    arch: Arch = Arch(),
    config: TrainConfig | None = None,
    channel_classes: Sequence[str] = DEFAULT_CLASSES,
) -> SeparatorModel:
    """Train trunk and per-channel heads so that ``D_i(head_i(trunk(x)))`` matches target i.

    ``decoders`` are used read-only.
    """
    config = config or TrainConfig()
    c = len(channel_classes)
    if len(decoders) != c:
        raise ValueError(f"{len(decoders)} decoders for {c} channels")
    for d in decoders:
        if d.n_out != arch.frame_len:
            raise ValueError(f"decoder output width {d.n_out} != frame length {arch.frame_len}")
    X, T = _training_frames(dataset, arch.frame_len, c)
    seeds = _seeds(config.seed, c + 1)
    trunk = init_network([arch.frame_len, arch.trunk], [arch.activation], seeds[0])
    heads = [init_network([arch.trunk, d.n_in], ["linear"], s) for d, s in zip(decoders, seeds[1:])]
    params = trunk.params() + [p for h in heads for p in h.params()]

    def loss_grad(idx):
        t, c_trunk = forward(trunk, X[idx])
        hs = [forward(h, t) for h in heads]
        outs = [forward(d, lat) for d, (lat, _) in zip(decoders, hs)]
        loss, gs = channel_mse_grad([o[0] for o in outs], [tt[idx] for tt in T])
        g_heads, g_t = [], np.zeros_like(t)
        for h, (_, c_h), d, (_, c_d), g in zip(heads, hs, decoders, outs, gs):
            _, g_lat = backward(d, c_d, g)
            g_h, g_in = backward(h, c_h, g_lat)
            g_heads += g_h
            g_t += g_in
        g_trunk, _ = backward(trunk, c_trunk, g_t)
        return loss, g_trunk + g_heads

    model = SeparatorModel(trunk, heads, list(decoders), tuple(channel_classes))

    def full_loss():
        return float(np.mean([mse(o, tt) for o, tt in zip(model.channel_frames(X), T)]))

    model.loss_curve = fit(params, loss_grad, full_loss, len(X), config)
    log.info("alg3: loss %.3e -> %.3e", model.loss_curve[0], model.loss_curve[-1])
    return model


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


def separate(model, x) -> list[Waveform]:
    """Split ``x`` into one waveform per channel, in ``model.channel_classes`` order."""
    if isinstance(model, Alg2Model):
        return latent_search(x, model.decoders, model.search).outputs
    fm = frame(x, model.frame_len)
    return [
        overlap_add(FrameMatrix(y, fm.frame_len, fm.original_len, fm.sample_rate))
        for y in model.channel_frames(fm.frames)
    ]


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_model(model, path, **meta) -> None:
    path = Path(path)
    if isinstance(model, Autoencoder):
        save_checkpoint(path, {"encoder": model.encoder, "decoder": model.decoder},
                        algorithm="autoencoder", class_id=model.class_id, **meta)
    elif isinstance(model, Alg1Model):
        nets = {"encoder": model.encoder}
        nets.update({f"decoder_{c}": d for c, d in zip(model.channel_classes, model.decoders)})
        save_checkpoint(path, nets, algorithm="alg1", channel_classes=list(model.channel_classes), **meta)
    elif isinstance(model, SeparatorModel):
        nets = {"trunk": model.trunk}
        nets.update({f"head_{c}": h for c, h in zip(model.channel_classes, model.heads)})
        nets.update({f"decoder_{c}": d for c, d in zip(model.channel_classes, model.decoders)})
        save_checkpoint(path, nets, algorithm="alg3", channel_classes=list(model.channel_classes), **meta)
    elif isinstance(model, Alg2Model):
        nets = {f"decoder_{c}": d for c, d in zip(model.channel_classes, model.decoders)}
        save_checkpoint(path, nets, algorithm="alg2-decoders", channel_classes=list(model.channel_classes),
                        search=model.search.to_dict(), **meta)
    else:
        raise TypeError(f"cannot save {type(model).__name__}")


def load_model(path):
    nets, meta = load_checkpoint(path)
    alg = meta.get("algorithm")
    classes = tuple(meta.get("channel_classes", ()))
    if alg == "autoencoder":
        return Autoencoder(meta.get("class_id", ""), nets["encoder"], nets["decoder"])
    if alg == "alg1":
        return Alg1Model(nets["encoder"], [nets[f"decoder_{c}"] for c in classes], classes)
    if alg == "alg3":
        return SeparatorModel(
            nets["trunk"], [nets[f"head_{c}"] for c in classes], [nets[f"decoder_{c}"] for c in classes], classes
        )
    if alg == "alg2-decoders":
        search = LatentSearchConfig(**meta.get("search", {}))
        return Alg2Model([nets[f"decoder_{c}"] for c in classes], classes, search)
    raise ValueError(f"{path}: unknown algorithm tag {alg!r}")
