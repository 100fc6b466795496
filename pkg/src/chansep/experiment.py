"""End-to-end desk-scale experiment: synthesize, train all three algorithms, evaluate."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .algorithms import (
    Alg2Model,
    Arch,
    LatentSearchConfig,
    latent_search,
    separate,
    train_alg1,
    train_autoencoder,
    train_separator,
)
from .dataset import CLASSES, DatasetConfig, build_dataset
from .engine import TrainConfig
from .metrics import EvalReport, evaluate_dataset

log = logging.getLogger(__name__)


@dataclass
class Preset:
    dataset: DatasetConfig
    arch: Arch = Arch()
    ae: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100, lr=1e-3, batch_size=128))
    alg1: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100, lr=1e-3, batch_size=128))
    alg3: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100, lr=1e-3, batch_size=128))
    search: LatentSearchConfig = field(default_factory=LatentSearchConfig)


def demo_preset(seed: int = 0) -> Preset:
    """Small sample rate, short clips, small nets: the full pipeline in a few minutes."""
    ds = DatasetConfig(sample_rate=8000, clip_len=1024, counts=60, seed=seed)
    return Preset(
        dataset=ds,
        ae=TrainConfig(epochs=100, lr=1e-3, batch_size=128, seed=seed + 1),
        alg1=TrainConfig(epochs=100, lr=1e-3, batch_size=128, seed=seed + 2),
        alg3=TrainConfig(epochs=100, lr=1e-3, batch_size=128, seed=seed + 3),
        search=LatentSearchConfig(seed=seed + 4),
    )


def full_scale_preset(seed: int = 0) -> Preset:
    """Full-scale signal settings (52,734 Hz, 200 ms clips). Slow in pure numpy."""
    return Preset(dataset=DatasetConfig(counts=500, seed=seed))


def training_pairs(records):
    return [(r.mixture_wave(), r.channel_targets(CLASSES)) for r in records]


def class_samples(records, cls: str):
    return [r.target_arrays()[cls] for r in records if cls in r.category]


@dataclass
class ExperimentResult:
    reports: dict[str, EvalReport]
    models: dict
    timings: dict


def run_experiment(preset: Preset, algorithms=("alg1", "alg2", "alg3")) -> ExperimentResult:
    timings = {}
    t0 = time.perf_counter()
    ds = build_dataset(preset.dataset)
    train, test = ds.split("train"), ds.split("test")
    timings["synth"] = time.perf_counter() - t0
    models, reports = {}, {}

    if "alg2" in algorithms or "alg3" in algorithms:
        t0 = time.perf_counter()
        aes = [train_autoencoder(class_samples(train, c), preset.arch, preset.ae, class_id=c) for c in CLASSES]
        models["autoencoders"] = aes
        timings["autoencoders"] = time.perf_counter() - t0
    pairs = training_pairs(train)

    if "alg1" in algorithms:
        t0 = time.perf_counter()
        m1 = train_alg1(pairs, preset.arch, preset.alg1, CLASSES)
        models["alg1"] = m1
        outputs = {r.id: separate(m1, r.mixture_wave()) for r in test}
        reports["alg1"] = evaluate_dataset(outputs, test, CLASSES, "alg1")
        timings["alg1"] = time.perf_counter() - t0

    if "alg2" in algorithms:
        t0 = time.perf_counter()
        m2 = Alg2Model([ae.decoder for ae in aes], CLASSES, preset.search)
        models["alg2"] = m2
        outputs = {r.id: latent_search(r.mixture_wave(), m2.decoders, m2.search).outputs for r in test}
        reports["alg2"] = evaluate_dataset(outputs, test, CLASSES, "alg2")
        timings["alg2"] = time.perf_counter() - t0

    if "alg3" in algorithms:
        t0 = time.perf_counter()
        m3 = train_separator(pairs, [ae.decoder for ae in aes], preset.arch, preset.alg3, CLASSES)
        models["alg3"] = m3
        outputs = {r.id: separate(m3, r.mixture_wave()) for r in test}
        reports["alg3"] = evaluate_dataset(outputs, test, CLASSES, "alg3")
        timings["alg3"] = time.perf_counter() - t0
    log.info("experiment timings: %s", timings)
    return ExperimentResult(reports, models, timings)
