"""Synthetic mixture corpus: eight presence categories over four source classes.

Class A (ambient) only ever appears alone. Mixtures of B, C and D use B as
the level reference: C is scaled so that SNR(B, C) = g_BC and D so that
SNR(B, D) = g_BD, with both g drawn uniformly from ``snr_range_db``. The
C-to-D ratio g_BD - g_BC is then triangular on twice that range. For CD
records a B clip is still drawn as a virtual reference so that law holds
for every C+D co-occurrence.

Records are written as PCM16 WAVs next to a JSON-lines manifest whose paths
are relative to the manifest's directory.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .signals import (
    DEFAULT_CLIP_SECONDS,
    DEFAULT_SAMPLE_RATE,
    ClassSpec,
    Waveform,
    default_class_specs,
    scale_to_snr,
    synth_source,
)
from .wavio import read_wav, write_wav

CLASSES = ("A", "B", "C", "D")
CATEGORIES = ("A", "B", "C", "D", "BC", "BD", "CD", "BCD")
SPLITS = ("train", "val", "test")
SILENT = "SILENT"


@dataclass
class DatasetConfig:
    class_specs: dict = field(default_factory=default_class_specs)
    sample_rate: int = DEFAULT_SAMPLE_RATE
    clip_len: int | None = None  # samples; None means 200 ms at sample_rate
    counts: dict = field(default_factory=lambda: {c: 50 for c in CATEGORIES})
    pool_sizes: dict | None = None  # per-category pool before balancing; None means no removal
    split_fractions: tuple = (0.6, 0.2, 0.2)
    snr_range_db: tuple = (-5.0, 5.0)
    peak_limit: float = 0.95
    frame_len: int = 64
    seed: int = 0

    def __post_init__(self):
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        self.snr_range_db = tuple(float(v) for v in self.snr_range_db)
        if isinstance(self.counts, int):
            self.counts = {c: self.counts for c in CATEGORIES}
        if self.clip_len is None:
            self.clip_len = int(round(DEFAULT_CLIP_SECONDS * self.sample_rate))

    @property
    def n_samples(self) -> int:
        return int(self.clip_len)

    def validate(self) -> None:
        fr = self.split_fractions
        if len(fr) != 3 or any(f < 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise ValueError(f"split fractions must be three nonnegative values summing to 1, got {fr}")
        lo, hi = self.snr_range_db
        if not lo < hi:
            raise ValueError(f"SNR range must satisfy low < high, got {self.snr_range_db}")
        if set(self.counts) != set(CATEGORIES) or any(int(n) < 1 for n in self.counts.values()):
            raise ValueError(f"counts must give >= 1 record for each of {CATEGORIES}")
        if self.pool_sizes is not None:
            for c in CATEGORIES:
                if self.pool_sizes.get(c, 0) < self.counts[c]:
                    raise ValueError(f"pool for {c} is smaller than its requested count")
        if self.clip_len < self.frame_len:
            raise ValueError(f"clip of {self.clip_len} samples is shorter than one frame ({self.frame_len})")
        if set(self.class_specs) != set(CLASSES):
            raise ValueError(f"class specs must cover {CLASSES}")
        if not 0 < self.peak_limit <= 1:
            raise ValueError("peak_limit must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "class_specs": {k: v.to_dict() for k, v in self.class_specs.items()},
            "sample_rate": self.sample_rate,
            "clip_len": self.clip_len,
            "counts": dict(self.counts),
            "pool_sizes": None if self.pool_sizes is None else dict(self.pool_sizes),
            "split_fractions": list(self.split_fractions),
            "snr_range_db": list(self.snr_range_db),
            "peak_limit": self.peak_limit,
            "frame_len": self.frame_len,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        if "class_specs" in d:
            d["class_specs"] = {k: ClassSpec.from_dict(v) for k, v in d["class_specs"].items()}
        return cls(**d)


@dataclass
class MixtureRecord:
    id: str
    category: str
    mask: tuple
    split: str
    snr_db: dict
    mixture: str | None = None  # path relative to manifest dir
    targets: dict = field(default_factory=dict)  # class -> path or SILENT
    root: Path | None = field(default=None, repr=False, compare=False)
    mixture_data: Waveform | None = field(default=None, repr=False, compare=False)
    target_data: dict = field(default_factory=dict, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "mixture": self.mixture,
            "targets": dict(self.targets),
            "mask": list(self.mask),
            "category": self.category,
            "snr_db": dict(self.snr_db),
            "split": self.split,
        }

    @classmethod
    def from_json(cls, d: dict, root=None) -> "MixtureRecord":
        return cls(
            id=d["id"],
            category=d["category"],
            mask=tuple(bool(m) for m in d["mask"]),
            split=d["split"],
            snr_db=dict(d.get("snr_db", {})),
            mixture=d.get("mixture"),
            targets=dict(d.get("targets", {})),
            root=None if root is None else Path(root),
        )

    def mixture_wave(self) -> Waveform:
        if self.mixture_data is None:
            self.mixture_data = read_wav(self.root / self.mixture)
        return self.mixture_data

    def target_arrays(self) -> dict[str, Waveform]:
        """Clean references of the classes present in this record."""
        for c in self.category:
            if c not in self.target_data:
                self.target_data[c] = read_wav(self.root / self.targets[c])
        return {c: self.target_data[c] for c in self.category}

    def channel_targets(self, classes=CLASSES) -> list[np.ndarray]:
        """Per-channel training targets: clean source, or zeros for absent classes."""
        present = self.target_arrays()
        n = len(self.mixture_wave())
        return [np.asarray(present[c]) if c in present else np.zeros(n) for c in classes]


def category_mask(category: str) -> tuple:
    return tuple(c in category for c in CLASSES)


def largest_remainder(total: int, fractions) -> list[int]:
    raw = [total * f for f in fractions]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def draw_snr_pair(rng: np.random.Generator, snr_range=(-5.0, 5.0)) -> tuple[float, float]:
    """Draw (g_BC, g_BD) independently and uniformly."""
    lo, hi = snr_range
    return float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi))


def _seed_seq(cfg: DatasetConfig, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(cfg.seed), spawn_key=tuple(key))


def synth_record(cfg: DatasetConfig, category: str, pool_index: int) -> tuple[Waveform, dict, dict]:
    """Build one record's mixture, stored targets and drawn SNRs.

    Deterministic in (config, category, pool index), independent of any
    other record.
    """
    rng = np.random.default_rng(_seed_seq(cfg, CATEGORIES.index(category), pool_index))
    class_seeds = {c: int(rng.integers(2**62)) for c in CLASSES}
    g_bc, g_bd = draw_snr_pair(rng, cfg.snr_range_db)
    n, rate = cfg.n_samples, cfg.sample_rate

    def source(c):
        return synth_source(cfg.class_specs[c], class_seeds[c], n, rate)

    snrs = {}
    if len(category) == 1:
        targets = {category: source(category)}
    else:
        ref = source("B")  # virtual when B is absent
        targets = {}
        if "B" in category:
            targets["B"] = ref
        if "C" in category:
            targets["C"] = scale_to_snr(source("C"), ref, g_bc)
            snrs["g_BC"] = g_bc
        if "D" in category:
            targets["D"] = scale_to_snr(source("D"), ref, g_bd)
            snrs["g_BD"] = g_bd
        if category == "CD":
            snrs = {"g_BC": g_bc, "g_BD": g_bd}
    mixture = np.sum([np.asarray(t) for t in targets.values()], axis=0)
    peak = max(np.max(np.abs(mixture)), *(np.max(np.abs(np.asarray(t))) for t in targets.values()))
    if peak > cfg.peak_limit:
        gain = cfg.peak_limit / peak
        targets = {c: Waveform(gain * np.asarray(t), rate) for c, t in targets.items()}
        mixture = np.sum([np.asarray(t) for t in targets.values()], axis=0)
    return Waveform(mixture, rate), targets, snrs


@dataclass
class Dataset:
    config: DatasetConfig
    records: list[MixtureRecord]
    root: Path | None = None

    def split(self, name: str) -> list[MixtureRecord]:
        return [r for r in self.records if r.split == name]

    def __len__(self) -> int:
        return len(self.records)


def _select(cfg: DatasetConfig) -> list[tuple[str, int]]:
    chosen = []
    for ci, cat in enumerate(CATEGORIES):
        count = int(cfg.counts[cat])
        pool = count if cfg.pool_sizes is None else int(cfg.pool_sizes[cat])
        if pool == count:
            picks = range(count)
        else:
            rng = np.random.default_rng(_seed_seq(cfg, 1000 + ci))
            picks = sorted(rng.choice(pool, size=count, replace=False).tolist())
        chosen += [(cat, int(i)) for i in picks]
    return chosen


def build_dataset(cfg: DatasetConfig, out_dir=None) -> Dataset:
    """Synthesize the corpus; with ``out_dir``, also write WAVs and ``manifest.jsonl``."""
    cfg.validate()
    chosen = _select(cfg)
    n_train, n_val, _ = largest_remainder(len(chosen), cfg.split_fractions)
    order = np.random.default_rng(_seed_seq(cfg, 9999)).permutation(len(chosen))
    split_of = {}
    for rank, idx in enumerate(order):
        split_of[int(idx)] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"

    root = None if out_dir is None else Path(out_dir)
    if root is not None:
        (root / "audio").mkdir(parents=True, exist_ok=True)
    records = []
    for idx, (cat, pool_index) in enumerate(chosen):
        mixture, targets, snrs = synth_record(cfg, cat, pool_index)
        rid = f"{cat}-{pool_index:05d}"
        rec = MixtureRecord(
            id=rid,
            category=cat,
            mask=category_mask(cat),
            split=split_of[idx],
            snr_db=snrs,
            mixture=f"audio/{rid}_mix.wav",
            targets={c: (f"audio/{rid}_{c}.wav" if c in cat else SILENT) for c in CLASSES},
            root=root,
            mixture_data=mixture,
            target_data=dict(targets),
        )
        if root is not None:
            write_wav(mixture, root / rec.mixture)
            for c, t in targets.items():
                write_wav(t, root / rec.targets[c])
        records.append(rec)
    if root is not None:
        write_manifest(records, root / "manifest.jsonl")
        (root / "dataset_config.json").write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")
    return Dataset(cfg, records, root)


def write_manifest(records: Iterable[MixtureRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def load_manifest(path) -> list[MixtureRecord]:
    path = Path(path)
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(MixtureRecord.from_json(json.loads(line), root=path.parent))
    return records


def validate_manifest(records: Iterable[MixtureRecord], root=None, category_counts: dict | None = None) -> list[str]:
    """Return a list of human-readable violations; empty means the manifest is consistent.

    Balance is checked against ``category_counts`` when given, otherwise all
    categories must be within one record of each other.
    """
    problems = []
    records = list(records)
    seen_split: dict[str, str] = {}
    for rec in records:
        base = Path(root) if root is not None else rec.root
        if rec.category not in CATEGORIES:
            problems.append(f"{rec.id}: unknown category {rec.category!r}")
            continue
        if tuple(rec.mask) != category_mask(rec.category):
            problems.append(f"{rec.id}: mask {list(rec.mask)} inconsistent with category {rec.category}")
        if rec.split not in SPLITS:
            problems.append(f"{rec.id}: unknown split {rec.split!r}")
        if rec.id in seen_split:
            problems.append(f"{rec.id}: appears in splits {seen_split[rec.id]} and {rec.split}")
        else:
            seen_split[rec.id] = rec.split
        if "A" in rec.category and len(rec.category) > 1:
            problems.append(f"{rec.id}: class A mixed with other classes")
        for c in CLASSES:
            t = rec.targets.get(c)
            active = c in rec.category
            if active and (t is None or t == SILENT):
                problems.append(f"{rec.id}: active class {c} has no target path")
            if not active and t != SILENT:
                problems.append(f"{rec.id}: absent class {c} should be {SILENT}, got {t!r}")
        if base is not None:
            paths = [rec.mixture] + [rec.targets[c] for c in rec.category if rec.targets.get(c) not in (None, SILENT)]
            for p in paths:
                if p is None or not (base / p).is_file():
                    problems.append(f"{rec.id}: missing file {p}")
    counts = Counter(r.category for r in records)
    if category_counts is not None:
        for c in CATEGORIES:
            if abs(counts.get(c, 0) - int(category_counts.get(c, 0))) > 1:
                problems.append(f"category {c}: {counts.get(c, 0)} records, expected {category_counts.get(c)}")
    elif counts:
        full = [counts.get(c, 0) for c in CATEGORIES]
        if max(full) - min(full) > 1:
            problems.append(f"categories unbalanced: {dict(counts)}")
    return problems
