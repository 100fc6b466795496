"""Waveforms, 50%-overlap fragmenting, energy bookkeeping and SNR-controlled mixing.

Also hosts the synthetic source families that stand in for recorded vessel
and ambient classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_SAMPLE_RATE = 52734
DEFAULT_CLIP_SECONDS = 0.2

FAMILIES = (
    "harmonic-complex",
    "amplitude-modulated-broadband",
    "impulsive-clicks",
    "ambient-noise",
)


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono real-valued signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        data = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if data.size < 1:
            raise ValueError("waveform must contain at least one sample")
        if not np.all(np.isfinite(data)):
            raise ValueError("waveform samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        data.flags.writeable = False
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    def __repr__(self):
        return f"Waveform(n={len(self)}, sample_rate={self.sample_rate})"

    @classmethod
    def zeros(cls, n: int, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "Waveform":
        return cls(np.zeros(n), sample_rate)


def _as_samples(w) -> np.ndarray:
    return np.asarray(w, dtype=np.float64).reshape(-1)


def _rate(w, default: int = DEFAULT_SAMPLE_RATE) -> int:
    return w.sample_rate if isinstance(w, Waveform) else default


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    """K x L matrix of 50%-overlapping fragments of a length-T signal."""

    frames: np.ndarray
    frame_len: int
    original_len: int
    sample_rate: int = DEFAULT_SAMPLE_RATE

    @property
    def hop(self) -> int:
        return self.frame_len // 2

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def n_frames_for(length: int, frame_len: int) -> int:
    hop = frame_len // 2
    return -(-max(length - frame_len, 0) // hop) + 1


def _check_frame_len(frame_len: int) -> None:
    if frame_len < 2 or frame_len % 2:
        raise ValueError(f"frame length must be even and >= 2, got {frame_len}")


def frame(w, frame_len: int) -> FrameMatrix:
    """Split ``w`` into fragments of ``frame_len`` samples with hop ``frame_len // 2``.

    The tail is zero-padded so the last fragment is complete; a signal
    shorter than one fragment becomes a single padded fragment.
    """
    _check_frame_len(frame_len)
    x = _as_samples(w)
    if x.size == 0:
        raise ValueError("cannot frame an empty waveform")
    hop = frame_len // 2
    k = n_frames_for(x.size, frame_len)
    padded = np.zeros((k - 1) * hop + frame_len)
    padded[: x.size] = x
    idx = np.arange(frame_len)[None, :] + hop * np.arange(k)[:, None]
    return FrameMatrix(padded[idx], frame_len, x.size, _rate(w))


def overlap_counts(n_frames: int, frame_len: int) -> np.ndarray:
    hop = frame_len // 2
    counts = np.zeros((n_frames - 1) * hop + frame_len)
    for k in range(n_frames):
        counts[k * hop : k * hop + frame_len] += 1.0
    return counts


def overlap_add(f: FrameMatrix) -> Waveform:
    """Reassemble fragments, dividing each sample by its number of contributors.

    This is the exact inverse of :func:`frame` for any frame content, and
    truncates the zero padding back to ``original_len``.
    """
    frames = np.asarray(f.frames, dtype=np.float64)
    _check_frame_len(f.frame_len)
    if frames.ndim != 2 or frames.shape[1] != f.frame_len:
        raise ValueError(f"frames must be K x {f.frame_len}, got shape {frames.shape}")
    k = frames.shape[0]
    if f.original_len < 1 or n_frames_for(f.original_len, f.frame_len) != k:
        raise ValueError(
            f"original_len={f.original_len} is inconsistent with K={k}, L={f.frame_len}"
        )
    hop = f.hop
    out = np.zeros((k - 1) * hop + f.frame_len)
    for i in range(k):
        out[i * hop : i * hop + f.frame_len] += frames[i]
    out /= overlap_counts(k, f.frame_len)
    return Waveform(out[: f.original_len], f.sample_rate)


def energy(w) -> float:
    x = _as_samples(w)
    return float(np.dot(x, x))


def snr_db(ref, sig) -> float:
    """10 log10 of the energy ratio ``ref : sig``."""
    return 10.0 * math.log10(energy(ref) / energy(sig))


def _check_compatible(ws: Sequence) -> None:
    lengths = {len(_as_samples(w)) for w in ws}
    if len(lengths) != 1:
        raise ValueError(f"waveform lengths differ: {sorted(lengths)}")
    rates = {w.sample_rate for w in ws if isinstance(w, Waveform)}
    if len(rates) > 1:
        raise ValueError(f"sample rates differ: {sorted(rates)}")


def scale_to_snr(sig, ref, snr: float) -> Waveform:
    """Scale ``sig`` so that ``10 log10(E(ref) / E(out)) == snr``."""
    _check_compatible([sig, ref])
    e_sig, e_ref = energy(sig), energy(ref)
    if e_sig <= 0.0 or e_ref <= 0.0:
        raise ValueError("scale_to_snr needs nonzero energy in both signals")
    gain = math.sqrt(e_ref / (e_sig * 10.0 ** (snr / 10.0)))
    return Waveform(gain * _as_samples(sig), _rate(sig, _rate(ref)))


def mix(*ws) -> Waveform:
    """Sample-wise sum. Accepts ``mix(a, b, ...)`` or ``mix([a, b, ...])``."""
    if len(ws) == 1 and not isinstance(ws[0], (Waveform, np.ndarray)):
        ws = tuple(ws[0])
    if not ws:
        raise ValueError("mix needs at least one waveform")
    _check_compatible(ws)
    total = np.zeros(len(_as_samples(ws[0])))
    for w in ws:
        total = total + _as_samples(w)
    rate = next((w.sample_rate for w in ws if isinstance(w, Waveform)), DEFAULT_SAMPLE_RATE)
    return Waveform(total, rate)


# ---------------------------------------------------------------------------
# Synthetic source classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassSpec:
    """A synthetic source family with per-sample parameter ranges.

    Frequencies are fractions of the Nyquist frequency so a spec is usable at
    any sample rate. ``rms_range`` is the RMS envelope a peak-normalized
    draw of this family is expected to fall in.
    """

    family: str
    params: dict = field(default_factory=dict)
    rms_range: tuple[float, float] = (0.0, 1.0)
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown source family {self.family!r}; expected one of {FAMILIES}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.family,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()},
            "rms_range": list(self.rms_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassSpec":
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in d.get("params", {}).items()}
        return cls(d["family"], params, tuple(d.get("rms_range", (0.0, 1.0))), d.get("name", ""))


def _draw(rng: np.random.Generator, value):
    if isinstance(value, (tuple, list)):
        lo, hi = value
        return float(rng.uniform(lo, hi)) if lo != hi else float(lo)
    return value


def _bandpass_noise(rng, n, lo, hi):
    """Gaussian noise band-limited to [lo, hi] (fractions of Nyquist) by spectral masking."""
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.linspace(0.0, 1.0, spec.size)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    if not np.any(spec):
        spec[int(np.clip(round(0.5 * (lo + hi) * (spec.size - 1)), 1, spec.size - 1))] = 1.0
    return np.fft.irfft(spec, n)


def _harmonic(rng, n, p):
    f0 = _draw(rng, p.get("f0", (0.11, 0.13)))
    n_partials = int(p.get("partials", 2))
    rolloff = _draw(rng, p.get("rolloff", 0.6))
    jitter = _draw(rng, p.get("jitter", 0.0))
    t = np.arange(n)
    out = np.zeros(n)
    for k in range(1, n_partials + 1):
        amp = rolloff ** (k - 1)
        phase = rng.uniform(0, 2 * np.pi)
        # slow frequency wobble, as a shaft-rate line would drift
        drift = jitter * np.sin(2 * np.pi * t / max(n, 1) + rng.uniform(0, 2 * np.pi))
        out += amp * np.sin(np.pi * k * f0 * (1.0 + drift) * t + phase)
    return out


def _am_broadband(rng, n, p):
    lo = _draw(rng, p.get("band_lo", (0.31, 0.33)))
    hi = _draw(rng, p.get("band_hi", (0.39, 0.41)))
    depth = _draw(rng, p.get("depth", (0.3, 0.8)))
    mod = _draw(rng, p.get("mod_rate", (0.002, 0.006)))  # cycles per sample
    carrier = _bandpass_noise(rng, n, lo, hi)
    env = 1.0 + depth * np.sin(2 * np.pi * mod * np.arange(n) + rng.uniform(0, 2 * np.pi))
    return carrier * env


def _clicks(rng, n, p):
    rate = _draw(rng, p.get("click_rate", (0.004, 0.008)))  # clicks per sample
    freq = _draw(rng, p.get("resonance", (0.6, 0.66)))
    decay = _draw(rng, p.get("decay", (40.0, 80.0)))  # samples to 1/e
    period = 1.0 / rate
    onsets = np.arange(rng.uniform(0, period), n, period).astype(int)
    t = np.arange(n)
    out = np.zeros(n)
    ring = np.exp(-np.arange(n) / decay) * np.sin(np.pi * freq * np.arange(n))
    for onset in onsets:
        amp = rng.uniform(0.6, 1.0)
        out[onset:] += amp * ring[: n - onset]
    # a low floor keeps every clip nonsilent
    out += 0.05 * np.sin(np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    return out


def _ambient(rng, n, p):
    cutoff = _draw(rng, p.get("cutoff", (0.04, 0.06)))
    return _bandpass_noise(rng, n, 0.0, cutoff)


_GENERATORS = {
    "harmonic-complex": _harmonic,
    "amplitude-modulated-broadband": _am_broadband,
    "impulsive-clicks": _clicks,
    "ambient-noise": _ambient,
}


def synth_source(spec: ClassSpec, seed, n: int, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Draw one peak-normalized clip of ``n`` samples; deterministic in ``(spec, seed)``."""
    if n <= 0:
        raise ValueError(f"clip length must be positive, got {n}")
    rng = np.random.default_rng(seed)
    x = _GENERATORS[spec.family](rng, n, spec.params)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak
    return Waveform(x, sample_rate)


def default_class_specs() -> dict[str, ClassSpec]:
    """Four spectrally distinct presets for the ambient class and three vessel-like classes.

    Bands are kept narrow enough that all four fit a 32-wide latent code of
    64-sample fragments.
    """
    return {
        "A": ClassSpec("ambient-noise", {"cutoff": (0.04, 0.06)}, (0.15, 0.6), "ambient"),
        "B": ClassSpec(
            "harmonic-complex",
            {"f0": (0.11, 0.13), "partials": 2, "rolloff": (0.5, 0.7), "jitter": (0.0, 0.01)},
            (0.4, 0.75),
            "harmonic",
        ),
        "C": ClassSpec(
            "amplitude-modulated-broadband",
            {"band_lo": (0.31, 0.33), "band_hi": (0.39, 0.41), "depth": (0.3, 0.8),
             "mod_rate": (0.002, 0.006)},
            (0.1, 0.45),
            "am-broadband",
        ),
        "D": ClassSpec(
            "impulsive-clicks",
            {"click_rate": (0.004, 0.008), "resonance": (0.6, 0.66), "decay": (40.0, 80.0)},
            (0.1, 0.6),
            "clicks",
        ),
    }
