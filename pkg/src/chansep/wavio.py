"""Mono 16-bit PCM WAV read/write."""

from __future__ import annotations

import warnings
import wave
from pathlib import Path

import numpy as np

from .signals import Waveform

_FULL_SCALE = 32767.0


class WavFormatError(ValueError):
    pass


def write_wav(w: Waveform, path) -> None:
    """Write ``w`` as mono PCM16 little-endian. Samples outside [-1, 1] are clipped with a warning."""
    x = np.asarray(w, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("refusing to write an empty waveform")
    rate = w.sample_rate if isinstance(w, Waveform) else None
    if rate is None:
        raise TypeError("write_wav needs a Waveform (sample rate required)")
    if np.any(np.abs(x) > 1.0):
        warnings.warn(f"{path}: clipping {int(np.sum(np.abs(x) > 1.0))} samples to [-1, 1]", stacklevel=2)
        x = np.clip(x, -1.0, 1.0)
    pcm = np.round(x * _FULL_SCALE).astype("<i2")
    with open(Path(path), "wb") as raw, wave.open(raw, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path) -> Waveform:
    try:
        with wave.open(str(Path(path)), "rb") as fh:
            if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
                raise WavFormatError(
                    f"{path}: unsupported encoding ({fh.getnchannels()} channels, "
                    f"{8 * fh.getsampwidth()}-bit); expected mono PCM16"
                )
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated or not a WAVE file") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / _FULL_SCALE, rate)
