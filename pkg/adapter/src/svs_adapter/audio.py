"""WAV loading for the adapter (mono, 16-bit PCM or 32-bit float)."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
import scipy.io.wavfile as wavfile


class AudioError(Exception):
    """Unreadable or unsupported audio input (maps to exit code 3)."""


def load_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Return (float32 mono samples in [-1, 1], sample_rate)."""
    path = Path(path)
    if not path.is_file():
        raise AudioError(f"no such file: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc
    if data.ndim != 1:
        raise AudioError(f"{path}: expected mono audio")
    if data.size == 0:
        raise AudioError(f"{path}: empty audio payload")
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        samples = data
    else:
        raise AudioError(f"{path}: unsupported sample format {data.dtype}")
    return samples, int(rate)
