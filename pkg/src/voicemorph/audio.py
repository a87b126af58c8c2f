"""Mono audio signals: WAV I/O, validation, and length alignment."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io.wavfile as wavfile

from .errors import (
    EmptyAudioError,
    IoFailureError,
    MissingFileError,
    SampleRateMismatchError,
    UnsupportedEncodingError,
)

# 16-bit PCM full scale used for both read normalization and write quantization.
PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSignal:
    """Mono waveform with all samples in [-1, 1] at float64 precision.

    Immutable after construction; morph arithmetic stays in float and is
    quantized only when written back to WAV.
    """

    samples: np.ndarray = field(repr=False)
    sample_rate: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise UnsupportedEncodingError("expected a mono (1-D) sample array")
        if arr.size and (np.max(arr) > 1.0 or np.min(arr) < -1.0):
            raise ValueError("samples must lie in [-1.0, 1.0]")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(path: str | Path) -> AudioSignal:
    """Load a mono linear-PCM WAV file (16-bit int or 32-bit float).

    16-bit samples are normalized by 1/32768; float samples are taken as-is.
    Raises MissingFileError, UnsupportedEncodingError, or EmptyAudioError.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # scipy warns on benign extra chunks
            rate, data = wavfile.read(path)
    except ValueError as exc:
        raise UnsupportedEncodingError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise UnsupportedEncodingError(
            f"{path}: expected mono audio, got {data.shape[1]} channels"
        )
    if data.size == 0:
        raise EmptyAudioError(f"{path}: zero-length audio payload")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported sample format {data.dtype}; "
            "only 16-bit PCM and 32-bit float are readable"
        )
    return AudioSignal(samples=samples, sample_rate=int(rate))


def write_wav(signal: AudioSignal, path: str | Path) -> None:
    """Write a signal as 16-bit PCM mono WAV.

    Quantization is round-to-nearest at 1/32768 steps with the positive
    endpoint clipped to 32767, so a read-back differs from the source by at
    most one quantization step per sample.
    """
    if len(signal) == 0:
        raise EmptyAudioError("refusing to write an empty signal")
    pcm = np.clip(np.rint(signal.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    try:
        wavfile.write(Path(path), signal.sample_rate, pcm)
    except OSError as exc:
        raise IoFailureError(f"failed to write {path}: {exc}") from exc


def length_difference(a: AudioSignal, b: AudioSignal) -> int:
    """Absolute length difference |N1 - N2| in samples."""
    return abs(len(a) - len(b))


def zero_pad_pair(a: AudioSignal, b: AudioSignal) -> tuple[AudioSignal, AudioSignal]:
    """Extend the shorter signal with trailing zeros to the longer length.

    The longer input is returned unchanged and existing samples are never
    mutated. Sample rates must match exactly; no resampling is performed.
    """
    if a.sample_rate != b.sample_rate:
        raise SampleRateMismatchError(
            f"sample rates differ: {a.sample_rate} vs {b.sample_rate}"
        )
    target = max(len(a), len(b))
    return _pad_to(a, target), _pad_to(b, target)


def _pad_to(sig: AudioSignal, length: int) -> AudioSignal:
    if len(sig) == length:
        return sig
    padded = np.zeros(length, dtype=np.float64)
    padded[: len(sig)] = sig.samples
    return AudioSignal(samples=padded, sample_rate=sig.sample_rate)
