"""Stub speaker-embedding extractors behind a model registry.

Two architectures mirror the usual embedding families: a spectral-frame
network with statistics pooling (512-dim) and a raw-waveform encoder with
max pooling (256-dim). Weights are fixed-seed random, never trained; the
registry is where a real pretrained extractor would be slotted in. Outputs
are deterministic on CPU for identical input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn


class ModelError(Exception):
    """Model construction or inference failure (maps to exit code 4)."""


@dataclass(frozen=True)
class AdapterConfig:
    model_name: str
    device: str  # "cpu" or "accelerator"
    expected_dim: int


def _log_mel_frames(wav: torch.Tensor, rate: int, n_mels: int = 24) -> torch.Tensor:
    """(N,) waveform -> (1, n_mels, frames) log-mel features, 25 ms / 10 ms."""
    frame = int(round(0.025 * rate))
    hop = int(round(0.010 * rate))
    if wav.numel() < frame + 2 * hop:
        raise ModelError("input shorter than 3 analysis frames")
    n_fft = 1 << (frame - 1).bit_length()
    window = torch.hamming_window(frame, periodic=False, dtype=wav.dtype)
    frames = wav.unfold(0, frame, hop) * window
    power = torch.fft.rfft(frames, n=n_fft).abs() ** 2
    freqs = torch.fft.rfftfreq(n_fft, d=1.0 / rate)
    mel_points = torch.linspace(0.0, 2595.0 * math.log10(1.0 + rate / 2.0 / 700.0), n_mels + 2)
    hz_points = 700.0 * (10.0 ** (mel_points / 2595.0) - 1.0)
    bank = torch.zeros(n_mels, freqs.numel(), dtype=wav.dtype)
    for m in range(n_mels):
        lo, center, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (freqs - lo) / torch.clamp(center - lo, min=1e-9)
        down = (hi - freqs) / torch.clamp(hi - center, min=1e-9)
        bank[m] = torch.clamp(torch.minimum(up, down), min=0.0)
    mel = power @ bank.T
    return torch.log(mel + 1e-8).T.unsqueeze(0)


class SpecStats512(nn.Module):
    """Frame-level convolutions over log-mel features, statistics pooling."""

    DIM = 512

    def __init__(self) -> None:
        super().__init__()
        torch.manual_seed(0)
        self.frames = nn.Sequential(
            nn.Conv1d(24, 128, kernel_size=5, dilation=1), nn.ReLU(),
            nn.Conv1d(128, 128, kernel_size=3, dilation=2), nn.ReLU(),
            nn.Conv1d(128, 128, kernel_size=3, dilation=3), nn.ReLU(),
        )
        self.proj = nn.Linear(256, self.DIM)

    def forward(self, wav: torch.Tensor, rate: int) -> torch.Tensor:
        feats = _log_mel_frames(wav, rate)
        h = self.frames(feats)
        if h.shape[-1] < 2:
            raise ModelError("input too short after convolution")
        stats = torch.cat([h.mean(dim=-1), h.std(dim=-1)], dim=-1)
        return self.proj(stats).squeeze(0)


class RawStats256(nn.Module):
    """Strided convolutions straight on the normalized waveform, max pooling."""

    DIM = 256

    def __init__(self) -> None:
        super().__init__()
        torch.manual_seed(1)
        self.encoder = nn.Sequential(
            nn.Conv1d(1, 64, kernel_size=251, stride=5), nn.ReLU(),
            nn.Conv1d(64, 96, kernel_size=5, stride=3), nn.ReLU(),
            nn.Conv1d(96, 128, kernel_size=3, stride=2), nn.ReLU(),
        )
        self.proj = nn.Linear(128, self.DIM)

    def forward(self, wav: torch.Tensor, rate: int) -> torch.Tensor:
        if wav.numel() < 512:
            raise ModelError("input shorter than the first filter")
        x = (wav - wav.mean()) / torch.clamp(wav.std(), min=1e-6)
        h = self.encoder(x.view(1, 1, -1))
        pooled = h.max(dim=-1).values
        return self.proj(pooled).squeeze(0)


MODELS = {
    "specstats-512": (SpecStats512, 512),
    "rawstats-256": (RawStats256, 256),
}

DEFAULT_MODEL = "specstats-512"


def build(config: AdapterConfig) -> nn.Module:
    try:
        cls, dim = MODELS[config.model_name]
    except KeyError:
        raise ValueError(
            f"unknown model {config.model_name!r}; available: {', '.join(sorted(MODELS))}"
        ) from None
    if dim != config.expected_dim:
        raise ValueError(
            f"model {config.model_name} emits {dim}-dim embeddings, "
            f"config expects {config.expected_dim}"
        )
    try:
        model = cls()
    except Exception as exc:
        raise ModelError(f"failed to build {config.model_name}: {exc}") from exc
    model.eval()
    return model


def extract(model: nn.Module, samples, rate: int) -> list[float]:
    """Run inference and return the embedding as plain floats."""
    try:
        with torch.no_grad():
            wav = torch.as_tensor(samples, dtype=torch.float32)
            out = model(wav, rate)
    except ModelError:
        raise
    except Exception as exc:
        raise ModelError(f"inference failed: {exc}") from exc
    values = out.tolist()
    if not all(math.isfinite(v) for v in values):
        raise ModelError("non-finite embedding values")
    return values
