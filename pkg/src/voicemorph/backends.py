"""Speaker-verification backends behind one contract: audio in, fixed-dim
embedding (or an acquire failure) out, scored by cosine similarity.

Backends are opaque: a self-contained spectral reference verifier, a reader
for precomputed embedding files, and a one-shot subprocess bridge for
external extractors. Acquire failures are data, not exceptions; they feed
failure-to-acquire accounting downstream.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from .audio import AudioSignal, read_wav, write_wav
from .errors import (
    ConfigError,
    DimensionMismatchError,
    ParseError,
    TooShortError,
    VoicemorphError,
    ZeroVectorError,
)

KIND_REFERENCE = "reference"
KIND_PRECOMPUTED = "precomputed"
KIND_SUBPROCESS = "subprocess"

# Cap on simultaneously running external extractor processes.
_subprocess_gate = threading.BoundedSemaphore(4)


def set_subprocess_limit(n: int) -> None:
    global _subprocess_gate
    if n < 1:
        raise ConfigError("subprocess limit must be >= 1")
    _subprocess_gate = threading.BoundedSemaphore(n)


@dataclass(frozen=True)
class Embedding:
    id: str
    dim: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size != self.dim:
            raise DimensionMismatchError(
                f"embedding {self.id!r}: declared dim {self.dim}, got {arr.size} values"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"embedding {self.id!r}: non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class AcquireResult:
    """Either an embedding or a failure reason; exactly one is present."""

    embedding: Embedding | None = None
    failure: str | None = None

    def __post_init__(self) -> None:
        if (self.embedding is None) == (self.failure is None):
            raise ValueError("exactly one of embedding/failure must be set")

    @property
    def ok(self) -> bool:
        return self.embedding is not None

    @classmethod
    def success(cls, embedding: Embedding) -> "AcquireResult":
        return cls(embedding=embedding)

    @classmethod
    def failed(cls, reason: str) -> "AcquireResult":
        return cls(failure=reason)


@dataclass(frozen=True)
class ReferenceConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 26
    n_ceps: int = 20
    log_floor: float = 1e-10
    energy_floor: float = 1e-6  # mean squared amplitude below this fails acquire

    @property
    def dim(self) -> int:
        return 2 * self.n_ceps  # mean + std pooling


@dataclass(frozen=True)
class VerifierDescriptor:
    """A named verifier with its operating point.

    Exactly one of `threshold` (fixed similarity threshold) or `fmr_target`
    (threshold derived from baseline impostor scores) must be set.
    """

    name: str
    kind: str
    threshold: float | None = None
    fmr_target: float | None = None
    command: str | None = None
    emb_dir: Path | None = None
    timeout_s: float = 30.0
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)

    def __post_init__(self) -> None:
        if self.kind not in (KIND_REFERENCE, KIND_PRECOMPUTED, KIND_SUBPROCESS):
            raise ConfigError(f"backend {self.name!r}: unknown kind {self.kind!r}")
        if (self.threshold is None) == (self.fmr_target is None):
            raise ConfigError(
                f"backend {self.name!r}: exactly one of threshold/fmr must be set"
            )
        if self.threshold is not None and not -1.0 <= self.threshold <= 1.0:
            raise ConfigError(f"backend {self.name!r}: threshold outside [-1, 1]")
        if self.fmr_target is not None and not 0.0 < self.fmr_target < 1.0:
            raise ConfigError(f"backend {self.name!r}: fmr target outside (0, 1)")
        if self.kind == KIND_SUBPROCESS:
            if not self.command or "{wav}" not in self.command:
                raise ConfigError(
                    f"backend {self.name!r}: subprocess kind needs a command with {{wav}}"
                )
        if self.kind == KIND_PRECOMPUTED and self.emb_dir is None:
            raise ConfigError(f"backend {self.name!r}: precomputed kind needs dir=")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """dot(a, b) / (|a||b|), clipped into [-1, 1] against rounding drift."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dims differ: {a.dim} vs {b.dim}")
    na = np.linalg.norm(a.values)
    nb = np.linalg.norm(b.values)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(a.values, b.values) / (na * nb), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Reference verifier: framed log-mel cepstra with mean/std pooling
# ---------------------------------------------------------------------------


def _mel(freq_hz: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz) / 700.0)


def _mel_inv(mels: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (mels / 2595.0) - 1.0)


def _mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters over [0, sr/2], shape (n_mels, n_fft//2 + 1)."""
    points_hz = _mel_inv(np.linspace(0.0, float(_mel(sample_rate / 2.0)), n_mels + 2))
    bin_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((n_mels, bin_freqs.size))
    for m in range(n_mels):
        lo, center, hi = points_hz[m], points_hz[m + 1], points_hz[m + 2]
        up = (bin_freqs - lo) / max(center - lo, 1e-9)
        down = (hi - bin_freqs) / max(hi - center, 1e-9)
        bank[m] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def reference_embed(signal: AudioSignal, cfg: ReferenceConfig | None = None) -> Embedding:
    """Deterministic spectral embedding of a signal.

    25 ms / 10 ms Hamming frames -> magnitude spectrum -> mel filterbank ->
    log -> DCT to cepstral coefficients -> mean and standard deviation over
    frames, concatenated.
    """
    cfg = cfg or ReferenceConfig()
    sr = signal.sample_rate
    frame_len = int(round(cfg.frame_ms * sr / 1000.0))
    hop = int(round(cfg.hop_ms * sr / 1000.0))
    x = signal.samples
    if len(x) < frame_len + 2 * hop:
        raise TooShortError(
            f"signal of {len(x)} samples is shorter than 3 analysis frames"
        )
    n_frames = 1 + (len(x) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hamming(frame_len)[None, :]
    n_fft = 1 << (frame_len - 1).bit_length()
    mag = np.abs(np.fft.rfft(frames, n=n_fft, axis=1))
    bank = _mel_filterbank(cfg.n_mels, n_fft, sr)
    logmel = np.log(mag @ bank.T + cfg.log_floor)
    # Coefficient 0 carries overall gain; dropping it keeps the embedding
    # near-invariant to amplitude scaling.
    ceps = scipy.fft.dct(logmel, type=2, norm="ortho", axis=1)[:, 1 : cfg.n_ceps + 1]
    values = np.concatenate([ceps.mean(axis=0), ceps.std(axis=0)])
    return Embedding(id="", dim=cfg.dim, values=values)


# ---------------------------------------------------------------------------
# Embedding acquisition per backend kind
# ---------------------------------------------------------------------------


def parse_embedding_json(text: str, expected_id: str = "") -> Embedding:
    """Validate one embedding document: {"id": str, "dim": int, "values": [...]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("embedding document must be a JSON object")
    missing = {"id", "dim", "values"} - set(doc)
    if missing:
        raise ValueError(f"embedding document missing key(s): {', '.join(sorted(missing))}")
    dim = doc["dim"]
    values = doc["values"]
    if not isinstance(dim, int) or dim <= 0:
        raise ValueError("dim must be a positive integer")
    if not isinstance(values, list) or len(values) != dim:
        raise ValueError(f"dim mismatch: declared {dim}, got {len(values)} values")
    return Embedding(id=str(doc["id"]) or expected_id, dim=dim, values=np.asarray(values, dtype=np.float64))


def external_embed(command: str, wav_path: str | Path, timeout_s: float = 30.0) -> AcquireResult:
    """Run an external extractor once and parse its stdout as embedding JSON.

    The command is an argv template whose {wav} placeholder receives the file
    path. Exit 0 with valid JSON yields an embedding; everything else
    (nonzero exit, timeout, malformed output) is an acquire failure.
    """
    if "{wav}" not in command:
        raise ConfigError("command template must contain a {wav} placeholder")
    argv = [tok.replace("{wav}", str(wav_path)) for tok in shlex.split(command)]
    try:
        with _subprocess_gate:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=timeout_s
            )
    except subprocess.TimeoutExpired:
        return AcquireResult.failed(f"timeout after {timeout_s:g}s")
    except OSError as exc:
        return AcquireResult.failed(f"failed to launch: {exc}")
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
        return AcquireResult.failed(f"exit {proc.returncode}: {tail}")
    try:
        return AcquireResult.success(parse_embedding_json(proc.stdout, expected_id=Path(wav_path).stem))
    except (ValueError, DimensionMismatchError) as exc:
        return AcquireResult.failed(str(exc))


def embed(backend: VerifierDescriptor, signal: AudioSignal) -> AcquireResult:
    """Embed an in-memory signal; bad audio becomes an acquire failure."""
    if backend.kind == KIND_REFERENCE:
        if len(signal) == 0 or float(np.mean(signal.samples**2)) < backend.reference.energy_floor:
            return AcquireResult.failed("below energy floor")
        try:
            return AcquireResult.success(reference_embed(signal, backend.reference))
        except TooShortError as exc:
            return AcquireResult.failed(str(exc))
    if backend.kind == KIND_SUBPROCESS:
        with tempfile.TemporaryDirectory(prefix="vm_embed_") as tmp:
            tmp_wav = Path(tmp) / "probe.wav"
            write_wav(signal, tmp_wav)
            return external_embed(backend.command, tmp_wav, backend.timeout_s)
    raise ConfigError(
        f"backend {backend.name!r} ({backend.kind}) cannot embed in-memory signals; "
        "use embed_path"
    )


def embed_path(backend: VerifierDescriptor, wav_path: str | Path) -> AcquireResult:
    """Embed a WAV file through the backend's own acquisition route."""
    wav_path = Path(wav_path)
    if backend.kind == KIND_SUBPROCESS:
        return external_embed(backend.command, wav_path, backend.timeout_s)
    if backend.kind == KIND_PRECOMPUTED:
        doc = backend.emb_dir / f"{wav_path.stem}.json"
        if not doc.is_file():
            return AcquireResult.failed(f"no precomputed embedding {doc.name}")
        try:
            return AcquireResult.success(
                parse_embedding_json(doc.read_text(encoding="utf-8"), expected_id=wav_path.stem)
            )
        except (ValueError, DimensionMismatchError) as exc:
            return AcquireResult.failed(f"{doc.name}: {exc}")
    try:
        signal = read_wav(wav_path)
    except VoicemorphError as exc:
        return AcquireResult.failed(str(exc))
    return embed(backend, signal)


# ---------------------------------------------------------------------------
# Backend config file: one backend per line, key=value pairs joined by ";"
# ---------------------------------------------------------------------------


def parse_backend_config(path: str | Path) -> list[VerifierDescriptor]:
    """Parse backend definitions, e.g.:

        name=ref;kind=reference;fmr=0.001
        name=xvec;kind=subprocess;threshold=0.5;command=svs-adapter {wav}
    """
    backends: list[VerifierDescriptor] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields: dict[str, str] = {}
            for part in line.split(";"):
                if "=" not in part:
                    raise ParseError(f"{path}:{lineno}: expected key=value, got {part!r}")
                key, _, value = part.partition("=")
                fields[key.strip()] = value.strip()
            try:
                backends.append(_descriptor_from_fields(fields))
            except (ConfigError, KeyError, ValueError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    if not backends:
        raise ConfigError(f"{path}: no backends defined")
    names = [b.name for b in backends]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate backend names")
    return backends


def _descriptor_from_fields(fields: dict[str, str]) -> VerifierDescriptor:
    name = fields.pop("name")
    kind = fields.pop("kind")
    threshold = float(fields.pop("threshold")) if "threshold" in fields else None
    fmr_target = float(fields.pop("fmr")) if "fmr" in fields else None
    command = fields.pop("command", None)
    emb_dir = Path(fields.pop("dir")) if "dir" in fields else None
    timeout_s = float(fields.pop("timeout", 30.0))
    if fields:
        raise ConfigError(f"unknown backend key(s): {', '.join(sorted(fields))}")
    return VerifierDescriptor(
        name=name,
        kind=kind,
        threshold=threshold,
        fmr_target=fmr_target,
        command=command,
        emb_dir=emb_dir,
        timeout_s=timeout_s,
    )
