"""Time-domain morph generation and the combinatorial pairing protocol.

A morph averages the first contributor's full (zero-padded) waveform with a
prefix of the second contributor's waveform. The prefix length is a fixed
fraction of the second signal's original length: 25/50/75/100 percent.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .audio import AudioSignal, read_wav, write_wav, zero_pad_pair
from .corpus import Manifest, RecordingMeta
from .errors import EmptyAudioError, ParseError

log = logging.getLogger(__name__)


class MorphFactor(Enum):
    """Fraction of the second contributor's signal entering the average."""

    M25 = 0.25
    M50 = 0.50
    M75 = 0.75
    M100 = 1.00

    @property
    def proportion(self) -> float:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "MorphFactor":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown morph factor {token!r}") from None


class MorphMode(Enum):
    # PORTION_AVERAGE averages inside the selected prefix and passes the first
    # signal through unchanged elsewhere. LITERAL_HALVING instead divides the
    # whole output by two, so the suffix is the first signal at half gain.
    PORTION_AVERAGE = "portion"
    LITERAL_HALVING = "literal"

    @classmethod
    def parse(cls, token: str) -> "MorphMode":
        for mode in cls:
            if mode.value == token.strip().lower():
                return mode
        raise ValueError(f"unknown morph mode {token!r}")


@dataclass(frozen=True)
class MorphSpec:
    """A planned morph: ordered contributor pair, factor, and mode."""

    first: RecordingMeta
    second: RecordingMeta
    factor: MorphFactor
    mode: MorphMode = MorphMode.PORTION_AVERAGE

    def __post_init__(self) -> None:
        if self.first.subject_id == self.second.subject_id:
            raise ValueError("contributors must be distinct subjects")
        if self.first.cell() != self.second.cell():
            raise ValueError(
                "contributors must share (device, language, session, sentence)"
            )

    @property
    def gender_pair(self) -> str:
        return f"{self.first.gender}{self.second.gender}"

    @property
    def morph_id(self) -> str:
        first, second = self.first, self.second
        return (
            f"{first.subject_id}_{second.subject_id}_{self.factor.name}"
            f"_{first.sentence_id}_{first.device}_{first.language}"
        )


@dataclass(frozen=True)
class MorphRecord:
    """A completed morph with its provenance and portion geometry."""

    spec: MorphSpec
    path: Path
    p: int
    padded_len: int

    def __post_init__(self) -> None:
        if not 0 <= self.p <= self.padded_len:
            raise ValueError("portion length out of range")


@dataclass(frozen=True)
class PairingPolicy:
    gender_mode: str  # "FF", "MM", or "Combined"
    factors: tuple[MorphFactor, ...] = tuple(MorphFactor)
    mode: MorphMode = MorphMode.PORTION_AVERAGE

    def __post_init__(self) -> None:
        if self.gender_mode not in ("FF", "MM", "Combined"):
            raise ValueError(f"unknown gender mode {self.gender_mode!r}")
        if not self.factors:
            raise ValueError("at least one morph factor required")


def select_portion_length(n2: int, factor: MorphFactor) -> int:
    """Portion length p = floor(n2 * proportion), from the second signal's
    original (pre-padding) length."""
    if n2 < 1:
        raise ValueError("second signal must be non-empty")
    return int(n2 * factor.proportion)


def morph(
    s1: AudioSignal,
    s2: AudioSignal,
    factor: MorphFactor,
    mode: MorphMode = MorphMode.PORTION_AVERAGE,
) -> tuple[AudioSignal, int, int]:
    """Morph two same-rate signals; returns (signal, p, padded_len).

    Both inputs are zero-padded to the longer length L. Samples below the
    portion boundary p are the arithmetic mean of the two padded signals; at
    and above p the output is the first signal (PORTION_AVERAGE) or the first
    signal halved (LITERAL_HALVING).
    """
    if len(s1) == 0 or len(s2) == 0:
        raise EmptyAudioError("cannot morph an empty signal")
    p = select_portion_length(len(s2), factor)
    a, b = zero_pad_pair(s1, s2)
    out = a.samples.copy()
    out[:p] = (a.samples[:p] + b.samples[:p]) / 2.0
    if mode is MorphMode.LITERAL_HALVING:
        out[p:] = a.samples[p:] / 2.0
    signal = AudioSignal(samples=out, sample_rate=s1.sample_rate)
    return signal, p, len(a)


def generate_pairings(manifest: Manifest, policy: PairingPolicy) -> list[MorphSpec]:
    """All ordered same-gender contributor pairs per (device, language,
    session, sentence) cell, crossed with the policy's factors.

    "Combined" pools the FF and MM pair sets. Output order is deterministic:
    sorted by cell, then first/second subject id, then factor, independent of
    manifest row order.
    """
    wanted = {"FF": ("F",), "MM": ("M",), "Combined": ("F", "M")}[policy.gender_mode]
    cells: dict[tuple, list[RecordingMeta]] = {}
    for rec in manifest.records:
        cells.setdefault(rec.cell(), []).append(rec)
    specs: list[MorphSpec] = []
    for cell in sorted(cells):
        by_gender: dict[str, list[RecordingMeta]] = {}
        for rec in cells[cell]:
            by_gender.setdefault(rec.gender, []).append(rec)
        for gender in wanted:
            members = sorted(by_gender.get(gender, []), key=lambda r: r.subject_id)
            for first in members:
                for second in members:
                    if first.subject_id == second.subject_id:
                        continue
                    for factor in sorted(policy.factors, key=lambda f: f.proportion):
                        specs.append(
                            MorphSpec(first=first, second=second, factor=factor, mode=policy.mode)
                        )
    specs.sort(
        key=lambda s: (
            s.first.cell(),
            s.first.subject_id,
            s.second.subject_id,
            s.factor.proportion,
        )
    )
    return specs


@dataclass
class BatchMorphResult:
    records: list[MorphRecord]
    failures: list[tuple[str, str]]  # (morph_id, reason)
    manifest_path: Path | None = None

    @property
    def ok(self) -> bool:
        return not self.failures


MORPH_MANIFEST_COLUMNS = [
    "first_subject",
    "second_subject",
    "gender_pair",
    "factor",
    "sentence_id",
    "device",
    "language",
    "session",
    "p",
    "padded_len",
    "path",
]


def batch_morph(specs: list[MorphSpec], out_dir: str | Path, jobs: int = 1) -> BatchMorphResult:
    """Render one WAV per spec into out_dir and write morphs.csv alongside.

    Per-item failures (unreadable inputs, filename collisions) are collected
    rather than aborting the batch. Outputs depend only on each spec, so the
    result is byte-identical for any worker count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seen_ids: set[str] = set()
    failures: list[tuple[str, str]] = []
    todo: list[MorphSpec] = []
    for spec in specs:
        if spec.morph_id in seen_ids:
            failures.append((spec.morph_id, "duplicate morph filename"))
            continue
        seen_ids.add(spec.morph_id)
        todo.append(spec)

    # Cache contributor signals; a subject's recording feeds many morphs.
    cache: dict[Path, AudioSignal] = {}

    def load(path: Path) -> AudioSignal:
        if path not in cache:
            cache[path] = read_wav(path)
        return cache[path]

    def run_one(spec: MorphSpec) -> MorphRecord | tuple[str, str]:
        try:
            s1 = load(spec.first.path)
            s2 = load(spec.second.path)
            signal, p, padded_len = morph(s1, s2, spec.factor, spec.mode)
            path = out_dir / f"{spec.morph_id}.wav"
            write_wav(signal, path)
            return MorphRecord(spec=spec, path=path, p=p, padded_len=padded_len)
        except Exception as exc:
            return (spec.morph_id, str(exc))

    for path in sorted({s.first.path for s in todo} | {s.second.path for s in todo}):
        try:
            load(path)
        except Exception:
            pass  # surfaces as a per-spec failure below

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, todo))
    else:
        results = [run_one(spec) for spec in todo]

    records = [r for r in results if isinstance(r, MorphRecord)]
    failures.extend(r for r in results if isinstance(r, tuple))
    manifest_path = save_morph_manifest(records, out_dir / "morphs.csv", relative_to=out_dir)
    if failures:
        log.warning("%d of %d morphs failed", len(failures), len(specs))
    return BatchMorphResult(records=records, failures=sorted(failures), manifest_path=manifest_path)


def save_morph_manifest(
    records: list[MorphRecord], path: str | Path, relative_to: Path | None = None
) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MORPH_MANIFEST_COLUMNS)
        for rec in records:
            spec = rec.spec
            p = rec.path
            if relative_to is not None:
                try:
                    p = p.relative_to(relative_to)
                except ValueError:
                    pass
            writer.writerow(
                [
                    spec.first.subject_id,
                    spec.second.subject_id,
                    spec.gender_pair,
                    spec.factor.name,
                    spec.first.sentence_id,
                    spec.first.device,
                    spec.first.language,
                    spec.first.session,
                    rec.p,
                    rec.padded_len,
                    p.as_posix(),
                ]
            )
    return path


@dataclass(frozen=True)
class MorphRow:
    """One completed morph as read back from a morph manifest."""

    morph_id: str
    first_subject: str
    second_subject: str
    gender_pair: str
    factor: MorphFactor
    sentence_id: str
    device: str
    language: str
    session: int
    p: int
    padded_len: int
    path: Path


def load_morph_manifest(path: str | Path) -> list[MorphRow]:
    path = Path(path)
    base = path.parent
    rows: list[MorphRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MORPH_MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: morph manifest missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                wav = Path(row["path"])
                if not wav.is_absolute():
                    wav = base / wav
                rows.append(
                    MorphRow(
                        morph_id=wav.stem,
                        first_subject=row["first_subject"],
                        second_subject=row["second_subject"],
                        gender_pair=row["gender_pair"],
                        factor=MorphFactor.parse(row["factor"]),
                        sentence_id=row["sentence_id"],
                        device=row["device"],
                        language=row["language"],
                        session=int(row["session"]),
                        p=int(row["p"]),
                        padded_len=int(row["padded_len"]),
                        path=wav,
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return rows


def bounded(signal: AudioSignal) -> bool:
    """True when every sample lies in [-1, 1]; cheap invariant check."""
    return bool(np.all(np.abs(signal.samples) <= 1.0))
