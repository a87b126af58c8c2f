"""Recording manifests and a deterministic synthetic desk-scale corpus.

The synthetic corpus stands in for real smartphone recordings: each artificial
speaker is a harmonic-plus-noise source with its own fundamental and formant
layout, and every sentence id maps to a fixed prosodic skeleton (syllable
timing, accents, amplitudes) shared by all speakers, which is the "same spoken
content" property the time-domain morph relies on.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioSignal, write_wav
from .errors import DuplicateKeyError, ParseError

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = [
    "subject_id",
    "gender",
    "device",
    "language",
    "session",
    "sentence_id",
    "path",
    "sample_rate",
]

# Disjoint fundamental-frequency bands per gender, Hz.
F0_BAND = {"F": (165.0, 255.0), "M": (85.0, 155.0)}


@dataclass(frozen=True)
class RecordingMeta:
    subject_id: str
    gender: str  # "F" or "M"
    device: str
    language: str
    session: int
    sentence_id: str
    path: Path
    sample_rate: int

    def key(self) -> tuple[str, str, str, int, str]:
        """Uniqueness key within a manifest."""
        return (self.subject_id, self.device, self.language, self.session, self.sentence_id)

    def cell(self) -> tuple[str, str, int, str]:
        """Grouping cell for pairing: (device, language, session, sentence)."""
        return (self.device, self.language, self.session, self.sentence_id)


@dataclass
class Manifest:
    records: list[RecordingMeta]
    name: str = ""

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SynthSpeakerProfile:
    """Parameters of one artificial speaker."""

    subject_id: str
    gender: str
    f0: float
    formants: tuple[float, float, float]
    jitter: float
    seed: int

    def __post_init__(self) -> None:
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")
        if not (self.formants[0] < self.formants[1] < self.formants[2]):
            raise ValueError("formants must be strictly increasing")
        if not 0 <= self.jitter < 0.2:
            raise ValueError("jitter must lie in [0, 0.2)")


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 3.0
    sample_rate: int = 16000
    noise_floor: float = 0.01


@dataclass
class ValidationReport:
    missing_files: list[Path] = field(default_factory=list)
    rate_mismatches: list[str] = field(default_factory=list)
    unpairable_subjects: list[str] = field(default_factory=list)
    empty: bool = False

    @property
    def usable(self) -> bool:
        return not self.empty and not self.missing_files and not self.rate_mismatches


def load_manifest(path: str | Path) -> Manifest:
    """Parse a manifest CSV, checking schema and key uniqueness.

    Relative record paths are resolved against the manifest's directory so a
    corpus tree can be relocated as a unit. Row order is preserved.
    """
    path = Path(path)
    base = path.parent
    records: list[RecordingMeta] = []
    seen: set[tuple] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: manifest missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            rec = _parse_row(row, base, path, lineno)
            if rec.key() in seen:
                raise DuplicateKeyError(
                    f"{path}:{lineno}: duplicate record key {rec.key()}"
                )
            seen.add(rec.key())
            records.append(rec)
    return Manifest(records=records, name=path.stem)


def _parse_row(row: dict, base: Path, path: Path, lineno: int) -> RecordingMeta:
    gender = (row["gender"] or "").strip()
    if gender not in ("F", "M"):
        raise ParseError(f"{path}:{lineno}: gender must be F or M, got {gender!r}")
    try:
        session = int(row["session"])
        sample_rate = int(row["sample_rate"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if session <= 0 or sample_rate <= 0:
        raise ParseError(f"{path}:{lineno}: session and sample_rate must be positive")
    rec_path = Path(row["path"])
    if not rec_path.is_absolute():
        rec_path = base / rec_path
    return RecordingMeta(
        subject_id=row["subject_id"].strip(),
        gender=gender,
        device=row["device"].strip(),
        language=row["language"].strip(),
        session=session,
        sentence_id=row["sentence_id"].strip(),
        path=rec_path,
        sample_rate=sample_rate,
    )


def save_manifest(manifest: Manifest, path: str | Path, relative_to: Path | None = None) -> Path:
    """Write a manifest CSV; paths are stored relative to `relative_to` when possible."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for rec in manifest.records:
            p = rec.path
            if relative_to is not None:
                try:
                    p = p.relative_to(relative_to)
                except ValueError:
                    pass
            writer.writerow(
                [
                    rec.subject_id,
                    rec.gender,
                    rec.device,
                    rec.language,
                    rec.session,
                    rec.sentence_id,
                    p.as_posix(),
                    rec.sample_rate,
                ]
            )
    return path


def validate_manifest(manifest: Manifest) -> ValidationReport:
    """Report-only checks: file presence, per-(device, language) rate
    consistency, and subjects without a same-gender morphing partner."""
    report = ValidationReport()
    if not manifest.records:
        report.empty = True
        return report
    for rec in manifest.records:
        if not rec.path.is_file():
            report.missing_files.append(rec.path)
    rates: dict[tuple[str, str], set[int]] = {}
    for rec in manifest.records:
        rates.setdefault((rec.device, rec.language), set()).add(rec.sample_rate)
    for (device, language), rset in sorted(rates.items()):
        if len(rset) > 1:
            report.rate_mismatches.append(
                f"({device}, {language}): rates {sorted(rset)}"
            )
    by_gender: dict[str, set[str]] = {"F": set(), "M": set()}
    for rec in manifest.records:
        by_gender[rec.gender].add(rec.subject_id)
    for gender, subjects in sorted(by_gender.items()):
        if len(subjects) == 1:
            report.unpairable_subjects.extend(sorted(subjects))
    return report


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------


def _rng(*parts) -> np.random.Generator:
    """Deterministic generator keyed by a string tuple (stable across runs)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def speaker_profile(seed: int, index: int, n_speakers: int) -> SynthSpeakerProfile:
    """Deterministic speaker parameters; genders alternate starting with F.

    Fundamentals are spread across the gender band with a low-discrepancy
    slot sequence so nearby indices stay acoustically separated.
    """
    subject_id = f"spk{index + 1:03d}"
    gender = "F" if index % 2 == 0 else "M"
    rng = _rng(seed, "profile", subject_id)
    low, high = F0_BAND[gender]
    gender_index = index // 2
    frac = (gender_index * 0.618033988749895 + rng.uniform(0.0, 0.25)) % 1.0
    f0 = low + frac * (high - low)
    # Formant centers use per-band slot sequences over the whole speaker set,
    # so no two speakers can land on near-identical spectral envelopes.
    bands = ((350.0, 850.0), (950.0, 2300.0), (2400.0, 3300.0))
    steps = (0.381966, 0.618034, 0.754878)
    formants = tuple(
        lo + ((index * step + rng.uniform(0.0, 0.12)) % 1.0) * (hi - lo)
        for (lo, hi), step in zip(bands, steps)
    )
    jitter = rng.uniform(0.005, 0.03)
    return SynthSpeakerProfile(
        subject_id=subject_id,
        gender=gender,
        f0=float(f0),
        formants=formants,
        jitter=float(jitter),
        seed=seed,
    )


def _sentence_skeleton(seed: int, sentence_id: str, duration_s: float) -> dict:
    """Prosodic skeleton shared by every speaker uttering `sentence_id`:
    syllable start/length fractions, per-syllable amplitude and pitch accent."""
    rng = _rng(seed, "skeleton", sentence_id)
    n_syll = int(rng.integers(6, 10))
    weights = rng.uniform(0.7, 1.4, size=n_syll)
    slots = weights / weights.sum()
    starts = np.concatenate([[0.0], np.cumsum(slots)[:-1]])
    return {
        "starts": starts,
        "lengths": slots,
        "voiced_frac": rng.uniform(0.65, 0.85, size=n_syll),
        "amplitude": rng.uniform(0.55, 1.0, size=n_syll),
        "accent": rng.uniform(0.92, 1.12, size=n_syll),
        "duration_s": duration_s,
    }


def _formant_weight(freq: np.ndarray, formants: tuple[float, float, float]) -> np.ndarray:
    bandwidths = (90.0, 130.0, 180.0)
    w = np.zeros_like(freq)
    for center, bw in zip(formants, bandwidths):
        w += 1.0 / (1.0 + ((freq - center) / bw) ** 2)
    return w


def render_utterance(
    profile: SynthSpeakerProfile,
    skeleton: dict,
    config: SynthConfig,
    sentence_id: str,
) -> AudioSignal:
    """Render one pseudo-utterance: a voiced syllable train at the speaker's
    fundamental with resonant emphasis at the speaker's formants, over a
    broadband noise floor."""
    sr = config.sample_rate
    n = int(round(skeleton["duration_s"] * sr))
    t = np.arange(n) / sr
    rng = _rng(profile.seed, "render", profile.subject_id, sentence_id)

    # Amplitude envelope and piecewise pitch accent from the shared skeleton.
    env = np.zeros(n)
    accent = np.ones(n)
    total = skeleton["duration_s"]
    for start, length, vfrac, amp, acc in zip(
        skeleton["starts"],
        skeleton["lengths"],
        skeleton["voiced_frac"],
        skeleton["amplitude"],
        skeleton["accent"],
    ):
        s = int(start * total * sr)
        e = min(n, s + int(length * vfrac * total * sr))
        if e <= s + 2:
            continue
        seg = np.linspace(0.0, 1.0, e - s)
        env[s:e] = amp * np.sin(np.pi * seg) ** 1.5
        accent[s:e] = acc

    # Slowly varying jitter on the fundamental (piecewise-linear 20 ms grid).
    grid = max(2, int(skeleton["duration_s"] / 0.02))
    knots = rng.standard_normal(grid)
    jitter_curve = np.interp(t, np.linspace(0.0, skeleton["duration_s"], grid), knots)
    declination = 1.0 - 0.06 * t / max(total, 1e-9)
    f0_t = profile.f0 * accent * declination * (1.0 + profile.jitter * jitter_curve)

    phase = 2.0 * np.pi * np.cumsum(f0_t) / sr
    k_max = max(1, int(0.45 * sr / (profile.f0 * 1.25)))
    k = np.arange(1, k_max + 1)
    amps = _formant_weight(k * profile.f0, profile.formants) / k**0.4
    amps /= amps.sum()

    voiced = np.zeros(n)
    for ki, ak in zip(k, amps):
        voiced += ak * np.sin(ki * phase)
    x = env * voiced + config.noise_floor * rng.standard_normal(n)
    x *= 0.85 / max(np.max(np.abs(x)), 1e-9)
    return AudioSignal(samples=x, sample_rate=sr)


def synth_corpus(
    n_speakers: int,
    sentences: list[str],
    config: SynthConfig,
    seed: int,
    out_dir: str | Path,
    device: str = "synth",
    language: str = "synthetic",
) -> Manifest:
    """Generate n_speakers x len(sentences) WAV files plus their manifest.

    Fully deterministic for a given (seed, config): per-file rendering is
    seeded by (seed, subject_id, sentence_id) only, so generation order (or
    parallelization) cannot change output bytes.
    """
    if n_speakers < 2:
        raise ValueError("need at least 2 speakers for a pairable corpus")
    if not sentences:
        raise ValueError("need at least one sentence id")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records: list[RecordingMeta] = []
    for i in range(n_speakers):
        profile = speaker_profile(seed, i, n_speakers)
        for sentence_id in sentences:
            skeleton = _sentence_skeleton(seed, sentence_id, config.duration_s)
            signal = render_utterance(profile, skeleton, config, sentence_id)
            fname = f"{profile.subject_id}_{sentence_id}.wav"
            write_wav(signal, out_dir / fname)
            records.append(
                RecordingMeta(
                    subject_id=profile.subject_id,
                    gender=profile.gender,
                    device=device,
                    language=language,
                    session=1,
                    sentence_id=sentence_id,
                    path=out_dir / fname,
                    sample_rate=config.sample_rate,
                )
            )
    log.info("synthesized %d recordings into %s", len(records), out_dir)
    return Manifest(records=records, name=out_dir.name)


def parse_synth_config(path: str | Path) -> SynthConfig:
    """Read a flat key=value config file; unknown keys are rejected."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    known = {"duration_s": float, "sample_rate": int, "noise_floor": float}
    unknown = set(values) - set(known)
    if unknown:
        raise ParseError(f"{path}: unknown key(s): {', '.join(sorted(unknown))}")
    kwargs = {k: known[k](v) for k, v in values.items()}
    return SynthConfig(**kwargs)
