"""Protocol drivers: baseline verification and morph vulnerability runs.

Baseline: score all within-subject (genuine) and cross-subject (impostor)
recording pairs per group, yielding EER and FMR-targeted thresholds.
Attack: enroll each morph, probe both contributors over several attempts
per verifier, and collect every outcome into a trial table.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .backends import AcquireResult, VerifierDescriptor, cosine_similarity, embed_path
from .corpus import Manifest, RecordingMeta
from .errors import ConfigError, EmptyScoresError, InsufficientDataError
from .metrics import ScoreSet, TrialRow, TrialTable, threshold_at_fmr, eer as compute_eer
from .morphing import MorphRow

log = logging.getLogger(__name__)


class ProbeMode(Enum):
    TEXT_DEPENDENT = "td"  # probe utters the morph's sentence
    TEXT_INDEPENDENT = "ti"  # probe utters a different sentence

    @classmethod
    def parse(cls, token: str) -> "ProbeMode":
        for mode in cls:
            if mode.value == token.strip().lower():
                return mode
        raise ValueError(f"unknown probe mode {token!r}")


@dataclass(frozen=True)
class ProtocolConfig:
    backends: tuple[VerifierDescriptor, ...]
    mode: ProbeMode = ProbeMode.TEXT_DEPENDENT
    attempts: int = 3
    group_by: tuple[str, ...] = ("device", "language")

    def __post_init__(self) -> None:
        if not self.backends:
            raise ConfigError("at least one backend required")
        if self.attempts < 1:
            raise ConfigError("attempts must be >= 1")
        unknown = set(self.group_by) - {"device", "language", "gender_pair"}
        if unknown:
            raise ConfigError(f"unknown group keys: {sorted(unknown)}")


def _embed_many(
    backend: VerifierDescriptor, paths: list[Path], jobs: int = 1
) -> dict[Path, AcquireResult]:
    """Embed unique paths, optionally in parallel; results keyed by path so
    worker scheduling cannot influence anything downstream."""
    unique = sorted(set(paths))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda p: embed_path(backend, p), unique))
    else:
        results = [embed_path(backend, p) for p in unique]
    return dict(zip(unique, results))


# ---------------------------------------------------------------------------
# Baseline verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaselineGroup:
    backend: str
    key_names: tuple[str, ...]
    key: tuple[str, ...]
    scores: ScoreSet
    eer: float
    eer_threshold: float
    fmr_threshold: float  # threshold at the 0.1% FMR operating point

    @property
    def label(self) -> str:
        return "/".join(self.key) if self.key else "all"


FMR_OPERATING_POINT = 0.001


def run_baseline(
    manifest: Manifest,
    backend: VerifierDescriptor,
    group_by: tuple[str, ...] = ("device", "language"),
    jobs: int = 1,
) -> list[BaselineGroup]:
    """Genuine/impostor scoring per group with EER and FMR-point thresholds.

    Genuine pairs are within-subject cross-recording comparisons; impostor
    pairs cross subjects. Each group needs at least two subjects with at
    least two recordings each.
    """
    groups: dict[tuple[str, ...], list[RecordingMeta]] = {}
    for rec in manifest.records:
        key = tuple(str(getattr(rec, g)) for g in group_by)
        groups.setdefault(key, []).append(rec)
    if not groups:
        raise InsufficientDataError("manifest is empty")

    results: list[BaselineGroup] = []
    for key in sorted(groups):
        records = sorted(
            groups[key], key=lambda r: (r.subject_id, r.session, r.sentence_id, r.path.name)
        )
        per_subject: dict[str, int] = {}
        for rec in records:
            per_subject[rec.subject_id] = per_subject.get(rec.subject_id, 0) + 1
        lacking = sorted(s for s, n in per_subject.items() if n < 2)
        if len(per_subject) < 2 or lacking:
            raise InsufficientDataError(
                f"group {'/'.join(key) or 'all'}: needs >=2 subjects with >=2 "
                f"recordings each (subjects with <2: {lacking})"
            )
        embeddings = _embed_many(backend, [r.path for r in records], jobs=jobs)
        usable = [r for r in records if embeddings[r.path].ok]
        dropped = len(records) - len(usable)
        if dropped:
            log.warning(
                "group %s: %d recording(s) failed acquisition and were dropped",
                "/".join(key), dropped,
            )
        genuine: list[float] = []
        impostor: list[float] = []
        for i, a in enumerate(usable):
            ea = embeddings[a.path].embedding
            for b in usable[i + 1 :]:
                score = cosine_similarity(ea, embeddings[b.path].embedding)
                (genuine if a.subject_id == b.subject_id else impostor).append(score)
        scores = ScoreSet(genuine=np.asarray(genuine), impostor=np.asarray(impostor))
        scores.require_nonempty()
        eer_value, eer_t = compute_eer(scores)
        results.append(
            BaselineGroup(
                backend=backend.name,
                key_names=group_by,
                key=key,
                scores=scores,
                eer=eer_value,
                eer_threshold=eer_t,
                fmr_threshold=threshold_at_fmr(scores, FMR_OPERATING_POINT),
            )
        )
    return results


def pool_scores(groups: list[BaselineGroup]) -> ScoreSet:
    return ScoreSet(
        genuine=np.concatenate([g.scores.genuine for g in groups]),
        impostor=np.concatenate([g.scores.impostor for g in groups]),
    )


def resolve_thresholds(
    backends: tuple[VerifierDescriptor, ...],
    baselines: dict[str, list[BaselineGroup]],
) -> dict[str, float]:
    """Fixed thresholds pass through; FMR targets are derived from the
    backend's pooled impostor scores."""
    thresholds: dict[str, float] = {}
    for backend in backends:
        if backend.threshold is not None:
            thresholds[backend.name] = backend.threshold
        else:
            pooled = pool_scores(baselines[backend.name])
            thresholds[backend.name] = threshold_at_fmr(pooled, backend.fmr_target)
    return thresholds


# ---------------------------------------------------------------------------
# Vulnerability protocol
# ---------------------------------------------------------------------------


@dataclass
class VulnerabilityRun:
    table: TrialTable
    exclusions: list[tuple[str, str]] = field(default_factory=list)  # (morph_id, reason)


def _probe_candidates(
    corpus: Manifest, morph: MorphRow, subject: str, mode: ProbeMode
) -> list[RecordingMeta]:
    same_sentence = mode is ProbeMode.TEXT_DEPENDENT
    recs = [
        r
        for r in corpus.records
        if r.subject_id == subject
        and r.device == morph.device
        and r.language == morph.language
        and ((r.sentence_id == morph.sentence_id) == same_sentence)
    ]
    return sorted(recs, key=lambda r: (r.session, r.sentence_id, r.path.name))


def run_vulnerability(
    morphs: list[MorphRow],
    corpus: Manifest,
    cfg: ProtocolConfig,
    jobs: int = 1,
) -> VulnerabilityRun:
    """Enroll each morph and probe both contributors across attempts.

    A morph missing any suitable probe is excluded entirely (and recorded),
    keeping every metric denominator consistent. Attempt i uses the i-th
    candidate probe recording, cycling when a contributor has fewer distinct
    recordings than attempts. Rows are sorted canonically, so worker count
    never changes output bytes.
    """
    exclusions: list[tuple[str, str]] = []
    plan: list[tuple[MorphRow, dict[str, list[Path]]]] = []
    for morph in morphs:
        probes: dict[str, list[Path]] = {}
        for contributor, subject in (("S1", morph.first_subject), ("S2", morph.second_subject)):
            candidates = _probe_candidates(corpus, morph, subject, cfg.mode)
            if not candidates:
                exclusions.append(
                    (morph.morph_id, f"{contributor}={subject}: no {cfg.mode.value} probe")
                )
                probes = {}
                break
            if len(candidates) < cfg.attempts:
                log.info(
                    "morph %s %s: %d probe recording(s) for %d attempts, cycling",
                    morph.morph_id, contributor, len(candidates), cfg.attempts,
                )
            probes[contributor] = [
                candidates[(i - 1) % len(candidates)].path for i in range(1, cfg.attempts + 1)
            ]
        if probes:
            plan.append((morph, probes))

    all_paths = [m.path for m, _ in plan]
    for _, probes in plan:
        for paths in probes.values():
            all_paths.extend(paths)

    rows: list[TrialRow] = []
    for backend in cfg.backends:
        embeddings = _embed_many(backend, all_paths, jobs=jobs)
        for morph, probes in plan:
            enroll = embeddings[morph.path]
            for attempt in range(1, cfg.attempts + 1):
                for contributor in ("S1", "S2"):
                    probe = embeddings[probes[contributor][attempt - 1]]
                    if enroll.ok and probe.ok:
                        score = cosine_similarity(enroll.embedding, probe.embedding)
                    else:
                        score = None
                    rows.append(
                        TrialRow(
                            morph_id=morph.morph_id,
                            attack_type=morph.factor,
                            attempt=attempt,
                            contributor=contributor,
                            backend=backend.name,
                            score=score,
                            device=morph.device,
                            language=morph.language,
                            gender_pair=morph.gender_pair,
                        )
                    )
    rows.sort(key=lambda r: (r.morph_id, r.attempt, r.contributor, r.backend))
    return VulnerabilityRun(table=TrialTable(rows=tuple(rows)), exclusions=sorted(exclusions))


# ---------------------------------------------------------------------------
# Score distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramData:
    """Binned match-score counts over [-1, 1] with shared edges."""

    bin_edges: np.ndarray
    series: dict[str, np.ndarray]


def histogram_data(baseline: ScoreSet, trials: TrialTable, bins: int) -> HistogramData:
    """Bin genuine, impostor, and per-factor morph-vs-contributor scores.

    All series share identical bin edges spanning [-1, 1]; counts per series
    sum to the series size.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    baseline.require_nonempty()
    edges = np.linspace(-1.0, 1.0, bins + 1)
    series: dict[str, np.ndarray] = {}
    series["genuine"] = np.histogram(baseline.genuine, bins=edges)[0]
    series["impostor"] = np.histogram(baseline.impostor, bins=edges)[0]
    morph_any = False
    for factor in trials.attack_types():
        values = [r.score for r in trials.rows if r.attack_type is factor and r.score is not None]
        if not values:
            continue
        morph_any = True
        series[factor.name] = np.histogram(np.asarray(values), bins=edges)[0]
    if not morph_any:
        raise EmptyScoresError("no morph-vs-contributor scores to bin")
    return HistogramData(bin_edges=edges, series=series)
