"""Vulnerability and verification metrics.

Verification side: empirical FMR/FNMR, equal error rate, and FMR-targeted
thresholds over genuine/impostor score sets. Attack side: morph match rates
(MMPMR, FMMPMR), the attempts-by-systems MAP matrix, and G-MAP, which folds
probe attempts, multiple verifiers (by minimum), attack types (by mean), and
failure-to-acquire weighting into one number.

Conventions, fixed here and relied on by tests: attack success comparisons
are strict (score > threshold); empirical FMR counts impostor scores >= t;
an acquire failure scores as below threshold AND raises the empirical FTAR
for its (attempt, backend).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyScoresError,
    EmptyTableError,
    IncompletePairError,
    MissingThresholdError,
    ParseError,
)
from .morphing import MorphFactor


@dataclass(frozen=True)
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self) -> None:
        for name in ("genuine", "impostor"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} scores must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def require_nonempty(self) -> None:
        if self.genuine.size == 0 or self.impostor.size == 0:
            raise EmptyScoresError("both genuine and impostor scores are required")


def fmr_fnmr(scores: ScoreSet, threshold: float) -> tuple[float, float]:
    """Empirical false-match and false-non-match rates at a threshold.

    FMR = fraction of impostor scores >= t; FNMR = fraction of genuine
    scores < t.
    """
    scores.require_nonempty()
    fmr = float(np.count_nonzero(scores.impostor >= threshold)) / scores.impostor.size
    fnmr = float(np.count_nonzero(scores.genuine < threshold)) / scores.genuine.size
    return fmr, fnmr


def eer(scores: ScoreSet) -> tuple[float, float]:
    """Equal error rate and its operating threshold.

    Sweeps every distinct score and the midpoints between consecutive
    distinct scores, picks the threshold minimizing |FMR - FNMR| (ties go to
    the lowest threshold), and returns ((FMR + FNMR) / 2, threshold).
    """
    scores.require_nonempty()
    distinct = np.unique(np.concatenate([scores.genuine, scores.impostor]))
    candidates = distinct
    if distinct.size > 1:
        midpoints = (distinct[:-1] + distinct[1:]) / 2.0
        candidates = np.sort(np.concatenate([distinct, midpoints]))
    best_gap = math.inf
    best_t = best_rate = 0.0
    for t in candidates:
        fmr, fnmr = fmr_fnmr(scores, float(t))
        gap = abs(fmr - fnmr)
        if gap < best_gap:
            best_gap = gap
            best_t = float(t)
            best_rate = (fmr + fnmr) / 2.0
    return best_rate, best_t


def threshold_at_fmr(scores: ScoreSet, target_fmr: float) -> float:
    """Smallest threshold t with empirical FMR(t) <= target_fmr.

    With n impostor scores at most k = floor(target * n) of them may sit at
    or above t, so t is one float step above the (k+1)-th largest score.
    """
    if not 0.0 < target_fmr < 1.0:
        raise ValueError("target FMR must lie strictly between 0 and 1")
    if scores.impostor.size == 0:
        raise EmptyScoresError("impostor scores are required")
    desc = np.sort(scores.impostor)[::-1]
    k = int(math.floor(target_fmr * desc.size))
    bound = desc[min(k, desc.size - 1)]
    return float(np.nextafter(bound, np.inf))


# ---------------------------------------------------------------------------
# Trial tables
# ---------------------------------------------------------------------------

CONTRIBUTORS = ("S1", "S2")

TRIALS_COLUMNS = [
    "morph_id",
    "attack_type",
    "attempt",
    "contributor",
    "backend",
    "score",
    "device",
    "language",
    "gender_pair",
]


@dataclass(frozen=True)
class TrialRow:
    """One probe outcome: a contributor probed against an enrolled morph.

    score is None when the backend failed to acquire either side.
    """

    morph_id: str
    attack_type: MorphFactor
    attempt: int
    contributor: str  # "S1" or "S2"
    backend: str
    score: float | None
    device: str
    language: str
    gender_pair: str

    def __post_init__(self) -> None:
        if self.contributor not in CONTRIBUTORS:
            raise ValueError(f"contributor must be one of {CONTRIBUTORS}")
        if self.attempt < 1:
            raise ValueError("attempt indices start at 1")


@dataclass(frozen=True)
class TrialTable:
    rows: tuple[TrialRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    def backends(self) -> list[str]:
        return sorted({r.backend for r in self.rows})

    def attempts(self) -> list[int]:
        return sorted({r.attempt for r in self.rows})

    def morph_ids(self) -> list[str]:
        return sorted({r.morph_id for r in self.rows})

    def attack_types(self) -> list[MorphFactor]:
        return sorted({r.attack_type for r in self.rows}, key=lambda f: f.proportion)

    def filter(
        self,
        attack_type: MorphFactor | None = None,
        backend: str | None = None,
        device: str | None = None,
        language: str | None = None,
        gender_pair: str | tuple[str, ...] | None = None,
        max_attempt: int | None = None,
    ) -> "TrialTable":
        if isinstance(gender_pair, str):
            gender_pair = (gender_pair,)
        rows = [
            r
            for r in self.rows
            if (attack_type is None or r.attack_type is attack_type)
            and (backend is None or r.backend == backend)
            and (device is None or r.device == device)
            and (language is None or r.language == language)
            and (gender_pair is None or r.gender_pair in gender_pair)
            and (max_attempt is None or r.attempt <= max_attempt)
        ]
        return TrialTable(rows=tuple(rows))

    def validate(self) -> None:
        """Check pairwise completeness and contiguous attempt indexing.

        Every (morph, attempt, backend) combination must carry exactly one
        row per contributor; metrics rely on this to keep denominators
        honest."""
        if not self.rows:
            raise EmptyTableError("trial table has no rows")
        attempts = self.attempts()
        if attempts != list(range(1, len(attempts) + 1)):
            raise IncompletePairError(f"attempt indices not contiguous from 1: {attempts}")
        seen: dict[tuple[str, int, str], set[str]] = {}
        for r in self.rows:
            seen.setdefault((r.morph_id, r.attempt, r.backend), set()).add(r.contributor)
        backends = self.backends()
        for morph_id in self.morph_ids():
            for attempt in attempts:
                for backend in backends:
                    if seen.get((morph_id, attempt, backend)) != set(CONTRIBUTORS):
                        raise IncompletePairError(
                            f"morph {morph_id!r} attempt {attempt} backend {backend!r}: "
                            f"missing contributor rows"
                        )
        expected = len(self.morph_ids()) * len(attempts) * len(backends) * len(CONTRIBUTORS)
        if len(self.rows) != expected:
            raise IncompletePairError(
                f"duplicate rows: {len(self.rows)} rows for {expected} trial slots"
            )

    def _scores(self) -> dict[tuple[str, int, str, str], float | None]:
        return {
            (r.morph_id, r.attempt, r.contributor, r.backend): r.score for r in self.rows
        }


def save_trials(table: TrialTable, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIALS_COLUMNS)
        for r in table.rows:
            writer.writerow(
                [
                    r.morph_id,
                    r.attack_type.name,
                    r.attempt,
                    r.contributor,
                    r.backend,
                    "" if r.score is None else f"{r.score:.10f}",
                    r.device,
                    r.language,
                    r.gender_pair,
                ]
            )
    return path


def load_trials(path: str | Path) -> TrialTable:
    rows: list[TrialRow] = []
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in TRIALS_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: trials file missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                score = row["score"].strip()
                rows.append(
                    TrialRow(
                        morph_id=row["morph_id"],
                        attack_type=MorphFactor.parse(row["attack_type"]),
                        attempt=int(row["attempt"]),
                        contributor=row["contributor"],
                        backend=row["backend"],
                        score=None if score == "" else float(score),
                        device=row["device"],
                        language=row["language"],
                        gender_pair=row["gender_pair"],
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return TrialTable(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Morph attack metrics
# ---------------------------------------------------------------------------


class GmapCapacity(Enum):
    MULTI_PROBE = "multiprobe"
    MULTI_PROBE_MULTI_SVS = "multisvs"
    FULL = "full"


@dataclass(frozen=True)
class GmapConfig:
    thresholds: dict[str, float]
    capacity: GmapCapacity = GmapCapacity.MULTI_PROBE
    attack_types: tuple[MorphFactor, ...] = ()


def _num(score: float | None) -> float:
    """Failed acquisitions compare as below any threshold."""
    return -math.inf if score is None else score


def _require_single_backend(table: TrialTable) -> str:
    backends = table.backends()
    if len(backends) != 1:
        raise ValueError(f"expected a single-backend table, found {backends}")
    return backends[0]


def _threshold_for(thresholds: dict[str, float], backend: str) -> float:
    try:
        return thresholds[backend]
    except KeyError:
        raise MissingThresholdError(f"no threshold for backend {backend!r}") from None


def mmpmr(table: TrialTable, thresholds: dict[str, float]) -> float:
    """Mated morph presentation match rate, in percent.

    A morph succeeds when every contributor's best score across attempts
    exceeds the threshold; failed acquisitions count as below threshold.
    """
    if not table.rows:
        raise EmptyTableError("trial table has no rows")
    backend = _require_single_backend(table)
    tau = _threshold_for(thresholds, backend)
    best: dict[str, dict[str, float]] = {}
    for r in table.rows:
        score = -math.inf if r.score is None else r.score
        per_morph = best.setdefault(r.morph_id, {})
        per_morph[r.contributor] = max(per_morph.get(r.contributor, -math.inf), score)
    successes = sum(
        1
        for per_morph in best.values()
        if len(per_morph) == len(CONTRIBUTORS)
        and all(s > tau for s in per_morph.values())
    )
    return 100.0 * successes / len(best)


def fmmpmr(table: TrialTable, thresholds: dict[str, float]) -> float:
    """Fully mated morph presentation match rate, in percent.

    Success is counted per (morph, attempt): every contributor must exceed
    the threshold within that same attempt.
    """
    table.validate()
    backend = _require_single_backend(table)
    tau = _threshold_for(thresholds, backend)
    scores = table._scores()
    morphs = table.morph_ids()
    attempts = table.attempts()
    successes = 0
    for morph_id in morphs:
        for attempt in attempts:
            if all(
                _num(scores[(morph_id, attempt, c, backend)]) > tau
                for c in CONTRIBUTORS
            ):
                successes += 1
    return 100.0 * successes / (len(morphs) * len(attempts))


@dataclass(frozen=True)
class MapMatrix:
    """MAP: rows are max probe attempts, columns are minimum verifiers fooled."""

    values: np.ndarray  # shape (attempts, backends), percentages
    attempts: tuple[int, ...]
    backends: tuple[str, ...]


def map_matrix(table: TrialTable, thresholds: dict[str, float]) -> MapMatrix:
    """Attempts-by-systems success matrix.

    Cell (r, c): percentage of (morph, attempt <= r) pairs in which the
    attack fooled at least c verifiers, a verifier counting as fooled when
    both contributors exceed its threshold in that attempt.
    """
    table.validate()
    backends = table.backends()
    for b in backends:
        _threshold_for(thresholds, b)
    attempts = table.attempts()
    morphs = table.morph_ids()
    scores = table._scores()

    def fooled_count(morph_id: str, attempt: int) -> int:
        count = 0
        for b in backends:
            tau = thresholds[b]
            if all(
                _num(scores[(morph_id, attempt, c, b)]) > tau
                for c in CONTRIBUTORS
            ):
                count += 1
        return count

    counts = {
        (m, a): fooled_count(m, a) for m in morphs for a in attempts
    }
    values = np.zeros((len(attempts), len(backends)))
    for ri, r in enumerate(attempts):
        denom = len(morphs) * r
        for ci in range(len(backends)):
            need = ci + 1
            hits = sum(
                1 for m in morphs for a in attempts[:ri + 1] if counts[(m, a)] >= need
            )
            values[ri, ci] = 100.0 * hits / denom
    return MapMatrix(values=values, attempts=tuple(attempts), backends=tuple(backends))


def _ftar(table: TrialTable, backend: str) -> dict[int, float]:
    """Empirical failure-to-acquire rate per attempt for one backend."""
    totals: dict[int, int] = {}
    failures: dict[int, int] = {}
    for r in table.rows:
        if r.backend != backend:
            continue
        totals[r.attempt] = totals.get(r.attempt, 0) + 1
        if r.score is None:
            failures[r.attempt] = failures.get(r.attempt, 0) + 1
    return {a: failures.get(a, 0) / totals[a] for a in totals}


def _gmap_multiprobe(table: TrialTable, thresholds: dict[str, float]) -> float:
    """Single backend, single attack type: FTAR-weighted per-attempt success.

    Each (morph, attempt) success indicator is weighted by (1 - FTAR) of its
    attempt, then normalized over morphs x attempts. Equals FMMPMR whenever
    no acquire failures exist.
    """
    table.validate()
    backend = _require_single_backend(table)
    tau = _threshold_for(thresholds, backend)
    ftar = _ftar(table, backend)
    scores = table._scores()
    morphs = table.morph_ids()
    attempts = table.attempts()
    total = 0.0
    for morph_id in morphs:
        for attempt in attempts:
            success = all(
                _num(scores[(morph_id, attempt, c, backend)]) > tau
                for c in CONTRIBUTORS
            )
            if success:
                total += 1.0 - ftar[attempt]
    return 100.0 * total / (len(morphs) * len(attempts))


def gmap(table: TrialTable, cfg: GmapConfig) -> float:
    """Generalized morph attack potential, in percent.

    MULTI_PROBE: FTAR-weighted FMMPMR on a single-backend, single-type table.
    MULTI_PROBE_MULTI_SVS: minimum of the per-backend MULTI_PROBE values.
    FULL: mean of MULTI_PROBE_MULTI_SVS over the configured attack types,
    each evaluated on its own sub-table.
    """
    if not table.rows:
        raise EmptyTableError("trial table has no rows")
    for backend in table.backends():
        _threshold_for(cfg.thresholds, backend)
    if cfg.capacity is GmapCapacity.MULTI_PROBE:
        return _gmap_multiprobe(table, cfg.thresholds)
    if cfg.capacity is GmapCapacity.MULTI_PROBE_MULTI_SVS:
        return min(
            _gmap_multiprobe(table.filter(backend=b), cfg.thresholds)
            for b in table.backends()
        )
    attack_types = cfg.attack_types or tuple(table.attack_types())
    extra = set(table.attack_types()) - set(attack_types)
    if extra:
        raise ValueError(
            f"table contains attack type(s) outside the configured set: "
            f"{sorted(f.name for f in extra)}"
        )
    values = []
    for factor in sorted(attack_types, key=lambda f: f.proportion):
        sub = table.filter(attack_type=factor)
        if not sub.rows:
            raise EmptyTableError(f"no rows for attack type {factor.name}")
        values.append(
            gmap(sub, GmapConfig(cfg.thresholds, GmapCapacity.MULTI_PROBE_MULTI_SVS))
        )
    return float(np.mean(values))
