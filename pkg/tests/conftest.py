from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from voicemorph.backends import VerifierDescriptor
from voicemorph.corpus import SynthConfig, load_manifest, save_manifest, synth_corpus
from voicemorph.metrics import TrialRow, TrialTable
from voicemorph.morphing import MorphFactor


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """Shared 6-speaker, 3-sentence corpus (seed 42) with its manifest."""
    out = tmp_path_factory.mktemp("corpus6")
    manifest = synth_corpus(6, ["S1", "S2", "S3"], SynthConfig(), seed=42, out_dir=out)
    save_manifest(manifest, out / "manifest.csv", relative_to=out)
    return out


@pytest.fixture(scope="session")
def corpus_manifest(corpus_dir):
    return load_manifest(corpus_dir / "manifest.csv")


@pytest.fixture()
def reference_backend() -> VerifierDescriptor:
    return VerifierDescriptor(name="ref", kind="reference", threshold=0.5)


def make_random_table(
    rng: np.random.Generator,
    n_morphs: int = 4,
    attempts: int = 3,
    backends: tuple[str, ...] = ("b1",),
    factors: tuple[MorphFactor, ...] = (MorphFactor.M100,),
    fail_prob: float = 0.0,
    gender_pairs: tuple[str, ...] = ("FF",),
) -> TrialTable:
    """Complete random trial table: every (morph, attempt, contributor,
    backend) combination present, scores uniform in [-1, 1], and a score
    replaced by an acquire failure with probability fail_prob."""
    rows = []
    for m in range(n_morphs):
        factor = factors[int(rng.integers(len(factors)))]
        pair = gender_pairs[int(rng.integers(len(gender_pairs)))]
        for attempt in range(1, attempts + 1):
            for contributor in ("S1", "S2"):
                for backend in backends:
                    score = float(rng.uniform(-1.0, 1.0))
                    rows.append(
                        TrialRow(
                            morph_id=f"m{m:03d}",
                            attack_type=factor,
                            attempt=attempt,
                            contributor=contributor,
                            backend=backend,
                            score=None if rng.uniform() < fail_prob else score,
                            device="dev",
                            language="lang",
                            gender_pair=pair,
                        )
                    )
    return TrialTable(rows=tuple(rows))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(report, "when", "call") == "call":
                name = nodeid.split("::")[-1]
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append(f"ACCEPTANCE {name}: {status}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
