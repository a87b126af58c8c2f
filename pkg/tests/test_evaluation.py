import shutil

import numpy as np
import pytest

from voicemorph.backends import VerifierDescriptor
from voicemorph.corpus import Manifest, RecordingMeta
from voicemorph.errors import EmptyScoresError, InsufficientDataError
from voicemorph.evaluation import (
    ProbeMode,
    ProtocolConfig,
    _probe_candidates,
    histogram_data,
    pool_scores,
    run_baseline,
    run_vulnerability,
)
from voicemorph.metrics import ScoreSet, save_trials
from voicemorph.morphing import (
    PairingPolicy,
    batch_morph,
    generate_pairings,
    load_morph_manifest,
)


@pytest.fixture(scope="module")
def morph_rows(corpus_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("morphs")
    specs = generate_pairings(corpus_manifest, PairingPolicy("Combined"))
    result = batch_morph(specs, out, jobs=4)
    assert result.ok
    return load_morph_manifest(result.manifest_path)


@pytest.fixture(scope="module")
def ref():
    return VerifierDescriptor(name="ref", kind="reference", threshold=0.5)


class TestRunBaseline:
    def test_synthetic_corpus_eer_pinned(self, corpus_manifest, ref):
        groups = run_baseline(corpus_manifest, ref)
        assert len(groups) == 1
        g = groups[0]
        # measured 0.0 on the seed-42 corpus; +-2 percentage points
        assert 0.0 <= g.eer <= 0.02
        assert g.eer < 0.10
        assert g.scores.genuine.size == 6 * 3  # 3 same-subject pairs each
        assert g.scores.impostor.size == (18 * 17) // 2 - 18

    def test_single_subject_insufficient(self, corpus_manifest, ref):
        records = [r for r in corpus_manifest.records if r.subject_id == "spk001"]
        with pytest.raises(InsufficientDataError):
            run_baseline(Manifest(records=records), ref)

    def test_subject_with_one_recording_insufficient(self, corpus_manifest, ref):
        records = [
            r
            for r in corpus_manifest.records
            if r.subject_id != "spk002" or r.sentence_id == "S1"
        ]
        with pytest.raises(InsufficientDataError, match="spk002"):
            run_baseline(Manifest(records=records), ref)

    def test_duplicate_recordings_degenerate_separability(self, corpus_manifest, ref, tmp_path):
        # two subjects, each with two byte-identical recordings
        records = []
        for rec in corpus_manifest.records:
            if rec.sentence_id != "S1" or rec.subject_id not in ("spk001", "spk002"):
                continue
            for session in (1, 2):
                copy = tmp_path / f"{rec.subject_id}_{session}.wav"
                shutil.copy(rec.path, copy)
                records.append(
                    RecordingMeta(
                        subject_id=rec.subject_id, gender=rec.gender, device=rec.device,
                        language=rec.language, session=session, sentence_id="S1",
                        path=copy, sample_rate=rec.sample_rate,
                    )
                )
        g = run_baseline(Manifest(records=records), ref)[0]
        assert np.all(g.scores.genuine >= 1.0 - 1e-12)
        assert np.all(g.scores.impostor < 1.0)
        assert g.eer == 0.0


class TestProbeSelection:
    def test_td_candidates_same_sentence_from_corpus(self, corpus_manifest, morph_rows):
        morph = morph_rows[0]
        cands = _probe_candidates(corpus_manifest, morph, morph.first_subject, ProbeMode.TEXT_DEPENDENT)
        assert cands
        corpus_paths = {r.path for r in corpus_manifest.records}
        assert all(c.path in corpus_paths for c in cands)  # probes are bona fide files
        assert all(c.sentence_id == morph.sentence_id for c in cands)
        assert all(c.path != morph.path for c in cands)  # never the morph itself

    def test_ti_candidates_exclude_morph_sentence(self, corpus_manifest, morph_rows):
        morph = morph_rows[0]
        cands = _probe_candidates(corpus_manifest, morph, morph.first_subject, ProbeMode.TEXT_INDEPENDENT)
        assert cands
        assert all(c.sentence_id != morph.sentence_id for c in cands)


class TestRunVulnerability:
    def test_row_product(self, corpus_manifest, morph_rows, ref):
        other = VerifierDescriptor(name="alt", kind="reference", threshold=0.4)
        cfg = ProtocolConfig(backends=(ref, other), attempts=3)
        run = run_vulnerability(morph_rows[:1], corpus_manifest, cfg)
        assert len(run.table) == 1 * 2 * 3 * 2  # morphs x contributors x attempts x backends
        assert not run.exclusions

    def test_full_row_count_law(self, corpus_manifest, morph_rows, ref):
        cfg = ProtocolConfig(backends=(ref,), attempts=3)
        run = run_vulnerability(morph_rows, corpus_manifest, cfg, jobs=4)
        expected = (len(morph_rows) - len({m for m, _ in run.exclusions})) * 2 * 3 * 1
        assert len(run.table) == expected == 144 * 6
        run.table.validate()

    def test_missing_probe_excludes_morph(self, corpus_manifest, morph_rows, ref):
        # a single-sentence corpus has no cross-sentence probes
        single = Manifest(records=[r for r in corpus_manifest.records if r.sentence_id == "S1"])
        s1_morphs = [m for m in morph_rows if m.sentence_id == "S1"][:3]
        cfg = ProtocolConfig(backends=(ref,), mode=ProbeMode.TEXT_INDEPENDENT)
        run = run_vulnerability(s1_morphs, single, cfg)
        assert len(run.table) == 0
        assert {m for m, _ in run.exclusions} == {m.morph_id for m in s1_morphs}

    def test_deterministic_across_jobs(self, corpus_manifest, morph_rows, ref, tmp_path):
        cfg = ProtocolConfig(backends=(ref,), attempts=3)
        a = run_vulnerability(morph_rows[:24], corpus_manifest, cfg, jobs=1)
        b = run_vulnerability(morph_rows[:24], corpus_manifest, cfg, jobs=4)
        assert a.table.rows == b.table.rows
        pa = save_trials(a.table, tmp_path / "a.csv")
        pb = save_trials(b.table, tmp_path / "b.csv")
        assert pa.read_bytes() == pb.read_bytes()

    def test_text_independent_probing(self, corpus_manifest, morph_rows, ref):
        cfg = ProtocolConfig(backends=(ref,), mode=ProbeMode.TEXT_INDEPENDENT, attempts=3)
        run = run_vulnerability(morph_rows[:4], corpus_manifest, cfg)
        assert len(run.table) == 4 * 2 * 3
        assert not run.exclusions


class TestHistogramData:
    def base(self):
        return ScoreSet(genuine=np.array([0.9, 0.8]), impostor=np.array([-0.5, 0.5]))

    def test_two_bin_counting(self, corpus_manifest, morph_rows, ref):
        cfg = ProtocolConfig(backends=(ref,), attempts=1)
        run = run_vulnerability(morph_rows[:2], corpus_manifest, cfg)
        hist = histogram_data(self.base(), run.table, bins=2)
        np.testing.assert_array_equal(hist.series["impostor"], [1, 1])
        np.testing.assert_array_equal(hist.bin_edges, [-1.0, 0.0, 1.0])

    def test_counts_conserved(self, corpus_manifest, morph_rows, ref):
        cfg = ProtocolConfig(backends=(ref,), attempts=3)
        run = run_vulnerability(morph_rows[:24], corpus_manifest, cfg)
        baseline = run_baseline(corpus_manifest, ref)[0].scores
        hist = histogram_data(baseline, run.table, bins=13)
        assert hist.series["genuine"].sum() == baseline.genuine.size
        assert hist.series["impostor"].sum() == baseline.impostor.size
        factor_rows = [r for r in run.table.rows if r.score is not None]
        assert sum(int(hist.series[f.name].sum()) for f in run.table.attack_types()) == len(factor_rows)

    def test_empty_morph_series_rejected(self):
        from voicemorph.metrics import TrialTable

        with pytest.raises(EmptyScoresError):
            histogram_data(self.base(), TrialTable(rows=()), bins=4)

    def test_morph_scores_sit_between_impostor_and_genuine(
        self, corpus_manifest, morph_rows, ref
    ):
        cfg = ProtocolConfig(backends=(ref,), attempts=3)
        run = run_vulnerability(morph_rows, corpus_manifest, cfg, jobs=4)
        baseline = run_baseline(corpus_manifest, ref)[0].scores
        morph_scores = np.array([r.score for r in run.table.rows if r.score is not None])
        assert baseline.impostor.mean() < morph_scores.mean() < baseline.genuine.mean()


def test_pool_scores_concatenates(corpus_manifest, ref):
    groups = run_baseline(corpus_manifest, ref)
    pooled = pool_scores(groups)
    assert pooled.genuine.size == sum(g.scores.genuine.size for g in groups)
