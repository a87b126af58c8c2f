import hashlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_pairing_count
from voicemorph.audio import AudioSignal, read_wav
from voicemorph.corpus import Manifest, RecordingMeta
from voicemorph.errors import EmptyAudioError, SampleRateMismatchError
from voicemorph.morphing import (
    MorphFactor,
    MorphMode,
    MorphSpec,
    PairingPolicy,
    batch_morph,
    generate_pairings,
    load_morph_manifest,
    morph,
    select_portion_length,
)


def _sig(values, rate=16000):
    return AudioSignal(samples=np.asarray(values, dtype=np.float64), sample_rate=rate)


class TestPortionLength:
    @pytest.mark.parametrize(
        "n2,factor,expected",
        [
            (100, MorphFactor.M25, 25),
            (100, MorphFactor.M100, 100),
            (7, MorphFactor.M50, 3),
            (4, MorphFactor.M75, 3),
        ],
    )
    def test_floor_of_proportion(self, n2, factor, expected):
        assert select_portion_length(n2, factor) == expected

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            select_portion_length(0, MorphFactor.M25)


S1 = [0.2, 0.4, 0.6, 0.8]
S2 = [0.6, 0.2, 0.2, 0.4]


class TestMorph:
    def test_worked_example_portion_average(self):
        out, p, padded = morph(_sig(S1), _sig(S2), MorphFactor.M50)
        assert (p, padded) == (2, 4)
        # exact at working precision: per-sample means, then passthrough
        expected = [(0.2 + 0.6) / 2, (0.4 + 0.2) / 2, 0.6, 0.8]
        np.testing.assert_array_equal(out.samples, expected)
        np.testing.assert_allclose(out.samples, [0.4, 0.3, 0.6, 0.8], atol=1e-15)

    def test_worked_example_literal_halving(self):
        out, _, _ = morph(_sig(S1), _sig(S2), MorphFactor.M50, MorphMode.LITERAL_HALVING)
        expected = [(0.2 + 0.6) / 2, (0.4 + 0.2) / 2, 0.6 / 2, 0.8 / 2]
        np.testing.assert_array_equal(out.samples, expected)
        np.testing.assert_allclose(out.samples, [0.4, 0.3, 0.3, 0.4], atol=1e-15)

    def test_self_morph_identity(self):
        rng = np.random.default_rng(0)
        x = _sig(rng.uniform(-1, 1, 500))
        out, p, padded = morph(x, x, MorphFactor.M100)
        assert p == padded == 500
        np.testing.assert_array_equal(out.samples, x.samples)

    def test_portion_from_original_second_length(self):
        # second signal shorter; p comes from its pre-padding length
        s1 = _sig([0.2, 0.4, 0.6, 0.8])
        s2 = _sig([0.5, 0.5])
        out, p, padded = morph(s1, s2, MorphFactor.M100)
        assert (p, padded) == (2, 4)
        np.testing.assert_array_equal(
            out.samples, [(0.2 + 0.5) / 2, (0.4 + 0.5) / 2, 0.6, 0.8]
        )

    def test_rate_mismatch(self):
        with pytest.raises(SampleRateMismatchError):
            morph(_sig([0.1], 16000), _sig([0.1], 8000), MorphFactor.M100)

    def test_empty_rejected(self):
        with pytest.raises(EmptyAudioError):
            morph(_sig([]), _sig([0.1]), MorphFactor.M100)

    @given(
        st.lists(st.floats(-1.0, 1.0, width=32), min_size=1, max_size=50),
        st.lists(st.floats(-1.0, 1.0, width=32), min_size=1, max_size=50),
        st.sampled_from(list(MorphFactor)),
        st.sampled_from(list(MorphMode)),
    )
    @settings(max_examples=80, deadline=None)
    def test_bounded_and_structured(self, xs, ys, factor, mode):
        s1, s2 = _sig(xs), _sig(ys)
        out, p, padded = morph(s1, s2, factor, mode)
        assert len(out) == padded == max(len(xs), len(ys))
        assert np.max(np.abs(out.samples)) <= 1.0
        padded1 = np.zeros(padded)
        padded1[: len(xs)] = xs
        padded2 = np.zeros(padded)
        padded2[: len(ys)] = ys
        # prefix is the exact mean of padded inputs
        np.testing.assert_array_equal(out.samples[:p], (padded1[:p] + padded2[:p]) / 2.0)
        if mode is MorphMode.PORTION_AVERAGE:
            np.testing.assert_array_equal(out.samples[p:], padded1[p:])
        else:
            np.testing.assert_array_equal(out.samples[p:], padded1[p:] / 2.0)


def make_record(subject, gender, sentence="S1", device="phone", language="eng", session=1):
    return RecordingMeta(
        subject_id=subject,
        gender=gender,
        device=device,
        language=language,
        session=session,
        sentence_id=sentence,
        path=Path(f"/data/{subject}_{sentence}.wav"),
        sample_rate=16000,
    )


class TestGeneratePairings:
    def test_two_subjects_ordered_pairs(self):
        m = Manifest(records=[make_record("a", "F"), make_record("b", "F")])
        specs = generate_pairings(m, PairingPolicy("FF", factors=(MorphFactor.M100,)))
        assert [(s.first.subject_id, s.second.subject_id) for s in specs] == [
            ("a", "b"),
            ("b", "a"),
        ]

    def test_ff_mode_ignores_males(self):
        records = [make_record(f"f{i}", "F") for i in range(3)]
        records += [make_record(f"m{i}", "M") for i in range(2)]
        specs = generate_pairings(
            Manifest(records=records), PairingPolicy("FF", factors=(MorphFactor.M100,))
        )
        assert len(specs) == 6  # 3 * 2 ordered pairs

    def test_combined_pools_ff_and_mm(self):
        records = [make_record(f"f{i}", "F") for i in range(3)]
        records += [make_record(f"m{i}", "M") for i in range(2)]
        specs = generate_pairings(
            Manifest(records=records), PairingPolicy("Combined", factors=(MorphFactor.M100,))
        )
        assert len(specs) == 6 + 2
        assert all(s.gender_pair in ("FF", "MM") for s in specs)

    def test_count_law_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            records = []
            n_subjects = int(rng.integers(2, 10))
            sentences = [f"S{k}" for k in range(1, int(rng.integers(1, 4)) + 1)]
            for i in range(n_subjects):
                gender = "F" if rng.uniform() < 0.5 else "M"
                for snt in sentences:
                    records.append(make_record(f"s{i:02d}", gender, sentence=snt))
            n_factors = int(rng.integers(1, 5))
            factors = tuple(list(MorphFactor)[:n_factors])
            for mode in ("FF", "MM", "Combined"):
                specs = generate_pairings(
                    Manifest(records=records), PairingPolicy(mode, factors=factors)
                )
                assert len(specs) == oracle_pairing_count(records, mode, n_factors)

    def test_order_invariance(self):
        records = [make_record(f"s{i}", "F") for i in range(4)]
        m1 = Manifest(records=records)
        m2 = Manifest(records=list(reversed(records)))
        key = lambda s: (s.first.subject_id, s.second.subject_id, s.factor.name)
        assert [key(s) for s in generate_pairings(m1, PairingPolicy("FF"))] == [
            key(s) for s in generate_pairings(m2, PairingPolicy("FF"))
        ]

    def test_same_cell_required(self):
        a = make_record("a", "F", sentence="S1")
        b = make_record("b", "F", sentence="S2")
        with pytest.raises(ValueError):
            MorphSpec(first=a, second=b, factor=MorphFactor.M100)


@pytest.fixture(scope="module")
def small_specs(corpus_manifest):
    pool = [r for r in corpus_manifest.records if r.sentence_id == "S1"][:4]
    manifest = Manifest(records=pool)
    return generate_pairings(manifest, PairingPolicy("Combined", factors=(MorphFactor.M50,)))


class TestBatchMorph:
    def test_one_file_per_spec(self, small_specs, tmp_path):
        result = batch_morph(small_specs, tmp_path)
        assert result.ok
        assert len(result.records) == len(small_specs)
        assert len(list(tmp_path.glob("*.wav"))) == len(small_specs)
        rows = load_morph_manifest(result.manifest_path)
        assert [r.morph_id for r in rows] == [rec.spec.morph_id for rec in result.records]

    def test_partial_failure_recorded(self, small_specs, tmp_path):
        broken = MorphSpec(
            first=make_record("x1", "F", device="synth", language="synthetic"),
            second=make_record("x2", "F", device="synth", language="synthetic"),
            factor=MorphFactor.M50,
        )
        result = batch_morph(list(small_specs) + [broken], tmp_path)
        assert not result.ok
        assert len(result.records) == len(small_specs)
        assert len(result.failures) == 1
        assert result.failures[0][0] == broken.morph_id

    def test_rerun_byte_identical(self, small_specs, tmp_path):
        digest = lambda d: {
            p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())
        }
        batch_morph(small_specs, tmp_path / "a")
        first = digest(tmp_path / "a")
        batch_morph(small_specs, tmp_path / "a")  # rerun over the existing dir
        batch_morph(small_specs, tmp_path / "b", jobs=4)
        assert digest(tmp_path / "a") == first == digest(tmp_path / "b")

    def test_morph_wavs_decode_within_quantization(self, small_specs, tmp_path):
        result = batch_morph(small_specs, tmp_path)
        for rec in result.records:
            sig = read_wav(rec.path)
            assert len(sig) == rec.padded_len
            assert np.max(np.abs(sig.samples)) <= 1.0
