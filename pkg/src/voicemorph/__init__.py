"""Time-domain voice morphing attacks and a speaker-verification
vulnerability evaluation harness."""

from .audio import AudioSignal, length_difference, read_wav, write_wav, zero_pad_pair
from .backends import (
    AcquireResult,
    Embedding,
    ReferenceConfig,
    VerifierDescriptor,
    cosine_similarity,
    embed,
    embed_path,
    external_embed,
    reference_embed,
)
from .corpus import (
    Manifest,
    RecordingMeta,
    SynthConfig,
    SynthSpeakerProfile,
    load_manifest,
    save_manifest,
    synth_corpus,
    validate_manifest,
)
from .evaluation import (
    HistogramData,
    ProbeMode,
    ProtocolConfig,
    histogram_data,
    run_baseline,
    run_vulnerability,
)
from .metrics import (
    GmapCapacity,
    GmapConfig,
    ScoreSet,
    TrialRow,
    TrialTable,
    eer,
    fmmpmr,
    fmr_fnmr,
    gmap,
    map_matrix,
    mmpmr,
    threshold_at_fmr,
)
from .morphing import (
    MorphFactor,
    MorphMode,
    MorphRecord,
    MorphSpec,
    PairingPolicy,
    batch_morph,
    generate_pairings,
    morph,
    select_portion_length,
)

__version__ = "0.1.0"
