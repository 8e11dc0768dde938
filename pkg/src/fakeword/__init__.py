"""Build partially-faked speech datasets and score word-level synthetic-speech detection."""

__version__ = "0.1.0"

from .align import (
    Alignment,
    AlignmentStep,
    EditOp,
    NormalizationPolicy,
    align_words,
    normalize,
    normalize_transcript,
    transcript_wer,
    wer,
)
from .audio import Waveform, read_wav, write_wav
from .metrics import (
    DetectionCounts,
    DetectionReport,
    FrameScore,
    WordResult,
    WordSpan,
    bucket_by_duration,
    build_report,
    decisions_from_frames,
    far,
    frame_labels,
    frr,
    group_counts,
    pool_frame_scores,
    score_detection,
    word_outcomes,
)
from .protocol import (
    BuildConfig,
    ManifestEntry,
    UtteranceRecord,
    build_dataset,
    derive_seed,
    read_corpus,
    read_manifest,
    select_words,
)
from .splice import SpliceOp, SpliceResult, crossfade_window, overlap_add_replace
from .tags import (
    Label,
    LabeledWord,
    MarkerConfig,
    TaggedTranscript,
    decode,
    encode,
    read_tagged_file,
    strip_markers,
    write_tagged_file,
)
from .vocoder import Spectrogram, StftConfig, copy_synth, griffin_lim, istft, spectral_convergence, stft
