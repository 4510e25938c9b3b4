"""Corpus preparation for speech translation.

Audio side: hysteresis VAD segmentation with threshold escalation, equal
splitting of over-long regions, and short-segment merging.  Text side:
cleaning, deduplication, language filtering, IBM Model 1 alignment-quality
filtering and cross-entropy-difference domain selection.
"""

from .activation import AudioBuffer, EnergyVadParams, energy_activation, read_trace, read_wav, write_trace
from .align import TranslationTable, align_viterbi, alignment_quality, filter_bottom_fraction, train_model1
from .lmselect import NGramModel, cross_entropy, moore_lewis_score, select, train_lm
from .segmenter import (
    FrameTrace,
    MergeParams,
    SegmenterParams,
    TimeSpan,
    equal_segment,
    hysteresis_regions,
    merge_segments,
    segment_audio,
)
from .textclean import BitextRecord, CleanRules, SentenceRecord, clean, deduplicate, language_filter, train_langid

__version__ = "0.1.0"
