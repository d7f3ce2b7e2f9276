"""First-pass count-based language modelling."""

from .arpa import ArpaParseError, export_arpa, import_arpa
from .clitics import (
    CliticTable,
    InterpolatedScorer,
    expand_clitics,
    merge_clitics,
    merge_clitics_in_corpus,
    score_interpolated,
)
from .compounds import CompoundSplitter, join_compound_parts, split_compounds
from .kneser_ney import (
    BOS,
    EOS,
    UNK,
    KneserNeyLM,
    NGramCounts,
    count_ngrams,
    estimate_kneser_ney,
    perplexity,
    train_lm,
)
