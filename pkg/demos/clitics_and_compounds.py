"""Two LM-side tricks on a toy corpus: clitic merging and compound
splitting, then decoding a noise-free utterance that needs both.

    python3 demos/clitics_and_compounds.py
"""

from dialect_asr.corpus import word_frequencies
from dialect_asr.decoder import DecoderConfig, build_prefix_tree, decode, expand_output, simulate_posteriors
from dialect_asr.lexicon import LexiconEntry
from dialect_asr.lm import CliticTable, CompoundSplitter, InterpolatedScorer, merge_clitics_in_corpus
from dialect_asr.lm import split_compounds, train_lm
from dialect_asr.synthetic import letters_to_phones

TEXT = [
    ("haben", "wir", "das", "haus", "gesehen"),
    ("wir", "haben", "die", "tuer", "gesehen"),
    ("haben", "wir", "die", "haustuer", "gesehen"),
    ("das", "haus", "hat", "eine", "tuer"),
]


def main() -> None:
    table = CliticTable(frozenset({"haben#wir"}), lam=0.5)
    splitter = CompoundSplitter(word_frequencies(TEXT), min_part_len=3, min_part_count=2)
    split = [split_compounds(s, splitter) for s in TEXT]
    merged = merge_clitics_in_corpus(split, table)
    print("decompounded:", " ".join(split[2]))
    print("merged:      ", " ".join(merged[2]))

    lm = InterpolatedScorer(train_lm(merged, order=3), train_lm(split, order=3), table)
    # the dialect pronunciations carry the translation: hemmer -> haben#wir
    spoken = {"haben#wir": "hemmer", "die": "d", "haus+": "huus", "tuer": "türe", "gesehen": "gseh",
              "das": "s", "haus": "huus", "wir": "mir", "haben": "hend"}
    lex = [LexiconEntry(w, ((letters_to_phones(d), 1.0),)) for w, d in sorted(spoken.items())]
    phones = [p for d in ("hemmer", "d", "huus", "türe", "gseh") for p in letters_to_phones(d)]
    phone_set = tuple(sorted({p for e in lex for p in e.prons[0][0]}))
    post = simulate_posteriors(phones, phone_set, frames_per_phone=2, noise=0.0, seed=0)
    best = decode(post, build_prefix_tree(lex), lm, DecoderConfig(n_best=3)).best()
    print("decoded:     ", " ".join(best.words))
    print("expanded:    ", " ".join(expand_output(best)))


if __name__ == "__main__":
    main()
