import random
from collections import defaultdict

import pytest

from dialect_asr.corpus import extract_mappings, read_monolingual, read_parallel
from dialect_asr.decoder import read_posteriors
from dialect_asr.g2p import read_pairs
from dialect_asr.lexicon import read_clitic_inventory, read_embeddings
from dialect_asr.synthetic import (
    SyntheticDialectSpec,
    generate_synthetic,
    letters_to_phones,
    read_test_set,
    to_dialect,
    write_synthetic,
)


def test_letter_rules_longest_match():
    assert letters_to_phones("schuel") == ("sh", "u", "e", "l")
    assert letters_to_phones("zwei") == ("ts", "v", "ai")
    assert letters_to_phones("") == ()


def test_contraction_and_suffix_rules():
    spec = SyntheticDialectSpec()
    rng = random.Random(0)
    assert to_dialect(spec, ("haben", "wir", "gesagt"), rng)[0] == "hemmer"
    assert spec.dialect_word("gläschen") == "gläsli"
    assert spec.dialect_word("gelesen") == "geläse"
    assert spec.dialect_word("haustuer") == "huustüre"
    assert spec.dialect_word("unbekannt") == "unbekannt"


def test_generation_deterministic_per_seed():
    a = generate_synthetic(SyntheticDialectSpec(seed=3), 40, n_test=5, n_lm=20)
    b = generate_synthetic(SyntheticDialectSpec(seed=3), 40, n_test=5, n_lm=20)
    c = generate_synthetic(SyntheticDialectSpec(seed=4), 40, n_test=5, n_lm=20)
    assert (a.train, a.test, a.lm_text) == (b.train, b.test, b.lm_text)
    assert a.train != c.train
    assert len(a.train) == 40 and len(a.test) == 5 and len(a.lm_text) == 60
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticDialectSpec(), 0)


def test_every_dialect_word_has_a_pronunciation():
    data = generate_synthetic(SyntheticDialectSpec(seed=1), 80, n_test=10)
    words = {w for d, _ in data.train + data.test for w in d}
    assert words <= set(data.pronunciations)
    assert {p for ph in data.pronunciations.values() for p in ph} == set(data.phone_set)


def test_novel_compounds_only_in_test():
    spec = SyntheticDialectSpec(seed=2)
    ordered = ["".join(c) for c in spec.compounds()]
    compounds = set(ordered)
    data = generate_synthetic(spec, 200, n_test=20)
    train_c = {w for _, s in data.train for w in s} & compounds
    test_c = {w for _, s in data.test for w in s} & compounds
    assert test_c and not (train_c & test_c)
    in_vocab = generate_synthetic(spec, 200, n_test=20, novel_compounds_in_test=False)
    # without held-out nouns the test set only uses compounds seen in training
    assert {w for _, s in in_vocab.test for w in s} & compounds <= set(ordered[::2])


def test_mapping_extraction_recovers_translations():
    spec = SyntheticDialectSpec.unambiguous(seed=5)
    data = generate_synthetic(spec, 300, n_test=1)
    best = {}
    for c in extract_mappings(data.train, 5):
        best.setdefault(c.dialect_word, c.standard_word)
    for std, dia in [("kopf", "grind"), ("kneipe", "beiz"), ("heute", "hüt"), ("gestern", "geschter")]:
        assert best[dia] == std


def test_homophones_only_in_default_grammar():
    def inverse(spec):
        inv = defaultdict(set)
        for std, dia in spec.translations.items():
            inv[dia].add(std)
        return {d: s for d, s in inv.items() if len(s) > 1}

    assert inverse(SyntheticDialectSpec()) == {"hend": {"haben", "habt"}, "sind": {"sind", "seid"}}
    assert inverse(SyntheticDialectSpec.unambiguous()) == {}


def test_write_and_read_back(tmp_path):
    data = generate_synthetic(SyntheticDialectSpec(seed=0), 20, n_test=3, n_lm=10)
    paths = write_synthetic(data, tmp_path, frames_per_phone=2, noise=0.0, seed=9)
    assert read_parallel(paths["parallel"]) == data.train
    assert read_monolingual(paths["lm_text"]) == data.lm_text
    assert dict(read_pairs(paths["pronunciations"])) == data.pronunciations
    assert read_clitic_inventory(paths["clitics"]) == data.clitics
    assert set(read_embeddings(paths["embeddings"]).vectors) == set(data.pronunciations)
    rows = read_test_set(paths["test_set"])
    assert [r[2] for r in rows] == [std for _, std in data.test]
    for (utt, post_path, _), (dia, _) in zip(rows, data.test):
        post = read_posteriors(post_path)
        # noiseless one-hot frames spell out the dialect pronunciation
        best = [post.phone_set[i] for i in post.frames.argmax(axis=1)]
        collapsed = [p for k, p in enumerate(best) if k == 0 or p != best[k - 1]]
        phones = [p for w in dia for p in data.pronunciations[w]]
        assert [p for k, p in enumerate(phones) if k == 0 or p != phones[k - 1]] == collapsed
    (tmp_path / "bad.tsv").write_text("u1\tonly-two\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        read_test_set(tmp_path / "bad.tsv")
