import itertools
import math
import random
from collections import Counter

import pytest

from dialect_asr.lm import (
    BOS,
    EOS,
    UNK,
    KneserNeyLM,
    count_ngrams,
    estimate_kneser_ney,
    perplexity,
    train_lm,
)
from dialect_asr.synthetic import SyntheticDialectSpec, generate_synthetic
from oracles import KNOracle, random_corpus

ABABA = [("a", "b", "a", "b", "a")]
FLOOR = 1 - 1e-7


def assert_normalized(lm: KneserNeyLM, tol=1e-6):
    """Every observed context sums to one over the predictable vocabulary."""
    words = lm.predictable_vocab
    for ctx in [()] + lm.contexts():
        total = sum(10 ** lm.log10_prob(w, ctx) for w in words)
        assert total == pytest.approx(1.0, abs=tol), ctx


def test_count_single_token_sentence():
    c = count_ngrams([("a",)], 2)
    assert c.of_order(1) == {("a",): 1, (EOS,): 1}
    assert c.of_order(2) == {(BOS, "a"): 1, ("a", EOS): 1}
    assert len(count_ngrams([], 3)) == 0


def test_count_rejects_bad_order():
    for order in (0, 6):
        with pytest.raises(ValueError):
            count_ngrams([("a",)], order)


def test_counts_match_sliding_window_recount():
    rng = random.Random(4)
    corpus = random_corpus(rng, 12, 200)
    got = count_ngrams(corpus, 3).counts
    oracle = Counter()
    for sent in corpus:
        seq = ("<s>",) + sent + ("</s>",)
        for n in (1, 2, 3):
            for i in range(len(seq) - n + 1):
                oracle[seq[i : i + n]] += 1
    del oracle[("<s>",)]
    assert got == dict(oracle)
    # an n-gram never outnumbers the (n-1)-gram context it extends
    for g, c in got.items():
        if len(g) >= 2 and g[0] != BOS:
            assert c <= got[g[:-1]]


def test_ababa_hand_values():
    lm = train_lm(ABABA, order=2)
    p = lambda w, h=(): 10 ** lm.log10_prob(w, h)
    # continuation counts: a has left neighbours {<s>, b}, b and </s> have {a}
    assert p("a") == pytest.approx(0.5 * FLOOR, abs=1e-12)
    assert p("b") == pytest.approx(0.25 * FLOOR, abs=1e-12)
    assert p(EOS) == pytest.approx(0.25 * FLOOR, abs=1e-12)
    # p(b|a) = (2 - .75)/3 + (.75*2/3) * p(b) = 0.541667
    assert p("b", ["a"]) == pytest.approx(1.25 / 3 + 0.5 * 0.25 * FLOOR, abs=1e-9)
    assert p("b", ["a"]) == pytest.approx(0.541667, abs=1e-6)
    # p(a|b) = (2 - .75)/2 + (.75/2) * p(a) = 0.8125
    assert p("a", ["b"]) == pytest.approx(0.8125, abs=1e-6)
    assert 10 ** lm.backoffs[("a",)] == pytest.approx(0.5, abs=1e-12)
    assert 10 ** lm.backoffs[("b",)] == pytest.approx(0.375, abs=1e-12)
    assert 10 ** lm.backoffs[(BOS,)] == pytest.approx(0.75, abs=1e-12)
    assert p(UNK) == pytest.approx(1e-7)
    assert lm.probs[(BOS,)] == -99.0
    assert_normalized(lm)


@pytest.mark.parametrize("order", [1, 2, 3])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_recursive_oracle(order, seed):
    rng = random.Random(seed)
    corpus = random_corpus(rng, 6, 40, max_len=6)
    lm = train_lm(corpus, order=order)
    oracle = KNOracle(corpus, order)
    words = oracle.vocab
    histories = [()] + [tuple(h) for n in range(1, order) for h in itertools.product([BOS] + words, repeat=n)
                        if BOS not in h[1:]]
    for h in histories:
        for w in words:
            assert lm.log10_prob(w, h) == pytest.approx(math.log10(oracle.prob(w, h)), abs=1e-9), (w, h)


@pytest.mark.parametrize("seed", range(4))
def test_every_trained_model_normalizes(seed):
    rng = random.Random(100 + seed)
    corpus = random_corpus(rng, 10, 80)
    for order in (2, 3):
        assert_normalized(train_lm(corpus, order=order, discount=rng.uniform(0.1, 0.9)))


def test_single_word_corpus_normalizes():
    lm = train_lm([("x",)] * 5, order=3)
    assert_normalized(lm)
    total = 10 ** lm.log10_prob("x", ["x"]) + 10 ** lm.log10_prob(EOS, ["x"])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_probabilities_in_unit_interval():
    lm = train_lm(random_corpus(random.Random(9), 15, 100), order=3)
    assert all(p <= 0.0 for g, p in lm.probs.items() if g != (BOS,))


def test_estimation_errors():
    with pytest.raises(ValueError):
        estimate_kneser_ney(count_ngrams([], 2))
    for d in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            estimate_kneser_ney(count_ngrams(ABABA, 2), discount=d)


def test_unknown_words_get_floor():
    lm = train_lm(ABABA, order=2)
    assert lm.log10_prob("zzz", ["a"]) == lm.log10_prob(UNK, ["a"])
    no_unk = train_lm(ABABA, order=2, unk_floor=0.0)
    with pytest.raises(KeyError):
        no_unk.log10_prob("zzz")


def test_removing_a_word_never_raises_its_probability():
    rng = random.Random(21)
    for _ in range(10):
        corpus = random_corpus(rng, 8, 30)
        word = rng.choice(sorted({w for s in corpus for w in s}))
        before = train_lm(corpus, order=3).log10_prob(word)
        pruned = [tuple(w for w in s if w != word) for s in corpus]
        after = train_lm(pruned, order=3).log10_prob(word)
        assert after <= before


def test_uniform_unigram_perplexity():
    V = 7
    words = [f"w{i}" for i in range(V - 1)]
    probs = {(w,): math.log10(1 / V) for w in words + [EOS]}
    probs[(BOS,)] = -99.0
    lm = KneserNeyLM(1, probs, {})
    text = [tuple(random.Random(3).choices(words, k=5)) for _ in range(4)]
    assert perplexity(lm, text) == pytest.approx(V, abs=1e-6)


def test_perplexity_hand_sum_and_errors():
    lm = train_lm(ABABA, order=2)
    sent = ("a", "b")
    total = lm.log10_prob("a", [BOS]) + lm.log10_prob("b", [BOS, "a"]) + lm.log10_prob(EOS, [BOS, "a", "b"])
    assert perplexity(lm, [sent]) == pytest.approx(10 ** (-total / 3), rel=1e-12)
    with pytest.raises(ValueError):
        perplexity(lm, [])


def test_train_perplexity_below_held_out():
    for seed in range(3):
        sents = generate_synthetic(SyntheticDialectSpec(seed=seed), 100, n_lm=100).lm_text
        rng = random.Random(seed)
        rng.shuffle(sents)
        train, held = sents[:150], sents[150:]
        lm = train_lm(train, order=3)
        assert perplexity(lm, train) <= perplexity(lm, held)
