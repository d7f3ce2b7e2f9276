import dataclasses
import math
import random

import numpy as np
import pytest

from dialect_asr.decoder import (
    DecodeError,
    DecoderConfig,
    Hypothesis,
    NBestList,
    PosteriorMatrix,
    build_prefix_tree,
    collect_pron_usage,
    decode,
    decode_many,
    expand_output,
    forced_align,
    read_nbest,
    read_posteriors,
    simulate_posteriors,
    write_nbest,
    write_posteriors,
)
from dialect_asr.lexicon import LexiconEntry
from dialect_asr.lm import CliticTable, InterpolatedScorer, merge_clitics_in_corpus, train_lm
from oracles import exhaustive_decode

INF = math.inf
OPEN = DecoderConfig(beam_width=INF, max_active=INF, n_best=INF)
PHONES = ("a", "b", "c", "d")


def entry(word, *prons):
    if isinstance(prons[0], str):
        prons = ((prons[0], 1.0),)
    return LexiconEntry(word, tuple((tuple(p.split()), w) for p, w in prons))


def utterance(lex_index, words, phone_set=PHONES, fpp=2, noise=0.0, seed=0):
    phones = [p for w in words for p in lex_index[w][0][0]]
    return simulate_posteriors(phones, phone_set, fpp, noise, seed)


def test_simulate_noiseless_and_rows():
    post = simulate_posteriors(["a", "b"], PHONES, frames_per_phone=3, noise=0.0, seed=1)
    assert set(np.unique(post.frames)) <= {0.0, 1.0}
    assert np.all(post.frames.sum(axis=1) == 1.0)
    noisy = simulate_posteriors(["a", "b", "c"] * 5, PHONES, 3, 0.4, seed=2)
    assert np.allclose(noisy.frames.sum(axis=1), 1.0, atol=1e-9)
    assert noisy.frames.max() == pytest.approx(0.6)
    again = simulate_posteriors(["a", "b", "c"] * 5, PHONES, 3, 0.4, seed=2)
    assert np.array_equal(noisy.frames, again.frames)
    # jitter keeps each phone within one frame of the nominal duration
    assert 15 * 2 <= noisy.num_frames <= 15 * 4
    assert simulate_posteriors([], PHONES).num_frames == 0
    for kw in ({"noise": 1.0}, {"frames_per_phone": 0}):
        with pytest.raises(ValueError):
            simulate_posteriors(["a"], PHONES, **kw)


def test_posterior_matrix_validation(tmp_path):
    with pytest.raises(ValueError):
        PosteriorMatrix(("a", "b"), np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        PosteriorMatrix(("a", "a"), np.array([[0.5, 0.5]]))
    post = simulate_posteriors(["a", "c"], PHONES, 2, 0.3, seed=4)
    write_posteriors(post, tmp_path / "p.txt")
    back = read_posteriors(tmp_path / "p.txt")
    assert back.phone_set == PHONES and np.array_equal(back.frames, post.frames)


def test_prefix_tree_examples():
    tree = build_prefix_tree([entry("rot", "a b c"), entry("rat", "a b c")])
    assert len(tree.word_ends()) == 1
    assert tree.nodes[tree.word_ends()[0]].words == [("rat", 1.0), ("rot", 1.0)]
    single = build_prefix_tree([entry("x", "a b c")])
    assert single.depth() == 3 and len(single.word_ends()) == 1
    with pytest.raises(ValueError):
        build_prefix_tree([])


def test_prefix_tree_paths_reproduce_lexicon():
    rng = random.Random(3)
    lex = []
    for i in range(50):
        prons = {tuple(rng.choice("abcdef") for _ in range(rng.randint(1, 4))) for _ in range(rng.randint(1, 3))}
        lex.append(LexiconEntry(f"w{i}", tuple((p, 1.0) for p in sorted(prons))))
    tree = build_prefix_tree(lex)
    expected = sorted((p, e.word, w) for e in lex for p, w in e.prons)
    assert sorted(tree.paths()) == expected
    for n in tree.nodes:  # deterministic: one child per phone
        assert len(set(n.children)) == len(n.children)


def small_lexicon():
    return [
        entry("ab", "a b"),
        entry("ba", ("b a", 1.0), ("b b", 0.5)),
        entry("cad", "c a d"),
        entry("dc", "d c"),
        entry("dd", "d c"),  # homophone of dc
    ]


@pytest.mark.parametrize("seed", range(6))
def test_open_beam_equals_exhaustive_search(seed):
    rng = random.Random(seed)
    lex = small_lexicon()
    words = [e.word for e in lex]
    lm = train_lm([tuple(rng.choice(words) for _ in range(rng.randint(1, 3))) for _ in range(20)], order=2)
    frames = np.array([np.random.default_rng(seed).dirichlet([0.5] * 4) for _ in range(rng.randint(4, 13))])
    frames = np.maximum(frames, 1e-12)
    post = PosteriorMatrix(PHONES, frames / frames.sum(axis=1, keepdims=True))
    cfg = DecoderConfig(beam_width=INF, max_active=INF, n_best=INF, lm_weight=rng.uniform(0.5, 2),
                        word_insertion_penalty=rng.uniform(-1, 1), min_frames_per_phone=2)
    nb = decode(post, build_prefix_tree(lex), lm, cfg)
    col = {p: k for k, p in enumerate(PHONES)}
    lexicon = {e.word: list(e.prons) for e in lex}
    oracle = exhaustive_decode(np.log10(post.frames), col, lexicon, lm, 3, cfg.lm_weight,
                               cfg.word_insertion_penalty, min_frames=2)
    assert [h.words for h in nb.hyps] == [o[0] for o in oracle]
    for h, (_, total, ac, lms) in zip(nb.hyps, oracle):
        assert h.total == pytest.approx(total, abs=1e-9)
        assert h.acoustic_score == pytest.approx(ac, abs=1e-9)
        assert h.lm_score == pytest.approx(lms, abs=1e-9)


def test_noiseless_single_word():
    lex = [entry("ab", "a b"), entry("cd", "c d")]
    lm = train_lm([("ab",), ("cd",)], order=2)
    nb = decode(utterance({e.word: e.prons for e in lex}, ["cd"]), build_prefix_tree(lex), lm, OPEN)
    assert nb.best().words == ("cd",)
    assert nb.best().acoustic_score == 0.0


def test_nbest_sorted_unique_capped():
    lex = small_lexicon()
    lm = train_lm([("ab", "cad"), ("ba", "dc")], order=2)
    post = utterance({e.word: e.prons for e in lex}, ["ab", "cad"], noise=0.5, seed=3)
    nb = decode(post, build_prefix_tree(lex), lm, DecoderConfig(beam_width=INF, max_active=INF, n_best=7))
    assert len(nb.hyps) == 7
    keys = [(-round(h.total, 9), h.words) for h in nb.hyps]
    assert keys == sorted(keys) and len({h.words for h in nb.hyps}) == 7
    for h in nb.hyps:
        assert h.total == pytest.approx(h.acoustic_score + h.lm_score, abs=1e-12)


def test_wider_beam_keeps_rank_one():
    rng = random.Random(8)
    lex = small_lexicon()
    words = [e.word for e in lex]
    lm = train_lm([tuple(rng.choice(words) for _ in range(3)) for _ in range(30)], order=3)
    tree = build_prefix_tree(lex)
    index = {e.word: e.prons for e in lex}
    for seed in range(5):
        post = utterance(index, [rng.choice(words) for _ in range(3)], noise=0.6, seed=seed)
        prev = None
        for beam in (1.0, 3.0, 8.0, INF):
            try:
                cfg = DecoderConfig(beam_width=beam, max_active=INF, n_best=INF, min_frames_per_phone=2)
                nb = decode(post, tree, lm, cfg)
            except DecodeError:
                assert prev is None
                continue
            if prev is not None:
                assert prev.words in {h.words for h in nb.hyps}
                assert nb.best().total >= prev.total - 1e-9
            prev = nb.best()


def test_scores_decompose_by_forced_alignment():
    lex = small_lexicon()
    lm = train_lm([("ab", "ba"), ("cad", "dc", "ab")], order=3)
    post = utterance({e.word: e.prons for e in lex}, ["cad", "ba"], noise=0.4, seed=5)
    cfg = DecoderConfig(beam_width=INF, max_active=INF, n_best=20, lm_weight=1.3, word_insertion_penalty=-0.2)
    for h in decode(post, build_prefix_tree(lex), lm, cfg).hyps:
        ac, prons = forced_align(post, h.words, lex)
        assert ac == pytest.approx(h.acoustic_score, abs=1e-6)
        assert len(prons) == len(h.words)
        assert lm.score_sentence(h.words) == pytest.approx(h.lm_score, abs=1e-6)
        assert h.total == pytest.approx(h.acoustic_score + 1.3 * h.lm_score - 0.2 * len(h.words), abs=1e-9)


def test_forced_align_picks_pronunciation_and_usage():
    lex = small_lexicon()
    index = {e.word: e.prons for e in lex}
    post = simulate_posteriors(["b", "b"], PHONES, 2, 0.0, seed=0)
    score, prons = forced_align(post, ["ba"], lex)
    assert prons == [("b", "b")] and score == pytest.approx(math.log10(0.5))
    usage = collect_pron_usage([(post, ["ba"]), (utterance(index, ["ba"]), ["ba"]), (post, ["zzz"])], lex)
    assert usage == {("ba", ("b", "b")): 1, ("ba", ("b", "a")): 1}
    assert forced_align(post, [], lex) == (-INF, [])


def test_noiseless_sentences_round_trip_through_expansion():
    lex = [
        entry("haben#wir", "h e m"),
        entry("haben", "h e n d"),
        entry("gesagt", "g s e i t"),
        entry("schwimm+", "s v i m"),
        entry("bad", "b a d"),
        entry("im", "i m"),
    ]
    phones = sorted({p for e in lex for pr, _ in e.prons for p in pr})
    table = CliticTable(frozenset({"haben#wir"}))
    text = [("haben", "wir", "gesagt"), ("im", "schwimm+", "bad"), ("haben", "gesagt")]
    merged = train_lm(merge_clitics_in_corpus(text, table), order=3)
    unmerged = train_lm(text, order=3)
    scorer = InterpolatedScorer(merged, unmerged, table)
    tree = build_prefix_tree(lex)
    index = {e.word: e.prons for e in lex}
    for tokens, ref in [
        (["haben#wir", "gesagt"], ("haben", "wir", "gesagt")),
        (["im", "schwimm+", "bad"], ("im", "schwimmbad")),
    ]:
        post = utterance(index, tokens, phone_set=phones, fpp=3)
        best = decode(post, tree, scorer, DecoderConfig(beam_width=INF, max_active=INF)).best()
        assert list(best.words) == tokens
        assert expand_output(best) == ref


def test_expand_output_examples():
    assert expand_output(["haben#wir", "gesagt"]) == ("haben", "wir", "gesagt")
    assert expand_output(["schwimm+", "bad"]) == ("schwimmbad",)
    assert expand_output(("ganz", "normal")) == ("ganz", "normal")


@pytest.mark.parametrize("cap", [1, 2, 3])
def test_word_cap_equals_truncated_oracle(cap):
    lex = [entry("x", "a"), entry("y", "b"), entry("xy", "a b")]
    lm = train_lm([("x", "y"), ("xy",), ("y", "x", "y")], order=2)
    post = utterance({e.word: e.prons for e in lex}, ["x", "y", "x", "y"], fpp=1, noise=0.3, seed=cap)
    nb = decode(post, build_prefix_tree(lex), lm, dataclasses.replace(OPEN, max_words=cap))
    oracle = exhaustive_decode(np.log10(post.frames), {p: k for k, p in enumerate(PHONES)},
                               {e.word: list(e.prons) for e in lex}, lm, cap)
    assert [h.words for h in nb.hyps] == [o[0] for o in oracle]
    assert max(len(h.words) for h in nb.hyps) <= cap


def test_decode_errors():
    lex = [entry("ab", "a b")]
    lm = train_lm([("ab",)], order=2)
    tree = build_prefix_tree(lex)
    with pytest.raises(DecodeError, match="not in the posterior phone set"):
        decode(simulate_posteriors(["x"], ("x", "y")), tree, lm)
    with pytest.raises(DecodeError, match="wider beam"):
        decode(simulate_posteriors(["c", "c"], PHONES, 2), tree, lm)
    with pytest.raises(DecodeError):
        decode(simulate_posteriors([], PHONES), tree, lm)
    for kw in ({"n_best": 0}, {"beam_width": 0}, {"max_active": 0}, {"min_frames_per_phone": 0}, {"max_words": 0}):
        with pytest.raises(ValueError):
            DecoderConfig(**kw)


def test_decode_many_parallel_and_skip(tmp_path):
    lex = small_lexicon()
    index = {e.word: e.prons for e in lex}
    lm = train_lm([("ab", "cad"), ("ba",)], order=2)
    tree = build_prefix_tree(lex)
    utts = [(f"u{i}", utterance(index, w, noise=0.3, seed=i)) for i, w in enumerate([["ab"], ["cad", "ba"], ["dc"]])]
    serial = decode_many(utts, tree, lm, OPEN)
    assert decode_many(utts, tree, lm, OPEN, workers=2) == serial
    bad = [("bad", simulate_posteriors(["c"], PHONES, 1))]
    with pytest.raises(DecodeError):
        decode_many(bad, tree, lm)
    assert decode_many(bad, tree, lm, skip_failures=True) == [NBestList("bad", [])]

    write_nbest(serial, tmp_path / "nb.jsonl", extra={("u0", 1): {"note": 1}})
    first = (tmp_path / "nb.jsonl").read_text(encoding="utf-8").splitlines()[0]
    assert '"utt": "u0", "rank": 1' in first and '"note": 1' in first
    assert read_nbest(tmp_path / "nb.jsonl") == serial
    (tmp_path / "bad.jsonl").write_text('{"utt": "x"}\n', encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        read_nbest(tmp_path / "bad.jsonl")
    assert Hypothesis(("a",), 0.0, 0.0, 0.0).words == ("a",)
