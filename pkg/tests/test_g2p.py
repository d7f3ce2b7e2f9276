import itertools
import math
import random
from collections import Counter, defaultdict

import pytest

from dialect_asr.g2p import (
    CATEGORIES,
    G2PTestCase,
    GraphoneModel,
    NoPathError,
    evaluate_per,
    graphone_token,
    parse_graphone_token,
    read_pairs,
    read_test_cases,
    example_cases,
    train,
    transduce,
    transduce_scored,
    write_pairs,
    write_per_report,
)
from dialect_asr.lm import BOS, EOS

TINY = [("aa", ("a", "a")), ("ab", ("a", "b")), ("bb", ("b", "b"))]


def segmentations(word, phones):
    """Every monotone split into graphones with sides of length <= 2,
    never both empty."""
    if not word and not phones:
        yield []
        return
    for a in range(3):
        for b in range(3):
            if (a or b) and a <= len(word) and b <= len(phones):
                for rest in segmentations(word[a:], phones[b:]):
                    yield [(word[:a], tuple(phones[:b]))] + rest


def em_oracle(pairs, iterations):
    """EM by explicit enumeration of segmentations instead of forward-backward."""
    segs = [list(segmentations(w, tuple(p))) for w, p in pairs]
    inventory = sorted({g for ss in segs for s in ss for g in s})
    q = {g: 1 / len(inventory) for g in inventory}
    lls = []
    for it in range(iterations + 1):
        counts = defaultdict(float)
        ll = 0.0
        for ss in segs:
            weights = [math.prod(q[g] for g in s) for s in ss]
            z = sum(weights)
            ll += math.log(z)
            for s, wt in zip(ss, weights):
                for g in s:
                    counts[g] += wt / z
        lls.append(ll)
        if it < iterations:
            total = sum(counts.values())
            q = {g: counts[g] / total for g in inventory}
    return q, lls, segs


def test_segmentation_enumerator_counts():
    # a 1x1 lattice has three paths: (a|x), (a|)(|x), (|x)(a|)
    assert len(list(segmentations("a", ("x",)))) == 3


def test_em_matches_enumeration_oracle():
    model = train(TINY, order=2, em_iterations=5)
    q, lls, segs = em_oracle(TINY, 5)
    assert set(model.alignment_probs) == set(q)
    for g, p in q.items():
        assert model.alignment_probs[g] == pytest.approx(p, abs=1e-12)
    assert model.log_likelihoods == pytest.approx(lls, abs=1e-9)
    assert all(b >= a - 1e-12 for a, b in zip(lls, lls[1:]))
    assert sum(model.alignment_probs.values()) == pytest.approx(1.0, abs=1e-9)
    # Viterbi segmentation equals the exhaustive argmax
    for (word, phones), ss in zip(TINY, segs):
        best = max(math.prod(q[g] for g in s) for s in ss)
        got = model.segmentations[(word, phones)]
        assert math.prod(q[g] for g in got) == pytest.approx(best, rel=1e-12)


def test_segmentations_cover_every_pair():
    pairs = [(c.word, c.expected_phones) for c in example_cases()]
    model = train(pairs, em_iterations=3)
    for (word, phones), seg in model.segmentations.items():
        assert "".join(g for g, _ in seg) == word
        assert tuple(p for _, ph in seg for p in ph) == phones
        assert all(len(g) <= 2 and len(ph) <= 2 and (g or ph) for g, ph in seg)


def test_single_pair():
    model = train([("ab", ("a", "b"))], order=1, em_iterations=2)
    seg = model.segmentations[("ab", ("a", "b"))]
    assert "".join(g for g, _ in seg) == "ab"
    assert transduce(model, "ab") == ("a", "b")
    with pytest.raises(NoPathError, match="'zq'"):
        transduce(model, "zq")


def test_rejected_pairs_reported():
    model = train([("ab", ("a", "b")), ("", ("x",)), ("c", ())], em_iterations=1)
    assert [r[:2] for r in model.rejected] == [("", ("x",)), ("c", ())]
    with pytest.raises(ValueError):
        train([("", ("x",))])
    for kw in ({"order": 0}, {"order": 6}, {"em_iterations": 0}):
        with pytest.raises(ValueError):
            train(TINY, **kw)


def test_example_words_memorized():
    cases = example_cases()
    assert Counter(c.category for c in cases) == {c: 2 for c in CATEGORIES}
    model = train([(c.word, c.expected_phones) for c in cases])
    for c in cases:
        assert transduce(model, c.word) == c.expected_phones
    assert evaluate_per(model, cases) == {c: 0.0 for c in CATEGORIES}


def test_per_single_deletion():
    model = train([("kopf", ("g", "hr", "ih", "n"))], em_iterations=3)
    case = G2PTestCase("Translation", "kopf", ("g", "hr", "ih", "n", "t"))
    assert evaluate_per(model, [case]) == {"Translation": 20.0}
    # no path: all expected phones count as deletions
    assert evaluate_per(model, [G2PTestCase("Shortening", "zzz", ("a", "b"))]) == {"Shortening": 100.0}
    with pytest.raises(ValueError):
        evaluate_per(model, [])
    with pytest.raises(ValueError):
        G2PTestCase("Plural", "x", ("x",))


def enumerate_best(model, word):
    """Exhaustive search over graphone-token sequences that spell ``word``
    with no two letterless graphones in a row."""
    tokens = sorted(t for t in model.ngram.vocab if t not in (BOS, EOS))
    by_letters = defaultdict(list)
    for t in tokens:
        by_letters[parse_graphone_token(t)[0]].append(t)
    results = []

    def rec(pos, seq, last_empty):
        if pos == len(word):
            results.append(list(seq))
        if not last_empty:
            for t in by_letters[""]:
                rec(pos, seq + [t], True)
        for a in (1, 2):
            for t in by_letters.get(word[pos : pos + a], []) if pos + a <= len(word) else []:
                rec(pos + a, seq + [t], False)

    rec(0, [], False)
    scored = []
    for seq in results:
        hist, score = [BOS], 0.0
        for t in seq + [EOS]:
            score += model.ngram.log10_prob(t, hist)
            hist.append(t)
        phones = tuple(p for t in seq for p in parse_graphone_token(t)[1])
        if phones:
            scored.append((score, phones))
    scored.sort(key=lambda f: (-f[0], f[1]))
    return scored[0]


def test_infinite_beam_matches_enumeration():
    pairs = [(c.word, c.expected_phones) for c in example_cases()]
    model = train(pairs, order=2, em_iterations=4)
    pieces = sorted({parse_graphone_token(t)[0] for t in model.ngram.vocab if "|" in t} - {""})
    rng = random.Random(6)
    words = {"".join(rng.choice(pieces) for _ in range(2)) for _ in range(30)}
    words |= {"kopf", "bad", "zq"}
    found = 0
    for w in sorted(words):
        try:
            phones, score = transduce_scored(model, w, beam=math.inf)
        except NoPathError:
            with pytest.raises(IndexError):
                enumerate_best(model, w)
            continue
        best_score, best_phones = enumerate_best(model, w)
        assert score == pytest.approx(best_score, abs=1e-9), w
        assert phones == best_phones, w
        found += 1
    assert found >= 25


def test_beam_monotone_and_phone_set():
    pairs = [(c.word, c.expected_phones) for c in example_cases()]
    model = train(pairs, em_iterations=4)
    # words spelled out by concatenating letter sides of learned graphones
    pieces = sorted({parse_graphone_token(t)[0] for t in model.ngram.vocab if "|" in t} - {""})
    rng = random.Random(2)
    words = ["kannst", "fragt", "gläschen", "riechst"]
    words += ["".join(rng.choice(pieces) for _ in range(rng.randint(2, 4))) for _ in range(30)]
    for w in words:
        scores = []
        for b in (1, 2, 4, 16, math.inf):
            try:
                scores.append(transduce_scored(model, w, beam=b)[1])
            except NoPathError:
                # a narrow beam may keep only phoneless hypotheses
                assert not scores, (w, b)
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))
        assert set(transduce(model, w, beam=math.inf)) <= model.phone_set
    with pytest.raises(ValueError):
        transduce(model, "bad", beam=0)


def test_save_load_and_files(tmp_path):
    model = train(TINY, order=2, em_iterations=3)
    model.save(tmp_path / "g2p.json")
    back = GraphoneModel.load(tmp_path / "g2p.json")
    for w in ("aa", "ab", "bb", "abbb"):
        assert transduce_scored(back, w) == transduce_scored(model, w)
    (tmp_path / "bad.json").write_text('{"format": "other"}', encoding="utf-8")
    with pytest.raises(ValueError):
        GraphoneModel.load(tmp_path / "bad.json")

    write_pairs(TINY, tmp_path / "pairs.tsv")
    assert read_pairs(tmp_path / "pairs.tsv") == TINY
    (tmp_path / "cases.tsv").write_text("Translation\tkopf\tg hr ih n t\n\nno-category\tx\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":3:"):
        read_test_cases(tmp_path / "cases.tsv")
    write_per_report({"Translation": 20.0, "Shortening": 12.5}, tmp_path / "per.tsv")
    assert (tmp_path / "per.tsv").read_text(encoding="utf-8") == "Translation\t20.00\nShortening\t12.50\n"
    assert parse_graphone_token(graphone_token(("sch", ("sh",)))) == ("sch", ("sh",))
    assert parse_graphone_token("a|") == ("a", ())
