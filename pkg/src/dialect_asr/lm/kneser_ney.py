"""N-gram counting and interpolated Kneser-Ney estimation.

Sentences are padded with a single ``<s>``; n-grams never extend to the left
of it, which is what ``order - 1`` start pads amount to once the redundant
pad-only n-grams are dropped.  Probabilities and back-off weights are kept
as log10 values, the same representation written to ARPA files.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
LOG10_ZERO = -99.0

NGram = tuple[str, ...]


@dataclass
class NGramCounts:
    order: int
    counts: dict[NGram, int] = field(default_factory=dict)

    def of_order(self, n: int) -> dict[NGram, int]:
        return {g: c for g, c in self.counts.items() if len(g) == n}

    def __len__(self) -> int:
        return len(self.counts)


def padded(sentence: Sequence[str]) -> list[str]:
    return [BOS, *sentence, EOS]


def count_ngrams(corpus: Iterable[Sequence[str]], order: int) -> NGramCounts:
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in [1, 5], got {order}")
    counts: Counter[NGram] = Counter()
    for sent in corpus:
        seq = padded(sent)
        for i in range(1, len(seq)):
            for n in range(1, order + 1):
                if i - n + 1 < 0:
                    break
                counts[tuple(seq[i - n + 1 : i + 1])] += 1
    return NGramCounts(order, dict(counts))


class KneserNeyLM:
    """Back-off n-gram model held as log10 probabilities and back-off weights.

    ``probs`` maps every listed n-gram to log10 p(last word | preceding words);
    ``backoffs`` maps contexts to their log10 back-off weight.  Lookup follows
    the usual ARPA back-off rule, so an estimated model and one re-read from
    disk behave the same way.
    """

    def __init__(self, order: int, probs: dict[NGram, float], backoffs: dict[NGram, float]):
        self.order = order
        self.probs = probs
        self.backoffs = backoffs
        self.vocab = frozenset(g[0] for g in probs if len(g) == 1)

    @property
    def predictable_vocab(self) -> list[str]:
        """Words that can follow a context (everything except ``<s>``)."""
        return sorted(w for w in self.vocab if w != BOS)

    def map_word(self, word: str) -> str:
        if word in self.vocab:
            return word
        if UNK in self.vocab:
            return UNK
        raise KeyError(f"word {word!r} not in LM vocabulary and the LM has no {UNK}")

    def state(self, history: Sequence[str]) -> NGram:
        """Truncate a history to the part the model can condition on."""
        h = tuple(history)
        if self.order == 1:
            return ()
        return h[-(self.order - 1) :]

    def log10_prob(self, word: str, history: Sequence[str] = ()) -> float:
        word = self.map_word(word)
        h = tuple(self.map_word(w) if w != BOS else BOS for w in self.state(history))
        bo = 0.0
        for start in range(len(h) + 1):
            ctx = h[start:]
            g = ctx + (word,)
            p = self.probs.get(g)
            if p is not None:
                return bo + p
            bo += self.backoffs.get(ctx, 0.0)
        raise AssertionError("unreachable: every vocabulary word has a unigram")

    def score_sentence(self, sentence: Sequence[str], eos: bool = True) -> float:
        """Total log10 probability of a sentence, ``</s>`` included by default."""
        hist: list[str] = [BOS]
        total = 0.0
        for w in list(sentence) + ([EOS] if eos else []):
            total += self.log10_prob(w, hist)
            hist.append(w)
        return total

    def contexts(self) -> list[NGram]:
        return sorted(self.backoffs)

    def counts_by_order(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for g in self.probs:
            out[len(g)] += 1
        return dict(sorted(out.items()))


def _adjusted_counts(counts: NGramCounts) -> dict[NGram, int]:
    """Raw counts for the top order and for ``<s>``-initial n-grams,
    continuation counts (number of distinct left neighbours) otherwise."""
    left_ext: Counter[NGram] = Counter()
    for g in counts.counts:
        if len(g) >= 2:
            left_ext[g[1:]] += 1
    adj = {}
    for g, c in counts.counts.items():
        if len(g) == counts.order or g[0] == BOS:
            adj[g] = c
        else:
            adj[g] = left_ext[g]
    return adj


def estimate_kneser_ney(
    counts: NGramCounts, discount: float = 0.75, unk_floor: float = 1e-7
) -> KneserNeyLM:
    """Interpolated Kneser-Ney with one fixed discount for all orders.

    The unigram level interpolates with a uniform distribution over the
    predictable vocabulary; ``<unk>`` then receives ``unk_floor`` of the
    unigram mass and the rest is scaled by ``1 - unk_floor``.
    """
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0, 1), got {discount}")
    if not counts.counts:
        raise ValueError("cannot estimate a language model from empty counts")
    if not 0.0 <= unk_floor < 1.0:
        raise ValueError("unk_floor must be in [0, 1)")

    adj = _adjusted_counts(counts)
    by_ctx: dict[NGram, dict[str, int]] = defaultdict(dict)
    for g, c in adj.items():
        by_ctx[g[:-1]][g[-1]] = c

    # unigram level
    uni = by_ctx[()]
    vocab = sorted(uni)
    add_unk = unk_floor > 0 and UNK not in uni
    total = sum(uni.values())
    gamma0 = discount * len(uni) / total
    scale = 1.0 - unk_floor if add_unk else 1.0
    prob: dict[NGram, float] = {}
    for w in vocab:
        prob[(w,)] = scale * (max(uni[w] - discount, 0.0) / total + gamma0 / len(vocab))
    if add_unk:
        prob[(UNK,)] = unk_floor

    def lower(ngram: NGram) -> float:
        # full interpolated probability of ngram[-1] given ngram[:-1]
        p = prob.get(ngram)
        if p is not None:
            return p
        ctx = ngram[:-1]
        return bow.get(ctx, 1.0) * lower(ngram[1:])

    bow: dict[NGram, float] = {}
    for n in range(2, counts.order + 1):
        for ctx, row in sorted((c, r) for c, r in by_ctx.items() if len(c) == n - 1):
            denom = sum(row.values())
            gamma = discount * len(row) / denom
            bow[ctx] = gamma
            for w, c in row.items():
                prob[ctx + (w,)] = (c - discount) / denom + gamma * lower(ctx[1:] + (w,))

    log_probs = {g: math.log10(p) for g, p in prob.items()}
    log_probs[(BOS,)] = LOG10_ZERO
    log_bows = {ctx: math.log10(b) for ctx, b in bow.items()}
    return KneserNeyLM(counts.order, log_probs, log_bows)


def train_lm(
    corpus: Iterable[Sequence[str]], order: int = 5, discount: float = 0.75, unk_floor: float = 1e-7
) -> KneserNeyLM:
    return estimate_kneser_ney(count_ngrams(corpus, order), discount, unk_floor)


def perplexity(lm: KneserNeyLM, corpus: Sequence[Sequence[str]]) -> float:
    if not corpus:
        raise ValueError("perplexity needs a non-empty corpus")
    total = 0.0
    tokens = 0
    for sent in corpus:
        total += lm.score_sentence(sent)
        tokens += len(sent) + 1
    return 10.0 ** (-total / tokens)
