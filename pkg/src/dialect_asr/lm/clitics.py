"""Clitic merging and the merged/unmerged interpolated scorer.

A clitic is stored as one token whose parts are joined by ``#``
(``haben#wir``).  The merged LM is trained on text where the part sequences
were replaced by the merged token; the unmerged LM on the original text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import Sentence
from .kneser_ney import BOS, EOS, KneserNeyLM

SEP = "#"


def expand_token(token: str) -> tuple[str, ...]:
    if SEP in token and len(token) > 1:
        return tuple(p for p in token.split(SEP) if p)
    return (token,)


def expand_clitics(tokens: Sequence[str]) -> Sentence:
    out: list[str] = []
    for t in tokens:
        out.extend(expand_token(t))
    return tuple(out)


@dataclass(frozen=True)
class CliticTable:
    merged: frozenset[str] = field(default_factory=frozenset)
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"interpolation weight must be in [0, 1], got {self.lam}")
        for tok in self.merged:
            parts = tok.split(SEP)
            if len(parts) < 2 or not all(parts):
                raise ValueError(f"merged token {tok!r} must split into >= 2 non-empty words")

    def patterns(self) -> dict[tuple[str, ...], str]:
        return {tuple(t.split(SEP)): t for t in self.merged}


def read_clitic_table(path: str | Path, lam: float = 0.5) -> CliticTable:
    with open(path, encoding="utf-8") as fh:
        merged = frozenset(ln.strip() for ln in fh if ln.strip())
    return CliticTable(merged, lam)


def write_clitic_table(table: CliticTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in sorted(table.merged):
            fh.write(tok + "\n")


def merge_clitics(sentence: Sequence[str], clitics: CliticTable) -> Sentence:
    """Leftmost-first, non-overlapping replacement of part sequences.

    At each position the longest matching part sequence wins.
    """
    pats = clitics.patterns()
    if not pats:
        return tuple(sentence)
    lengths = sorted({len(p) for p in pats}, reverse=True)
    out: list[str] = []
    i = 0
    while i < len(sentence):
        for n in lengths:
            merged = pats.get(tuple(sentence[i : i + n]))
            if merged is not None:
                out.append(merged)
                i += n
                break
        else:
            out.append(sentence[i])
            i += 1
    return tuple(out)


def merge_clitics_in_corpus(corpus: Iterable[Sequence[str]], clitics: CliticTable) -> list[Sentence]:
    return [merge_clitics(s, clitics) for s in corpus]


class InterpolatedScorer:
    """Per-token linear interpolation of a clitic-merged and an unmerged LM.

    For a token with history ``h``::

        p = lam * p_merged(token | h) + (1 - lam) * p_unmerged(expand(token) | expand(h))

    where the unmerged probability of a merged token is the chain product over
    its parts.  The scorer exposes the same ``order`` / ``state`` /
    ``log10_prob`` surface as :class:`KneserNeyLM`, so the decoder can use
    either.  ``order`` is the larger of the two: the last ``order - 1``
    merged tokens always expand to at least ``order - 1`` words.
    """

    def __init__(self, merged_lm: KneserNeyLM, unmerged_lm: KneserNeyLM, clitics: CliticTable):
        self.merged_lm = merged_lm
        self.unmerged_lm = unmerged_lm
        self.clitics = clitics
        self.order = max(merged_lm.order, unmerged_lm.order)
        self.vocab = merged_lm.vocab | unmerged_lm.vocab | clitics.merged

    def state(self, history: Sequence[str]) -> tuple[str, ...]:
        h = tuple(history)
        return h[-(self.order - 1) :] if self.order > 1 else ()

    def log10_prob(self, word: str, history: Sequence[str] = ()) -> float:
        lam = self.clitics.lam
        p = 0.0
        if lam > 0.0:
            p += lam * 10.0 ** self.merged_lm.log10_prob(word, history)
        if lam < 1.0:
            hist = [w for t in history for w in (expand_token(t) if t != BOS else (BOS,))]
            chain = 0.0
            for part in expand_token(word) if word != EOS else (EOS,):
                chain += self.unmerged_lm.log10_prob(part, hist)
                hist.append(part)
            p += (1.0 - lam) * 10.0**chain
        return math.log10(p)

    def score_sentence(self, sentence: Sequence[str], eos: bool = True) -> float:
        hist: list[str] = [BOS]
        total = 0.0
        for w in list(sentence) + ([EOS] if eos else []):
            total += self.log10_prob(w, hist)
            hist.append(w)
        return total


def score_interpolated(
    merged_lm: KneserNeyLM, unmerged_lm: KneserNeyLM, clitics: CliticTable, sentence: Sequence[str]
) -> float:
    """log10 probability of ``sentence`` (``</s>`` included) under the mixture."""
    return InterpolatedScorer(merged_lm, unmerged_lm, clitics).score_sentence(sentence)
