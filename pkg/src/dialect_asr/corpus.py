"""Corpus ingestion, tokenization, frequency counts and word-mapping extraction.

Sentences are plain tuples of lowercased tokens.  Parallel corpora are lists
of ``(dialect, standard)`` sentence pairs.  Word mappings between the two
sides are learned with lexical-translation EM in the style of IBM Model 1,
with the dialect word conditioned on the standard word.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

Sentence = tuple[str, ...]
ParallelCorpus = list[tuple[Sentence, Sentence]]

STRIP_CHARS = '.,;:!?"()'
EMIT_THRESHOLD = 0.01


def tokenize(text: str) -> Sentence:
    """Lowercase, split on whitespace and strip edge punctuation.

    >>> tokenize("Haben wir gesagt.")
    ('haben', 'wir', 'gesagt')
    """
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(STRIP_CHARS)
        if tok:
            tokens.append(tok)
    return tuple(tokens)


@dataclass(frozen=True)
class FrequencyTable:
    counts: dict[str, int] = field(default_factory=dict)
    total: int = 0

    def __getitem__(self, word: str) -> int:
        return self.counts.get(word, 0)

    def __contains__(self, word: str) -> bool:
        return word in self.counts


def word_frequencies(corpus: Iterable[Sequence[str]]) -> FrequencyTable:
    counts: Counter[str] = Counter()
    for sent in corpus:
        counts.update(sent)
    return FrequencyTable(dict(counts), sum(counts.values()))


@dataclass(frozen=True)
class MappingCandidate:
    dialect_word: str
    standard_word: str
    probability: float
    cooccurrence_count: int


def read_monolingual(path: str | Path) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return [tokenize(line) for line in fh if line.strip()]


def read_lines(path: str | Path) -> list[Sentence]:
    """One tokenized sentence per line; blank lines stay as empty sentences
    so that files aligned by line number stay aligned."""
    with open(path, encoding="utf-8") as fh:
        return [tokenize(line) for line in fh.read().splitlines()]


def read_parallel(path: str | Path) -> ParallelCorpus:
    """Read a TAB-separated parallel corpus (dialect TAB standard per line)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected exactly one TAB")
            dia, std = tokenize(parts[0]), tokenize(parts[1])
            if not dia or not std:
                raise ValueError(f"{path}:{lineno}: empty side in parallel pair")
            pairs.append((dia, std))
    return pairs


def write_parallel(pairs: Iterable[tuple[Sequence[str], Sequence[str]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for dia, std in pairs:
            fh.write(" ".join(dia) + "\t" + " ".join(std) + "\n")


def write_monolingual(corpus: Iterable[Sequence[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus:
            fh.write(" ".join(sent) + "\n")


class Model1:
    """Lexical translation table t(dialect | standard) trained by EM.

    ``log_likelihoods`` holds the corpus log-likelihood of the parameters in
    effect at the start of every iteration plus the final one, so it has
    ``iterations + 1`` entries.
    """

    def __init__(self, parallel: ParallelCorpus):
        self.parallel = parallel
        self.t: dict[str, dict[str, float]] = {}
        self.log_likelihoods: list[float] = []
        cooc: dict[tuple[str, str], set[int]] = defaultdict(set)
        dia_vocab: set[str] = set()
        for k, (dia, std) in enumerate(parallel):
            dia_vocab.update(dia)
            for d in set(dia):
                for s in set(std):
                    cooc[(d, s)].add(k)
        self.cooccurrence = {key: len(v) for key, v in cooc.items()}
        # uniform initialization over the dialect vocabulary
        init = 1.0 / len(dia_vocab) if dia_vocab else 0.0
        for (d, s) in self.cooccurrence:
            self.t.setdefault(s, {})[d] = init

    def likelihood(self) -> float:
        ll = 0.0
        for dia, std in self.parallel:
            for d in dia:
                ll += math.log(sum(self.t[s][d] for s in std) / len(std))
        return ll

    def step(self) -> None:
        counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        for dia, std in self.parallel:
            for d in dia:
                z = sum(self.t[s][d] for s in std)
                for s in std:
                    counts[s][d] += self.t[s][d] / z
        for s, row in counts.items():
            total = sum(row.values())
            self.t[s] = {d: c / total for d, c in row.items()}

    def train(self, iterations: int) -> "Model1":
        if iterations < 1:
            raise ValueError("em_iterations must be >= 1")
        self.log_likelihoods = [self.likelihood()]
        for _ in range(iterations):
            self.step()
            self.log_likelihoods.append(self.likelihood())
        return self

    def dialect_distribution(self) -> dict[str, dict[str, float]]:
        """Per dialect word, t(d|s) renormalized over standard words."""
        by_dia: dict[str, dict[str, float]] = defaultdict(dict)
        for s, row in self.t.items():
            for d, p in row.items():
                by_dia[d][s] = p
        out = {}
        for d, row in by_dia.items():
            z = sum(row.values())
            out[d] = {s: p / z for s, p in row.items()}
        return out


def extract_mappings(
    parallel: ParallelCorpus, em_iterations: int = 5, threshold: float = EMIT_THRESHOLD
) -> list[MappingCandidate]:
    """Learn dialect-to-standard word mappings from sentence pairs.

    The emitted probability for a (dialect, standard) pair is the posterior
    of the standard word given the dialect word, i.e. the translation table
    renormalized per dialect word, so that every dialect word's candidates
    form a distribution.  Candidates below ``threshold`` are dropped.
    """
    if em_iterations < 1:
        raise ValueError("em_iterations must be >= 1")
    if not parallel:
        return []
    model = Model1(parallel).train(em_iterations)
    cands = []
    for d, row in model.dialect_distribution().items():
        for s, p in row.items():
            if p >= threshold:
                cands.append(MappingCandidate(d, s, p, model.cooccurrence[(d, s)]))
    cands.sort(key=lambda c: (c.dialect_word, -c.probability, c.standard_word))
    return cands


def write_mappings(cands: Iterable[MappingCandidate], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cands:
            fh.write(f"{c.dialect_word}\t{c.standard_word}\t{c.probability:.6f}\t{c.cooccurrence_count}\n")


def read_mappings(path: str | Path) -> list[MappingCandidate]:
    cands = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 TAB-separated fields")
            cands.append(MappingCandidate(parts[0], parts[1], float(parts[2]), int(parts[3])))
    return cands
