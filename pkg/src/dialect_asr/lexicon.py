"""Translation-bearing pronunciation lexicon.

Entries map standard-language words (and ``#``-joined clitic tokens) to the
dialect pronunciations of the words they translate.  Weights are relative:
the best pronunciation of every word has weight 1.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import MappingCandidate
from .g2p import GraphoneModel, NoPathError, Pronunciation, transduce
from .lm.clitics import SEP
from .lm.compounds import part_stem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LexiconEntry:
    word: str
    prons: tuple[tuple[Pronunciation, float], ...]

    def __post_init__(self):
        if not self.prons:
            raise ValueError(f"lexicon entry {self.word!r} has no pronunciations")
        seen = [p for p, _ in self.prons]
        if len(set(seen)) != len(seen):
            raise ValueError(f"duplicate pronunciation for {self.word!r}")


@dataclass(frozen=True)
class CliticEntry:
    dialect_surface: str
    standard_parts: tuple[str, ...]

    @property
    def merged_token(self) -> str:
        return SEP.join(self.standard_parts)


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("embedding dim must be >= 1")
        for w, v in self.vectors.items():
            if v.shape != (self.dim,):
                raise ValueError(f"vector for {w!r} has shape {v.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"vector for {w!r} has non-finite components")


@dataclass
class BuildReport:
    """Mappings and clitics that could not be transduced."""

    skipped: list[tuple[str, str]] = field(default_factory=list)


def phone_set(lex: Iterable[LexiconEntry]) -> list[str]:
    return sorted({p for e in lex for pron, _ in e.prons for p in pron})


def filter_by_frequency(
    cands: Sequence[MappingCandidate], min_count: int = 1, min_prob: float = 0.0
) -> list[MappingCandidate]:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not 0.0 <= min_prob <= 1.0:
        raise ValueError("min_prob must be in [0, 1]")
    return [c for c in cands if c.cooccurrence_count >= min_count and c.probability >= min_prob]


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 1.0
    return float(1.0 - np.dot(u, v) / (nu * nv))


def filter_by_embedding_vicinity(
    cands: Sequence[MappingCandidate], emb: EmbeddingTable, max_cosine_dist: float = 0.6
) -> list[MappingCandidate]:
    """Drop dialect variants that lie far from a standard word's main variant.

    Candidates are grouped by standard word.  The dialect word of the
    candidate with the highest co-occurrence count (ties: higher
    probability, then alphabetical) is the group's center.  A candidate is
    kept when its dialect vector is within ``max_cosine_dist`` of the center
    vector, when it is the center, or when either vector is missing.
    """
    if not 0.0 <= max_cosine_dist <= 2.0:
        raise ValueError("max_cosine_dist must be in [0, 2]")
    groups: dict[str, list[MappingCandidate]] = defaultdict(list)
    for c in cands:
        groups[c.standard_word].append(c)
    centers = {
        s: min(g, key=lambda c: (-c.cooccurrence_count, -c.probability, c.dialect_word)).dialect_word
        for s, g in groups.items()
    }
    kept = []
    for c in cands:
        center = centers[c.standard_word]
        if c.dialect_word == center:
            kept.append(c)
            continue
        u, v = emb.vectors.get(c.dialect_word), emb.vectors.get(center)
        if u is None or v is None or cosine_distance(u, v) <= max_cosine_dist:
            kept.append(c)
    return kept


def _normalize(prons: Mapping[Pronunciation, float]) -> tuple[tuple[Pronunciation, float], ...]:
    best = max(prons.values())
    return tuple(sorted(((p, w / best) for p, w in prons.items()), key=lambda x: (-x[1], x[0])))


def assemble_lexicon(
    cands: Sequence[MappingCandidate],
    g2p: GraphoneModel,
    beam: int = 16,
    report: BuildReport | None = None,
) -> list[LexiconEntry]:
    """Register the G2P pronunciation of each dialect spelling under its
    standard word.

    A pronunciation reached by several mappings gets the sum of their
    probabilities before max-normalization.
    """
    prons: dict[str, dict[Pronunciation, float]] = defaultdict(dict)
    cache: dict[str, Pronunciation | None] = {}
    for c in cands:
        if c.dialect_word not in cache:
            try:
                cache[c.dialect_word] = transduce(g2p, c.dialect_word, beam)
            except NoPathError:
                cache[c.dialect_word] = None
        phones = cache[c.dialect_word]
        if phones is None:
            log.warning("no G2P path for %r; skipping mapping to %r", c.dialect_word, c.standard_word)
            if report is not None:
                report.skipped.append((c.dialect_word, c.standard_word))
            continue
        w = prons[c.standard_word]
        w[phones] = w.get(phones, 0.0) + c.probability
    return [LexiconEntry(word, _normalize(p)) for word, p in sorted(prons.items()) if max(p.values()) > 0]


def _merge_entry(index: dict[str, dict[Pronunciation, float]], word: str, pron: Pronunciation, weight: float) -> None:
    row = index.setdefault(word, {})
    row[pron] = max(row.get(pron, 0.0), weight)


def _from_index(index: dict[str, dict[Pronunciation, float]]) -> list[LexiconEntry]:
    return [LexiconEntry(w, _normalize(p)) for w, p in sorted(index.items())]


def _to_index(lex: Iterable[LexiconEntry]) -> dict[str, dict[Pronunciation, float]]:
    return {e.word: dict(e.prons) for e in lex}


def add_clitic_entries(
    lex: Sequence[LexiconEntry],
    clitics: Sequence[CliticEntry],
    g2p: GraphoneModel,
    beam: int = 16,
    report: BuildReport | None = None,
) -> list[LexiconEntry]:
    index = _to_index(lex)
    for c in clitics:
        try:
            pron = transduce(g2p, c.dialect_surface, beam)
        except NoPathError:
            log.warning("no G2P path for clitic %r; skipping %r", c.dialect_surface, c.merged_token)
            if report is not None:
                report.skipped.append((c.dialect_surface, c.merged_token))
            continue
        _merge_entry(index, c.merged_token, pron, 1.0)
    return _from_index(index)


def add_compound_part_entries(lex: Sequence[LexiconEntry], part_tokens: Iterable[str]) -> list[LexiconEntry]:
    """Give ``+``-marked compound parts the pronunciations of their stems.

    Parts whose stem has no entry are left out.  Linkers are assumed to be
    silent in the dialect, which holds for the synthetic data this is used
    with.
    """
    index = _to_index(lex)
    for tok in sorted(set(part_tokens)):
        stem = part_stem(tok)
        if stem == tok or stem not in index:
            continue
        for pron, w in index[stem].items():
            _merge_entry(index, tok, pron, w)
    return _from_index(index)


def prune_lexicon(
    lex: Sequence[LexiconEntry],
    usage: Mapping[tuple[str, Pronunciation], int],
    min_rel_usage: float = 0.2,
) -> list[LexiconEntry]:
    """Drop pronunciations used less than ``min_rel_usage`` times the most
    used pronunciation of the same word.  A word never loses its last
    pronunciation; if all would go, the most used one stays."""
    if not 0.0 <= min_rel_usage <= 1.0:
        raise ValueError("min_rel_usage must be in [0, 1]")
    out = []
    for e in lex:
        counts = {p: usage.get((e.word, p), 0) for p, _ in e.prons}
        top = max(counts.values())
        kept = {p: w for p, w in e.prons if counts[p] >= min_rel_usage * top}
        if not kept:
            best = max(e.prons, key=lambda pw: (counts[pw[0]], pw[1]))
            kept = {best[0]: best[1]}
        out.append(LexiconEntry(e.word, _normalize(kept)))
    return out


def write_lexicon(lex: Iterable[LexiconEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in lex:
            for pron, w in e.prons:
                fh.write(f"{e.word}\t{w:.4f}\t{' '.join(pron)}\n")


def read_lexicon(path: str | Path) -> list[LexiconEntry]:
    index: dict[str, dict[Pronunciation, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3 or not fields[2].split():
                raise ValueError(f"{path}:{lineno}: expected word TAB weight TAB phones")
            w = float(fields[1])
            if not 0.0 < w <= 1.0:
                raise ValueError(f"{path}:{lineno}: weight {w} outside (0, 1]")
            _merge_entry(index, fields[0], tuple(fields[2].split()), w)
    return _from_index(index)


def read_embeddings(path: str | Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected 'vocab_size dim'")
        size, dim = int(header[0]), int(header[1])
        vectors = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} components")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
    if len(vectors) != size:
        raise ValueError(f"{path}: header declares {size} vectors, found {len(vectors)}")
    return EmbeddingTable(dim, vectors)


def write_embeddings(emb: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(emb.vectors)} {emb.dim}\n")
        for w in sorted(emb.vectors):
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in emb.vectors[w]) + "\n")


def read_clitic_inventory(path: str | Path) -> list[CliticEntry]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            surface, _, rest = line.rstrip("\n").partition("\t")
            parts = tuple(rest.split())
            if not surface or len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: need a surface form and >= 2 standard words")
            out.append(CliticEntry(surface, parts))
    return out


def write_clitic_inventory(clitics: Iterable[CliticEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in clitics:
            fh.write(f"{c.dialect_surface}\t{' '.join(c.standard_parts)}\n")
