"""Frequency-based compound splitting.

A word is split into known parts when the geometric mean of the part counts
beats the count of the whole word.  Non-final parts are written with a
trailing ``+``; a linker consumed after a part is kept inside the marker
(``arbeit+s+``) so that deleting every ``+`` and concatenating restores the
original word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..corpus import FrequencyTable, Sentence

DEFAULT_LINKERS = ("s", "es", "n", "en", "e")


@dataclass(frozen=True)
class CompoundSplitter:
    part_vocab: FrequencyTable
    min_part_len: int = 3
    min_part_count: int = 2
    linkers: tuple[str, ...] = DEFAULT_LINKERS

    def __post_init__(self):
        if self.min_part_len < 3:
            raise ValueError("min_part_len must be >= 3")

    def _is_part(self, s: str) -> bool:
        return len(s) >= self.min_part_len and self.part_vocab[s] >= self.min_part_count

    def candidate_splits(self, word: str) -> list[list[tuple[str, str]]]:
        """All segmentations into >= 2 parts, as lists of (part, linker)."""
        out: list[list[tuple[str, str]]] = []

        def rec(pos: int, acc: list[tuple[str, str]]) -> None:
            for end in range(pos + self.min_part_len, len(word) + 1):
                part = word[pos:end]
                if not self._is_part(part):
                    continue
                if end == len(word):
                    if acc:
                        out.append(acc + [(part, "")])
                    continue
                rec(end, acc + [(part, "")])
                for link in self.linkers:
                    if word.startswith(link, end) and end + len(link) < len(word):
                        rec(end + len(link), acc + [(part, link)])

        rec(0, [])
        return out

    def best_split(self, word: str) -> list[tuple[str, str]] | None:
        best, best_key = None, None
        for split in self.candidate_splits(word):
            score = math.exp(sum(math.log(self.part_vocab[p]) for p, _ in split) / len(split))
            key = (score, -len(split))
            if best_key is None or key > best_key:
                best, best_key = split, key
        if best is None or best_key[0] <= self.part_vocab[word]:
            return None
        return best

    def split_word(self, word: str) -> list[str]:
        split = self.best_split(word)
        if split is None:
            return [word]
        tokens = []
        for k, (part, link) in enumerate(split):
            if k == len(split) - 1:
                tokens.append(part)
            else:
                tokens.append(f"{part}+{link}+" if link else f"{part}+")
        return tokens


def split_compounds(sentence: Sequence[str], splitter: CompoundSplitter) -> Sentence:
    out: list[str] = []
    for w in sentence:
        out.extend(splitter.split_word(w))
    return tuple(out)


def is_compound_part(token: str) -> bool:
    return len(token) > 1 and token.endswith("+")


def part_stem(token: str) -> str:
    """``arbeit+s+`` -> ``arbeit``; plain words are returned unchanged."""
    if not is_compound_part(token):
        return token
    return token[:-1].split("+", 1)[0]


def join_compound_parts(tokens: Sequence[str]) -> Sentence:
    """Glue ``+``-marked parts onto the following token, restoring linkers."""
    out: list[str] = []
    pending = ""
    for tok in tokens:
        if is_compound_part(tok):
            pending += tok.replace("+", "")
        else:
            out.append(pending + tok)
            pending = ""
    if pending:
        out.append(pending)
    return tuple(out)


def read_splitter_config(path) -> dict[str, object]:
    """Read ``key TAB value`` lines (min_part_len, min_part_count, linkers)."""
    cfg: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            key, _, value = line.rstrip("\n").partition("\t")
            if key in ("min_part_len", "min_part_count"):
                cfg[key] = int(value)
            elif key == "linkers":
                cfg[key] = tuple(value.split())
            else:
                raise ValueError(f"{path}:{lineno}: unknown splitter key {key!r}")
    return cfg
