"""ARPA back-off language model files."""

from __future__ import annotations

import re
from pathlib import Path

from .kneser_ney import KneserNeyLM

_COUNT_RE = re.compile(r"^ngram (\d+)=(\d+)$")
_SECTION_RE = re.compile(r"^\\(\d+)-grams:$")


class ArpaParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def export_arpa(lm: KneserNeyLM, path: str | Path) -> None:
    by_order: dict[int, list] = {n: [] for n in range(1, lm.order + 1)}
    for g in lm.probs:
        by_order[len(g)].append(g)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n\\data\\\n")
        for n in range(1, lm.order + 1):
            fh.write(f"ngram {n}={len(by_order[n])}\n")
        for n in range(1, lm.order + 1):
            fh.write(f"\n\\{n}-grams:\n")
            for g in sorted(by_order[n]):
                line = f"{lm.probs[g]:.6f}\t{' '.join(g)}"
                if g in lm.backoffs:
                    line += f"\t{lm.backoffs[g]:.6f}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def import_arpa(path: str | Path) -> KneserNeyLM:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]

    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        if lines[i].strip():
            raise ArpaParseError(i + 1, f"expected \\data\\ header, got {lines[i]!r}")
        i += 1
    if i == len(lines):
        raise ArpaParseError(i, "missing \\data\\ header")
    i += 1

    declared: dict[int, int] = {}
    while i < len(lines) and lines[i].strip():
        m = _COUNT_RE.match(lines[i].strip())
        if not m:
            raise ArpaParseError(i + 1, f"malformed count line {lines[i]!r}")
        declared[int(m.group(1))] = int(m.group(2))
        i += 1
    if not declared:
        raise ArpaParseError(i + 1, "empty \\data\\ section")
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise ArpaParseError(i, "n-gram orders in \\data\\ are not contiguous from 1")

    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}
    expected = 1
    while True:
        while i < len(lines) and not lines[i].strip():
            i += 1
        if i == len(lines):
            raise ArpaParseError(i, "missing \\end\\ marker")
        header = lines[i].strip()
        if header == "\\end\\":
            if expected != order + 1:
                raise ArpaParseError(i + 1, f"\\end\\ reached before the {expected}-grams section")
            break
        m = _SECTION_RE.match(header)
        if not m:
            raise ArpaParseError(i + 1, f"malformed section header {header!r}")
        n = int(m.group(1))
        if n != expected:
            raise ArpaParseError(i + 1, f"expected \\{expected}-grams: section, got \\{n}-grams:")
        section_line = i + 1
        i += 1
        listed = 0
        while i < len(lines) and lines[i].strip() and not lines[i].startswith("\\"):
            fields = lines[i].split("\t")
            if len(fields) not in (2, 3):
                raise ArpaParseError(i + 1, f"malformed n-gram line {lines[i]!r}")
            words = tuple(fields[1].split())
            if len(words) != n:
                raise ArpaParseError(i + 1, f"expected {n} words, got {len(words)}")
            try:
                probs[words] = float(fields[0])
                if len(fields) == 3:
                    backoffs[words] = float(fields[2])
            except ValueError:
                raise ArpaParseError(i + 1, f"non-numeric value in {lines[i]!r}") from None
            listed += 1
            i += 1
        if listed != declared[n]:
            raise ArpaParseError(
                section_line, f"\\{n}-grams: declares {declared[n]} entries but lists {listed}"
            )
        expected += 1
    return KneserNeyLM(order, probs, backoffs)
