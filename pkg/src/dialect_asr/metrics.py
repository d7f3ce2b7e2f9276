"""WER, BLEU and the ablation table.

Everything here is pure Python; corpora are lists of token sequences that
are aligned by index.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence


def edit_distance(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> int:
    """Unit-cost Levenshtein distance."""
    prev = list(range(len(hyp) + 1))
    for i in range(1, len(ref) + 1):
        cur = [i] + [0] * len(hyp)
        for j in range(1, len(hyp) + 1):
            cur[j] = min(
                prev[j - 1] + (ref[i - 1] != hyp[j - 1]),
                prev[j] + 1,
                cur[j - 1] + 1,
            )
        prev = cur
    return prev[-1]


def align_counts(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> tuple[int, int, int]:
    """(substitutions, deletions, insertions) of a minimal-cost alignment.

    Among minimal-cost alignments the one with the most substitutions wins,
    i.e. a substitution is preferred over an insertion+deletion pair.  Each
    cell holds ``(cost, -subs, dels, ins)`` and takes the smallest tuple.
    """
    n, m = len(ref), len(hyp)
    prev = [(j, 0, 0, j) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0, i, 0)]
        for j in range(1, m + 1):
            c, s, d, ins = prev[j - 1]
            sub = ref[i - 1] != hyp[j - 1]
            diag = (c + sub, s - sub, d, ins)
            c, s, d, ins = prev[j]
            up = (c + 1, s, d + 1, ins)
            c, s, d, ins = cur[j - 1]
            left = (c + 1, s, d, ins + 1)
            cur.append(min(diag, up, left))
        prev = cur
    _, s, d, ins = prev[m]
    return -s, d, ins


@dataclass(frozen=True)
class WERBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer_percent(self) -> float:
        return 100.0 * self.errors / self.ref_len


def wer(refs: Sequence[Sequence[str]], hyps: Sequence[Sequence[str]]) -> WERBreakdown:
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references but {len(hyps)} hypotheses")
    ref_len = sum(len(r) for r in refs)
    if ref_len == 0:
        raise ValueError("references are empty")
    s = d = i = 0
    for r, h in zip(refs, hyps):
        a, b, c = align_counts(r, h)
        s, d, i = s + a, d + b, i + c
    return WERBreakdown(s, d, i, ref_len)


@dataclass(frozen=True)
class BLEUReport:
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    @property
    def bleu_percent(self) -> float:
        if min(self.precisions) <= 0.0:
            return 0.0
        log_mean = sum(math.log(p) for p in self.precisions) / len(self.precisions)
        return 100.0 * self.brevity_penalty * math.exp(log_mean)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    refs: Sequence[Sequence[str]],
    hyps: Sequence[Sequence[str]],
    max_n: int = 4,
    smoothing: float = 0.0,
    brevity: bool = True,
) -> BLEUReport:
    """Corpus BLEU with one reference per hypothesis.

    ``smoothing`` > 0 adds that amount to every clipped-match count and
    denominator (additive floor); the default leaves BLEU unsmoothed so a
    zero precision at any order gives 0.
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references but {len(hyps)} hypotheses")
    matches = [0] * max_n
    totals = [0] * max_n
    for r, h in zip(refs, hyps):
        for n in range(1, max_n + 1):
            hc, rc = _ngrams(h, n), _ngrams(r, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(len(h) - n + 1, 0)
    precisions = []
    for m, t in zip(matches, totals):
        if t + smoothing == 0:
            precisions.append(0.0)
        else:
            precisions.append((m + smoothing) / (t + smoothing))
    c = sum(len(h) for h in hyps)
    r = sum(len(x) for x in refs)
    if not brevity or c >= r:
        bp = 1.0
    elif c == 0:
        bp = 0.0
    else:
        bp = math.exp(1.0 - r / c)
    return BLEUReport(tuple(precisions), bp, c, r)


@dataclass(frozen=True)
class AblationRow:
    description: str
    wer_percent: float
    bleu_percent: float


def relative_improvement(before: float, after: float, higher_is_better: bool) -> float:
    """Relative change in percent, positive when the metric got better."""
    if before == 0:
        return 0.0
    delta = (after - before) if higher_is_better else (before - after)
    return 100.0 * delta / before


def ablation_report(rows: Sequence[AblationRow], indent_step: int = 3) -> tuple[str, str]:
    """Render rows as a fixed-width table and as TSV.

    Each row after the first is indented one more step to show that the
    configurations build on each other.  The last two columns give the
    relative WER and BLEU improvement over the previous row.
    """
    if not rows:
        raise ValueError("ablation_report needs at least one row")
    descs = []
    for k, row in enumerate(rows):
        descs.append(" " * (indent_step * k) + row.description)
    width = max(len("Description"), *(len(d) for d in descs))
    header = f"{'Row':>3}  {'Description':<{width}}  {'WER':>6}  {'BLEU':>6}  {'dWER%':>6}  {'dBLEU%':>6}"
    lines = [header, "-" * len(header)]
    tsv = ["row\tdescription\twer\tbleu\trel_wer_improvement\trel_bleu_improvement"]
    for k, (row, desc) in enumerate(zip(rows, descs), 1):
        if k == 1:
            dw = db = ""
            tdw = tdb = ""
        else:
            prev = rows[k - 2]
            rw = relative_improvement(prev.wer_percent, row.wer_percent, higher_is_better=False)
            rb = relative_improvement(prev.bleu_percent, row.bleu_percent, higher_is_better=True)
            dw, db = f"{rw:.1f}", f"{rb:.1f}"
            tdw, tdb = f"{rw:.2f}", f"{rb:.2f}"
        lines.append(
            f"{k:>3}  {desc:<{width}}  {row.wer_percent:>6.2f}  {row.bleu_percent:>6.2f}  {dw:>6}  {db:>6}"
        )
        tsv.append(f"{k}\t{row.description}\t{row.wer_percent:.2f}\t{row.bleu_percent:.2f}\t{tdw}\t{tdb}")
    return "\n".join(lines) + "\n", "\n".join(tsv) + "\n"


def read_ablation_tsv(path) -> list[AblationRow]:
    """Rows of ``row TAB description TAB wer TAB bleu [...]``; a header line is optional."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            f = line.rstrip("\n").split("\t")
            if not line.strip() or (lineno == 1 and f[0] == "row"):
                continue
            try:
                rows.append(AblationRow(f[1], float(f[2]), float(f[3])))
            except (IndexError, ValueError):
                raise ValueError(f"{path}:{lineno}: expected row, description, wer, bleu") from None
    return rows
