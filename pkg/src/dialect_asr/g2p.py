"""Joint-sequence (graphone) grapheme-to-phoneme model.

A graphone pairs up to two letters with up to two phones; at most one side
may be empty.  Training runs EM over all monotone segmentations of each
(spelling, pronunciation) pair to estimate graphone probabilities, takes the
Viterbi segmentation of every pair under the final estimate, and fits a
Kneser-Ney n-gram over those graphone sequences.  Transduction is a beam
search over graphone sequences that spell out the input word.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .lm.kneser_ney import BOS, EOS, KneserNeyLM, train_lm
from .metrics import edit_distance

log = logging.getLogger(__name__)

MAX_GRAPHEMES = 2
MAX_PHONES = 2
CATEGORIES = (
    "2nd person plural",
    "2nd person sing",
    "Diminuation",
    "Shortening",
    "Translation",
    "Variability",
)

Pronunciation = tuple[str, ...]
Graphone = tuple[str, Pronunciation]

STEPS = [(a, b) for a in range(MAX_GRAPHEMES + 1) for b in range(MAX_PHONES + 1) if a or b]


class NoPathError(ValueError):
    def __init__(self, word: str):
        super().__init__(f"no graphone path covers the word {word!r}")
        self.word = word


def graphone_token(g: Graphone) -> str:
    letters, phones = g
    return f"{letters}|{'.'.join(phones)}"


def parse_graphone_token(tok: str) -> Graphone:
    letters, _, phones = tok.partition("|")
    return letters, tuple(phones.split(".")) if phones else ()


def _segment_units(word: str, phones: Pronunciation, i: int, j: int):
    """Graphones ending at lattice point (i, j), with their start points."""
    for a, b in STEPS:
        if a <= i and b <= j:
            yield i - a, j - b, (word[i - a : i], tuple(phones[j - b : j]))


@dataclass
class GraphoneModel:
    alignment_probs: dict[Graphone, float]
    ngram: KneserNeyLM
    order: int
    log_likelihoods: list[float] = field(default_factory=list)
    segmentations: dict[tuple[str, Pronunciation], list[Graphone]] = field(default_factory=dict)
    rejected: list[tuple[str, Pronunciation, str]] = field(default_factory=list)

    @property
    def graphone_inventory(self) -> set[Graphone]:
        return set(self.alignment_probs)

    @property
    def phone_set(self) -> set[str]:
        return {p for tok in self.ngram.vocab if "|" in tok for p in parse_graphone_token(tok)[1]}

    def save(self, path: str | Path) -> None:
        doc = {
            "format": "graphone-g2p",
            "version": 1,
            "order": self.order,
            "alignment": [[g, list(p), q] for (g, p), q in sorted(self.alignment_probs.items())],
            "ngram": {
                "order": self.ngram.order,
                "probs": [[list(k), v] for k, v in sorted(self.ngram.probs.items())],
                "backoffs": [[list(k), v] for k, v in sorted(self.ngram.backoffs.items())],
            },
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GraphoneModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != "graphone-g2p" or doc.get("version") != 1:
            raise ValueError(f"{path}: not a version-1 graphone model file")
        ng = doc["ngram"]
        lm = KneserNeyLM(
            ng["order"],
            {tuple(k): v for k, v in ng["probs"]},
            {tuple(k): v for k, v in ng["backoffs"]},
        )
        probs = {(g, tuple(p)): q for g, p, q in doc["alignment"]}
        return cls(probs, lm, doc["order"])


class _Lattice:
    """Forward/backward quantities of one training pair."""

    def __init__(self, word: str, phones: Pronunciation):
        self.word = word
        self.phones = phones
        self.n, self.m = len(word), len(phones)

    def forward(self, q: dict[Graphone, float]) -> list[list[float]]:
        alpha = [[0.0] * (self.m + 1) for _ in range(self.n + 1)]
        alpha[0][0] = 1.0
        for i in range(self.n + 1):
            for j in range(self.m + 1):
                if i == 0 and j == 0:
                    continue
                s = 0.0
                for i0, j0, g in _segment_units(self.word, self.phones, i, j):
                    s += alpha[i0][j0] * q.get(g, 0.0)
                alpha[i][j] = s
        return alpha

    def backward(self, q: dict[Graphone, float]) -> list[list[float]]:
        beta = [[0.0] * (self.m + 1) for _ in range(self.n + 1)]
        beta[self.n][self.m] = 1.0
        for i in range(self.n, -1, -1):
            for j in range(self.m, -1, -1):
                if i == self.n and j == self.m:
                    continue
                s = 0.0
                for a, b in STEPS:
                    if i + a <= self.n and j + b <= self.m:
                        g = (self.word[i : i + a], tuple(self.phones[j : j + b]))
                        s += q.get(g, 0.0) * beta[i + a][j + b]
                beta[i][j] = s
        return beta

    def units(self) -> set[Graphone]:
        out = set()
        for i in range(self.n + 1):
            for j in range(self.m + 1):
                for _, _, g in _segment_units(self.word, self.phones, i, j):
                    out.add(g)
        return out

    def viterbi(self, q: dict[Graphone, float]) -> tuple[float, list[Graphone]]:
        """Best segmentation and its log probability (natural log)."""
        best = [[-math.inf] * (self.m + 1) for _ in range(self.n + 1)]
        back: list[list[tuple | None]] = [[None] * (self.m + 1) for _ in range(self.n + 1)]
        best[0][0] = 0.0
        for i in range(self.n + 1):
            for j in range(self.m + 1):
                if i == 0 and j == 0:
                    continue
                for i0, j0, g in _segment_units(self.word, self.phones, i, j):
                    p = q.get(g, 0.0)
                    if p <= 0.0 or best[i0][j0] == -math.inf:
                        continue
                    s = best[i0][j0] + math.log(p)
                    if s > best[i][j]:
                        best[i][j] = s
                        back[i][j] = (i0, j0, g)
        if best[self.n][self.m] == -math.inf:
            return -math.inf, []
        seq = []
        i, j = self.n, self.m
        while (i, j) != (0, 0):
            i, j, g = back[i][j]
            seq.append(g)
        return best[self.n][self.m], seq[::-1]


def _em(lattices: list[_Lattice], iterations: int) -> tuple[dict[Graphone, float], list[float]]:
    inventory: set[Graphone] = set()
    for lat in lattices:
        inventory |= lat.units()
    q = {g: 1.0 / len(inventory) for g in inventory}
    history = []
    for it in range(iterations + 1):
        counts: dict[Graphone, float] = defaultdict(float)
        ll = 0.0
        for lat in lattices:
            alpha = lat.forward(q)
            beta = lat.backward(q)
            z = alpha[lat.n][lat.m]
            ll += math.log(z)
            if it == iterations:
                continue
            for i in range(lat.n + 1):
                for j in range(lat.m + 1):
                    if beta[i][j] == 0.0:
                        continue
                    for i0, j0, g in _segment_units(lat.word, lat.phones, i, j):
                        if alpha[i0][j0] > 0.0:
                            counts[g] += alpha[i0][j0] * q[g] * beta[i][j] / z
        history.append(ll)
        if it < iterations:
            total = sum(counts.values())
            q = {g: counts.get(g, 0.0) / total for g in sorted(inventory)}
    return q, history


def train(
    pairs: Iterable[tuple[str, Sequence[str]]],
    order: int = 3,
    em_iterations: int = 10,
    discount: float = 0.75,
) -> GraphoneModel:
    """Train a graphone model on (spelling, phones) pairs.

    Pairs with an empty side are rejected and listed in ``model.rejected``;
    duplicate pairs are kept, so they weigh more in EM and in the n-gram.
    """
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in [1, 5], got {order}")
    if em_iterations < 1:
        raise ValueError("em_iterations must be >= 1")
    lattices = []
    rejected = []
    for word, phones in pairs:
        phones = tuple(phones)
        if not word or not phones:
            rejected.append((word, phones, "empty spelling or pronunciation"))
            log.warning("rejecting G2P pair %r -> %r: empty side", word, phones)
            continue
        lattices.append(_Lattice(word, phones))
    if not lattices:
        raise ValueError("no usable training pairs")

    q, history = _em(lattices, em_iterations)
    segs: dict[tuple[str, Pronunciation], list[Graphone]] = {}
    sequences = []
    for lat in lattices:
        _, seq = lat.viterbi(q)
        segs[(lat.word, lat.phones)] = seq
        sequences.append([graphone_token(g) for g in seq])
    ngram = train_lm(sequences, order=order, discount=discount, unk_floor=0.0)
    return GraphoneModel(q, ngram, order, history, segs, rejected)


@dataclass(order=True)
class _Hyp:
    sort_key: tuple
    pos: int = field(compare=False)
    history: tuple[str, ...] = field(compare=False)
    phones: Pronunciation = field(compare=False)
    score: float = field(compare=False)
    inserted: bool = field(compare=False)


def _candidates_by_letters(model: GraphoneModel) -> dict[str, list[str]]:
    by_letters: dict[str, list[str]] = defaultdict(list)
    for tok in sorted(model.ngram.vocab):
        if tok in (BOS, EOS):
            continue
        letters, _ = parse_graphone_token(tok)
        by_letters[letters].append(tok)
    return by_letters


def transduce_scored(model: GraphoneModel, word: str, beam: int | float = 16) -> tuple[Pronunciation, float]:
    """Best pronunciation and its log10 graphone-sequence score.

    Search proceeds position by position through the spelling.  Graphones
    with no letters may not follow each other, which keeps the search space
    finite.  Hypotheses sharing position, LM state and insertion flag are
    recombined (the better one survives, ties go to the smaller phone
    sequence), and each position keeps at most ``beam`` hypotheses.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    lm = model.ngram
    cache = getattr(model, "_by_letters", None)
    if cache is None:
        cache = _candidates_by_letters(model)
        model._by_letters = cache  # type: ignore[attr-defined]
    inserts = cache.get("", [])

    n = len(word)
    stacks: list[dict[tuple, _Hyp]] = [dict() for _ in range(n + 1)]

    def push(stack: dict, pos: int, hist: tuple, phones: Pronunciation, score: float, inserted: bool) -> None:
        key = (lm.state(hist), inserted)
        old = stack.get(key)
        if old is None or score > old.score or (score == old.score and phones < old.phones):
            stack[key] = _Hyp((-score, phones), pos, hist, phones, score, inserted)

    def prune(stack: dict) -> list[_Hyp]:
        hyps = sorted(stack.values())
        if beam != math.inf:
            hyps = hyps[: int(beam)]
        return hyps

    push(stacks[0], 0, (BOS,), (), 0.0, False)
    finals: list[tuple[float, Pronunciation]] = []
    for pos in range(n + 1):
        for h in list(stacks[pos].values()):
            if h.inserted:
                continue
            for tok in inserts:
                p = lm.log10_prob(tok, h.history)
                g = parse_graphone_token(tok)
                push(stacks[pos], pos, lm.state(h.history + (tok,)), h.phones + g[1], h.score + p, True)
        survivors = prune(stacks[pos])
        if pos == n:
            for h in survivors:
                finals.append((h.score + lm.log10_prob(EOS, h.history), h.phones))
            break
        for h in survivors:
            for a in range(1, MAX_GRAPHEMES + 1):
                if pos + a > n:
                    break
                for tok in cache.get(word[pos : pos + a], ()):
                    p = lm.log10_prob(tok, h.history)
                    g = parse_graphone_token(tok)
                    push(stacks[pos + a], pos + a, lm.state(h.history + (tok,)), h.phones + g[1], h.score + p, False)
    finals = [f for f in finals if f[1] and f[0] > -math.inf]
    if not finals:
        raise NoPathError(word)
    finals.sort(key=lambda f: (-f[0], f[1]))
    score, phones = finals[0]
    return phones, score


def transduce(model: GraphoneModel, word: str, beam: int | float = 16) -> Pronunciation:
    return transduce_scored(model, word, beam)[0]


@dataclass(frozen=True)
class G2PTestCase:
    category: str
    word: str
    expected_phones: Pronunciation

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown G2P test category {self.category!r}")


def evaluate_per(model: GraphoneModel, cases: Sequence[G2PTestCase], beam: int | float = 16) -> dict[str, float]:
    """Phone error rate in percent per category."""
    if not cases:
        raise ValueError("evaluate_per needs at least one test case")
    errors: dict[str, int] = defaultdict(int)
    lengths: dict[str, int] = defaultdict(int)
    for case in cases:
        try:
            hyp = transduce(model, case.word, beam)
        except NoPathError:
            hyp = ()
        errors[case.category] += edit_distance(case.expected_phones, hyp)
        lengths[case.category] += len(case.expected_phones)
    return {c: 100.0 * errors[c] / lengths[c] for c in CATEGORIES if c in lengths}


def read_pairs(path: str | Path) -> list[tuple[str, Pronunciation]]:
    """Read ``[category TAB] word TAB phones`` lines as training pairs."""
    return [(c.word, c.expected_phones) for c in _read_rows(path, require_category=False)]


def read_test_cases(path: str | Path) -> list[G2PTestCase]:
    return _read_rows(path, require_category=True)


def example_cases() -> list[G2PTestCase]:
    """The twelve example rows bundled with the package, two per category."""
    with resources.as_file(resources.files(__package__) / "data" / "g2p_examples.tsv") as path:
        return read_test_cases(path)


def _read_rows(path, require_category: bool) -> list:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) == 3:
                cat, word, phones = fields
            elif len(fields) == 2 and not require_category:
                cat, (word, phones) = None, fields
            else:
                raise ValueError(f"{path}:{lineno}: malformed G2P row {line!r}")
            if cat is None:
                rows.append(_Row(word, tuple(phones.split())))
            else:
                rows.append(G2PTestCase(cat, word, tuple(phones.split())))
    return rows


@dataclass(frozen=True)
class _Row:
    word: str
    expected_phones: Pronunciation


def write_pairs(pairs: Iterable[tuple[str, Sequence[str]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, phones in pairs:
            fh.write(f"{word}\t{' '.join(phones)}\n")


def write_per_report(per: dict[str, float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cat, value in per.items():
            fh.write(f"{cat}\t{value:.2f}\n")
