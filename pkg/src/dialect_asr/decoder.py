"""Frame-synchronous n-best decoding over a lexicon prefix tree.

Each phone is a single HMM state with a self-loop.  Tokens walk the tree one
frame at a time and collect log10 phone posteriors; at a word end they add
the log10 pronunciation weight (counted as acoustic score) and the scaled LM
score of the word.  Tokens are kept apart by their whole word sequence, so
with unbounded beams the n-best list is exact rather than an approximation
through recombined histories.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Sentence
from .lexicon import LexiconEntry
from .lm.clitics import expand_clitics
from .lm.compounds import join_compound_parts
from .lm.kneser_ney import BOS, EOS

log = logging.getLogger(__name__)

INF = math.inf


class LanguageModel(Protocol):
    order: int

    def state(self, history: Sequence[str]) -> tuple[str, ...]: ...

    def log10_prob(self, word: str, history: Sequence[str] = ()) -> float: ...


class DecodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class PosteriorMatrix:
    phone_set: tuple[str, ...]
    frames: np.ndarray

    def __post_init__(self):
        if self.frames.ndim != 2 or (len(self.frames) and self.frames.shape[1] != len(self.phone_set)):
            raise ValueError("posterior matrix must be frames x phones")
        if len(set(self.phone_set)) != len(self.phone_set):
            raise ValueError("phone set has duplicate symbols")
        if len(self.frames):
            if np.any(self.frames < 0):
                raise ValueError("negative posterior")
            if not np.allclose(self.frames.sum(axis=1), 1.0, atol=1e-6, rtol=0):
                raise ValueError("posterior rows must sum to 1")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def log10(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.frames)


def simulate_posteriors(
    phones: Sequence[str],
    phone_set: Sequence[str],
    frames_per_phone: int = 3,
    noise: float = 0.0,
    seed: int = 0,
) -> PosteriorMatrix:
    """Stand-in for an acoustic model: near-one-hot rows along a phone string.

    Every phone lasts ``frames_per_phone`` frames plus a seeded jitter of
    -1, 0 or +1 (never below one frame).  The true phone gets ``1 - noise``
    and the remaining mass is spread evenly over the other phones.
    """
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must be in [0, 1)")
    if frames_per_phone < 1:
        raise ValueError("frames_per_phone must be >= 1")
    phone_set = tuple(phone_set)
    index = {p: k for k, p in enumerate(phone_set)}
    rng = np.random.default_rng(seed)
    jitter = rng.integers(-1, 2, size=len(phones))
    rows = []
    other = noise / (len(phone_set) - 1) if len(phone_set) > 1 else 0.0
    for p, j in zip(phones, jitter):
        if p not in index:
            raise ValueError(f"phone {p!r} not in phone set")
        row = np.full(len(phone_set), other)
        row[index[p]] = 1.0 - noise if len(phone_set) > 1 else 1.0
        rows.extend([row] * max(1, frames_per_phone + int(j)))
    frames = np.array(rows) if rows else np.zeros((0, len(phone_set)))
    return PosteriorMatrix(phone_set, frames)


def write_posteriors(post: PosteriorMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{post.num_frames} {len(post.phone_set)}\n")
        fh.write(" ".join(post.phone_set) + "\n")
        for row in post.frames:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_posteriors(path: str | Path) -> PosteriorMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: posterior file needs a size line and a phone line")
    t, p = (int(x) for x in lines[0].split())
    phones = tuple(lines[1].split())
    if len(phones) != p:
        raise ValueError(f"{path}:2: expected {p} phone names, got {len(phones)}")
    rows = [[float(x) for x in ln.split()] for ln in lines[2:]]
    if len(rows) != t or any(len(r) != p for r in rows):
        raise ValueError(f"{path}: expected {t} rows of {p} values")
    return PosteriorMatrix(phones, np.array(rows).reshape(t, p))


@dataclass
class _Node:
    phone: str | None
    depth: int
    children: dict[str, int] = field(default_factory=dict)
    words: list[tuple[str, float]] = field(default_factory=list)


class PrefixTree:
    """Trie over pronunciations; homophones share their word-end node."""

    def __init__(self, lex: Sequence[LexiconEntry]):
        if not lex:
            raise ValueError("cannot build a prefix tree from an empty lexicon")
        self.nodes: list[_Node] = [_Node(None, 0)]
        phones = set()
        for e in lex:
            for pron, w in e.prons:
                node = 0
                for ph in pron:
                    phones.add(ph)
                    nxt = self.nodes[node].children.get(ph)
                    if nxt is None:
                        nxt = len(self.nodes)
                        self.nodes.append(_Node(ph, self.nodes[node].depth + 1))
                        self.nodes[node].children[ph] = nxt
                    node = nxt
                self.nodes[node].words.append((e.word, w))
        for n in self.nodes:
            n.words.sort()
        self.phone_set = frozenset(phones)

    @property
    def root(self) -> _Node:
        return self.nodes[0]

    def depth(self) -> int:
        return max(n.depth for n in self.nodes)

    def word_ends(self) -> list[int]:
        return [k for k, n in enumerate(self.nodes) if n.words]

    def paths(self) -> list[tuple[tuple[str, ...], str, float]]:
        """(pronunciation, word, weight) for every root-to-word-end path."""
        out = []

        def walk(k: int, prefix: tuple[str, ...]) -> None:
            node = self.nodes[k]
            for w, wt in node.words:
                out.append((prefix, w, wt))
            for ph, c in sorted(node.children.items()):
                walk(c, prefix + (ph,))

        walk(0, ())
        return out


def build_prefix_tree(lex: Sequence[LexiconEntry]) -> PrefixTree:
    return PrefixTree(lex)


@dataclass(frozen=True)
class DecoderConfig:
    beam_width: float = 12.0
    max_active: float = 2000
    n_best: float = 100
    lm_weight: float = 1.0
    word_insertion_penalty: float = 0.0
    min_frames_per_phone: int = 1
    # longest word sequence a hypothesis may grow to
    max_words: float = INF

    def __post_init__(self):
        if self.max_words < 1:
            raise ValueError("max_words must be >= 1")
        if self.n_best < 1:
            raise ValueError("n_best must be >= 1")
        if self.beam_width <= 0:
            raise ValueError("beam_width must be > 0")
        if self.max_active < 1:
            raise ValueError("max_active must be >= 1")
        if self.min_frames_per_phone < 1:
            raise ValueError("min_frames_per_phone must be >= 1")


@dataclass(frozen=True)
class Hypothesis:
    words: Sentence
    acoustic_score: float
    lm_score: float
    total: float


@dataclass
class NBestList:
    utterance_id: str
    hyps: list[Hypothesis]

    def best(self) -> Hypothesis:
        return self.hyps[0]


def rank_key(total: float, words: Sequence[str]) -> tuple:
    # totals equal to 1e-9 count as ties so that summation order cannot flip them
    return (-round(total, 9), tuple(words))


def combine(acoustic: float, lm: float, n_words: int, cfg: DecoderConfig) -> float:
    return acoustic + cfg.lm_weight * lm + cfg.word_insertion_penalty * n_words


class _LMCache:
    def __init__(self, lm: LanguageModel):
        self.lm = lm
        self.cache: dict[tuple, float] = {}

    def __call__(self, word: str, history: tuple[str, ...]) -> float:
        key = (self.lm.state(history), word)
        v = self.cache.get(key)
        if v is None:
            v = self.lm.log10_prob(word, key[0])
            self.cache[key] = v
        return v


def decode(
    post: PosteriorMatrix,
    tree: PrefixTree,
    lm: LanguageModel,
    cfg: DecoderConfig = DecoderConfig(),
    utterance_id: str = "",
) -> NBestList:
    missing = tree.phone_set - set(post.phone_set)
    if missing:
        raise DecodeError(f"lexicon phones {sorted(missing)} are not in the posterior phone set")
    if post.num_frames == 0:
        raise DecodeError("cannot decode an empty posterior matrix")

    col = {p: k for k, p in enumerate(post.phone_set)}
    lp = post.log10()
    nodes = tree.nodes
    node_col = [col[n.phone] if n.phone is not None else -1 for n in nodes]
    root_children = sorted(tree.root.children.values())
    m = cfg.min_frames_per_phone
    lm_score = _LMCache(lm)
    lw, wip = cfg.lm_weight, cfg.word_insertion_penalty

    # token key: (node, frames spent in node capped at m, words); value: (total, acoustic, lm)
    Token = tuple[float, float, float]
    active: dict[tuple, Token] = {}

    def relax(store: dict, key: tuple, tok: Token) -> None:
        if tok[0] == -INF:
            return
        old = store.get(key)
        if old is None or tok[0] > old[0]:
            store[key] = tok

    def word_exits(node_id: int, words: tuple, tok: Token):
        for w, weight in nodes[node_id].words:
            lms = lm_score(w, (BOS,) + words)
            ac = tok[1] + math.log10(weight)
            lmt = tok[2] + lms
            yield words + (w,), (ac + lw * lmt + wip * (len(words) + 1), ac, lmt)

    row = lp[0]
    for c in root_children:
        a = row[node_col[c]]
        relax(active, (c, 1, ()), (a, a, 0.0))

    for t in range(1, post.num_frames):
        row = lp[t]
        nxt: dict[tuple, Token] = {}
        for (node_id, k, words), tok in active.items():
            node = nodes[node_id]
            a = row[node_col[node_id]]
            relax(nxt, (node_id, min(k + 1, m), words), (tok[0] + a, tok[1] + a, tok[2]))
            if k < m:
                continue
            for c in node.children.values():
                a = row[node_col[c]]
                relax(nxt, (c, 1, words), (tok[0] + a, tok[1] + a, tok[2]))
            if node.words and len(words) + 1 < cfg.max_words:
                for new_words, wt in word_exits(node_id, words, tok):
                    for c in root_children:
                        a = row[node_col[c]]
                        relax(nxt, (c, 1, new_words), (wt[0] + a, wt[1] + a, wt[2]))
        active = _prune(nxt, cfg)
        if not active:
            raise DecodeError(f"all hypotheses pruned at frame {t}; try a wider beam or larger max_active")

    finals: dict[tuple, Token] = {}
    for (node_id, k, words), tok in active.items():
        if k < m or not nodes[node_id].words:
            continue
        for new_words, wt in word_exits(node_id, words, tok):
            lme = lm_score(EOS, (BOS,) + new_words)
            lmt = wt[2] + lme
            relax(finals, new_words, (wt[1] + lw * lmt + wip * len(new_words), wt[1], lmt))
    if not finals:
        raise DecodeError("no hypothesis reached a word end at the last frame; try a wider beam")

    ranked = sorted(finals.items(), key=lambda kv: rank_key(kv[1][0], kv[0]))
    if cfg.n_best != INF:
        ranked = ranked[: int(cfg.n_best)]
    hyps = [Hypothesis(words, ac, lms, total) for words, (total, ac, lms) in ranked]
    return NBestList(utterance_id, hyps)


def _prune(tokens: dict[tuple, tuple], cfg: DecoderConfig) -> dict[tuple, tuple]:
    if not tokens:
        return tokens
    best = max(t[0] for t in tokens.values())
    if cfg.beam_width != INF:
        floor = best - cfg.beam_width
        tokens = {k: t for k, t in tokens.items() if t[0] >= floor}
    if cfg.max_active != INF and len(tokens) > cfg.max_active:
        keep = sorted(tokens.items(), key=lambda kv: (-kv[1][0], kv[0][2], kv[0][0], kv[0][1]))
        tokens = dict(keep[: int(cfg.max_active)])
    return tokens


def _decode_job(args):
    post, tree, lm, cfg, utt, skip_failures = args
    try:
        return decode(post, tree, lm, cfg, utt)
    except DecodeError as exc:
        if not skip_failures:
            raise
        log.warning("utterance %s: %s; emitting an empty n-best list", utt, exc)
        return NBestList(utt, [])


def decode_many(
    utterances: Sequence[tuple[str, PosteriorMatrix]],
    tree: PrefixTree,
    lm: LanguageModel,
    cfg: DecoderConfig = DecoderConfig(),
    workers: int = 1,
    skip_failures: bool = False,
) -> list[NBestList]:
    """Decode utterances independently; output order follows the input.

    With ``skip_failures`` an utterance that cannot be decoded yields an
    empty n-best list instead of aborting the batch.
    """
    jobs = [(post, tree, lm, cfg, utt, skip_failures) for utt, post in utterances]
    if workers <= 1:
        return [_decode_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_decode_job, jobs))


def expand_output(hyp: Hypothesis | Sequence[str]) -> Sentence:
    """Surface form: clitics split on ``#``, ``+``-marked parts rejoined."""
    words = hyp.words if isinstance(hyp, Hypothesis) else hyp
    return join_compound_parts(expand_clitics(words))


def forced_align(
    post: PosteriorMatrix, words: Sequence[str], lex: Sequence[LexiconEntry], min_frames_per_phone: int = 1
) -> tuple[float, list[tuple[str, ...]]]:
    """Best acoustic score (log10 posteriors plus log10 pronunciation weights)
    of a fixed word sequence, and the pronunciations that achieve it.

    Viterbi over the linear word graph in which every word branches into its
    pronunciations; each DP state carries the pronunciations chosen so far.
    """
    index = {e.word: e.prons for e in lex}
    col = {p: k for k, p in enumerate(post.phone_set)}
    lp = post.log10()
    m = min_frames_per_phone
    if not words or post.num_frames == 0:
        return -INF, []

    def entries(k: int, base: float, chosen: tuple) -> list:
        # states entering word k: (k, pron index, phone index 0, frames 1)
        out = []
        for pi, (pron, w) in enumerate(index[words[k]]):
            out.append(((k, pi, 0, 1), base + math.log10(w), chosen + (pron,)))
        return out

    cur: dict[tuple, tuple[float, tuple]] = {}
    for key, score, chosen in entries(0, 0.0, ()):
        pron = index[words[0]][key[1]][0]
        cur[key] = (score + lp[0][col[pron[0]]], chosen)
    for t in range(1, post.num_frames):
        row = lp[t]
        nxt: dict[tuple, tuple[float, tuple]] = {}

        def put(key, score, chosen):
            if score == -INF:
                return
            old = nxt.get(key)
            if old is None or score > old[0]:
                nxt[key] = (score, chosen)

        for (k, pi, j, c), (score, chosen) in cur.items():
            pron = index[words[k]][pi][0]
            put((k, pi, j, min(c + 1, m)), score + row[col[pron[j]]], chosen)
            if c < m:
                continue
            if j + 1 < len(pron):
                put((k, pi, j + 1, 1), score + row[col[pron[j + 1]]], chosen)
            elif k + 1 < len(words):
                for key, s2, ch2 in entries(k + 1, score, chosen):
                    p2 = index[words[k + 1]][key[1]][0]
                    put(key, s2 + row[col[p2[0]]], ch2)
        cur = nxt
    best_score, best_prons = -INF, []
    for (k, pi, j, c), (score, chosen) in sorted(cur.items()):
        pron = index[words[k]][pi][0]
        if k == len(words) - 1 and j == len(pron) - 1 and c >= m and score > best_score:
            best_score, best_prons = score, list(chosen)
    return best_score, best_prons


def collect_pron_usage(
    utterances: Iterable[tuple[PosteriorMatrix, Sequence[str]]],
    lex: Sequence[LexiconEntry],
    min_frames_per_phone: int = 1,
) -> dict[tuple[str, tuple[str, ...]], int]:
    """Count how often each pronunciation wins a forced alignment."""
    usage: dict[tuple[str, tuple[str, ...]], int] = {}
    known = {e.word for e in lex}
    for post, words in utterances:
        if not words or any(w not in known for w in words):
            continue
        score, prons = forced_align(post, words, lex, min_frames_per_phone)
        if score == -INF:
            continue
        for w, p in zip(words, prons):
            usage[(w, p)] = usage.get((w, p), 0) + 1
    return usage


def write_nbest(lists: Iterable[NBestList], path: str | Path, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for nb in lists:
            for rank, h in enumerate(nb.hyps, 1):
                rec = {
                    "utt": nb.utterance_id,
                    "rank": rank,
                    "words": list(h.words),
                    "acoustic": h.acoustic_score,
                    "lm": h.lm_score,
                    "total": h.total,
                }
                if extra and (nb.utterance_id, rank) in extra:
                    rec.update(extra[(nb.utterance_id, rank)])
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_nbest(path: str | Path) -> list[NBestList]:
    lists: dict[str, list[tuple[int, Hypothesis]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                h = Hypothesis(tuple(rec["words"]), rec["acoustic"], rec["lm"], rec["total"])
                lists.setdefault(rec["utt"], []).append((rec["rank"], h))
            except (KeyError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad n-best record ({exc})") from None
    return [NBestList(u, [h for _, h in sorted(v, key=lambda x: x[0])]) for u, v in lists.items()]
