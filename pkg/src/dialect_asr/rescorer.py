"""Second-pass LSTM language model and n-best rescoring.

The LSTM is a single layer in float64 numpy, trained with full-sentence
backpropagation through time and plain SGD.  Gates are stacked in the order
input, forget, output, candidate inside one weight matrix that acts on the
concatenation of the word embedding and the previous hidden state.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .decoder import Hypothesis, NBestList, expand_output
from .metrics import wer

log = logging.getLogger(__name__)

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
PARAM_NAMES = ("embedding", "W", "b", "W_out", "b_out")
FORMAT_VERSION = 1
LN10 = math.log(10.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 10
    seed: int = 0
    gradient_clip: float = 5.0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class LSTMLM:
    vocab: list[str]
    embedding: np.ndarray  # V x E
    W: np.ndarray  # 4H x (E + H), rows: input, forget, output, candidate
    b: np.ndarray  # 4H
    W_out: np.ndarray  # H x V
    b_out: np.ndarray  # V
    train_log: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.index = {w: k for k, w in enumerate(self.vocab)}

    @property
    def E(self) -> int:
        return self.embedding.shape[1]

    @property
    def H(self) -> int:
        return self.W_out.shape[0]

    @property
    def V(self) -> int:
        return len(self.vocab)

    def params(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def ids(self, sentence: Sequence[str]) -> tuple[list[int], list[int]]:
        unk = self.index[UNK]
        toks = [self.index.get(w, unk) for w in sentence]
        return [self.index[BOS]] + toks, toks + [self.index[EOS]]

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            format_version=np.array(FORMAT_VERSION),
            dims=np.array([self.V, self.E, self.H]),
            vocab=np.array(json.dumps(self.vocab, ensure_ascii=False)),
            **{n: np.ascontiguousarray(a) for n, a in self.params().items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "LSTMLM":
        with np.load(path) as z:
            if int(z["format_version"]) != FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported model format {int(z['format_version'])}")
            V, E, H = (int(x) for x in z["dims"])
            model = cls(json.loads(str(z["vocab"])), *(z[n].copy() for n in PARAM_NAMES))
        if model.embedding.shape != (V, E) or model.W.shape != (4 * H, E + H) or model.W_out.shape != (H, V):
            raise ValueError(f"{path}: parameter shapes disagree with the dims header")
        return model


def init_lstm(vocab: Iterable[str], E: int, H: int, seed: int = 0, scale: float = 0.1) -> LSTMLM:
    if E < 1 or H < 1:
        raise ValueError("E and H must be >= 1")
    words = sorted(set(vocab) - {BOS, EOS, UNK})
    full = [BOS, EOS, UNK] + words
    rng = np.random.default_rng(seed)
    V = len(full)

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    return LSTMLM(full, u(V, E), u(4 * H, E + H), u(4 * H), u(H, V), u(V))


@dataclass
class _Trace:
    xs: list[np.ndarray]
    hs: list[np.ndarray]
    cs: list[np.ndarray]
    gates: list[tuple[np.ndarray, ...]]
    probs: list[np.ndarray]


def _forward(model: LSTMLM, inputs: Sequence[int]) -> _Trace:
    H = model.H
    h, c = np.zeros(H), np.zeros(H)
    tr = _Trace([], [h], [c], [], [])
    for x in inputs:
        xh = np.concatenate([model.embedding[x], h])
        z = model.W @ xh + model.b
        i, f, o = sigmoid(z[:H]), sigmoid(z[H : 2 * H]), sigmoid(z[2 * H : 3 * H])
        g = np.tanh(z[3 * H :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        y = h @ model.W_out + model.b_out
        y = y - y.max()
        p = np.exp(y)
        p /= p.sum()
        tr.xs.append(xh)
        tr.hs.append(h)
        tr.cs.append(c)
        tr.gates.append((i, f, o, g, tc))
        tr.probs.append(p)
    return tr


def step_distributions(model: LSTMLM, sentence: Sequence[str]) -> list[np.ndarray]:
    """Next-word distributions after ``<s>`` and after each word."""
    inputs, _ = model.ids(sentence)
    return _forward(model, inputs).probs


def nll(model: LSTMLM, sentence: Sequence[str]) -> float:
    """log10 probability of the sentence including ``</s>``.

    Named after the quantity it is built from; the returned value is the
    negated negative log-likelihood in base 10, so higher is better.
    """
    inputs, targets = model.ids(sentence)
    probs = _forward(model, inputs).probs
    return float(sum(math.log10(p[t]) for p, t in zip(probs, targets)))


def loss(model: LSTMLM, sentence: Sequence[str]) -> float:
    """Cross-entropy in nats."""
    return -nll(model, sentence) * LN10


def gradients(model: LSTMLM, sentence: Sequence[str]) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy (nats) and its gradient for every parameter."""
    inputs, targets = model.ids(sentence)
    tr = _forward(model, inputs)
    H, E = model.H, model.E
    grads = {n: np.zeros_like(a) for n, a in model.params().items()}
    total = 0.0
    dh_next, dc_next = np.zeros(H), np.zeros(H)
    for t in reversed(range(len(inputs))):
        p = tr.probs[t]
        total -= math.log(p[targets[t]])
        dy = p.copy()
        dy[targets[t]] -= 1.0
        h = tr.hs[t + 1]
        grads["W_out"] += np.outer(h, dy)
        grads["b_out"] += dy
        dh = model.W_out @ dy + dh_next
        i, f, o, g, tc = tr.gates[t]
        c_prev = tr.cs[t]
        do = dh * tc
        dc = dh * o * (1.0 - tc**2) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g**2)])
        grads["W"] += np.outer(dz, tr.xs[t])
        grads["b"] += dz
        dxh = model.W.T @ dz
        grads["embedding"][inputs[t]] += dxh[:E]
        dh_next = dxh[E:]
        dc_next = dc * f
    return total, grads


GradientFn = Callable[[LSTMLM, Sequence[str]], tuple[float, dict[str, np.ndarray]]]


def gradient_check(
    model: LSTMLM,
    sentence: Sequence[str],
    grad_fn: GradientFn = gradients,
    step: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Largest relative difference between analytic and central-difference
    gradients over every parameter entry.

    The relative error of an entry is ``|a - n| / max(|a|, |n|, floor)``;
    the floor keeps entries whose true gradient is ~0 from dividing
    round-off by round-off.
    """
    _, analytic = grad_fn(model, sentence)
    worst = 0.0
    for name, arr in model.params().items():
        ga = analytic[name]
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            lp = loss(model, sentence)
            arr[idx] = old - step
            lm = loss(model, sentence)
            arr[idx] = old
            num = (lp - lm) / (2 * step)
            a = ga[idx]
            err = abs(a - num) / max(abs(a), abs(num), floor)
            worst = max(worst, err)
    return worst


def train_lstm(
    corpus: Sequence[Sequence[str]], E: int = 16, H: int = 32, cfg: TrainConfig = TrainConfig()
) -> LSTMLM:
    """SGD over sentences in corpus order, one update per sentence.

    ``model.train_log`` gets the training-set perplexity of every epoch,
    accumulated from the per-sentence losses seen during that epoch.
    """
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    vocab = {w for s in corpus for w in s}
    model = init_lstm(vocab, E, H, cfg.seed, cfg.init_scale)
    params = model.params()
    for epoch in range(cfg.epochs):
        total, tokens = 0.0, 0
        for sent in corpus:
            l, grads = gradients(model, sent)
            total += l
            tokens += len(sent) + 1
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            scale = cfg.learning_rate
            if cfg.gradient_clip > 0 and norm > cfg.gradient_clip:
                scale *= cfg.gradient_clip / norm
            for n, g in grads.items():
                params[n] -= scale * g
        ppl = math.exp(total / tokens)
        model.train_log.append(ppl)
        log.info("epoch %d: training perplexity %.3f", epoch + 1, ppl)
    return model


@dataclass(frozen=True)
class ScoreWeights:
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 0.5

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.alpha, self.beta, self.gamma)):
            raise ValueError("score weights must be finite")


@dataclass(frozen=True)
class RescoredHypothesis(Hypothesis):
    neural: float = 0.0
    rescored_total: float = 0.0
    original_rank: int = 0


def rescore_nbest(nbest: NBestList, model: LSTMLM, w: ScoreWeights = ScoreWeights()) -> NBestList:
    """Re-rank by ``alpha*acoustic + beta*lm + gamma*neural``.

    The neural score is computed on the expanded surface text.  Ties keep
    the first-pass order.
    """
    if not nbest.hyps:
        raise ValueError("cannot rescore an empty n-best list")
    scored = []
    for rank, h in enumerate(nbest.hyps, 1):
        neural = nll(model, expand_output(h)) if w.gamma != 0.0 else 0.0
        total = w.alpha * h.acoustic_score + w.beta * h.lm_score + w.gamma * neural
        scored.append(RescoredHypothesis(h.words, h.acoustic_score, h.lm_score, h.total, neural, total, rank))
    scored.sort(key=lambda r: (-r.rescored_total, r.original_rank))
    return NBestList(nbest.utterance_id, scored)


def rescored_extra_fields(lists: Sequence[NBestList]) -> dict:
    """Per (utt, rank) extra JSON fields for :func:`decoder.write_nbest`."""
    out = {}
    for nb in lists:
        for rank, h in enumerate(nb.hyps, 1):
            if isinstance(h, RescoredHypothesis):
                out[(nb.utterance_id, rank)] = {
                    "neural": h.neural,
                    "rescored_total": h.rescored_total,
                    "first_pass_rank": h.original_rank,
                }
    return out


def tune_weights(
    nbests: Sequence[NBestList],
    refs: Sequence[Sequence[str]],
    model: LSTMLM,
    betas: Sequence[float] = (0.0, 0.25, 0.5, 1.0),
    gammas: Sequence[float] = (0.0, 0.25, 0.5, 1.0),
    alpha: float = 1.0,
) -> tuple[ScoreWeights, float]:
    """Grid search over (beta, gamma) for the lowest dev-set WER.

    Ties go to the earliest grid point.  Neural scores are computed once.
    """
    cache: dict[tuple[str, ...], float] = {}
    for nb in nbests:
        for h in nb.hyps:
            words = expand_output(h)
            if words not in cache:
                cache[words] = nll(model, words)
    best_w, best_wer = None, math.inf
    for beta, gamma in itertools.product(betas, gammas):
        hyps = []
        for nb in nbests:
            top = max(
                enumerate(nb.hyps),
                key=lambda kh: (
                    alpha * kh[1].acoustic_score + beta * kh[1].lm_score + gamma * cache[expand_output(kh[1])],
                    -kh[0],
                ),
            )[1]
            hyps.append(expand_output(top))
        score = wer(refs, hyps).wer_percent
        if score < best_wer:
            best_w, best_wer = ScoreWeights(alpha, beta, gamma), score
    return best_w, best_wer


def with_params(model: LSTMLM, **arrays: np.ndarray) -> LSTMLM:
    """Copy of ``model`` with some parameter arrays replaced."""
    return replace(model, **{n: arrays.get(n, getattr(model, n)).copy() for n in PARAM_NAMES}, train_log=[])
