"""Synthetic dialect data for end-to-end runs.

Standard-language sentences come from a handful of templates.  Each one is
turned into a dialect sentence by explicit word translations, suffix
rewrites, clitic contractions and random spelling variants.  Dialect
spellings get "true" pronunciations from a small letter-to-phone rule set,
and test utterances get simulated phone posteriors.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import ParallelCorpus, Sentence, write_monolingual, write_parallel
from .decoder import simulate_posteriors, write_posteriors
from .lexicon import CliticEntry, EmbeddingTable, write_clitic_inventory, write_embeddings
from .g2p import write_pairs

LETTER_RULES: tuple[tuple[str, str], ...] = (
    ("sch", "sh"),
    ("ch", "x"),
    ("ei", "ai"),
    ("ie", "i_"),
    ("ue", "u e"),
    ("üe", "y e"),
    ("ee", "e_"),
    ("uu", "u_"),
    ("üü", "y_"),
    ("ng", "ng"),
    ("ä", "eh"),
    ("ö", "oe"),
    ("ü", "y"),
    ("z", "ts"),
    ("w", "v"),
    ("v", "f"),
)


def letters_to_phones(word: str) -> tuple[str, ...]:
    """Deterministic pronunciation of a dialect spelling (longest rule first)."""
    phones: list[str] = []
    i = 0
    rules = sorted(LETTER_RULES, key=lambda r: -len(r[0]))
    while i < len(word):
        for src, dst in rules:
            if word.startswith(src, i):
                phones.extend(dst.split())
                i += len(src)
                break
        else:
            phones.append(word[i])
            i += 1
    return tuple(phones)


@dataclass
class SyntheticDialectSpec:
    """Grammar slots plus the standard-to-dialect transform rules."""

    conj: list[str] = field(default_factory=lambda: ["weil", "dass", "ob"])
    subjects: dict[str, str] = field(
        default_factory=lambda: {"ich": "1s", "du": "2s", "er": "3s", "wir": "1p", "ihr": "2p"}
    )
    aux: dict[str, str] = field(
        default_factory=lambda: {"1s": "habe", "2s": "hast", "3s": "hat", "1p": "haben", "2p": "habt"}
    )
    # second auxiliary paradigm; without it subject and auxiliary always co-occur
    aux_sein: dict[str, str] = field(
        default_factory=lambda: {"1s": "bin", "2s": "bist", "3s": "ist", "1p": "sind", "2p": "seid"}
    )
    adverbs: list[str] = field(default_factory=lambda: ["gestern", "heute", "dort", "schon", "oft", "wieder"])
    determiners: list[str] = field(default_factory=lambda: ["das", "ein", "unser"])
    nouns: list[str] = field(
        default_factory=lambda: [
            "buch", "haus", "tisch", "garten", "tuer", "bad", "kopf", "kneipe",
            "brief", "wagen", "glas", "wand", "gläschen", "häuschen",
        ]
    )
    modifiers: list[str] = field(default_factory=lambda: ["haus", "garten", "bad", "glas", "buch"])
    heads: list[str] = field(default_factory=lambda: ["tuer", "wand", "tisch", "wagen", "brief"])
    participles: list[str] = field(
        default_factory=lambda: ["gelesen", "gesehen", "gekauft", "gebaut", "geöffnet", "gemalt"]
    )
    participles_sein: list[str] = field(default_factory=lambda: ["gegangen", "gekommen", "gefahren"])
    translations: dict[str, str] = field(
        default_factory=lambda: {
            "weil": "wil", "dass": "dass", "ob": "ob",
            "ich": "ich", "du": "du", "er": "er", "wir": "mir", "ihr": "ihr",
            "habe": "ha", "hast": "hesch", "hat": "het", "haben": "hend", "habt": "hend",
            "bin": "bi", "bist": "bisch", "ist": "isch", "sind": "sind", "seid": "sind",
            "gegangen": "gange", "gekommen": "cho", "gefahren": "gfahre",
            "gestern": "geschter", "heute": "hüt", "dort": "dört", "schon": "scho",
            "oft": "oft", "wieder": "wieder",
            "das": "s", "ein": "es", "unser": "üses",
            "buch": "buech", "haus": "huus", "tisch": "tisch", "tuer": "türe",
            "bad": "bad", "kopf": "grind", "kneipe": "beiz", "brief": "brief",
            "glas": "glas", "wand": "wand",
            "gesehen": "gseh", "gekauft": "kauft", "gebaut": "baut",
            "geöffnet": "ufgmacht", "gemalt": "gmolt",
        }
    )
    suffix_rules: list[tuple[str, str]] = field(
        default_factory=lambda: [("chen", "li"), ("esen", "äse"), ("en", "e")]
    )
    contractions: dict[tuple[str, str], str] = field(
        default_factory=lambda: {
            ("haben", "wir"): "hemmer", ("habt", "ihr"): "hender", ("hat", "er"): "hetter",
            ("sind", "wir"): "simmer", ("seid", "ihr"): "sinder",
        }
    )
    spelling_variants: dict[str, list[str]] = field(
        default_factory=lambda: {"buech": ["buech", "buach"], "geschter": ["geschter", "gester"], "hüt": ["hüt", "hütt"]}
    )
    seed: int = 0

    @classmethod
    def unambiguous(cls, **kw) -> "SyntheticDialectSpec":
        """Variant without homophones (plural auxiliaries stay distinct)."""
        spec = cls(**kw)
        spec.translations = dict(spec.translations, habt="heit", seid="seid")
        return spec

    def compounds(self) -> list[tuple[str, str]]:
        return [(m, h) for m in self.modifiers for h in self.heads if m != h]

    def dialect_word(self, word: str) -> str:
        if word in self.translations:
            return self.translations[word]
        for m, h in self.compounds():
            if word == m + h:
                return self.dialect_word(m) + self.dialect_word(h)
        for suf, rep in self.suffix_rules:
            if word.endswith(suf):
                return word[: -len(suf)] + rep
        return word

    def clitic_inventory(self) -> list[CliticEntry]:
        return [CliticEntry(surface, parts) for parts, surface in sorted(self.contractions.items())]


def standard_sentence(spec: SyntheticDialectSpec, rng: random.Random, nouns: Sequence[str]) -> Sentence:
    subj = rng.choice(sorted(spec.subjects))
    if rng.random() < 0.5:
        aux, part = spec.aux[spec.subjects[subj]], rng.choice(spec.participles)
    else:
        aux, part = spec.aux_sein[spec.subjects[subj]], rng.choice(spec.participles_sein)
    adv = rng.choice(spec.adverbs)
    obj = [rng.choice(spec.determiners), rng.choice(list(nouns))]
    template = rng.randrange(3)
    if template == 0:
        # subordinate clause: auxiliary far from its subject
        return (rng.choice(spec.conj), subj, adv, *obj, part, aux)
    if template == 1:
        return (adv, aux, subj, *obj, part)
    return (subj, aux, adv, *obj, part)


def to_dialect(spec: SyntheticDialectSpec, sentence: Sequence[str], rng: random.Random) -> Sentence:
    out: list[str] = []
    i = 0
    while i < len(sentence):
        pair = tuple(sentence[i : i + 2])
        if len(pair) == 2 and pair in spec.contractions:
            out.append(spec.contractions[pair])
            i += 2
            continue
        d = spec.dialect_word(sentence[i])
        variants = spec.spelling_variants.get(d)
        out.append(rng.choice(variants) if variants else d)
        i += 1
    return tuple(out)


@dataclass
class SyntheticData:
    train: ParallelCorpus
    test: ParallelCorpus
    lm_text: list[Sentence]
    pronunciations: dict[str, tuple[str, ...]]
    phone_set: tuple[str, ...]
    embeddings: EmbeddingTable
    clitics: list[CliticEntry]


def generate_synthetic(
    spec: SyntheticDialectSpec,
    n_sentences: int,
    n_test: int = 30,
    n_lm: int | None = None,
    novel_compounds_in_test: bool = True,
    embedding_dim: int = 16,
) -> SyntheticData:
    """Parallel training/test data, standard LM text and dialect prons.

    Half of the compounds (every other one) are held out of the parallel
    training data; with ``novel_compounds_in_test`` the test sentences use
    them as objects, otherwise test nouns come from the training inventory.
    The LM text draws from all nouns and compounds.
    """
    if n_sentences < 1:
        raise ValueError("n_sentences must be >= 1")
    rng = random.Random(spec.seed)
    compounds = ["".join(c) for c in spec.compounds()]
    seen_compounds = compounds[::2]
    held_out = compounds[1::2]
    train_nouns = spec.nouns + seen_compounds
    test_nouns = held_out if novel_compounds_in_test else train_nouns
    all_nouns = spec.nouns + compounds

    train = []
    for _ in range(n_sentences):
        std = standard_sentence(spec, rng, train_nouns)
        train.append((to_dialect(spec, std, rng), std))
    test = []
    for _ in range(n_test):
        std = standard_sentence(spec, rng, test_nouns)
        test.append((to_dialect(spec, std, rng), std))
    lm_text = [std for _, std in train]
    for _ in range(n_lm if n_lm is not None else 2 * n_sentences):
        lm_text.append(standard_sentence(spec, rng, all_nouns))

    dialect_vocab = sorted({w for d, _ in train + test for w in d})
    prons = {w: letters_to_phones(w) for w in dialect_vocab}
    # every surface form the rules can produce, so held-out words are covered too
    for word in {w for s in lm_text for w in s}:
        d = spec.dialect_word(word)
        for v in spec.spelling_variants.get(d, [d]):
            prons.setdefault(v, letters_to_phones(v))
    for c in spec.clitic_inventory():
        prons.setdefault(c.dialect_surface, letters_to_phones(c.dialect_surface))
    phone_set = tuple(sorted({p for ph in prons.values() for p in ph}))

    # spelling variants of one word share a base vector; everything else is random
    erng = np.random.default_rng(spec.seed)
    base: dict[str, np.ndarray] = {}
    variant_of = {v: d for d, vs in spec.spelling_variants.items() for v in vs}
    vectors = {}
    for w in sorted(prons):
        root = variant_of.get(w, w)
        if root not in base:
            base[root] = erng.normal(size=embedding_dim)
        vectors[w] = base[root] + 0.1 * erng.normal(size=embedding_dim)
    emb = EmbeddingTable(embedding_dim, vectors)
    return SyntheticData(train, test, lm_text, prons, phone_set, emb, spec.clitic_inventory())


def write_synthetic(
    data: SyntheticData,
    out_dir: str | Path,
    frames_per_phone: int = 3,
    noise: float = 0.3,
    seed: int = 0,
) -> dict[str, Path]:
    """Write corpora, prons, embeddings, clitics and test posteriors.

    The test set file lists ``utt_id TAB posterior_file TAB reference``;
    posterior files are written next to it under ``posteriors/``.
    """
    out = Path(out_dir)
    (out / "posteriors").mkdir(parents=True, exist_ok=True)
    paths = {
        "parallel": out / "train.parallel.tsv",
        "lm_text": out / "lm.txt",
        "test_parallel": out / "test.parallel.tsv",
        "pronunciations": out / "dialect_prons.tsv",
        "embeddings": out / "embeddings.txt",
        "clitics": out / "clitics.tsv",
        "test_set": out / "test_set.tsv",
    }
    write_parallel(data.train, paths["parallel"])
    write_parallel(data.test, paths["test_parallel"])
    write_monolingual(data.lm_text, paths["lm_text"])
    write_pairs(sorted(data.pronunciations.items()), paths["pronunciations"])
    write_embeddings(data.embeddings, paths["embeddings"])
    write_clitic_inventory(data.clitics, paths["clitics"])
    with open(paths["test_set"], "w", encoding="utf-8") as fh:
        for k, (dia, std) in enumerate(data.test):
            utt = f"utt{k:04d}"
            phones = [p for w in dia for p in data.pronunciations[w]]
            post = simulate_posteriors(phones, data.phone_set, frames_per_phone, noise, seed + k)
            rel = Path("posteriors") / f"{utt}.post"
            write_posteriors(post, out / rel)
            fh.write(f"{utt}\t{rel.as_posix()}\t{' '.join(std)}\n")
    return paths


def read_test_set(path: str | Path) -> list[tuple[str, Path, Sentence]]:
    base = Path(path).parent
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected utt TAB posterior TAB reference")
            rows.append((fields[0], base / fields[1], tuple(fields[2].split())))
    return rows
