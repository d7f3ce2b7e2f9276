"""End-to-end pipeline driven by a key-value config file.

Stages talk to each other only through files in the output directory, so
re-running one stage from saved intermediates gives the same result as the
full run.  ``manifest.json`` lists every stage with its version, status and
the SHA-256 of every file it wrote.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import shutil
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable

from . import corpus, g2p, lexicon, metrics, rescorer
from .decoder import DecoderConfig, build_prefix_tree, collect_pron_usage, decode_many, expand_output
from .decoder import read_nbest, read_posteriors, write_nbest
from .lm import arpa, clitics, compounds, kneser_ney
from .synthetic import SyntheticDialectSpec, generate_synthetic, read_test_set, write_synthetic

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
OUTPUT_ENV = "DIALECT_ASR_OUT"
STAGE_VERSION = 1


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    output_dir: str = "out"
    # inputs: either generated synthetic data or explicit files
    source: str = "synthetic"
    parallel_corpus: str = ""
    lm_corpus: str = ""
    pronunciations: str = ""
    test_set: str = ""
    dev_set: str = ""
    embeddings: str = ""
    clitic_inventory: str = ""
    g2p_test: str = ""
    # synthetic data
    synthetic_sentences: int = 300
    synthetic_test: int = 30
    synthetic_lm_sentences: int = 900
    synthetic_ambiguous: bool = True
    synthetic_novel_compounds: bool = True
    synthetic_seed: int = 7
    frames_per_phone: int = 3
    noise: float = 0.3
    posterior_seed: int = 1000
    # mapping extraction and lexicon
    em_iterations: int = 5
    min_count: int = 2
    min_prob: float = 0.1
    max_cosine_dist: float = 0.6
    prune_min_rel_usage: float = 0.0
    prune_before_clitics: bool = False
    # g2p
    g2p_order: int = 3
    g2p_em_iterations: int = 10
    g2p_beam: int = 16
    # language model
    lm_order: int = 5
    lm_discount: float = 0.75
    unk_floor: float = 1e-7
    clitic_lambda: float = 0.5
    decompound_first: bool = True
    splitter_min_part_len: int = 3
    splitter_min_part_count: int = 2
    # decoder
    beam_width: float = 8.0
    max_active: int = 400
    n_best: int = 100
    lm_weight: float = 1.0
    word_insertion_penalty: float = 0.0
    min_frames_per_phone: int = 1
    workers: int = 1
    # rescoring
    lstm_embedding: int = 16
    lstm_hidden: int = 32
    lstm_learning_rate: float = 0.5
    lstm_epochs: int = 8
    lstm_seed: int = 13
    lstm_clip: float = 5.0
    rescore_alpha: float = 1.0
    rescore_beta: float = 0.5
    rescore_gamma: float = 0.5

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.source in ("synthetic", "files"), "source must be 'synthetic' or 'files'")
        if self.source == "files":
            for key in ("parallel_corpus", "lm_corpus", "pronunciations", "test_set"):
                value = getattr(self, key)
                need(bool(value), f"{key} is required when source = files")
            for key in ("parallel_corpus", "lm_corpus", "pronunciations", "test_set", "dev_set",
                        "embeddings", "clitic_inventory"):
                value = getattr(self, key)
                need(not value or Path(value).is_file(), f"{key}: file {value!r} does not exist")
        if self.g2p_test:
            need(Path(self.g2p_test).is_file(), f"g2p_test: file {self.g2p_test!r} does not exist")
        need(self.synthetic_sentences >= 1 and self.synthetic_test >= 1, "synthetic sizes must be >= 1")
        need(self.frames_per_phone >= 1, "frames_per_phone must be >= 1")
        need(0.0 <= self.noise < 1.0, "noise must be in [0, 1)")
        need(self.em_iterations >= 1, "em_iterations must be >= 1")
        need(self.min_count >= 1, "min_count must be >= 1")
        need(0.0 <= self.min_prob <= 1.0, "min_prob must be in [0, 1]")
        need(0.0 <= self.max_cosine_dist <= 2.0, "max_cosine_dist must be in [0, 2]")
        need(0.0 <= self.prune_min_rel_usage <= 1.0, "prune_min_rel_usage must be in [0, 1]")
        need(1 <= self.g2p_order <= 5, "g2p_order must be in [1, 5]")
        need(self.g2p_em_iterations >= 1 and self.g2p_beam >= 1, "g2p iterations and beam must be >= 1")
        need(1 <= self.lm_order <= 5, "lm_order must be in [1, 5]")
        need(0.0 < self.lm_discount < 1.0, "lm_discount must be in (0, 1)")
        need(0.0 <= self.unk_floor < 1.0, "unk_floor must be in [0, 1)")
        need(0.0 <= self.clitic_lambda <= 1.0, "clitic_lambda must be in [0, 1]")
        need(self.splitter_min_part_len >= 3, "splitter_min_part_len must be >= 3")
        need(self.beam_width > 0 and self.max_active >= 1 and self.n_best >= 1, "bad decoder limits")
        need(self.min_frames_per_phone >= 1, "min_frames_per_phone must be >= 1")
        need(self.workers >= 1, "workers must be >= 1")
        need(self.lstm_embedding >= 1 and self.lstm_hidden >= 1, "LSTM sizes must be >= 1")
        need(self.lstm_learning_rate > 0 and self.lstm_epochs >= 1, "bad LSTM training settings")

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            beam_width=self.beam_width,
            max_active=self.max_active,
            n_best=self.n_best,
            lm_weight=self.lm_weight,
            word_insertion_penalty=self.word_insertion_penalty,
            min_frames_per_phone=self.min_frames_per_phone,
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _convert(name: str, kind: type, raw: str):
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


FIELD_TYPES = {f.name: {"int": int, "float": float, "bool": bool, "str": str}[f.type] for f in fields(PipelineConfig)}


def config_from_pairs(pairs: dict[str, str], base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = dataclasses.replace(base) if base else PipelineConfig()
    for key, raw in pairs.items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _convert(key, FIELD_TYPES[key], raw))
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    """Parse ``key = value`` lines.  The first setting must be ``version = 1``.

    Relative file paths are taken relative to the config file.
    """
    pairs: dict[str, str] = {}
    version = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = key.strip(), value.strip()
            if version is None:
                if key != "version":
                    raise ConfigError(f"{path}:{lineno}: first setting must be 'version'")
                version = value
                continue
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = value
    if version != str(CONFIG_VERSION):
        raise ConfigError(f"{path}: unsupported config version {version!r}")
    base = Path(path).parent
    for key in ("parallel_corpus", "lm_corpus", "pronunciations", "test_set", "dev_set",
                "embeddings", "clitic_inventory", "g2p_test"):
        if pairs.get(key) and not Path(pairs[key]).is_absolute():
            pairs[key] = str(base / pairs[key])
    return config_from_pairs(pairs)


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


SYSTEMS = ("baseline", "clitics", "compounds")
ABLATION_LABELS = ("Baseline", "+ Clitics", "+ Compounds", "+ 2nd Pass Rescoring")


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.manifest: dict = {
            "manifest_version": 1,
            "config": {k: v for k, v in cfg.as_dict().items() if k != "output_dir"},
            "seeds": {
                "synthetic_seed": cfg.synthetic_seed,
                "posterior_seed": cfg.posterior_seed,
                "lstm_seed": cfg.lstm_seed,
            },
            "inputs": {},
            "stages": [],
        }
        self.paths: dict[str, Path] = {}

    # -- helpers --------------------------------------------------------
    def rel(self, path: Path) -> str:
        try:
            return path.relative_to(self.out).as_posix()
        except ValueError:
            return path.as_posix()

    def run_stage(self, name: str, fn: Callable[[], list[Path]]) -> None:
        record = {"name": name, "version": STAGE_VERSION, "status": "incomplete", "outputs": {}}
        self.manifest["stages"].append(record)
        log.info("stage %s", name)
        try:
            outputs = fn()
        except Exception as exc:  # noqa: BLE001 - reported with the stage name
            self.write_manifest()
            raise StageError(name, exc) from exc
        record["status"] = "complete"
        record["outputs"] = {self.rel(p): sha256(p) for p in sorted(outputs)}
        self.write_manifest()

    def write_manifest(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"
        (self.out / "manifest.json").write_text(text, encoding="utf-8")

    def p(self, name: str) -> Path:
        return self.out / name

    # -- stages ---------------------------------------------------------
    def stage_prepare(self) -> list[Path]:
        cfg = self.cfg
        if cfg.source == "synthetic":
            make = SyntheticDialectSpec if cfg.synthetic_ambiguous else SyntheticDialectSpec.unambiguous
            spec = make(seed=cfg.synthetic_seed)
            data = generate_synthetic(
                spec,
                cfg.synthetic_sentences,
                n_test=cfg.synthetic_test,
                n_lm=cfg.synthetic_lm_sentences,
                novel_compounds_in_test=cfg.synthetic_novel_compounds,
            )
            paths = write_synthetic(data, self.p("data"), cfg.frames_per_phone, cfg.noise, cfg.posterior_seed)
            self.paths.update(
                parallel=paths["parallel"], lm_text=paths["lm_text"], pronunciations=paths["pronunciations"],
                test_set=paths["test_set"], embeddings=paths["embeddings"], clitics=paths["clitics"],
            )
            self._record_inputs()
            return list(paths.values()) + sorted(self.p("data/posteriors").glob("*.post"))
        self.paths.update(
            parallel=Path(cfg.parallel_corpus), lm_text=Path(cfg.lm_corpus),
            pronunciations=Path(cfg.pronunciations), test_set=Path(cfg.test_set),
        )
        if cfg.embeddings:
            self.paths["embeddings"] = Path(cfg.embeddings)
        if cfg.clitic_inventory:
            self.paths["clitics"] = Path(cfg.clitic_inventory)
        if cfg.dev_set:
            self.paths["dev_set"] = Path(cfg.dev_set)
        self._record_inputs()
        return []

    def _record_inputs(self) -> None:
        self.manifest["inputs"] = {k: sha256(p) for k, p in sorted(self.paths.items())}

    def stage_ingest(self) -> list[Path]:
        parallel = corpus.read_parallel(self.paths["parallel"])
        mono = corpus.read_monolingual(self.paths["lm_text"])
        out = []
        for name, sents in (
            ("freq.dialect.tsv", [d for d, _ in parallel]),
            ("freq.standard.tsv", [s for _, s in parallel] + mono),
        ):
            table = corpus.word_frequencies(sents)
            path = self.p(name)
            with open(path, "w", encoding="utf-8") as fh:
                for w, c in sorted(table.counts.items(), key=lambda kv: (-kv[1], kv[0])):
                    fh.write(f"{w}\t{c}\n")
            out.append(path)
        return out

    def stage_train_g2p(self) -> list[Path]:
        pairs = g2p.read_pairs(self.paths["pronunciations"])
        model = g2p.train(pairs, self.cfg.g2p_order, self.cfg.g2p_em_iterations)
        path = self.p("g2p.json")
        model.save(path)
        out = [path]
        if self.cfg.g2p_test:
            per = g2p.evaluate_per(model, g2p.read_test_cases(self.cfg.g2p_test), self.cfg.g2p_beam)
            g2p.write_per_report(per, self.p("g2p_per.tsv"))
            out.append(self.p("g2p_per.tsv"))
        return out

    def stage_mappings(self) -> list[Path]:
        parallel = corpus.read_parallel(self.paths["parallel"])
        cands = corpus.extract_mappings(parallel, self.cfg.em_iterations)
        corpus.write_mappings(cands, self.p("mappings.tsv"))
        kept = lexicon.filter_by_frequency(cands, self.cfg.min_count, self.cfg.min_prob)
        if "embeddings" in self.paths:
            emb = lexicon.read_embeddings(self.paths["embeddings"])
            kept = lexicon.filter_by_embedding_vicinity(kept, emb, self.cfg.max_cosine_dist)
        corpus.write_mappings(kept, self.p("mappings.filtered.tsv"))
        return [self.p("mappings.tsv"), self.p("mappings.filtered.tsv")]

    def _clitic_inventory(self) -> list[lexicon.CliticEntry]:
        if "clitics" not in self.paths:
            return []
        return lexicon.read_clitic_inventory(self.paths["clitics"])

    def _clitic_table(self) -> clitics.CliticTable:
        return clitics.CliticTable(frozenset(c.merged_token for c in self._clitic_inventory()), self.cfg.clitic_lambda)

    def _usage(self, lex, with_clitics: bool):
        if "dev_set" not in self.paths:
            return {}
        table = self._clitic_table() if with_clitics else clitics.CliticTable()
        utts = []
        for _, post_path, ref in read_test_set(self.paths["dev_set"]):
            utts.append((read_posteriors(post_path), clitics.merge_clitics(ref, table)))
        return collect_pron_usage(utts, lex, self.cfg.min_frames_per_phone)

    def stage_lexicon(self) -> list[Path]:
        cfg = self.cfg
        model = g2p.GraphoneModel.load(self.p("g2p.json"))
        cands = corpus.read_mappings(self.p("mappings.filtered.tsv"))
        inventory = self._clitic_inventory()
        report = lexicon.BuildReport()

        def prune(lex, with_clitics):
            if cfg.prune_min_rel_usage <= 0.0:
                return lex
            return lexicon.prune_lexicon(lex, self._usage(lex, with_clitics), cfg.prune_min_rel_usage)

        base = lexicon.assemble_lexicon(cands, model, cfg.g2p_beam, report)
        lex_base = prune(base, False)

        # with clitic entries, the surfaces they cover no longer need word mappings
        surfaces = {c.dialect_surface for c in inventory}
        base_c = lexicon.assemble_lexicon([c for c in cands if c.dialect_word not in surfaces], model, cfg.g2p_beam)
        if cfg.prune_before_clitics:
            lex_clit = lexicon.add_clitic_entries(prune(base_c, False), inventory, model, cfg.g2p_beam, report)
        else:
            lex_clit = prune(lexicon.add_clitic_entries(base_c, inventory, model, cfg.g2p_beam, report), True)

        dc_vocab = [w for s in self._lm_text("compounds", merged=False) for w in s]
        lex_comp = lexicon.add_compound_part_entries(lex_clit, [w for w in dc_vocab if compounds.is_compound_part(w)])

        out = []
        for name, lex in (("baseline", lex_base), ("clitics", lex_clit), ("compounds", lex_comp)):
            path = self.p(f"lexicon.{name}.tsv")
            lexicon.write_lexicon(lex, path)
            out.append(path)
        with open(self.p("lexicon.skipped.tsv"), "w", encoding="utf-8") as fh:
            for a, b in sorted(set(report.skipped)):
                fh.write(f"{a}\t{b}\n")
        out.append(self.p("lexicon.skipped.tsv"))
        return out

    def _splitter(self) -> compounds.CompoundSplitter:
        mono = corpus.read_monolingual(self.paths["lm_text"])
        return compounds.CompoundSplitter(
            corpus.word_frequencies(mono),
            self.cfg.splitter_min_part_len,
            self.cfg.splitter_min_part_count,
        )

    def _lm_text(self, system: str, merged: bool) -> list[corpus.Sentence]:
        text = corpus.read_monolingual(self.paths["lm_text"])
        table = self._clitic_table() if merged else None
        if system == "compounds":
            splitter = self._splitter()
            if self.cfg.decompound_first or table is None:
                text = [compounds.split_compounds(s, splitter) for s in text]
                if table is not None:
                    text = clitics.merge_clitics_in_corpus(text, table)
            else:
                text = clitics.merge_clitics_in_corpus(text, table)
                text = [compounds.split_compounds(s, splitter) for s in text]
        elif table is not None:
            text = clitics.merge_clitics_in_corpus(text, table)
        return text

    def stage_lm(self) -> list[Path]:
        cfg = self.cfg
        out = []
        for system, merged in (("baseline", False), ("baseline", True), ("compounds", False), ("compounds", True)):
            text = self._lm_text(system, merged)
            lm = kneser_ney.train_lm(text, cfg.lm_order, cfg.lm_discount, cfg.unk_floor)
            name = {"baseline": "lm", "compounds": "lm.decompounded"}[system] + (".merged" if merged else "")
            path = self.p(f"{name}.arpa")
            arpa.export_arpa(lm, path)
            out.append(path)
        clitics.write_clitic_table(self._clitic_table(), self.p("clitic_table.txt"))
        out.append(self.p("clitic_table.txt"))
        return out

    def system_lm(self, system: str):
        if system == "baseline":
            return arpa.import_arpa(self.p("lm.arpa"))
        prefix = "lm" if system == "clitics" else "lm.decompounded"
        merged = arpa.import_arpa(self.p(f"{prefix}.merged.arpa"))
        unmerged = arpa.import_arpa(self.p(f"{prefix}.arpa"))
        table = clitics.read_clitic_table(self.p("clitic_table.txt"), self.cfg.clitic_lambda)
        return clitics.InterpolatedScorer(merged, unmerged, table)

    def test_utterances(self):
        return [(utt, read_posteriors(path)) for utt, path, _ in read_test_set(self.paths["test_set"])]

    def stage_decode(self) -> list[Path]:
        utts = self.test_utterances()
        out = []
        for system in SYSTEMS:
            lex = lexicon.read_lexicon(self.p(f"lexicon.{system}.tsv"))
            tree = build_prefix_tree(lex)
            lists = decode_many(
                utts, tree, self.system_lm(system), self.cfg.decoder_config(), self.cfg.workers, skip_failures=True
            )
            path = self.p(f"nbest.{system}.jsonl")
            write_nbest(lists, path)
            out.append(path)
        return out

    def stage_rescore(self) -> list[Path]:
        cfg = self.cfg
        text = corpus.read_monolingual(self.paths["lm_text"])
        tc = rescorer.TrainConfig(cfg.lstm_learning_rate, cfg.lstm_epochs, cfg.lstm_seed, cfg.lstm_clip)
        model = rescorer.train_lstm(text, cfg.lstm_embedding, cfg.lstm_hidden, tc)
        model_path = self.p("lstm.npz")
        model.save(model_path)
        with open(self.p("lstm.trainlog.tsv"), "w", encoding="utf-8") as fh:
            for epoch, ppl in enumerate(model.train_log, 1):
                fh.write(f"{epoch}\t{ppl:.6f}\n")
        model = rescorer.LSTMLM.load(model_path)
        weights = rescorer.ScoreWeights(cfg.rescore_alpha, cfg.rescore_beta, cfg.rescore_gamma)
        lists = [rescorer.rescore_nbest(nb, model, weights) for nb in read_nbest(self.p("nbest.compounds.jsonl"))]
        path = self.p("nbest.rescored.jsonl")
        write_nbest(lists, path, rescorer.rescored_extra_fields(lists))
        return [model_path, self.p("lstm.trainlog.tsv"), path]

    def stage_score(self) -> list[Path]:
        refs = {utt: ref for utt, _, ref in read_test_set(self.paths["test_set"])}
        rows = []
        for system in (*SYSTEMS, "rescored"):
            lists = read_nbest(self.p(f"nbest.{system}.jsonl"))
            by_utt = {nb.utterance_id: expand_output(nb.hyps[0]) for nb in lists}
            utts = sorted(refs)
            r = [refs[u] for u in utts]
            h = [by_utt.get(u, ()) for u in utts]
            w, b = metrics.wer(r, h), metrics.bleu(r, h)
            rows.append((system, w, b))
            with open(self.p(f"hyp.{system}.txt"), "w", encoding="utf-8") as fh:
                for u in utts:
                    fh.write(" ".join(by_utt.get(u, ())) + "\n")
        path = self.p("scores.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("system\twer\tsub\tdel\tins\tref_len\tbleu\tbp\tp1\tp2\tp3\tp4\n")
            for system, w, b in rows:
                ps = "\t".join(f"{p:.6f}" for p in b.precisions)
                fh.write(
                    f"{system}\t{w.wer_percent:.2f}\t{w.substitutions}\t{w.deletions}\t{w.insertions}\t"
                    f"{w.ref_len}\t{b.bleu_percent:.2f}\t{b.brevity_penalty:.6f}\t{ps}\n"
                )
        return [path] + [self.p(f"hyp.{s}.txt") for s in (*SYSTEMS, "rescored")]

    def stage_report(self) -> list[Path]:
        rows = []
        with open(self.p("scores.tsv"), encoding="utf-8") as fh:
            next(fh)
            for line, label in zip(fh, ABLATION_LABELS):
                f = line.rstrip("\n").split("\t")
                rows.append(metrics.AblationRow(label, float(f[1]), float(f[6])))
        table, tsv = metrics.ablation_report(rows)
        self.p("ablation.txt").write_text(table, encoding="utf-8")
        self.p("ablation.tsv").write_text(tsv, encoding="utf-8")
        return [self.p("ablation.txt"), self.p("ablation.tsv")]

    STAGES = (
        ("prepare", "stage_prepare"),
        ("ingest", "stage_ingest"),
        ("train-g2p", "stage_train_g2p"),
        ("extract-mappings", "stage_mappings"),
        ("build-lexicon", "stage_lexicon"),
        ("train-lm", "stage_lm"),
        ("decode", "stage_decode"),
        ("rescore", "stage_rescore"),
        ("score", "stage_score"),
        ("report", "stage_report"),
    )

    def _previous_stages(self) -> dict[str, dict]:
        path = self.out / "manifest.json"
        if not path.is_file():
            return {}
        try:
            old = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return {}
        if old.get("config") != self.manifest["config"]:
            return {}
        return {rec["name"]: rec for rec in old.get("stages", [])}

    def run(self, only: list[str] | None = None) -> None:
        """Run every stage, or only the named ones on top of a previous run.

        A partial run keeps the manifest records of the stages it skips, as
        long as the earlier run used the same configuration.
        """
        if only is None and self.out.exists():
            if any(self.out.iterdir()) and not (self.out / "manifest.json").is_file():
                raise ConfigError(f"{self.out} is not empty and holds no manifest.json; refusing to clear it")
            shutil.rmtree(self.out)
        previous = self._previous_stages() if only is not None else {}
        self.out.mkdir(parents=True, exist_ok=True)
        for name, method in self.STAGES:
            if name == "prepare" or only is None or name in only:
                self.run_stage(name, getattr(self, method))
            elif name in previous:
                self.manifest["stages"].append(previous[name])
                self.write_manifest()


def run_pipeline(cfg: PipelineConfig, only: list[str] | None = None) -> Pipeline:
    """Validate ``cfg`` and run every stage (or just ``only``, reusing saved
    intermediates for the rest).  ``$DIALECT_ASR_OUT`` overrides the output
    directory."""
    env = os.environ.get(OUTPUT_ENV)
    if env:
        cfg = dataclasses.replace(cfg, output_dir=env)
    cfg.validate()
    names = [name for name, _ in Pipeline.STAGES]
    unknown = sorted(set(only or ()) - set(names))
    if unknown:
        raise ConfigError(f"unknown stage(s) {', '.join(unknown)}; choose from {', '.join(names)}")
    pipe = Pipeline(cfg)
    pipe.run(only)
    return pipe
