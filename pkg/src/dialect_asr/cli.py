"""Command-line entry point: ``dialect-asr <subcommand>``.

Exit codes: 0 success, 1 invalid arguments or config, 2 a stage failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

from . import corpus, g2p, lexicon, metrics, pipeline, rescorer
from .decoder import build_prefix_tree, decode_many, expand_output, read_nbest, read_posteriors, write_nbest
from .lm import arpa, clitics, compounds, kneser_ney
from .synthetic import SyntheticDialectSpec, generate_synthetic, read_test_set, write_synthetic

log = logging.getLogger("dialect_asr")


class UsageError(ValueError):
    pass


def _existing(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    return p


def _outdir(path: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _clitic_table(path: str, lam: float = 0.5) -> clitics.CliticTable:
    """Accept either a clitic table (one merged token per line) or a clitic
    inventory (surface TAB standard words)."""
    p = _existing(path)
    if "\t" in p.read_text(encoding="utf-8"):
        merged = frozenset(c.merged_token for c in lexicon.read_clitic_inventory(p))
        return clitics.CliticTable(merged, lam)
    return clitics.read_clitic_table(p, lam)


# -- subcommands ---------------------------------------------------------

def cmd_ingest(a) -> None:
    sents = corpus.read_parallel(_existing(a.parallel)) if a.parallel else []
    mono = corpus.read_monolingual(_existing(a.mono)) if a.mono else []
    side = [d for d, _ in sents] if a.side == "dialect" else [s for _, s in sents] + mono
    table = corpus.word_frequencies(side)
    with open(_outdir(a.out), "w", encoding="utf-8") as fh:
        for w, c in sorted(table.counts.items(), key=lambda kv: (-kv[1], kv[0])):
            fh.write(f"{w}\t{c}\n")


def cmd_extract_mappings(a) -> None:
    cands = corpus.extract_mappings(corpus.read_parallel(_existing(a.parallel)), a.em_iterations)
    cands = lexicon.filter_by_frequency(cands, a.min_count, a.min_prob)
    if a.embeddings:
        emb = lexicon.read_embeddings(_existing(a.embeddings))
        cands = lexicon.filter_by_embedding_vicinity(cands, emb, a.max_cosine_dist)
    corpus.write_mappings(cands, _outdir(a.out))


def cmd_train_g2p(a) -> None:
    model = g2p.train(g2p.read_pairs(_existing(a.pairs)), a.order, a.em_iterations)
    model.save(_outdir(a.out))


def cmd_eval_g2p(a) -> None:
    model = g2p.GraphoneModel.load(_existing(a.model))
    per = g2p.evaluate_per(model, g2p.read_test_cases(_existing(a.cases)), a.beam)
    if a.out:
        g2p.write_per_report(per, _outdir(a.out))
    for cat, value in per.items():
        print(f"{cat}\t{value:.2f}")


def cmd_build_lexicon(a) -> None:
    model = g2p.GraphoneModel.load(_existing(a.g2p))
    cands = corpus.read_mappings(_existing(a.mappings))
    report = lexicon.BuildReport()
    if a.clitics:
        inventory = lexicon.read_clitic_inventory(_existing(a.clitics))
        surfaces = {c.dialect_surface for c in inventory}
        lex = lexicon.assemble_lexicon([c for c in cands if c.dialect_word not in surfaces], model, a.beam, report)
        lex = lexicon.add_clitic_entries(lex, inventory, model, a.beam, report)
    else:
        lex = lexicon.assemble_lexicon(cands, model, a.beam, report)
    if a.compound_text:
        parts = {w for s in corpus.read_monolingual(_existing(a.compound_text)) for w in s}
        lex = lexicon.add_compound_part_entries(lex, [w for w in parts if compounds.is_compound_part(w)])
    lexicon.write_lexicon(lex, _outdir(a.out))
    for dia, std in report.skipped:
        log.warning("skipped %s -> %s", dia, std)


def _prepare_lm_text(a) -> list:
    text = corpus.read_monolingual(_existing(a.corpus))
    if a.decompound:
        splitter = compounds.CompoundSplitter(corpus.word_frequencies(text), a.min_part_len, a.min_part_count)
        text = [compounds.split_compounds(s, splitter) for s in text]
    if a.clitics:
        text = clitics.merge_clitics_in_corpus(text, _clitic_table(a.clitics))
    return text


def cmd_train_lm(a) -> None:
    lm = kneser_ney.train_lm(_prepare_lm_text(a), a.order, a.discount, a.unk_floor)
    arpa.export_arpa(lm, _outdir(a.out))


def cmd_merge_clitics(a) -> None:
    table = _clitic_table(a.clitics)
    text = corpus.read_monolingual(_existing(a.corpus))
    corpus.write_monolingual(clitics.merge_clitics_in_corpus(text, table), _outdir(a.out))


def _decoder_config(a):
    return pipeline.DecoderConfig(
        beam_width=a.beam_width, max_active=a.max_active, n_best=a.n_best, lm_weight=a.lm_weight,
        word_insertion_penalty=a.word_insertion_penalty, min_frames_per_phone=a.min_frames_per_phone,
        max_words=a.max_words if a.max_words is not None else math.inf,
    )


def cmd_decode(a) -> None:
    lex = lexicon.read_lexicon(_existing(a.lexicon))
    lm = arpa.import_arpa(_existing(a.lm))
    if a.unmerged_lm:
        table = _clitic_table(a.clitics, a.clitic_lambda) if a.clitics else clitics.CliticTable()
        lm = clitics.InterpolatedScorer(lm, arpa.import_arpa(_existing(a.unmerged_lm)), table)
    utts = [(u, read_posteriors(p)) for u, p, _ in read_test_set(_existing(a.test_set))]
    lists = decode_many(utts, build_prefix_tree(lex), lm, _decoder_config(a), a.workers, skip_failures=True)
    write_nbest(lists, _outdir(a.out))


def cmd_rescore(a) -> None:
    if a.model:
        model = rescorer.LSTMLM.load(_existing(a.model))
    else:
        if not a.train_text:
            raise UsageError("rescore needs --model or --train-text")
        tc = rescorer.TrainConfig(a.learning_rate, a.epochs, a.seed, a.clip)
        model = rescorer.train_lstm(corpus.read_monolingual(_existing(a.train_text)), a.embedding, a.hidden, tc)
        if a.save_model:
            model.save(_outdir(a.save_model))
    weights = rescorer.ScoreWeights(a.alpha, a.beta, a.gamma)
    lists = [rescorer.rescore_nbest(nb, model, weights) for nb in read_nbest(_existing(a.nbest))]
    write_nbest(lists, _outdir(a.out), rescorer.rescored_extra_fields(lists))


def cmd_score(a) -> None:
    if a.refs:
        r = corpus.read_lines(_existing(a.refs))
        if a.hyps:
            h = corpus.read_lines(_existing(a.hyps))
        elif a.nbest:
            h = [expand_output(nb.hyps[0]) for nb in read_nbest(_existing(a.nbest))]
        else:
            raise UsageError("score needs --hyps or --nbest")
    elif a.test_set and a.nbest:
        refs = {u: ref for u, _, ref in read_test_set(_existing(a.test_set))}
        best = {nb.utterance_id: expand_output(nb.hyps[0]) for nb in read_nbest(_existing(a.nbest))}
        utts = sorted(refs)
        r = [refs[u] for u in utts]
        h = [best.get(u, ()) for u in utts]
    else:
        raise UsageError("score needs --refs with --hyps/--nbest, or --test-set with --nbest")
    w, b = metrics.wer(r, h), metrics.bleu(r, h)
    print(f"WER\t{w.wer_percent:.2f}\tS={w.substitutions} D={w.deletions} I={w.insertions} N={w.ref_len}")
    print(f"BLEU\t{b.bleu_percent:.2f}\tBP={b.brevity_penalty:.4f}")


def cmd_report(a) -> None:
    rows = metrics.read_ablation_tsv(_existing(a.rows))
    table, tsv = metrics.ablation_report(rows)
    print(table, end="")
    if a.out:
        _outdir(a.out).write_text(tsv, encoding="utf-8")


def cmd_gen_synthetic(a) -> None:
    make = SyntheticDialectSpec.unambiguous if a.unambiguous else SyntheticDialectSpec
    data = generate_synthetic(
        make(seed=a.seed), a.sentences, n_test=a.test, n_lm=a.lm_sentences,
        novel_compounds_in_test=not a.in_vocab_test,
    )
    write_synthetic(data, a.out_dir, a.frames_per_phone, a.noise, a.posterior_seed)


def cmd_run(a) -> None:
    cfg = pipeline.load_config(_existing(a.config)) if a.config else pipeline.PipelineConfig()
    overrides = {}
    for f in fields(pipeline.PipelineConfig):
        value = getattr(a, f"cfg_{f.name}")
        if value is not None:
            overrides[f.name] = value
    cfg = pipeline.config_from_pairs(overrides, cfg)
    pipe = pipeline.run_pipeline(cfg, a.stages.split(",") if a.stages else None)
    report = pipe.out / "ablation.txt"
    if report.is_file():
        print(report.read_text(encoding="utf-8"), end="")


# -- parser --------------------------------------------------------------

def _decoder_flags(p) -> None:
    d = pipeline.PipelineConfig()
    p.add_argument("--beam-width", type=float, default=d.beam_width)
    p.add_argument("--max-active", type=int, default=d.max_active)
    p.add_argument("--n-best", type=int, default=d.n_best)
    p.add_argument("--lm-weight", type=float, default=d.lm_weight)
    p.add_argument("--word-insertion-penalty", type=float, default=d.word_insertion_penalty)
    p.add_argument("--min-frames-per-phone", type=int, default=d.min_frames_per_phone)
    p.add_argument("--workers", type=int, default=d.workers)
    p.add_argument("--max-words", type=int, help="longest word sequence per hypothesis (default: no limit)")


def build_parser() -> argparse.ArgumentParser:
    d = pipeline.PipelineConfig()
    ap = argparse.ArgumentParser(
        prog="dialect-asr",
        description="Dialect speech recognition with translation inside the lexicon.",
        epilog="exit codes: 0 success, 1 invalid arguments or config, 2 a stage failed",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="word frequency table of one corpus side")
    p.add_argument("--parallel")
    p.add_argument("--mono")
    p.add_argument("--side", choices=("dialect", "standard"), default="standard")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("extract-mappings", help="dialect-to-standard word mappings")
    p.add_argument("--parallel", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--em-iterations", type=int, default=d.em_iterations)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--min-prob", type=float, default=0.0)
    p.add_argument("--embeddings")
    p.add_argument("--max-cosine-dist", type=float, default=d.max_cosine_dist)
    p.set_defaults(fn=cmd_extract_mappings)

    p = sub.add_parser("train-g2p", help="train a graphone G2P model")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=d.g2p_order)
    p.add_argument("--em-iterations", type=int, default=d.g2p_em_iterations)
    p.set_defaults(fn=cmd_train_g2p)

    p = sub.add_parser("eval-g2p", help="phone error rate per category")
    p.add_argument("--model", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--beam", type=int, default=d.g2p_beam)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval_g2p)

    p = sub.add_parser("build-lexicon", help="mappings + G2P -> lexicon TSV")
    p.add_argument("--mappings", required=True)
    p.add_argument("--g2p", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=d.g2p_beam)
    p.add_argument("--clitics", help="clitic inventory (surface TAB standard words)")
    p.add_argument("--compound-text", help="decompounded LM text; adds entries for its parts")
    p.set_defaults(fn=cmd_build_lexicon)

    p = sub.add_parser("train-lm", help="Kneser-Ney n-gram LM to ARPA")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=d.lm_order)
    p.add_argument("--discount", type=float, default=d.lm_discount)
    p.add_argument("--unk-floor", type=float, default=d.unk_floor)
    p.add_argument("--decompound", action="store_true")
    p.add_argument("--min-part-len", type=int, default=d.splitter_min_part_len)
    p.add_argument("--min-part-count", type=int, default=d.splitter_min_part_count)
    p.add_argument("--clitics", help="clitic table or inventory; merge clitic sequences before counting")
    p.set_defaults(fn=cmd_train_lm)

    p = sub.add_parser("merge-clitics", help="rewrite a corpus with merged clitic tokens")
    p.add_argument("--corpus", required=True)
    p.add_argument("--clitics", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_merge_clitics)

    p = sub.add_parser("decode", help="first-pass decoding to n-best JSON lines")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--lm", required=True, help="ARPA LM (the merged one when interpolating)")
    p.add_argument("--unmerged-lm", help="ARPA LM without clitic tokens; enables interpolation")
    p.add_argument("--clitics", help="clitic table used with --unmerged-lm")
    p.add_argument("--clitic-lambda", type=float, default=d.clitic_lambda)
    p.add_argument("--test-set", required=True)
    p.add_argument("--out", required=True)
    _decoder_flags(p)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("rescore", help="LSTM second-pass rescoring")
    p.add_argument("--nbest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.add_argument("--train-text")
    p.add_argument("--save-model")
    p.add_argument("--embedding", type=int, default=d.lstm_embedding)
    p.add_argument("--hidden", type=int, default=d.lstm_hidden)
    p.add_argument("--learning-rate", type=float, default=d.lstm_learning_rate)
    p.add_argument("--epochs", type=int, default=d.lstm_epochs)
    p.add_argument("--seed", type=int, default=d.lstm_seed)
    p.add_argument("--clip", type=float, default=d.lstm_clip)
    p.add_argument("--alpha", type=float, default=d.rescore_alpha)
    p.add_argument("--beta", type=float, default=d.rescore_beta)
    p.add_argument("--gamma", type=float, default=d.rescore_gamma)
    p.set_defaults(fn=cmd_rescore)

    p = sub.add_parser("score", help="corpus WER and BLEU")
    p.add_argument("--refs", help="reference text, one sentence per line")
    p.add_argument("--hyps", help="hypothesis text aligned with --refs by line")
    p.add_argument("--nbest", help="n-best JSON lines; rank 1 is scored")
    p.add_argument("--test-set")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("report", help="render an ablation table")
    p.add_argument("--rows", required=True, help="ablation TSV (row, description, wer, bleu columns)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gen-synthetic", help="write a synthetic dialect data set")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sentences", type=int, default=d.synthetic_sentences)
    p.add_argument("--test", type=int, default=d.synthetic_test)
    p.add_argument("--lm-sentences", type=int, default=d.synthetic_lm_sentences)
    p.add_argument("--seed", type=int, default=d.synthetic_seed)
    p.add_argument("--posterior-seed", type=int, default=d.posterior_seed)
    p.add_argument("--frames-per-phone", type=int, default=d.frames_per_phone)
    p.add_argument("--noise", type=float, default=d.noise)
    p.add_argument("--unambiguous", action="store_true")
    p.add_argument("--in-vocab-test", action="store_true")
    p.set_defaults(fn=cmd_gen_synthetic)

    p = sub.add_parser("run", help="run the whole pipeline from a config file")
    p.add_argument("--config")
    p.add_argument("--stages", help="comma-separated stages to re-run from saved intermediates")
    for f in fields(pipeline.PipelineConfig):
        # values stay strings; the config parser converts and validates them
        p.add_argument("--" + f.name.replace("_", "-"), dest=f"cfg_{f.name}", metavar=f.type.upper())
    p.set_defaults(fn=cmd_run)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; 2 is reserved for stage failures here
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        a.fn(a)
    except (UsageError, pipeline.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {a.command} failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
