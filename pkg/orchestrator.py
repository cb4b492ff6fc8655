"""
Orchestrator for the dual-decoding toolkit.

This module runs the pipeline stages behind the command-line subcommands:
subword training, alignment, corpus construction, (pre-)training,
translation and evaluation. Each stage reads its inputs, writes its outputs
atomically and returns a summary dictionary.
"""

import csv
import json
import logging
from dataclasses import replace

import pandas as pd

import config_manager
from data_processor import encode_samples, encode_source, split_dev
from database import connection, repository
from datakit import (
    Bitext, align_corpus, intersect_trilingual, load_trilingual, make_bidi_corpus,
    make_csw_corpus, make_pseudo_trilingual, make_variant_triples, read_pharaoh,
    write_pharaoh, write_tri_tsv,
)
from errors import InputError
from evaluation import consistency_score, corpus_bleu, corpus_copy_report, csw_split_bleu
from model import DualModel, init_from_pretrained, load_checkpoint, save_checkpoint
from search import (
    beam_search, bidi_select, dual_beam_search, sequential_decode,
)
from search.hypothesis import emitted_length, single_score
from subword import SubwordModel, bpe_train
from training import pretrain_multilingual, train
from utils import read_lines, require_files, write_lines

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

TRANSLATE_MODES = ("dual", "single", "sequential", "bidi")
EVAL_METRICS = ("bleu", "consistency", "copy")


# ----- shared helpers -----

def load_subwords(src_path, tgt_path=None):
    """Source and target subword models; one shared file when tgt_path is None."""
    src_model = SubwordModel.load(src_path)
    tgt_model = SubwordModel.load(tgt_path) if tgt_path and tgt_path != src_path else src_model
    return src_model, tgt_model


def sized_model_config(config, src_model, tgt_model, **changes):
    """Model section of the config with vocabulary sizes taken from the subword models."""
    return replace(config_manager.model_config(config), src_vocab_size=len(src_model),
                   tgt_vocab_size=len(tgt_model), **changes)


def connect_run_store(config):
    """Enable the run store when a database URL is configured."""
    url = config.get("database", {}).get("url") or connection.DATABASE_URL
    if url:
        return connection.configure(url)
    return False


def _progress_hooks(run_id, checkpoint_path, subwords):
    def on_record(record):
        repository.add_metric(run_id, record)

    def on_improve(model, record):
        save_checkpoint(model, checkpoint_path, extra={"step": record["step"], "dev": record["dev_loss"],
                                                       "subwords": subwords})

    return on_record, on_improve


def _finish(run_id, result, checkpoint_path, subwords):
    save_checkpoint(result.model, checkpoint_path, extra={"step": result.best_step, "dev": result.best_value,
                                                          "subwords": subwords})
    repository.finish_run(run_id, result.best_step, result.best_value, checkpoint_path)
    return {
        "checkpoint": checkpoint_path,
        "best_step": result.best_step,
        "best_value": result.best_value,
        "steps": result.steps,
        "stopped_early": result.stopped_early,
    }


# ----- translators -----

def file_translator(sources, hyp_path):
    """
    Translator backed by a line-aligned hypothesis file.

    Args:
        sources (list of str): source sentences, in file order
        hyp_path (str): one output per source line

    Returns:
        callable: source sentence -> output sentence
    """
    hyps = read_lines(hyp_path, allow_empty=True)
    if len(hyps) != len(sources):
        raise InputError(f"{hyp_path}: {len(hyps)} lines for {len(sources)} sources")
    table = {}
    for src, hyp in zip(sources, hyps):
        table.setdefault(src, hyp)

    def translate(src):
        return table[src]

    return translate


def model_translator(model, src_model, tgt_model, search, side=1, tag=None):
    """
    Translator backed by a model decoding one side.

    Args:
        model (DualModel): checkpointed model
        src_model, tgt_model (SubwordModel): subword models
        search (SearchConfig): decoding settings
        side (int): decoder to run
        tag (str, optional): tag token prepended to every source

    Returns:
        callable: (source sentence, tag=None) -> output sentence
    """
    def translate(src, line_tag=None):
        ids = encode_source(src_model, src, line_tag or tag)
        return tgt_model.decode(beam_search(model, ids, search, side=side).output)

    return translate


def build_translator(config, sources, hyp_path=None, checkpoint=None, subwords=None, side=1, tag=None):
    """One translator from either a hypothesis file or a checkpoint."""
    if hyp_path:
        return file_translator(sources, hyp_path)
    if checkpoint:
        if not subwords:
            raise InputError("A checkpoint translator needs --src-subword")
        src_model, tgt_model = load_subwords(*subwords)
        model = load_checkpoint(checkpoint)
        return model_translator(model, src_model, tgt_model, config_manager.search_config(config), side, tag)
    return None


# ----- corpus stages -----

def run_bpe_train(config, inputs, output, num_merges=None, tags=None):
    """Learn a subword model from one or more corpora."""
    require_files(inputs)
    sentences = [line for path in inputs for line in read_lines(path, allow_empty=True)]
    merges = config["subword"]["num_merges"] if num_merges is None else num_merges
    tags = config["subword"]["tags"] if tags is None else tags
    model = bpe_train(sentences, merges, tags)
    model.save(output)
    return {"output": output, "merges": len(model.merges), "vocab": len(model)}


def run_align(config, src_path, tgt_path, output, iterations=None, heuristic=None):
    """Train IBM Model 1 in both directions and write symmetrized Pharaoh alignments."""
    bitext = Bitext.from_files(src_path, tgt_path)
    iterations = config["datakit"]["align_iterations"] if iterations is None else iterations
    heuristic = heuristic or config["datakit"]["heuristic"]
    alignments = align_corpus(bitext.token_pairs(), iterations, heuristic)
    write_pharaoh(output, alignments)
    return {"output": output, "pairs": len(alignments), "links": sum(len(a) for a in alignments)}


def run_make_tri(config, bitext_a, bitext_b, output):
    """Intersect two bitexts that share their source language."""
    samples = intersect_trilingual(Bitext.from_files(*bitext_a), Bitext.from_files(*bitext_b))
    if not samples:
        raise InputError("The two bitexts share no source sentence")
    write_tri_tsv(samples, output)
    return {"output": output, "samples": len(samples)}


def run_make_pseudo(config, tri_paths, output, seed, translator1, translator2):
    """Half synthetic target-1, half synthetic target-2 trilingual corpus."""
    samples = load_trilingual(tri_paths)
    if translator1 is None or translator2 is None:
        raise InputError("make-pseudo needs a translator for each target (hypothesis file or checkpoint)")
    pseudo = make_pseudo_trilingual(samples, translator1, translator2, seed)
    write_tri_tsv(pseudo, output)
    return {"output": output, "samples": len(pseudo), "skipped": len(samples) - len(pseudo)}


def run_make_bidi(config, bitext_paths, output, seed, mode=None, reverse_translator=None,
                  forward_translator=None):
    """Left-to-right / right-to-left corpus from a bitext."""
    mode = mode or config["datakit"]["bidi_mode"]
    bitext = Bitext.from_files(*bitext_paths)
    samples = make_bidi_corpus(bitext, mode, reverse_translator, forward_translator, seed)
    write_tri_tsv(samples, output)
    return {"output": output, "mode": mode, "samples": len(samples)}


def read_variant_records(path):
    """Variant records: src<TAB>reference<TAB>label per line."""
    require_files([path])
    try:
        frame = pd.read_csv(path, sep="\t", header=None, names=["src", "ref", "label"], dtype=str,
                            quoting=csv.QUOTE_NONE, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: not a three-column TSV file ({exc})") from exc
    if (frame == "").any().any():
        raise InputError(f"{path}: every line needs src, reference and label")
    return list(frame.itertuples(index=False, name=None))


def run_make_variants(config, records_path, output, seed, tag_translator):
    """Variant triples from labeled single-reference records."""
    records = read_variant_records(records_path)
    if tag_translator is None:
        raise InputError("make-variants needs a tag-steered translator (checkpoint or hypothesis files)")
    variants = tuple(config["datakit"]["variants"])
    triples = make_variant_triples(records, tag_translator, seed, variants)
    write_tri_tsv(triples, output)
    return {"output": output, "samples": len(triples)}


def variant_file_translator(records_path, hyp_paths, variants):
    """Tag translator from one hypothesis file per variant, aligned with the records."""
    sources = [src for src, _, _ in read_variant_records(records_path)]
    translators = {variant: file_translator(sources, path) for variant, path in zip(variants, hyp_paths)}

    def translate(src, variant):
        return translators[variant](src)

    return translate


def run_make_csw(config, bitext_paths, output, seed, rep=None, alignments_path=None, meta_path=None):
    """Code-switched corpus: csw<TAB>ref1<TAB>ref2 lines plus an optional JSON-lines log."""
    bitext = Bitext.from_files(*bitext_paths)
    rep = config["datakit"]["rep"] if rep is None else rep
    if alignments_path:
        alignments = read_pharaoh(alignments_path)
    else:
        alignments = align_corpus(bitext.token_pairs(), config["datakit"]["align_iterations"],
                                  config["datakit"]["heuristic"])
    samples = make_csw_corpus(bitext, alignments, rep, seed, config["datakit"]["max_phrase_len"])
    write_lines(output, ("\t".join((s.csw, s.ref1, s.ref2)) for s in samples))
    if meta_path:
        write_lines(meta_path, (json.dumps({
            "primary": s.primary,
            "replacements": [[p.i1, p.i2, p.j1, p.j2, direction] for p, direction in s.replacements],
            "flags": s.flags,
        }, sort_keys=True) for s in samples))
    return {"output": output, "samples": len(samples),
            "replaced": sum(len(s.replacements) for s in samples)}


# ----- training stages -----

def run_pretrain(config, bitext1_paths, bitext2_paths, tags, subwords, output, metrics_path=None):
    """Tag-steered single-decoder pre-training on two bitexts."""
    src_model, tgt_model = load_subwords(*subwords)
    model_config = sized_model_config(config, src_model, tgt_model, coupling="single")
    train_config = config_manager.train_config(config)

    run_id = repository.create_run("pretrain", "single", train_config.seed, config) if connect_run_store(config) else None
    on_record, on_improve = _progress_hooks(run_id, output, list(subwords))
    result = pretrain_multilingual(Bitext.from_files(*bitext1_paths), Bitext.from_files(*bitext2_paths),
                                   src_model, tgt_model, tuple(tags), model_config, train_config,
                                   metrics_path, on_record, on_improve)
    return _finish(run_id, result, output, list(subwords))


def run_train(config, train_paths, subwords, output, dev_paths=None, init_checkpoint=None,
              metrics_path=None):
    """
    Train a two-decoder model on a trilingual corpus.

    Without dev_paths a seeded dev split is carved from the training data.
    With init_checkpoint both decoders start from a pre-trained single
    decoder and training switches to fine-tuning.
    """
    src_model, tgt_model = load_subwords(*subwords)
    model_config = sized_model_config(config, src_model, tgt_model)
    train_config = config_manager.train_config(config)

    samples = encode_samples(load_trilingual(train_paths), src_model, tgt_model)
    if dev_paths:
        dev = encode_samples(load_trilingual(dev_paths), src_model, tgt_model)
    else:
        samples, dev = split_dev(samples, train_config.dev_fraction, train_config.seed)

    if init_checkpoint:
        model = init_from_pretrained(load_checkpoint(init_checkpoint), model_config)
        train_config = replace(train_config, mode="finetune")
    else:
        model = DualModel(model_config)

    run_id = (repository.create_run("train", model_config.coupling, train_config.seed, config)
              if connect_run_store(config) else None)
    on_record, on_improve = _progress_hooks(run_id, output, list(subwords))
    result = train(model, samples, dev, train_config, metrics_path, on_record, on_improve)
    return _finish(run_id, result, output, list(subwords))


# ----- decoding -----

def _forced_lines(path, tgt_model, count):
    if not path:
        return [None] * count
    lines = read_lines(path, allow_empty=True)
    if len(lines) != count:
        raise InputError(f"{path}: {len(lines)} lines for {count} inputs")
    return [tgt_model.encode(line) for line in lines]


def translate_line(model, ids, search, mode, side=1, first_side=1, forced=(None, None)):
    """
    Decode one source.

    Returns:
        tuple: (score, tokens1, tokens2, hypothesis record); tokens2 is empty
            for single-decoder output
    """
    if mode == "single" or model.config.num_decoders == 1:
        hyp = beam_search(model, ids, search, side=side)
        return hyp.score, hyp.output, [], hyp.to_dict()

    search = replace(search, forced1=forced[0] if forced[0] is not None else search.forced1,
                     forced2=forced[1] if forced[1] is not None else search.forced2)
    if mode == "sequential":
        hyp = sequential_decode(model, ids, first_side, search)
    else:
        hyp = dual_beam_search(model, ids, search)
    record = hyp.to_dict()
    if mode != "bidi":
        return hyp.score, hyp.output1, hyp.output2, record

    # side 1 reads left to right, side 2 right to left
    n1, n2 = emitted_length(hyp.tokens1), emitted_length(hyp.tokens2)
    score1 = single_score(hyp.logp1, n1, search.length_penalty_alpha, search.normalize)
    score2 = single_score(hyp.logp2, n2, search.length_penalty_alpha, search.normalize)
    selected = bidi_select(hyp.output1, score1, hyp.output2, score2)
    record["selected"] = selected
    return max(score1, score2), selected, list(reversed(hyp.output2)), record


def run_translate(config, checkpoint, subwords, input_path, mode="dual", side=1, first_side=1,
                  tag=None, tags_path=None, forced1_path=None, forced2_path=None, as_json=False):
    """
    Translate every line of a file.

    Returns:
        list of str: one "score<TAB>tokens1<TAB>tokens2" line per input, or
            one JSON record per input when as_json is set
    """
    if mode not in TRANSLATE_MODES:
        raise InputError(f"Unknown translate mode {mode!r}, expected one of {TRANSLATE_MODES}")
    src_model, tgt_model = load_subwords(*subwords)
    model = load_checkpoint(checkpoint)
    search = config_manager.search_config(config)
    sources = read_lines(input_path)

    line_tags = read_lines(tags_path) if tags_path else [tag] * len(sources)
    if len(line_tags) != len(sources):
        raise InputError(f"{tags_path}: {len(line_tags)} tags for {len(sources)} inputs")
    forced1 = _forced_lines(forced1_path, tgt_model, len(sources))
    forced2 = _forced_lines(forced2_path, tgt_model, len(sources))

    output = []
    for number, (src, line_tag) in enumerate(zip(sources, line_tags), start=1):
        ids = encode_source(src_model, src, line_tag, number)
        score, tokens1, tokens2, record = translate_line(model, ids, search, mode, side, first_side,
                                                         (forced1[number - 1], forced2[number - 1]))
        text1, text2 = tgt_model.decode(tokens1), tgt_model.decode(tokens2)
        if as_json:
            record.update({"line": number, "text1": text1, "text2": text2})
            output.append(json.dumps(record, sort_keys=True))
        else:
            output.append(f"{score:.6f}\t{text1}\t{text2}")
        logger.debug(f"line {number}: score {score:.4f}")
    logger.info(f"Translated {len(output)} lines ({mode})")
    return output


# ----- evaluation -----

def _read_csw_primary(meta_path, count):
    flags = [json.loads(line)["primary"] for line in read_lines(meta_path)]
    if len(flags) != count:
        raise InputError(f"{meta_path}: {len(flags)} records for {count} hypotheses")
    return flags


def _require_paths(metric, **paths):
    missing = [name for name, path in paths.items() if not path]
    if missing:
        raise InputError(f"Metric {metric!r} needs " + ", ".join(f"--{name}" for name in missing))


def run_eval(config, metric, hyp_path=None, ref_path=None, hyp2_path=None, src_path=None,
             csw_meta_path=None, language=1):
    """
    Score output files.

    Metrics:
        bleu         hyp against ref; with csw_meta_path also split by the
                     role of `language` in each mixed source
        consistency  hyp (left-to-right) against hyp2 (right-to-left)
        copy         src against hyp and hyp2

    Returns:
        dict: report
    """
    settings = config["eval"]
    bleu_kwargs = {"max_n": settings["max_n"], "smoothing": settings["smoothing"],
                   "smooth_value": settings["smooth_value"]}
    if metric == "bleu":
        _require_paths(metric, hyp=hyp_path, ref=ref_path)
        hyps, refs = read_lines(hyp_path, allow_empty=True), read_lines(ref_path, allow_empty=True)
        if csw_meta_path:
            primary = [flag == language for flag in _read_csw_primary(csw_meta_path, len(hyps))]
            parts = csw_split_bleu(hyps, refs, primary, **bleu_kwargs)
            report = {name: part.to_dict() if part else None for name, part in parts.items()}
            report["score"] = parts["overall"].score
        else:
            report = corpus_bleu(hyps, refs, **bleu_kwargs).to_dict()
    elif metric == "consistency":
        _require_paths(metric, hyp=hyp_path, hyp2=hyp2_path)
        fwd, bwd = read_lines(hyp_path, allow_empty=True), read_lines(hyp2_path, allow_empty=True)
        report = {"score": consistency_score(fwd, bwd, settings["symmetric"], **bleu_kwargs)}
    elif metric == "copy":
        _require_paths(metric, src=src_path, hyp=hyp_path, hyp2=hyp2_path)
        report = corpus_copy_report(read_lines(src_path), read_lines(hyp_path, allow_empty=True),
                                    read_lines(hyp2_path, allow_empty=True)).to_dict()
        report["score"] = 100.0 - report["lost"]
    else:
        raise InputError(f"Unknown metric {metric!r}, expected one of {EVAL_METRICS}")

    report["metric"] = metric
    if connect_run_store(config):
        repository.save_eval_report(metric, report["score"], report)
    return report

