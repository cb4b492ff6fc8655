"""
Command-line entry point for the dual-decoding toolkit.

Usage:
    dualdec [--config FILE] [--set section.key=value ...] [--seed N] [--json]
            [--log-level LEVEL] <subcommand> [options]

Subcommands:
    bpe-train      learn a subword model
    align          IBM Model 1 alignments, symmetrized, Pharaoh format
    make-tri       trilingual corpus from two bitexts sharing a source
    make-pseudo    half/half synthetic trilingual corpus
    make-bidi      left-to-right / right-to-left corpus
    make-csw       code-switched corpus
    make-variants  variant triples from labeled records
    pretrain       tag-steered single-decoder pre-training
    train          two-decoder training (from scratch or from a pre-trained model)
    translate      decode a source file
    eval           BLEU, consistency or copy analysis

Logs go to standard error; data goes to files or standard output.
Exit codes: 0 success, 2 usage/config/input error, 1 other failure.
"""

import argparse
import json
import logging
import sys

import config_manager
import orchestrator
from datakit import load_trilingual
from errors import ConfigError, DualDecodingError, InputError
from utils import read_lines, write_lines

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

FORMATS = {
    "bpe-train": "Output: '#subword-v1 merges=M alphabet=A specials=S vocab=V' header, "
                 "M lines '<left> <right>', then V lines '<token>\\t<id>'.",
    "align": "Output: one line per sentence pair of space-separated 'i-j' links "
             "(0-based source and target positions).",
    "make-tri": "Output: UTF-8 'src\\ttgt1\\ttgt2' lines.",
    "make-pseudo": "Input: trilingual TSV or three parallel files. Output: 'src\\ttgt1\\ttgt2' lines.",
    "make-bidi": "Output: 'src\\tleft-to-right\\tright-to-left' lines.",
    "make-csw": "Output: 'csw\\tref1\\tref2' lines; --meta writes one JSON record "
                "{primary, replacements: [[i1, i2, j1, j2, direction]], flags} per line.",
    "make-variants": "Input: 'src\\treference\\tlabel' lines, label a variant name or 'neutral'. "
                     "Output: 'src\\tvariant-A\\tvariant-B' lines.",
    "pretrain": "Output: checkpoint (.npz with a __meta__ JSON block and param/<name> arrays); "
                "--metrics appends JSON lines {step, train_loss, dev_loss, lr, wall_ms}.",
    "train": "Output: checkpoint (.npz with a __meta__ JSON block and param/<name> arrays); "
             "--metrics appends JSON lines {step, train_loss, dev_loss, lr, wall_ms}.",
    "translate": "Output: one 'score\\ttokens1\\ttokens2' line per input line, or one JSON "
                 "hypothesis record per line with --json.",
    "eval": "Output: 'key: value' report lines, or one JSON object with --json.",
}


class UsageError(Exception):
    """Raised by the parser instead of exiting."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    """
    Build the argument parser.

    Returns:
        ArgumentParser: parser with one sub-parser per subcommand
    """
    parser = ArgumentParser(prog="dualdec", description="Dual-decoding translation toolkit")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value; flags win over the file")
    parser.add_argument("--seed", type=int, help="seed for every stochastic component")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=f"{help_text}. {FORMATS[name]}")
        # accepted after the subcommand as well
        p.add_argument("--seed", dest="sub_seed", type=int, help="seed for every stochastic component")
        p.add_argument("--json", dest="sub_json", action="store_true", help="machine-readable output")
        return p

    p = command("bpe-train", "Learn a subword model")
    p.add_argument("--input", action="append", required=True, help="corpus file; repeatable")
    p.add_argument("--output", required=True)
    p.add_argument("--merges", type=int)
    p.add_argument("--tags", help="comma-separated tag tokens")

    p = command("align", "Word-align a bitext")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--heuristic")

    p = command("make-tri", "Build a trilingual corpus")
    p.add_argument("--bitext1", nargs=2, required=True, metavar=("SRC", "TGT1"))
    p.add_argument("--bitext2", nargs=2, required=True, metavar=("SRC", "TGT2"))
    p.add_argument("--output", required=True)

    p = command("make-pseudo", "Build a pseudo trilingual corpus")
    p.add_argument("--tri", nargs="+", required=True, help="TSV file or three parallel files")
    p.add_argument("--output", required=True)
    _translator_args(p, "1")
    _translator_args(p, "2")
    _subword_args(p, required=False)

    p = command("make-bidi", "Build a bi-directional corpus")
    p.add_argument("--bitext", nargs=2, required=True, metavar=("SRC", "TGT"))
    p.add_argument("--output", required=True)
    p.add_argument("--mode", help="gold, pseudo or pseudo-dup")
    p.add_argument("--l2r-hyps", help="left-to-right machine outputs, line-aligned")
    p.add_argument("--r2l-hyps", help="right-to-left machine outputs in generation order, line-aligned")
    p.add_argument("--l2r-model", help="checkpoint decoding left to right")
    p.add_argument("--r2l-model", help="checkpoint decoding right to left")
    _subword_args(p, required=False)

    p = command("make-csw", "Build a code-switched corpus")
    p.add_argument("--bitext", nargs=2, required=True, metavar=("LANG1", "LANG2"))
    p.add_argument("--output", required=True)
    p.add_argument("--alignments", help="Pharaoh alignments; aligned internally when omitted")
    p.add_argument("--rep", type=int)
    p.add_argument("--meta", help="JSON-lines sample log")

    p = command("make-variants", "Build variant triples")
    p.add_argument("--records", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--model", help="tag-steered single-decoder checkpoint")
    p.add_argument("--tags", help="comma-separated tag tokens for the two variants")
    p.add_argument("--hyps", nargs=2, metavar=("HYPS_A", "HYPS_B"),
                   help="outputs in each variant, line-aligned with the records")
    _subword_args(p, required=False)

    p = command("pretrain", "Pre-train a tag-steered single decoder")
    p.add_argument("--bitext1", nargs=2, required=True, metavar=("SRC", "TGT1"))
    p.add_argument("--bitext2", nargs=2, required=True, metavar=("SRC", "TGT2"))
    p.add_argument("--tags", required=True, help="TAG1,TAG2")
    p.add_argument("--output", required=True)
    p.add_argument("--metrics")
    _subword_args(p)

    p = command("train", "Train a two-decoder model")
    p.add_argument("--train", nargs="+", required=True, help="TSV file or three parallel files")
    p.add_argument("--dev", nargs="+", help="TSV file or three parallel files")
    p.add_argument("--init", help="pre-trained single-decoder checkpoint")
    p.add_argument("--output", required=True)
    p.add_argument("--metrics")
    _subword_args(p)

    p = command("translate", "Translate a source file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="write here instead of standard output")
    p.add_argument("--mode", default="dual", choices=orchestrator.TRANSLATE_MODES)
    p.add_argument("--beam", type=int)
    p.add_argument("--coupling-scheme")
    p.add_argument("--side", type=int, default=1, choices=[1, 2])
    p.add_argument("--first-side", type=int, default=1, choices=[1, 2])
    p.add_argument("--tag", help="tag prepended to every source line")
    p.add_argument("--tags-file", help="one tag per source line")
    p.add_argument("--forced1", help="side-1 outputs to force, line-aligned")
    p.add_argument("--forced2", help="side-2 outputs to force, line-aligned")
    _subword_args(p)

    p = command("eval", "Evaluate outputs")
    p.add_argument("--metric", required=True, choices=orchestrator.EVAL_METRICS)
    p.add_argument("--hyp")
    p.add_argument("--ref")
    p.add_argument("--hyp2")
    p.add_argument("--src")
    p.add_argument("--csw-meta", help="make-csw sample log for the primary/secondary split")
    p.add_argument("--language", type=int, default=1, choices=[1, 2])
    return parser


def _translator_args(parser, side):
    parser.add_argument(f"--hyps{side}", help=f"target-{side} machine outputs, line-aligned with the corpus")
    parser.add_argument(f"--model{side}", help=f"checkpoint translating into target {side}")
    parser.add_argument(f"--tag{side}", help=f"tag for --model{side}")


def _subword_args(parser, required=True):
    parser.add_argument("--src-subword", required=required)
    parser.add_argument("--tgt-subword", help="target subword model; defaults to --src-subword")


def _subwords(args):
    return (args.src_subword, args.tgt_subword) if args.src_subword else None


def _split_tags(value, count=None):
    tags = [tag.strip() for tag in value.split(",") if tag.strip()] if value else []
    if count is not None and len(tags) != count:
        raise ConfigError(f"Expected {count} comma-separated tags, got {value!r}")
    return tags


def _seed(args, config):
    return args.seed if args.seed is not None else config["training"]["seed"]


def resolve_config(args):
    """Configuration from --config, then --set overrides, then --seed."""
    config = config_manager.load_config(args.config)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"training.seed={args.seed}", f"model.seed={args.seed}"]
    if getattr(args, "beam", None) is not None:
        overrides.append(f"search.beam_size={args.beam}")
    if getattr(args, "coupling_scheme", None):
        overrides.append(f"search.coupling_scheme={args.coupling_scheme}")
    return config_manager.apply_overrides(config, overrides)


def run_command(args, config):
    """
    Dispatch one subcommand.

    Returns:
        tuple: (report dict or None, output lines or None)
    """
    seed = _seed(args, config)
    name = args.command

    if name == "bpe-train":
        tags = _split_tags(args.tags) if args.tags is not None else None
        return orchestrator.run_bpe_train(config, args.input, args.output, args.merges, tags), None
    if name == "align":
        return orchestrator.run_align(config, args.src, args.tgt, args.output, args.iterations, args.heuristic), None
    if name == "make-tri":
        return orchestrator.run_make_tri(config, args.bitext1, args.bitext2, args.output), None
    if name == "make-pseudo":
        sources = [s.src for s in load_trilingual(args.tri)]
        translators = [
            orchestrator.build_translator(config, sources, getattr(args, f"hyps{side}"),
                                          getattr(args, f"model{side}"), _subwords(args),
                                          tag=getattr(args, f"tag{side}"))
            for side in (1, 2)
        ]
        return orchestrator.run_make_pseudo(config, args.tri, args.output, seed, *translators), None
    if name == "make-bidi":
        sources = read_lines(args.bitext[0])
        reverse = orchestrator.build_translator(config, sources, args.r2l_hyps, args.r2l_model, _subwords(args))
        forward = orchestrator.build_translator(config, sources, args.l2r_hyps, args.l2r_model, _subwords(args))
        return orchestrator.run_make_bidi(config, args.bitext, args.output, seed, args.mode, reverse, forward), None
    if name == "make-csw":
        return orchestrator.run_make_csw(config, args.bitext, args.output, seed, args.rep, args.alignments,
                                         args.meta), None
    if name == "make-variants":
        variants = config["datakit"]["variants"]
        if args.hyps:
            translator = orchestrator.variant_file_translator(args.records, args.hyps, variants)
        elif args.model:
            tags = dict(zip(variants, _split_tags(args.tags, 2)))
            base = orchestrator.build_translator(config, [], checkpoint=args.model, subwords=_subwords(args))

            def translator(src, variant):
                return base(src, tags[variant])
        else:
            translator = None
        return orchestrator.run_make_variants(config, args.records, args.output, seed, translator), None
    if name == "pretrain":
        return orchestrator.run_pretrain(config, args.bitext1, args.bitext2, _split_tags(args.tags, 2),
                                         _subwords(args), args.output, args.metrics), None
    if name == "train":
        return orchestrator.run_train(config, args.train, _subwords(args), args.output, args.dev, args.init,
                                      args.metrics), None
    if name == "translate":
        lines = orchestrator.run_translate(config, args.checkpoint, _subwords(args), args.input, args.mode,
                                           args.side, args.first_side, args.tag, args.tags_file,
                                           args.forced1, args.forced2, args.json)
        return {"lines": len(lines)}, lines
    if name == "eval":
        return orchestrator.run_eval(config, args.metric, args.hyp, args.ref, args.hyp2, args.src,
                                     args.csw_meta, args.language), None
    raise UsageError("a subcommand is required")


def _format_report(report):
    lines = []
    for key in sorted(report):
        value = report[key]
        if isinstance(value, dict):
            value = json.dumps(value, sort_keys=True)
        elif isinstance(value, float):
            value = f"{value:.4f}"
        lines.append(f"{key}: {value}")
    return lines


def main(argv=None):
    """
    Run the command line.

    Args:
        argv (list, optional): arguments without the program name

    Returns:
        int: exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("dualdec: a subcommand is required (see --help)")
        if args.sub_seed is not None:
            args.seed = args.sub_seed
        args.json = args.json or args.sub_json
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.getLogger().setLevel(args.log_level)

    try:
        config = resolve_config(args)
        report, lines = run_command(args, config)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InputError) as e:
        logger.debug(f"{args.command} failed: {str(e)}")
        print(f"dualdec {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DualDecodingError as e:
        logger.debug(f"{args.command} failed: {str(e)}")
        print(f"dualdec {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logger.debug(f"Unexpected error in {args.command}", exc_info=True)
        print(f"dualdec {args.command}: unexpected error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    if lines is not None:
        if getattr(args, "output", None):
            write_lines(args.output, lines)
        else:
            for line in lines:
                print(line)
    elif args.json:
        print(json.dumps(report, sort_keys=True))
    elif args.command == "eval":
        for line in _format_report(report):
            print(line)
    logger.info(f"{args.command} done: {json.dumps(report, sort_keys=True, default=str)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
