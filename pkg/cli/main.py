#!/usr/bin/env python3
"""
Command-line entry point for the RNNG toolkit.

Usage:
    python -m cli prepare train.trees --output data/train
    python -m cli train data/train.trees --output gen.pt --mode gen --composition gated_attention
    python -m cli train data/train.trees --output disc.pt --mode disc --ablation stack-only
    python -m cli parse test.txt --disc disc.pt --gen gen.pt --output test.parsed --gold test.trees
    python -m cli lm test.txt --disc disc.pt --gen gen.pt --output test.ppl.tsv
    python -m cli analyze perp test.parsed.attention --output perp
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

from analysis.attention_stats import (
    perplexity_by_label,
    read_attention_sidecar,
    render_samples,
    top_entropy_samples,
    write_attention_sidecar,
    write_perplexity_chart,
    write_perplexity_table,
)
from analysis.head_analysis import head_overlap, head_overlap_from_records
from analysis.phrase_vectors import (
    cluster_purity,
    export_phrase_vectors,
    project_2d,
    read_phrase_vectors,
    write_phrase_vectors,
    write_projection,
)
from common import __version__
from common.errors import ConfigError, DataError, RnngError
from common.schemas import Mode, RunConfig, load_run_config
from common.utils import get_metrics, setup_logging, track_step
from core.checkpoint import load_checkpoint, save_checkpoint
from core.inference import corpus_perplexity, parse_corpus
from core.model import RNNG
from core.trainer import train
from core.vocabulary import Vocabulary
from treebank.dependencies import HeadRuleTable, write_dependencies
from treebank.evalb import bracket_score
from treebank.oracle import format_oracle, tree_to_oracle
from treebank.trees import read_trees, strip_labels, write_trees

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = Path(__file__).parent.parent / "config" / "rnng.yaml"


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def write_meta(output: Path, config: RunConfig, extra: Optional[Dict[str, Any]] = None):
    """Echo the effective configuration and run statistics next to an output."""
    meta = {
        "version": __version__,
        "config": config.model_dump(mode="json"),
        "metrics": get_metrics(),
    }
    meta.update(extra or {})
    with open(_sidecar(output, ".meta.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def read_sentences(path: Path) -> List[List[str]]:
    """One whitespace-tokenized sentence per line; blank lines are skipped."""
    with open(path, encoding="utf-8") as f:
        sentences = [line.split() for line in f if line.strip()]
    if not sentences:
        raise DataError(f"No sentences in {path}")
    return sentences


def load_trees(path: Path, config: RunConfig):
    """Read trees as written by `prepare` or `parse`; no preterminal collapsing happens here."""
    trees = read_trees(path)
    if config.unlabeled:
        trees = [strip_labels(tree) for tree in trees]
    if not trees:
        raise DataError(f"No trees in {path}")
    return trees


def inherit_run_config(args, config: RunConfig, run_config: Dict[str, Any]) -> RunConfig:
    """Take `unlabeled` from the checkpoint unless the flag was given on the command line."""
    if getattr(args, "unlabeled", None) is None and "unlabeled" in run_config:
        inherited = bool(run_config["unlabeled"])
        if inherited != config.unlabeled:
            logger.info(f"Using unlabeled={inherited} from the checkpoint")
        config = config.model_copy(update={"unlabeled": inherited})
    return config


def load_pair(disc_path: Path, gen_path: Path):
    """(proposal, generative model, generative run configuration)."""
    proposal, _ = load_checkpoint(disc_path)
    model, run_config = load_checkpoint(gen_path)
    if proposal.mode != Mode.DISCRIMINATIVE:
        raise ConfigError(f"{disc_path} is not a discriminative checkpoint")
    if model.mode != Mode.GENERATIVE:
        raise ConfigError(f"{gen_path} is not a generative checkpoint")
    proposal.vocab.check_compatible(model.vocab)
    return proposal, model, run_config


@track_step
def cmd_prepare(args, config: RunConfig) -> int:
    """Normalize a treebank and write its trees, POS-tagged trees and oracles in both modes."""
    tagged = read_trees(Path(args.trees), collapse_preterminals=config.collapse_preterminals)
    if not tagged:
        raise DataError(f"No trees in {args.trees}")
    trees = [strip_labels(tree) for tree in tagged] if config.unlabeled else tagged
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_trees(_sidecar(prefix, ".trees"), trees)
    write_trees(_sidecar(prefix, ".tagged.trees"), tagged, tags=True)
    for mode in Mode:
        with open(_sidecar(prefix, f".{mode.value}.oracle"), "w", encoding="utf-8") as f:
            for tree in trees:
                f.write(format_oracle(tree_to_oracle(tree, mode)) + "\n")
    write_meta(_sidecar(prefix, ".trees"), config, {"trees": len(trees)})
    print(f"Prepared {len(trees)} trees under {prefix}")
    return 0


@track_step
def cmd_train(args, config: RunConfig) -> int:
    trees = load_trees(Path(args.trees), config)
    vocab = Vocabulary.from_trees(trees, config.unk_threshold, config.unk_classes)
    model = RNNG(config.model_settings(), vocab)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)

    with open(_sidecar(output, ".log"), "w", encoding="utf-8") as log:
        def on_epoch(stats):
            log.write(stats.to_line() + "\n")
            log.flush()

        result = train(trees, model, config.trainer_settings(), on_epoch=on_epoch)

    save_checkpoint(output, model, config.model_dump(mode="json"))
    extra = {"epochs": [asdict(stats) for stats in result.history], "vocabulary_size": vocab.num_words}
    write_meta(output, config, extra)
    print(f"Trained {config.mode.value} model on {len(trees)} trees; checkpoint {output}")
    return 0


@track_step
def cmd_parse(args, config: RunConfig) -> int:
    proposal, model, run_config = load_pair(Path(args.disc), Path(args.gen))
    config = inherit_run_config(args, config, run_config)
    sentences = read_sentences(Path(args.input))
    results = parse_corpus(sentences, proposal, model, config.num_samples, config.seed, config.workers)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_trees(output, [r.tree for r in results])

    extra: Dict[str, Any] = {"distinct_parses": [r.distinct_parses for r in results]}
    attention = [[r.attention for r in result.records if r.attention is not None] for result in results]
    if any(attention):
        write_attention_sidecar(_sidecar(output, ".attention"), attention)
    if args.gold:
        gold = load_trees(Path(args.gold), config)
        predicted = [r.tree for r in results]
        labeled = bracket_score(gold, predicted, labeled=True)
        unlabeled = bracket_score(gold, predicted, labeled=False)
        extra["labeled"] = asdict(labeled)
        extra["unlabeled"] = asdict(unlabeled)
        print(f"Bracket F1 {labeled.f1:.2f} (unlabeled {unlabeled.f1:.2f})")
    write_meta(output, config, extra)
    print(f"Parsed {len(results)} sentences into {output}")
    return 0


@track_step
def cmd_lm(args, config: RunConfig) -> int:
    proposal, model, run_config = load_pair(Path(args.disc), Path(args.gen))
    config = inherit_run_config(args, config, run_config)
    sentences = read_sentences(Path(args.input))
    report = corpus_perplexity(sentences, proposal, model, config.num_samples, config.seed, config.workers)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "w", encoding="utf-8") as f:
        f.write("sentence\ttokens\tloglik\tperplexity\n")
        for index, (words, loglik) in enumerate(zip(sentences, report.sentence_logliks)):
            f.write(f"{index}\t{len(words)}\t{loglik:.6f}\t{_exp_per_token(loglik, len(words)):.6f}\n")
        f.write(f"corpus\t{report.tokens}\t{report.total_loglik:.6f}\t{report.perplexity:.6f}\n")
    write_meta(output, config, {"perplexity": report.perplexity, "token_convention": report.token_convention})
    print(f"Perplexity {report.perplexity:.3f} over {report.tokens} words")
    return 0


def _exp_per_token(loglik: float, tokens: int) -> float:
    return math.exp(-loglik / tokens)


@track_step
def cmd_analyze(args, config: RunConfig) -> int:
    handlers = {
        "perp": _analyze_perp,
        "heads": _analyze_heads,
        "export": _analyze_export,
        "project": _analyze_project,
    }
    return handlers[args.analysis](args, config)


def _analyze_perp(args, config: RunConfig) -> int:
    sentences = read_attention_sidecar(Path(args.attention))
    records = [record for sentence in sentences for record in sentence]
    table = perplexity_by_label(records)
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_perplexity_table(_sidecar(prefix, ".tsv"), table)
    write_perplexity_chart(_sidecar(prefix, ".csv"), table)
    with open(_sidecar(prefix, ".samples.tsv"), "w", encoding="utf-8") as f:
        for label in table:
            for line in render_samples(top_entropy_samples(records, label, args.top_k)):
                f.write(line + "\n")
    for row in table.values():
        print(f"{row.label}\t{row.learned:.2f}\t{row.uniform:.2f}\t{row.count}")
    return 0


def _analyze_heads(args, config: RunConfig) -> int:
    rules = HeadRuleTable.load(Path(args.rules) if args.rules else None)
    model = None
    if args.model:
        model, run_config = load_checkpoint(Path(args.model))
        config = inherit_run_config(args, config, run_config)
    elif not args.attention:
        raise ConfigError("analyze heads needs --attention or --model")
    trees = load_trees(Path(args.trees), config)
    rule_trees = read_trees(Path(args.tagged), collapse_preterminals=True) if args.tagged else None
    if args.attention:
        records = read_attention_sidecar(Path(args.attention))
        overlap = head_overlap_from_records(trees, records, rules, config.punctuation, rule_trees)
    else:
        overlap = head_overlap(trees, model, rules, config.punctuation, rule_trees)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_dependencies(output, overlap.attention_graphs)
    write_dependencies(_sidecar(output, ".rules"), overlap.rule_graphs)
    write_meta(output, config, {"uas": overlap.uas, "single_rooted": overlap.single_rooted})
    print(f"Attention/head-rule UAS {100 * overlap.uas:.1f}")
    return 0


def _analyze_export(args, config: RunConfig) -> int:
    model, run_config = load_checkpoint(Path(args.model))
    config = inherit_run_config(args, config, run_config)
    trees = load_trees(Path(args.trees), config)
    gold = read_trees(Path(args.gold)) if args.gold else None
    rows = export_phrase_vectors(trees, model, gold, args.labels)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_phrase_vectors(output, rows)
    write_meta(output, config, {"rows": len(rows)})
    print(f"Exported {len(rows)} phrase vectors to {output}")
    return 0


def _analyze_project(args, config: RunConfig) -> int:
    rows = read_phrase_vectors(Path(args.vectors))
    projection = project_2d([row.vector for row in rows])
    purity = cluster_purity(projection.coordinates, [row.gold_label for row in rows])
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_projection(output, rows, projection)
    write_meta(
        output,
        config,
        {
            "cluster_purity": purity,
            "explained_variance": projection.explained_variance.tolist(),
            "rank_deficient": projection.rank_deficient,
        },
    )
    print(f"Projected {len(rows)} vectors; cluster purity {purity:.3f}")
    return 0


def _add_model_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--mode', choices=[m.value for m in Mode], help='gen or disc')
    parser.add_argument('--composition', choices=['bilstm', 'gated_attention'], help='Composition function')
    parser.add_argument(
        '--ablation',
        choices=['full', 'no-history', 'no-buffer', 'no-stack', 'stack-only'],
        help='Which recurrent encoders feed the action predictor',
    )
    parser.add_argument('--profile', choices=['small', 'large'], help='Dimension profile')
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--learning-rate', type=float, dest='learning_rate')
    parser.add_argument('--report-accuracy', action='store_true', default=None, dest='report_accuracy')


def _add_data_flags(parser: argparse.ArgumentParser):
    parser.add_argument(
        '--unlabeled',
        action='store_true',
        default=None,
        help='Collapse every nonterminal label to the placeholder X (default: from the checkpoint when one is loaded)',
    )


def _add_preterminal_flags(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        '--collapse-preterminals',
        action='store_true',
        default=None,
        dest='collapse_preterminals',
        help='Fold POS preterminals into their words (tags are kept in the .tagged.trees output)',
    )
    group.add_argument('--keep-preterminals', action='store_false', dest='collapse_preterminals')


def _add_inference_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--disc', required=True, help='Discriminative (proposal) checkpoint')
    parser.add_argument('--gen', required=True, help='Generative checkpoint')
    parser.add_argument('--num-samples', '-n', type=int, dest='num_samples', help='Proposal samples per sentence')
    parser.add_argument('--workers', type=int, help='Parallel sentences')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m cli",
        description="Recurrent neural network grammars: training, parsing, language modeling and analysis",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m cli train train.trees --output gen.pt --mode gen --composition gated_attention
  python -m cli train train.trees --output disc.pt --mode disc --ablation stack-only
  python -m cli train train.trees --output ugen.pt --mode gen --unlabeled
  python -m cli parse test.txt --disc disc.pt --gen gen.pt --output test.parsed --gold test.trees
  python -m cli lm test.txt --disc disc.pt --gen gen.pt --output test.ppl.tsv -n 100
  python -m cli analyze perp test.parsed.attention --output perp
  python -m cli analyze heads test.parsed --attention test.parsed.attention --tagged test.tagged.trees --output heads.dep
  python -m cli analyze export test.parsed --model gen.pt --gold test.trees --output vectors.tsv
  python -m cli analyze project vectors.tsv --output vectors.2d.tsv
        """
    )
    parser.add_argument('--config', default=str(DEFAULT_CONFIG), help='Flat YAML configuration file')
    parser.add_argument('--seed', type=int, help='Random seed')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
    commands = parser.add_subparsers(dest='command', required=True)

    prepare = commands.add_parser('prepare', help='Normalize trees and write oracle files')
    prepare.add_argument('trees')
    prepare.add_argument('--output', required=True, help='Output prefix')
    _add_data_flags(prepare)
    _add_preterminal_flags(prepare)

    train_cmd = commands.add_parser('train', help='Train a generative or discriminative model')
    train_cmd.add_argument('trees')
    train_cmd.add_argument('--output', required=True, help='Checkpoint path')
    _add_model_flags(train_cmd)
    _add_data_flags(train_cmd)

    parse = commands.add_parser('parse', help='MAP parsing by importance sampling')
    parse.add_argument('input', help='Tokenized sentences, one per line')
    parse.add_argument('--output', required=True)
    parse.add_argument('--gold', help='Gold trees for bracket scoring')
    _add_inference_flags(parse)
    _add_data_flags(parse)

    lm = commands.add_parser('lm', help='Language-model perplexity by importance sampling')
    lm.add_argument('input', help='Tokenized sentences, one per line')
    lm.add_argument('--output', required=True)
    _add_inference_flags(lm)
    _add_data_flags(lm)

    analyze = commands.add_parser('analyze', help='Attention and phrase-vector analyses')
    analyses = analyze.add_subparsers(dest='analysis', required=True)

    perp = analyses.add_parser('perp', help='Attention perplexity per label')
    perp.add_argument('attention', help='Attention sidecar written by parse')
    perp.add_argument('--output', required=True, help='Output prefix')
    perp.add_argument('--top-k', type=int, default=5, dest='top_k')

    heads = analyses.add_parser('heads', help='Attention heads vs head rules')
    heads.add_argument('trees')
    heads.add_argument('--attention', help='Attention sidecar aligned with the trees')
    heads.add_argument('--model', help='Gated-attention checkpoint to force-decode the trees')
    heads.add_argument('--rules', help='Head-rule table (default: Collins)')
    heads.add_argument('--tagged', help='POS-tagged trees from prepare for the head-rule side')
    heads.add_argument('--output', required=True)
    _add_data_flags(heads)

    export = analyses.add_parser('export', help='Export composed phrase vectors')
    export.add_argument('trees')
    export.add_argument('--model', required=True)
    export.add_argument('--gold', help='Gold trees used to label constituents by span')
    export.add_argument('--labels', nargs='+', help='Keep only these gold labels')
    export.add_argument('--output', required=True)
    _add_data_flags(export)

    project = analyses.add_parser('project', help='Two-dimensional projection of exported vectors')
    project.add_argument('vectors')
    project.add_argument('--output', required=True)
    return parser


def _overrides(args) -> Dict[str, Any]:
    keys = (
        'mode', 'composition', 'ablation', 'profile', 'epochs', 'learning_rate', 'report_accuracy',
        'unlabeled', 'collapse_preterminals', 'num_samples', 'workers', 'seed',
    )
    return {key: getattr(args, key, None) for key in keys}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    commands = {
        'prepare': cmd_prepare,
        'train': cmd_train,
        'parse': cmd_parse,
        'lm': cmd_lm,
        'analyze': cmd_analyze,
    }
    try:
        config = load_run_config(Path(args.config), _overrides(args))
        setup_logging("DEBUG" if args.verbose else config.logging_level, config.logging_format)
        return commands[args.command](args, config)

    except KeyboardInterrupt:
        print("\n\nInterrupted by user.")
        return 130

    except RnngError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code

    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
