"""Command-line interface: train, extract, evaluate, compress-lm, cloud."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from rich import traceback
from rich.console import Console
from rich.logging import RichHandler

from .cloud import (
    ExtractedNews,
    build_topic_clouds,
    dumps_cloud,
    generate_cloud,
    in_window,
    save_cloud_json,
)
from .config import RunConfig, load_config
from .corpus import NewsDocument, Split, load_corpus, parse_timestamp
from .ensemble import load_model, model_digest, save_model, train_bagging
from .errors import ConfigError, CorpusFormatError, NewsCloudError, ResourceError
from .extract import (
    SWEEP_NS,
    build_extractor,
    evaluate_sweep,
    extract_keyphrases,
    extractor_for_model,
    format_table,
    reports_to_json,
    training_instances,
)
from .ngram_lm import (
    DEFAULT_BACKOFF_PENALTY,
    FINGERPRINT_BITS,
    QUANT_BITS,
    bin_widths,
    compress,
    load_arpa,
    load_language_models,
)
from .preprocess import PROFILES, LanguageResources, load_resources
from .render import render_cloud

logger = logging.getLogger("newscloud")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# broadcast time given to plain-text documents, which carry no metadata
_UNDATED = datetime(1970, 1, 1, tzinfo=timezone.utc)


class UsageError(Exception):
    """Bad combination of arguments"""


def setup_logging(verbosity: int) -> None:
    """-q: errors only, default: warnings, -v: info, -vv: debug"""
    level = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    if verbosity >= 2:
        traceback.install(show_locals=True)


def _ranged_int(lo: int, hi: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"invalid int value: {text!r}") from e
        if not lo <= value <= hi:
            raise argparse.ArgumentTypeError(f"must be in {lo}..{hi}, got {value}")
        return value

    return parse


def _positive_int(text: str) -> int:
    return _ranged_int(1, 1 << 31)(text)


def _weights(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(w) for w in text.split(",") if w.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _timestamp(text: str) -> datetime:
    try:
        return parse_timestamp(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


# Argument groups shared by several subcommands. Defaults are None so that only flags actually
# given override the config file.


def _add_resource_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("language resources")
    group.add_argument("--language", choices=PROFILES, help="language profile (default: pt)")
    group.add_argument("--stopwords", metavar="PATH", help="stopword list, one word per line")
    group.add_argument("--ne-lexicon", metavar="PATH", help="named-entity lexicon (TSV)")
    group.add_argument("--pos-lexicon", metavar="PATH", help="part-of-speech lexicon (TSV)")
    group.add_argument(
        "--lm",
        metavar="PATH",
        action="append",
        help="domain language model, ARPA or compressed; repeat to interpolate several",
    )
    group.add_argument(
        "--lm-weights", metavar="W,W,..", type=_weights, help="interpolation weights"
    )


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-n", type=_positive_int, help="keyphrases per document (default: 30)")
    parser.add_argument("--threads", type=_positive_int, help="worker threads (default: 1)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newscloud",
        description="Keyphrase extraction and tag clouds for broadcast news transcripts.",
    )
    parser.add_argument("--config", metavar="PATH", help="key = value config file")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    train = sub.add_parser("train", help="train a bagged decision-tree model")
    train.add_argument("corpus", help="training corpus (JSON)")
    train.add_argument("-o", "--model-out", required=True, metavar="PATH")
    train.add_argument("--algorithm", choices=("c45", "cart"))
    train.add_argument("--n-bags", type=_positive_int)
    train.add_argument("--seed", type=_ranged_int(0, 2**64 - 1))
    train.add_argument("--min-leaf", type=_positive_int)
    train.add_argument("--max-depth", type=_ranged_int(0, 1 << 16))
    train.add_argument("--alpha", type=float, help="CART cost-complexity pruning (0: off)")
    train.add_argument("--confidence", type=float, help="C4.5 pruning confidence factor")
    train.add_argument("--negative-ratio", type=float, help="negatives kept per positive")
    train.add_argument("--features", help="feature set, e.g. base+f1+f3 or all")
    train.add_argument("--threads", type=_positive_int)
    _add_resource_args(train)

    extract = sub.add_parser("extract", help="print the top keyphrases of documents")
    extract.add_argument("input", help="corpus (.json) or a plain-text transcript")
    extract.add_argument("-m", "--model", required=True, metavar="PATH")
    _add_run_args(extract)
    _add_resource_args(extract)

    evaluate = sub.add_parser("evaluate", help="precision/recall/F1 on an annotated corpus")
    evaluate.add_argument("corpus", help="test corpus (JSON)")
    evaluate.add_argument("-m", "--model", required=True, metavar="PATH")
    evaluate.add_argument(
        "--sweep", action="store_true", help=f"evaluate at n = {', '.join(map(str, SWEEP_NS))}"
    )
    _add_run_args(evaluate)
    _add_resource_args(evaluate)

    lm = sub.add_parser("compress-lm", help="compress an ARPA language model")
    lm.add_argument("arpa", help="ARPA text file")
    lm.add_argument("-o", "--out", required=True, metavar="PATH")
    lm.add_argument(
        "-b",
        "--fingerprint-bits",
        type=_ranged_int(FINGERPRINT_BITS.start, FINGERPRINT_BITS.stop - 1),
        default=12,
        help="fingerprint bits per n-gram (8..16, default 12)",
    )
    lm.add_argument(
        "-q",
        "--quant-bits",
        type=_ranged_int(QUANT_BITS.start, QUANT_BITS.stop - 1),
        default=8,
        help="bits per quantized probability (4..8, default 8)",
    )
    lm.add_argument("--seed", type=_ranged_int(0, 2**32 - 1), default=0)
    lm.add_argument("--backoff-penalty", type=float, default=DEFAULT_BACKOFF_PENALTY)
    lm.add_argument("--json", action="store_true", help="machine-readable output")

    cloud = sub.add_parser("cloud", help="tag cloud of the top news in a time window")
    cloud.add_argument("corpus", help="news corpus (JSON)")
    cloud.add_argument("-m", "--model", required=True, metavar="PATH")
    cloud.add_argument("-o", "--out", metavar="PATH", help="output HTML (default: cloud.html)")
    cloud.add_argument("--now", type=_timestamp, help="end of the window (default: current time)")
    cloud.add_argument("--topic", help="only news with this topic")
    cloud.add_argument("--all-topics", action="store_true", help="one cloud per topic, plus all")
    cloud.add_argument("--out-dir", metavar="DIR", help="output directory for --all-topics")
    cloud.add_argument("--window-hours", type=float)
    cloud.add_argument("--top-news", type=_positive_int)
    cloud.add_argument("--keyphrases-per-news", type=_positive_int)
    cloud.add_argument("--cloud-size", type=_positive_int)
    cloud.add_argument("--min-font", type=float)
    cloud.add_argument("--max-font", type=float)
    cloud.add_argument("--threads", type=_positive_int)
    cloud.add_argument("--json", action="store_true", help="print the cloud as JSON")
    _add_resource_args(cloud)
    return parser


_CONFIG_FLAGS = (
    "language",
    "stopwords",
    "ne_lexicon",
    "pos_lexicon",
    "lm",
    "lm_weights",
    "algorithm",
    "n_bags",
    "seed",
    "min_leaf",
    "max_depth",
    "alpha",
    "confidence",
    "negative_ratio",
    "features",
    "n",
    "threads",
    "window_hours",
    "top_news",
    "keyphrases_per_news",
    "cloud_size",
    "topic",
    "min_font",
    "max_font",
)


def effective_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any) with the given flags applied on top"""
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {name: getattr(args, name, None) for name in _CONFIG_FLAGS}
    if overrides["lm"] is not None:
        overrides["lm"] = tuple(overrides["lm"])
    cfg = cfg.with_overrides(**overrides).validate()
    cfg.log()
    return cfg


def _resources(cfg: RunConfig) -> LanguageResources:
    return load_resources(cfg.language, cfg.stopwords, cfg.ne_lexicon, cfg.pos_lexicon)


def _language_model(cfg: RunConfig):
    return load_language_models(cfg.lm, cfg.lm_weights or None)


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    resources = _resources(cfg)
    corpus = load_corpus(args.corpus, Split.TRAIN, resources)
    if not corpus.documents:
        raise CorpusFormatError("training corpus has no documents", args.corpus)
    extractor = build_extractor(corpus, resources, _language_model(cfg), cfg.feature_names())
    instances = training_instances(corpus, extractor)
    if not instances:
        raise CorpusFormatError("training corpus has no candidate phrases", args.corpus)
    model = train_bagging(
        instances,
        algorithm=cfg.algorithm,
        n_bags=cfg.n_bags,
        seed=cfg.seed,
        params=cfg.tree_params(),
        feature_names=extractor.feature_names,
        threads=cfg.threads,
        negative_ratio=cfg.negative_ratio,
        idf=extractor.idf,
    )
    save_model(model, args.model_out)
    positives = sum(inst.label for inst in instances)
    print(f"instances: {len(instances)}")
    print(f"positive: {positives} ({100.0 * positives / len(instances):.2f}%)")
    print(f"model: {args.model_out}")
    print(f"sha256: {model_digest(model)}")
    return EXIT_OK


def _read_input(path: str, resources: LanguageResources) -> list[NewsDocument]:
    if Path(path).suffix.lower() == ".json":
        return list(load_corpus(path, Split.UNLABELED, resources).documents)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ResourceError(path, "input file not found") from e
    except UnicodeDecodeError as e:
        raise CorpusFormatError(f"not valid UTF-8 at byte {e.start}", path) from e
    doc = NewsDocument.from_text(
        resources,
        id=Path(path).stem,
        channel="",
        program="",
        broadcast_time=_UNDATED,
        position_in_program=0,
        text=text,
    )
    return [doc]


def cmd_extract(args: argparse.Namespace, cfg: RunConfig) -> int:
    resources = _resources(cfg)
    model = load_model(args.model)
    extractor = extractor_for_model(model, resources, _language_model(cfg))
    documents = _read_input(args.input, resources)
    results = extract_keyphrases(documents, model, extractor, cfg.n, cfg.threads)
    if args.json:
        payload = {
            "documents": [
                {"id": doc.id, "keyphrases": [k.to_dict() for k in keyphrases]}
                for doc, keyphrases in results
            ]
        }
        print(json.dumps(payload, ensure_ascii=False, indent=1))
        return EXIT_OK
    for doc, keyphrases in results:
        if len(results) > 1:
            print(f"# {doc.id}")
        for k in keyphrases:
            print(f"{k.rank}\t{k.score:.4f}\t{k.surface}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    resources = _resources(cfg)
    model = load_model(args.model)
    extractor = extractor_for_model(model, resources, _language_model(cfg))
    corpus = load_corpus(args.corpus, Split.TEST, resources)
    ns = SWEEP_NS if args.sweep else (cfg.n,)
    reports = evaluate_sweep(corpus, model, extractor, ns, cfg.threads)
    print(reports_to_json(reports) if args.json else format_table(reports))
    return EXIT_OK


def cmd_compress_lm(args: argparse.Namespace, _cfg: RunConfig) -> int:
    model = load_arpa(args.arpa)
    original = Path(args.arpa).stat().st_size
    compressed = compress(
        model,
        fingerprint_bits=args.fingerprint_bits,
        quant_bits=args.quant_bits,
        seed=args.seed,
        backoff_penalty=args.backoff_penalty,
    )
    size = compressed.save(args.out)
    ratio = size / original if original else 0.0
    logger.info("compressed %s: %d -> %d bytes (%.3f)", args.arpa, original, size, ratio)
    for order, width in bin_widths(model, args.quant_bits).items():
        logger.info("order %d: quantization bin width %.4f", order, width)
    if args.json:
        print(json.dumps({"original_bytes": original, "compressed_bytes": size, "ratio": ratio}))
    else:
        print(f"original: {original} bytes")
        print(f"compressed: {size} bytes")
        print(f"ratio: {ratio:.4f}")
    return EXIT_OK


def _topic_slug(topic: str) -> str:
    return re.sub(r"[^\w-]+", "_", topic.strip().lower()).strip("_") or "topic"


def cmd_cloud(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.all_topics and args.topic:
        raise UsageError("--topic and --all-topics are mutually exclusive")
    if args.out_dir and not args.all_topics:
        raise UsageError("--out-dir only applies with --all-topics")
    now = args.now or datetime.now(timezone.utc)
    cloud_cfg = cfg.cloud_config()
    resources = _resources(cfg)
    model = load_model(args.model)
    extractor = extractor_for_model(model, resources, _language_model(cfg))
    corpus = load_corpus(args.corpus, Split.UNLABELED, resources)
    recent = [doc for doc in corpus.documents if in_window(doc, now, cloud_cfg.window)]
    results = extract_keyphrases(
        recent, model, extractor, cloud_cfg.keyphrases_per_news, cfg.threads
    )
    news = [ExtractedNews(doc, tuple(keyphrases)) for doc, keyphrases in results]

    if args.all_topics:
        out_dir = Path(args.out_dir or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        clouds = build_topic_clouds(news, now, cloud_cfg)
        for topic, topic_cloud in clouds.items():
            stem = "all" if topic is None else _topic_slug(topic)
            render_cloud(topic_cloud, out_dir / f"{stem}.html", cfg.min_font, cfg.max_font)
            save_cloud_json(topic_cloud, out_dir / f"{stem}.json")
            if not args.json:
                topic_cloud.show()
                print()
        if args.json:
            print(json.dumps([json.loads(dumps_cloud(c)) for c in clouds.values()], indent=1))
        return EXIT_OK

    tag_cloud = generate_cloud(news, now, cloud_cfg)
    render_cloud(tag_cloud, args.out or "cloud.html", cfg.min_font, cfg.max_font)
    if args.json:
        print(dumps_cloud(tag_cloud))
    else:
        tag_cloud.show()
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "compress-lm": cmd_compress_lm,
    "cloud": cmd_cloud,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(-1 if args.quiet else args.verbose)
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, ResourceError) as e:
        print(f"newscloud {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NewsCloudError, OSError, ValueError) as e:
        logger.debug("pipeline failure", exc_info=True)
        print(f"newscloud {args.command}: error: {e}", file=sys.stderr)
        return EXIT_FAILURE
