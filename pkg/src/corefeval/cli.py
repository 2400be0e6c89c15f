"""Command line interface.

Subcommands: ``score`` (evaluate response files against key files),
``validate`` (structural checks), ``stats`` (corpus statistics),
``transform`` (span rewrites) and ``baseline`` (rule-based predictors).

Exit codes: 0 success, 2 malformed input, 3 key/response pairing mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import os
import sys
from pathlib import Path

from . import baselines  # registers baseline rules as transforms
from . import __version__
from .conllu import parse_text, docs_to_text, scan_document_spans
from .errors import (
    ConlluParseError,
    CoreferenceError,
    DocumentPairError,
    SerializationError,
)
from .metrics import (
    ALL_METRICS,
    EvalOptions,
    ScoreReport,
    add_counts,
    counts_to_prfs,
    empty_response_twin,
    macro_average,
    score_document_pair,
)
from .model import build_coref_layer
from .transforms import LAYER_TRANSFORMS, rewrite_entity_annotations, strip_entities
from . import stats as stats_mod

log = logging.getLogger("corefeval")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PAIRING = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corefeval",
        description="CorefUD CoNLL-U parsing, coreference evaluation, "
                    "transforms, baselines and statistics.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="evaluate response files against key files")
    score.add_argument("key", help="key (gold) file, or comma-separated list pairing datasets")
    score.add_argument("response", help="response (system) file or comma-separated list")
    score.add_argument("--match", choices=("partial", "exact", "head"), default="partial")
    score.add_argument("--keep-singletons", action="store_true",
                       help="keep single-mention entities (excluded by default)")
    score.add_argument("--metrics", default=",".join(ALL_METRICS),
                       help="comma-separated subset of: " + ",".join(ALL_METRICS))
    score.add_argument("--upos-filter", metavar="TAG",
                       help="score only entities with a mention head of this UPOS")
    score.add_argument("--format", choices=("text", "json", "tsv"), default="text")
    score.add_argument("--per-doc", action="store_true", help="report each document")
    score.add_argument("-o", "--output", metavar="FILE",
                       help="also write the report to FILE (.json/.tsv by extension)")
    score.add_argument("--jobs", type=int, default=0,
                       help="worker processes (default: all cores)")
    score.set_defaults(func=cmd_score)

    validate = sub.add_parser("validate", help="check files structurally")
    validate.add_argument("paths", nargs="+")
    validate.add_argument("--strict", action="store_true",
                          help="treat cross-sentence mentions as errors")
    validate.set_defaults(func=cmd_validate)

    stats = sub.add_parser("stats", help="entity and mention statistics")
    stats.add_argument("paths", nargs="+")
    stats.add_argument("--table", choices=("entities", "mentions", "details", "all"),
                       default="all")
    stats.add_argument("--keep-singletons", action="store_true",
                       help="count singleton mentions in the mention table")
    stats.add_argument("--format", choices=("text", "tsv"), default="text")
    stats.set_defaults(func=cmd_stats)

    transform = sub.add_parser("transform", help="rewrite coreference annotation")
    transform.add_argument("paths", nargs="+")
    transform.add_argument("--ops", required=True,
                           help="comma-separated: " + ",".join(sorted(LAYER_TRANSFORMS)))
    transform.add_argument("-o", "--output", help="output file (single input only)")
    transform.add_argument("--out-dir", help="output directory (any number of inputs)")
    transform.set_defaults(func=cmd_transform)

    baseline = sub.add_parser("baseline", help="run rule-based predictors")
    baseline.add_argument("paths", nargs="+")
    baseline.add_argument("--rules",
                          help="comma-separated: " + ",".join(sorted(baselines.BASELINE_RULES)))
    baseline.add_argument("--pipeline", choices=("berulasek", "simple-rule-based"),
                          help="published rule pipelines (shorthand for --rules)")
    baseline.add_argument("--strip", action="store_true",
                          help="drop existing Entity annotation first")
    baseline.add_argument("-o", "--output", help="output file (single input only)")
    baseline.add_argument("--out-dir", help="output directory (any number of inputs)")
    baseline.set_defaults(func=cmd_baseline)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DocumentPairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PAIRING
    except (ConlluParseError, CoreferenceError, SerializationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


# ---------------------------------------------------------------------------
# score

def cmd_score(args) -> int:
    key_paths = args.key.split(",")
    resp_paths = args.response.split(",")
    if len(key_paths) != len(resp_paths):
        raise DocumentPairError(
            f"{len(key_paths)} key files vs {len(resp_paths)} response files")
    opts = EvalOptions(
        match=args.match,
        keep_singletons=args.keep_singletons,
        metrics=tuple(m.strip() for m in args.metrics.split(",") if m.strip()),
        upos_filter=args.upos_filter,
    )
    jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
    names = _dataset_names(key_paths)
    tasks = []
    for name, key_path, resp_path in zip(names, key_paths, resp_paths):
        _SHARED_FILES[key_path] = Path(key_path).read_bytes()
        _SHARED_FILES[resp_path] = Path(resp_path).read_bytes()
        for order, (doc_key, key_ref, resp_ref) in enumerate(
                _pair_spans(key_path, resp_path, name)):
            tasks.append((name, order, doc_key, key_ref, resp_ref, opts))

    # workers inherit _SHARED_FILES through fork; tasks carry only offsets
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            results = list(pool.imap_unordered(_score_worker, tasks, chunksize=4))
    else:
        results = [_score_worker(t) for t in tasks]
    _SHARED_FILES.clear()
    results.sort(key=lambda r: (names.index(r[0]), r[1]))

    totals: dict[str, dict[str, tuple]] = {name: {} for name in names}
    per_doc: dict[str, dict[str, dict]] = {}
    for name, _order, doc_key, counts in results:
        add_counts(totals[name], counts)
        if args.per_doc:
            per_doc.setdefault(name, {})[doc_key] = counts_to_prfs(counts, opts.metrics)
    per_dataset = {name: counts_to_prfs(totals[name], opts.metrics) for name in names}
    report = ScoreReport((opts.match, opts.keep_singletons), opts.metrics,
                         per_dataset, macro_average(per_dataset), per_doc)

    rendered = _render_report(report, args.format, args.per_doc)
    print(rendered, end="" if rendered.endswith("\n") else "\n")
    if args.output:
        fmt = {"json": "json", "tsv": "tsv"}.get(
            Path(args.output).suffix.lstrip("."), args.format)
        Path(args.output).write_text(
            _render_report(report, fmt, args.per_doc), encoding="utf-8")
    return EXIT_OK


def _dataset_names(paths: list[str]) -> list[str]:
    names: list[str] = []
    for path in paths:
        base = Path(path).stem or path
        name = base
        n = 2
        while name in names:
            name = f"{base}#{n}"
            n += 1
        names.append(name)
    return names


_SHARED_FILES: dict[str, bytes] = {}


def _pair_spans(key_path: str, resp_path: str, dataset: str):
    """Pair per-document byte spans of a key and a response file by
    document id (positionally when ids are absent)."""
    key_spans = scan_document_spans(_SHARED_FILES[key_path])
    resp_spans = scan_document_spans(_SHARED_FILES[resp_path])
    key_ids = [s[0] for s in key_spans]
    resp_ids = [s[0] for s in resp_spans]
    use_ids = (None not in key_ids and None not in resp_ids
               and len(set(key_ids)) == len(key_ids)
               and len(set(resp_ids)) == len(resp_ids))
    if use_ids:
        by_id = {doc_id: (start, end) for doc_id, start, end in resp_spans}
        for doc_id, start, end in key_spans:
            span = by_id.pop(doc_id, None)
            if span is None:
                log.warning("dataset %s: document %s missing from the response;"
                            " scoring it as empty", dataset, doc_id)
                yield doc_id, (key_path, start, end), None
            else:
                yield doc_id, (key_path, start, end), (resp_path, *span)
        if by_id:
            raise DocumentPairError(
                f"dataset {dataset}: response documents not present in the key: "
                + ", ".join(sorted(by_id)))
    else:
        if len(key_spans) != len(resp_spans):
            raise DocumentPairError(
                f"dataset {dataset}: {len(key_spans)} key vs {len(resp_spans)}"
                " response documents and no document ids to pair by")
        for i, ((kid, ks, ke), (_rid, rs, re_)) in enumerate(
                zip(key_spans, resp_spans)):
            yield kid or f"#{i}", (key_path, ks, ke), (resp_path, rs, re_)


def _chunk_text(ref: tuple[str, int, int]) -> str:
    path, start, end = ref
    return _SHARED_FILES[path][start:end].decode("utf-8")


def _score_worker(task):
    dataset, order, doc_key, key_ref, resp_ref, opts = task
    key_doc = parse_text(_chunk_text(key_ref))[0]
    if resp_ref is None:
        resp_doc = empty_response_twin(key_doc)
    else:
        resp_doc = parse_text(_chunk_text(resp_ref))[0]
    return dataset, order, doc_key, score_document_pair(key_doc, resp_doc, opts)


# ---------------------------------------------------------------------------
# report rendering

def _pct(x: float) -> float:
    return round(100.0 * x, 2)


def _render_report(report: ScoreReport, fmt: str, per_doc: bool) -> str:
    if fmt == "json":
        return _render_json(report, per_doc)
    if fmt == "tsv":
        return _render_tsv(report)
    return _render_text(report, per_doc)


def _render_text(report: ScoreReport, per_doc: bool) -> str:
    match, singletons = report.variant
    lines = [f"match: {match}   singletons: {'kept' if singletons else 'excluded'}"]
    width = max((len(n) for n in report.per_dataset), default=8)
    width = max(width, len("dataset"), 5)

    def block(name: str, scores: dict, indent: str = "") -> None:
        for metric in report.metrics:
            if metric in scores:
                s = scores[metric]
                lines.append(f"{indent}{name:<{width}}  {metric:<6} "
                             f"{_pct(s.recall):>7.2f} {_pct(s.precision):>7.2f} "
                             f"{_pct(s.f1):>7.2f}")

    lines.append(f"{'dataset':<{width}}  {'metric':<6} {'R':>7} {'P':>7} {'F1':>7}")
    for name, scores in report.per_dataset.items():
        block(name, scores)
        if per_doc and name in report.per_doc:
            for doc_key, doc_scores in report.per_doc[name].items():
                block(f"  [{doc_key}]", doc_scores)
    if len(report.per_dataset) > 1:
        block("MACRO", report.macro)
    if (match, singletons) == ("partial", False) and "conll" in report.macro:
        lines.append("")
        lines.append(f"CoNLL F1 (partial, no singletons): "
                     f"{_pct(report.macro['conll'].f1):.2f}")
    return "\n".join(lines) + "\n"


def _render_json(report: ScoreReport, per_doc: bool) -> str:
    def scores_obj(scores: dict) -> dict:
        return {m: {"r": _pct(s.recall), "p": _pct(s.precision), "f1": _pct(s.f1)}
                for m, s in scores.items()}

    payload = {
        "schema": 1,
        "variant": {"match": report.variant[0], "singletons": report.variant[1]},
        "datasets": {n: scores_obj(s) for n, s in report.per_dataset.items()},
        "macro": scores_obj(report.macro),
    }
    if per_doc:
        payload["documents"] = {
            n: {d: scores_obj(s) for d, s in docs.items()}
            for n, docs in report.per_doc.items()
        }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _render_tsv(report: ScoreReport) -> str:
    metrics = [m for m in report.metrics
               if any(m in s for s in report.per_dataset.values())]
    header = ["dataset"]
    for m in metrics:
        header += [f"{m}.r", f"{m}.p", f"{m}.f1"]
    rows = ["\t".join(header)]

    def row(name: str, scores: dict) -> str:
        cells = [name]
        for m in metrics:
            s = scores.get(m)
            cells += ([f"{_pct(s.recall):.2f}", f"{_pct(s.precision):.2f}",
                       f"{_pct(s.f1):.2f}"] if s else ["", "", ""])
        return "\t".join(cells)

    for name, scores in report.per_dataset.items():
        rows.append(row(name, scores))
    if len(report.per_dataset) > 1:
        rows.append(row("MACRO", report.macro))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# validate

def cmd_validate(args) -> int:
    failures = 0
    for path in args.paths:
        problems = validate_path(path, strict=args.strict)
        if problems:
            failures += 1
            for problem in problems:
                print(f"{path}: {problem}")
        else:
            print(f"{path}: OK")
    return EXIT_INPUT if failures else EXIT_OK


def validate_path(path: str, strict: bool = False) -> list[str]:
    try:
        docs = parse_text(Path(path).read_text(encoding="utf-8"), path=path)
    except (ConlluParseError, CoreferenceError) as exc:
        return [str(exc)]
    problems: list[str] = []
    for doc in docs:
        try:
            layer = build_coref_layer(doc)
        except CoreferenceError as exc:
            problems.append(str(exc))
            continue
        if strict:
            for entity in layer.entities:
                for mention in entity.mentions:
                    sents = {n.sent_index for n in mention.nodes}
                    if len(sents) > 1:
                        problems.append(
                            f"document {doc.doc_id}: mention of {entity.eid!r}"
                            f" crosses sentences {min(sents) + 1}-{max(sents) + 1}")
    return problems


# ---------------------------------------------------------------------------
# stats

_STAT_TABLES = {
    "entities": (stats_mod.ENTITY_COLUMNS, "entity_rows"),
    "mentions": (stats_mod.MENTION_COLUMNS, "mention_rows"),
    "details": (stats_mod.DETAIL_COLUMNS, "detail_rows"),
}


def cmd_stats(args) -> int:
    layers_by_file: dict[str, list] = {}
    for path in args.paths:
        docs = parse_text(Path(path).read_text(encoding="utf-8"), path=path)
        layers_by_file[Path(path).stem or path] = [build_coref_layer(d) for d in docs]

    tables = ("entities", "mentions", "details") if args.table == "all" else (args.table,)
    out: list[str] = []
    for table in tables:
        rows: list[tuple[str, dict]] = []
        for name, layers in layers_by_file.items():
            rows.append((name, _stat_row(table, layers, args.keep_singletons)))
        if len(layers_by_file) > 1:
            all_layers = [l for layers in layers_by_file.values() for l in layers]
            rows.append(("ALL", _stat_row(table, all_layers, args.keep_singletons)))
        columns = _STAT_TABLES[table][0]
        if args.format == "tsv":
            out.append(_stats_tsv(table, columns, rows))
        else:
            out.append(_stats_text(table, columns, rows))
    print("\n".join(out), end="")
    return EXIT_OK


def _stat_row(table: str, layers: list, keep_singletons: bool) -> dict:
    if table == "entities":
        return stats_mod.entity_stats(layers)
    if table == "mentions":
        return stats_mod.mention_stats(layers, include_singletons=keep_singletons)
    return stats_mod.mention_detail_stats(layers)


def _stat_cell(column: str, value) -> str:
    if column in ("count", "max_len"):
        return str(int(value))
    if column == "per_1k":
        return f"{value:.0f}"
    return f"{value:.1f}"


def _stats_text(table: str, columns: tuple, rows: list[tuple[str, dict]]) -> str:
    name_w = max([len(n) for n, _ in rows] + [len(table)])
    widths = {c: max(len(c), 8) for c in columns}
    lines = [f"[{table}]"]
    lines.append(" ".join([f"{'':<{name_w}}"] + [f"{c:>{widths[c]}}" for c in columns]))
    for name, row in rows:
        cells = [f"{_stat_cell(c, row[c]):>{widths[c]}}" for c in columns]
        lines.append(" ".join([f"{name:<{name_w}}"] + cells))
    return "\n".join(lines) + "\n"


def _stats_tsv(table: str, columns: tuple, rows: list[tuple[str, dict]]) -> str:
    lines = ["\t".join(["file"] + list(columns))]
    for name, row in rows:
        lines.append("\t".join([name] + [_stat_cell(c, row[c]) for c in columns]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# transform / baseline

def _resolve_outputs(args) -> list[tuple[str, str | None]]:
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        return [(p, str(Path(args.out_dir) / Path(p).name)) for p in args.paths]
    if len(args.paths) > 1:
        raise ValueError("multiple inputs need --out-dir")
    return [(args.paths[0], args.output)]


def _rewrite_files(args, ops) -> int:
    for in_path, out_path in _resolve_outputs(args):
        docs = parse_text(Path(in_path).read_text(encoding="utf-8"), path=in_path)
        out_docs = []
        for doc in docs:
            doc = doc.copy()
            if getattr(args, "strip", False):
                doc = strip_entities(doc)
            layer = build_coref_layer(doc)
            for op in ops:
                op(layer)
            rewrite_entity_annotations(doc, layer)
            out_docs.append(doc)
        text = docs_to_text(out_docs)
        if out_path:
            Path(out_path).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_transform(args) -> int:
    ops = []
    for name in (n.strip() for n in args.ops.split(",") if n.strip()):
        if name not in LAYER_TRANSFORMS:
            raise ValueError(f"unknown transform {name!r}; available: "
                             + ", ".join(sorted(LAYER_TRANSFORMS)))
        ops.append(LAYER_TRANSFORMS[name])
    return _rewrite_files(args, ops)


def cmd_baseline(args) -> int:
    if args.pipeline:
        rule_names = [args.pipeline]
    elif args.rules:
        rule_names = [n.strip() for n in args.rules.split(",") if n.strip()]
    else:
        raise ValueError("baseline needs --rules or --pipeline")
    ops = []
    for name in rule_names:
        if name not in baselines.BASELINE_RULES:
            raise ValueError(f"unknown rule {name!r}; available: "
                             + ", ".join(sorted(baselines.BASELINE_RULES)))
        ops.append(baselines.BASELINE_RULES[name])
    return _rewrite_files(args, ops)


if __name__ == "__main__":
    sys.exit(main())
