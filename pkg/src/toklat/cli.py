"""Command-line interface.

All output is machine-readable JSON (JSON-lines for multi-record commands);
`--pretty` indents it.  Exit codes: 0 success, 2 validation error,
3 resource limit exceeded, 4 external scoring service failure.

Stdout is byte-identical across runs with the same seed: wall-clock fields
are omitted from printed reports unless `--timings` is given (file output
via `--output` always contains them).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import analysis, estimators
from .errors import (
    ResourceLimitError,
    ScorerError,
    TokLatError,
    ValidationError,
)
from .lattice import build_lattice
from .neighbors import off_by_one
from .sampling import SampleSpec, sample_uniform
from .scorer import HTTPScorer, HashLM, NGramLM, Scorer, UniformScorer
from .vocab import Vocabulary, load_vocabulary, token_str_to_bytes

ENDPOINT_ENV = "TOKLAT_SCORER_ENDPOINT"


def _arg_text(s: str) -> bytes:
    return token_str_to_bytes(s)


def _parse_ids(s: str) -> tuple[int, ...]:
    s = s.strip()
    if not s:
        return ()
    try:
        if s.startswith("["):
            return tuple(int(x) for x in json.loads(s))
        return tuple(int(x) for x in s.split(","))
    except (ValueError, TypeError):
        raise ValidationError(f"cannot parse token ids from {s!r}") from None


def _build_scorer(spec: str | None, vocab: Vocabulary, jobs: int = 4) -> Scorer:
    if spec is None:
        spec = os.environ.get(ENDPOINT_ENV)
        if not spec:
            raise ValidationError(
                f"no scorer given and {ENDPOINT_ENV} is not set"
            )
    if spec.startswith(("http://", "https://")):
        return HTTPScorer(spec, max_in_flight=jobs)
    if spec.startswith("http:"):
        return HTTPScorer("http://" + spec[len("http:") :], max_in_flight=jobs)
    if spec == "builtin:uniform":
        return UniformScorer(len(vocab))
    if spec.startswith("builtin:hash:"):
        parts = spec.split(":")
        seed = int(parts[2])
        temperature = float(parts[3]) if len(parts) > 3 else 1.0
        return HashLM(seed, len(vocab), temperature)
    if spec.startswith("builtin:ngram:"):
        model = NGramLM.load(spec[len("builtin:ngram:") :])
        if model.vocab_size < len(vocab):
            raise ValidationError(
                f"ngram model covers {model.vocab_size} tokens but the "
                f"vocabulary has {len(vocab)}"
            )
        return model
    raise ValidationError(f"unknown scorer spec {spec!r}")


def _context_ids(args, vocab: Vocabulary) -> tuple[int, ...]:
    if getattr(args, "context_ids", None):
        return _parse_ids(args.context_ids)
    if getattr(args, "context", None):
        return vocab.canonical_tokenize(_arg_text(args.context))
    return ()


def _emit(args, obj) -> None:
    if getattr(args, "pretty", False):
        print(json.dumps(obj, indent=2))
    else:
        print(json.dumps(obj))


def _read_text(args) -> bytes:
    if getattr(args, "text_file", None):
        with open(args.text_file, "rb") as fh:
            return fh.read()
    if args.text is None:
        raise ValidationError("one of --text / --text-file is required")
    return _arg_text(args.text)


def cmd_lattice(args) -> int:
    vocab = load_vocabulary(args.vocab)
    text = _read_text(args)
    lattice = build_lattice(vocab, text)
    if args.enumerate is not None:
        bounded = lattice.bound(max(lattice.n, 1))
        paths = bounded.enumerate_paths(args.enumerate)
        _emit(
            args,
            {
                "n": lattice.n,
                "num_paths": str(lattice.num_paths()),
                "paths": [
                    {"ids": list(p), "pieces": vocab.pieces(p)} for p in paths
                ],
            },
        )
    elif args.dump:
        _emit(args, lattice.to_json_dict())
    else:
        _emit(args, {"num_paths": str(lattice.num_paths())})
    return 0


def cmd_sample(args) -> int:
    vocab = load_vocabulary(args.vocab)
    text = _read_text(args)
    lattice = build_lattice(vocab, text)
    max_len = args.max_len if args.max_len is not None else max(lattice.n, 1)
    bounded = lattice.bound(max_len)

    exclude: list[tuple[int, ...]] = []
    canonical = None
    if args.exclude_canonical or args.exclude_off_by_one:
        supplied = _parse_ids(args.canonical_ids) if args.canonical_ids else None
        canonical = estimators.resolve_canonical(vocab, text, supplied)
    if args.exclude_canonical:
        exclude.append(canonical)
    if args.exclude_off_by_one:
        exclude.extend(off_by_one(vocab, canonical).members)

    spec = SampleSpec(
        k=args.k,
        seed=args.seed,
        max_len=max_len,
        exclude=tuple(exclude),
        with_replacement=args.with_replacement,
    )
    samples = sample_uniform(bounded, spec)
    _emit(
        args,
        {
            "n": lattice.n,
            "max_len": max_len,
            "num_paths": str(bounded.num_paths()),
            "excluded": len(exclude),
            "samples": [
                {"ids": list(s), "pieces": vocab.pieces(s)} for s in samples
            ],
        },
    )
    return 0


def _estimate_report(args, vocab: Vocabulary, text: bytes) -> estimators.EstimateReport:
    scorer = _build_scorer(args.scorer, vocab, jobs=args.jobs)
    context = _context_ids(args, vocab)
    canonical = _parse_ids(args.canonical_ids) if args.canonical_ids else None
    common = dict(include_eos=args.include_eos, canonical=canonical)
    method = args.method
    if method == "canonical":
        return estimators.estimate_canonical(scorer, context, vocab, text, **common)
    if method == "exact":
        return estimators.estimate_exact(
            scorer, context, vocab, text, limit=args.limit, **common
        )
    _require(args.k is not None, "--k is required for sampling methods")
    _require(args.seed is not None, "--seed is required for sampling methods")
    if method == "lattice":
        return estimators.estimate_lattice(
            scorer, context, vocab, text, k=args.k, max_len=args.max_len,
            seed=args.seed, strict_k=args.strict_k, **common,
        )
    if method == "importance":
        return estimators.estimate_importance(
            scorer, context, vocab, text, k=args.k, seed=args.seed,
            max_len=args.max_len,
            exclude_canonical=not args.no_exclude_canonical, **common,
        )
    if method == "rejection":
        _require(args.max_len is not None, "--max-len is required for rejection")
        common.pop("include_eos")  # rejection forces the eos convention
        return estimators.estimate_rejection(
            scorer, context, vocab, text, k=args.k, max_len=args.max_len,
            seed=args.seed, **common,
        )
    raise ValidationError(f"unknown method {method!r}")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def cmd_estimate(args) -> int:
    vocab = load_vocabulary(args.vocab)
    text = _read_text(args)
    report = _estimate_report(args, vocab, text)
    _emit(args, report.to_json_dict(include_timing=args.timings))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(include_timing=True), fh)
            fh.write("\n")
    return 0


def cmd_choose(args) -> int:
    vocab = load_vocabulary(args.vocab)
    scorer = _build_scorer(args.scorer, vocab, jobs=args.jobs)
    lines_out = []
    correct = 0
    labeled = 0
    with open(args.tasks, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                item = json.loads(line)
                raw_ctx = item.get("context", "")
                context = (
                    tuple(raw_ctx)
                    if isinstance(raw_ctx, list)
                    else vocab.canonical_tokenize(_arg_text(raw_ctx))
                )
                candidates = [_arg_text(c) for c in item["candidates"]]
            except (KeyError, TypeError, ValueError, ValidationError) as exc:
                raise ValidationError(f"task line {lineno}: {exc}") from None
            params = _method_params(args)
            index, reports = estimators.choose(
                scorer, context, vocab, candidates, args.method,
                seed=args.seed, **params,
            )
            record = {
                "item": lineno,
                "chosen": index,
                "reports": [
                    r.to_json_dict(include_timing=args.timings) for r in reports
                ],
            }
            if "label" in item and item["label"] is not None:
                labeled += 1
                record["label"] = item["label"]
                record["correct"] = bool(index == item["label"])
                correct += record["correct"]
            lines_out.append(record)
    for record in lines_out:
        _emit(args, record)
    summary = {"items": len(lines_out)}
    if labeled:
        summary["accuracy"] = correct / labeled
    _emit(args, summary)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            analysis.write_jsonl(lines_out + [summary], fh)
    return 0


def _method_params(args) -> dict:
    method = args.method
    params: dict = {"include_eos": args.include_eos}
    if method == "exact":
        params["limit"] = args.limit
    if method in ("lattice", "importance", "rejection"):
        _require(args.k is not None, "--k is required for sampling methods")
        _require(args.seed is not None, "--seed is required for sampling methods")
        params["k"] = args.k
    if method == "lattice":
        params["max_len"] = args.max_len
        params["strict_k"] = args.strict_k
    if method == "importance":
        params["max_len"] = args.max_len
        params["exclude_canonical"] = not args.no_exclude_canonical
    if method == "rejection":
        _require(args.max_len is not None, "--max-len is required for rejection")
        params["max_len"] = args.max_len
        params.pop("include_eos")
    return params


def _read_corpus(path: str, vocab: Vocabulary) -> list[tuple[tuple[int, ...], bytes]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                item = json.loads(line)
                raw_ctx = item.get("context", "")
                context = (
                    tuple(raw_ctx)
                    if isinstance(raw_ctx, list)
                    else vocab.canonical_tokenize(_arg_text(raw_ctx))
                )
                out.append((context, _arg_text(item["text"])))
            except (KeyError, TypeError, ValueError, ValidationError) as exc:
                raise ValidationError(f"corpus line {lineno}: {exc}") from None
    if not out:
        raise ValidationError("corpus is empty")
    return out


def cmd_study(args) -> int:
    vocab = load_vocabulary(args.vocab)
    scorer = _build_scorer(args.scorer, vocab, jobs=args.jobs)
    inputs = _read_corpus(args.corpus, vocab)
    prefix = args.out_prefix
    records: list[dict] = []
    rows: list[dict] = []

    if args.name == "underestimation":
        _require(args.k is not None, "--k is required")
        summary_obj = analysis.underestimation_study(
            inputs, scorer, vocab, k=args.k, max_len=args.max_len, seed=args.seed,
            include_eos=args.include_eos,
        )
        records = [
            r.to_json_dict(include_timing=args.timings) for r in summary_obj.records
        ]
        rows = [
            {
                "input_id": r.input_id,
                "log_full_importance": r.reports["importance"].log_full,
                "log_full_lattice": r.reports["lattice"].log_full,
                "underestimated": int(bool(r.underestimated)),
            }
            for r in summary_obj.records
        ]
        summary = summary_obj.to_json_dict()
    elif args.name == "spearman":
        rhos = []
        for i, (context, text) in enumerate(inputs):
            rho = analysis.pq_ranking_study(
                scorer, context, vocab, text,
                num_sequences=args.num_sequences,
                seed=estimators.child_seed(args.seed, i),
                max_len=args.max_len,
            )
            rhos.append(rho)
            records.append({"input_id": str(i), "n": len(text), "spearman_rho": rho})
        rows = records
        summary = {
            "study": "spearman",
            "num_inputs": len(rhos),
            "mean_rho": sum(rhos) / len(rhos),
            "min_rho": min(rhos),
            "max_rho": max(rhos),
        }
    elif args.name == "timing":
        _require(args.k is not None, "--k is required")
        results = []
        for i, (context, text) in enumerate(inputs):
            res = analysis.timing_study(
                scorer, context, vocab, text, k=args.k, max_len=args.max_len,
                seed=estimators.child_seed(args.seed, i),
            )
            results.append(res)
            records.append({"input_id": str(i), **res.to_json_dict()})
        rows = [
            {key: rec[key] for key in ("n", "k", "score_ms", "gen_ms", "speedup")}
            for rec in records
        ]
        summary = {
            "study": "timing",
            "num_inputs": len(results),
            "min_speedup": min(r.speedup for r in results),
            "max_speedup": max(r.speedup for r in results),
        }
    else:
        raise ValidationError(f"unknown study {args.name!r}")

    with open(prefix + ".jsonl", "w", encoding="utf-8") as fh:
        analysis.write_jsonl(records + [summary], fh)
    with open(prefix + ".csv", "w", encoding="utf-8", newline="") as fh:
        analysis.write_csv(rows, fh)
    _emit(args, summary)
    return 0


def _add_common(p: argparse.ArgumentParser, scorer: bool = False) -> None:
    p.add_argument("--vocab", required=True, help="vocabulary JSON file")
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock fields in printed output")
    if scorer:
        p.add_argument("--scorer", default=None,
                       help="builtin:uniform | builtin:hash:SEED[:TEMP] | "
                            f"builtin:ngram:PATH | http(s)://URL (default ${ENDPOINT_ENV})")
        p.add_argument("--context", default=None, help="context text")
        p.add_argument("--context-ids", default=None, help="context token ids, comma-separated")
        p.add_argument("--include-eos", action="store_true")
        p.add_argument("--jobs", type=int, default=4,
                       help="max in-flight requests for HTTP scorers")


def _add_text(p: argparse.ArgumentParser) -> None:
    p.add_argument("--text", default=None, help="input text (Latin-1 bytes)")
    p.add_argument("--text-file", default=None, help="read input bytes from a file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toklat",
        description="Tokenization lattices and decoding-free marginal estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", help="build, count, dump, enumerate")
    _add_common(p)
    _add_text(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--count", action="store_true", help="print the path count (default)")
    group.add_argument("--dump", action="store_true", help="print the full arc list")
    group.add_argument("--enumerate", type=int, default=None, metavar="LIMIT",
                       help="print all paths (error above LIMIT)")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("sample", help="uniform path sampling")
    _add_common(p)
    _add_text(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--with-replacement", action="store_true")
    p.add_argument("--exclude-canonical", action="store_true")
    p.add_argument("--exclude-off-by-one", action="store_true")
    p.add_argument("--canonical-ids", default=None,
                   help="canonical tokenization (required by external-policy vocabularies)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="run one marginal estimator")
    _add_common(p, scorer=True)
    _add_text(p)
    p.add_argument("--method", required=True, choices=estimators.METHODS)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--limit", type=int, default=200_000)
    p.add_argument("--strict-k", action="store_true")
    p.add_argument("--no-exclude-canonical", action="store_true",
                   help="importance: estimate the full marginal directly")
    p.add_argument("--canonical-ids", default=None)
    p.add_argument("--output", default=None, help="also write the full report here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("choose", help="argmax estimated probability over candidates")
    _add_common(p, scorer=True)
    p.add_argument("--tasks", required=True,
                   help='JSONL: {"context": ..., "candidates": [...], "label": int?}')
    p.add_argument("--method", required=True, choices=estimators.METHODS)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--limit", type=int, default=200_000)
    p.add_argument("--strict-k", action="store_true")
    p.add_argument("--no-exclude-canonical", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_choose)

    p = sub.add_parser("study", help="comparative studies over a corpus")
    _add_common(p, scorer=True)
    p.add_argument("name", choices=("underestimation", "spearman", "timing"))
    p.add_argument("--corpus", required=True, help='JSONL: {"context": ..., "text": ...}')
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--num-sequences", type=int, default=100)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_study)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ScorerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except TokLatError as exc:  # safety net for future subclasses
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
