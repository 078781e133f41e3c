"""Command-line entry point: generate, build, eval, analyze, mix.

Configuration is layered: built-in defaults, then a TOML config file, then
command-line flags, then ``REASONFORGE_*`` environment variables. Every
command writes into an output directory guarded by a lock file, and every
output carries a manifest with config digest, corpus digest, run seed, and
tool version.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import __version__
from .analysis import (
    DEFAULT_TOP_K,
    analysis_report,
    guideline_distribution,
    guideline_stats,
    write_analysis_report,
    write_distribution_csv,
)
from .baselines import (
    METHOD_GT_ONLY,
    METHOD_LMSI,
    METHOD_STAGED,
    METHODS,
    BaselineConfig,
    build_gt_only,
    default_exemplars,
    run_corpus_baseline,
)
from .corpus import CorpusError, load_corpus, load_manifest
from .evaluation import (
    DEFAULT_EVAL_TEMPERATURE,
    EVAL_PROTOCOLS,
    PROTOCOL_COT_3SHOT,
    EvalConfig,
    evaluate,
    write_eval_outcome,
)
from .filtering import (
    CRITERION_GROUND_TRUTH,
    CRITERION_MAJORITY_VOTE,
    DEFAULT_SUBSAMPLE_P,
    FILTER_CRITERIA,
    CorpusStats,
    build_training_set,
    filter_corpus,
    read_training_records,
    record_from_dict,
    mix_datasets,
    write_stats,
    write_training_records,
)
from .pipeline import (
    MASK_A_S_P,
    GenerationSettings,
    config_digest,
    corpus_digest,
    parse_stage_mask,
    read_run,
    run_corpus,
    run_id_for,
    write_run,
)
from .prompts import exemplar_set
from .transport import (
    CachingTransport,
    FixtureMissingError,
    HttpTransport,
    ReplayTransport,
    TransportError,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_TRANSPORT = 4

ENV_PREFIX = "REASONFORGE_"
LOCK_NAME = ".reasonforge.lock"


class UsageError(Exception):
    """Bad flags, config values, or command combinations."""


@dataclass
class RunConfig:
    base_url: str = ""
    token_env: str = "REASONFORGE_API_TOKEN"
    model: str = "default"
    run_seed: int = 0
    concurrency: int = 4
    cache_dir: str = ""
    replay_dir: str = ""
    stage_mask: str = MASK_A_S_P
    method: str = METHOD_STAGED
    p: int = DEFAULT_SUBSAMPLE_P
    generation_temperature: float = 0.85
    eval_temperature: float = DEFAULT_EVAL_TEMPERATURE
    max_tokens: int = 2048
    baseline_samples: int = 32

    def validated(self) -> "RunConfig":
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        try:
            mask = parse_stage_mask(self.stage_mask)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if self.run_seed < 0:
            raise UsageError("run seed must be >= 0")
        if self.concurrency < 1:
            raise UsageError("concurrency must be >= 1")
        if self.p < 1:
            raise UsageError("p must be >= 1")
        if self.max_tokens < 1:
            raise UsageError("max-tokens must be >= 1")
        if self.baseline_samples < 1:
            raise UsageError("baseline-samples must be >= 1")
        for label, value in (
            ("generation temperature", self.generation_temperature),
            ("eval temperature", self.eval_temperature),
        ):
            if not 0 <= value <= 2:
                raise UsageError(f"{label} {value} outside [0, 2]")
        return replace(self, stage_mask=mask)


_FLAG_FIELDS = {
    "base_url": "base_url",
    "token_env": "token_env",
    "model": "model",
    "seed": "run_seed",
    "concurrency": "concurrency",
    "cache": "cache_dir",
    "replay": "replay_dir",
    "stage_mask": "stage_mask",
    "method": "method",
    "p": "p",
    "temperature": "generation_temperature",
    "eval_temperature": "eval_temperature",
    "max_tokens": "max_tokens",
    "baseline_samples": "baseline_samples",
}


def _coerce(field_type: type, raw, source: str):
    try:
        if field_type is int:
            return int(raw)
        if field_type is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{source}: cannot parse {raw!r}") from exc


def _field_types() -> dict[str, type]:
    named = {"str": str, "int": int, "float": float}
    resolved = {}
    for f in fields(RunConfig):
        t = named.get(f.type) if isinstance(f.type, str) else f.type
        resolved[f.name] = t if t in (str, int, float) else str
    return resolved


def load_config(args: argparse.Namespace) -> RunConfig:
    """Layer defaults, config file, flags, then environment (strongest last)."""
    config = RunConfig()
    types = _field_types()

    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "rb") as fh:
                table = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"invalid config {config_path}: {exc}") from exc
        for key, raw in table.items():
            if key not in types:
                raise UsageError(f"unknown config key {key!r} in {config_path}")
            value = _coerce(types[key], raw, f"config key {key!r}")
            config = replace(config, **{key: value})

    for flag, field_name in _FLAG_FIELDS.items():
        raw = getattr(args, flag, None)
        if raw is not None:
            value = _coerce(types[field_name], raw, f"flag --{flag}")
            config = replace(config, **{field_name: value})

    for field_name in types:
        raw = os.environ.get(ENV_PREFIX + field_name.upper())
        if raw is not None:
            value = _coerce(types[field_name], raw, f"env {ENV_PREFIX}{field_name.upper()}")
            config = replace(config, **{field_name: value})

    return config.validated()


def make_transport(config: RunConfig):
    if config.replay_dir:
        return ReplayTransport(config.replay_dir)
    if config.base_url:
        transport = HttpTransport(
            base_url=config.base_url,
            token_env=config.token_env,
            max_concurrency=config.concurrency,
        )
        if config.cache_dir:
            return CachingTransport(transport, config.cache_dir)
        return transport
    raise UsageError("no model endpoint: pass --replay DIR or --base-url URL")


class DirectoryLock:
    """One writer per output directory; a second concurrent run is refused."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / LOCK_NAME
        self._fd: int | None = None

    def __enter__(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise UsageError(
                f"output directory {self.out_dir} is locked by another run; "
                f"remove {self.path} if that run is dead"
            ) from None
        os.write(self._fd, str(os.getpid()).encode("ascii"))
        return self

    def __exit__(self, *exc_info):
        if self._fd is not None:
            os.close(self._fd)
        self.path.unlink(missing_ok=True)
        return False


def _normalize_choice(value: str) -> str:
    return value.replace("-", "_")


def _load_instructions(corpus_path: str):
    manifest = load_manifest(corpus_path)
    return manifest, load_corpus(manifest)


def cmd_generate(args: argparse.Namespace) -> int:
    config = load_config(args)
    manifest, corpus = _load_instructions(args.corpus)
    transport = make_transport(config)

    with DirectoryLock(args.out):
        if config.method == METHOD_STAGED:
            settings = GenerationSettings(
                model=config.model,
                temperature=config.generation_temperature,
                max_tokens=config.max_tokens,
                run_seed=config.run_seed,
                concurrency=config.concurrency,
            )
            result = run_corpus(
                corpus,
                transport=transport,
                settings=settings,
                mask=config.stage_mask,
                method=METHOD_STAGED,
                corpus_name=manifest.name,
                enable_hint_retry=not args.no_hint_retry,
            )
        else:
            try:
                exemplars, hint_exemplars = default_exemplars(config.method, manifest.name)
            except KeyError as exc:
                raise UsageError(str(exc)) from exc
            baseline = BaselineConfig(
                method=config.method,
                model=config.model,
                exemplars=exemplars,
                hint_exemplars=hint_exemplars,
                num_samples=config.baseline_samples,
                temperature=config.generation_temperature,
                max_tokens=config.max_tokens,
                run_seed=config.run_seed,
            )
            result = run_corpus_baseline(corpus, baseline, transport, corpus_name=manifest.name)
        write_run(args.out, result)

    m = result.manifest
    print(
        f"run {m['run_id']}: {len(result.traces)} traces over {m['instruction_count']} "
        f"instructions ({m['retry_traces']} from the hint pass, "
        f"{len(m['uncovered_ids'])} uncovered, {len(m['failures'])} failures)"
    )
    if m["failures"]:
        print(f"completed with {len(m['failures'])} per-instruction transport failures")
    return EXIT_OK


def _gt_only_stats(count: int) -> CorpusStats:
    # every instruction contributes its ground truth; coverage is total by definition
    return CorpusStats(
        instruction_count=count,
        covered_before_hint=count,
        covered_after_hint=count,
        coverage_before_hint=1.0 if count else 0.0,
        coverage_after_hint=1.0 if count else 0.0,
        per_guideline_correct={},
    )


def cmd_build(args: argparse.Namespace) -> int:
    config = load_config(args)
    _, corpus = _load_instructions(args.corpus)
    store = read_run(args.store)
    method = store.manifest.get("method", METHOD_STAGED)

    if args.filter is not None:
        criterion = _normalize_choice(args.filter)
        if criterion not in FILTER_CRITERIA:
            raise UsageError(f"unknown filter {args.filter!r}")
    else:
        criterion = CRITERION_MAJORITY_VOTE if method == METHOD_LMSI else CRITERION_GROUND_TRUTH

    cfg_digest = config_digest(
        {
            "criterion": criterion,
            "p": config.p,
            "seed": config.run_seed,
            "method": method,
            "source_run_id": store.manifest.get("run_id", ""),
        }
    )
    corp_digest = corpus_digest(corpus)
    run_id = run_id_for(cfg_digest, corp_digest, config.run_seed)

    with DirectoryLock(args.out):
        out = Path(args.out)
        if method == METHOD_GT_ONLY:
            records = [record_from_dict(build_gt_only(ins, run_id=run_id)) for ins in corpus]
            stats = _gt_only_stats(len(corpus))
        else:
            verdicts = filter_corpus(store.traces, corpus, criterion)
            records, stats = build_training_set(
                verdicts,
                corpus,
                p=config.p,
                seed=config.run_seed,
                method=method,
                run_id=run_id,
            )
        write_training_records(out / "training.jsonl", records)
        write_stats(out / "stats.json", stats)
        manifest = {
            "run_id": run_id,
            "source_run_id": store.manifest.get("run_id", ""),
            "method": method,
            "criterion": criterion,
            "p": config.p,
            "run_seed": config.run_seed,
            "record_count": len(records),
            "corpus_digest": corp_digest,
            "config_digest": cfg_digest,
            "tool_version": __version__,
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
        )

    print(
        f"built {len(records)} training records under {criterion} "
        f"(coverage {stats.coverage_before_hint:.3f} before hints, "
        f"{stats.coverage_after_hint:.3f} after)"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_config(args)
    manifest, corpus = _load_instructions(args.corpus)
    transport = make_transport(config)
    protocol = _normalize_choice(args.protocol)
    if protocol not in EVAL_PROTOCOLS:
        raise UsageError(f"unknown protocol {args.protocol!r}")

    exemplars = None
    if protocol == PROTOCOL_COT_3SHOT:
        name = args.exemplars or manifest.name
        try:
            exemplars = exemplar_set(name)
        except KeyError as exc:
            raise UsageError(str(exc)) from exc

    eval_config = EvalConfig(
        protocol=protocol,
        model=config.model,
        temperature=config.eval_temperature,
        max_tokens=config.max_tokens,
        run_seed=config.run_seed,
        exemplars=exemplars,
    )
    with DirectoryLock(args.out):
        outcome = evaluate(corpus, eval_config, transport, corpus_name=manifest.name)
        write_eval_outcome(args.out, outcome)

    report = outcome.report
    print(
        f"{report['protocol']} on {report['corpus_name']} with {report['model']}: "
        f"accuracy {report['accuracy']:.4f} ({report['correct']}/{report['total']}, "
        f"{report['failed_items']} failed items)"
    )
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    config = load_config(args)
    _, corpus = _load_instructions(args.corpus)
    criterion = _normalize_choice(args.criterion)
    if criterion not in FILTER_CRITERIA:
        raise UsageError(f"unknown criterion {args.criterion!r}")
    if not args.store:
        raise UsageError("pass at least one --store directory")
    if len(args.store) > 2:
        raise UsageError("at most two stores can be compared")

    stats_list = []
    sources = []
    for store_dir in args.store:
        store = read_run(store_dir)
        verdicts = filter_corpus(store.traces, corpus, criterion)
        label = store.manifest.get("model", "") or store.manifest.get("run_id", "")
        stats_list.append(guideline_stats(label, verdicts))
        sources.append(
            {
                "run_id": store.manifest.get("run_id", ""),
                "model": store.manifest.get("model", ""),
                "corpus_digest": store.manifest.get("corpus_digest", ""),
                "config_digest": store.manifest.get("config_digest", ""),
            }
        )

    distribution = None
    if args.training:
        distribution = guideline_distribution(read_training_records(args.training))

    report = analysis_report(stats_list, k=args.top_k, distribution=distribution)
    cfg_digest = config_digest(
        {
            "criterion": criterion,
            "top_k": args.top_k,
            "stores": [s["run_id"] for s in sources],
            "training": bool(args.training),
        }
    )
    report.update(
        {
            "criterion": criterion,
            "sources": sources,
            "corpus_digest": corpus_digest(corpus),
            "config_digest": cfg_digest,
            "run_seed": config.run_seed,
            "tool_version": __version__,
        }
    )

    with DirectoryLock(args.out):
        out = Path(args.out)
        write_analysis_report(out / "report.json", report)
        if distribution is not None:
            write_distribution_csv(out / "distribution.csv", distribution)

    ranked = report.get("top_discrepancy")
    if ranked:
        print(f"top guideline discrepancies: {ranked}")
    else:
        print(f"analyzed {len(stats_list)} store(s) under {criterion}")
    return EXIT_OK


def cmd_mix(args: argparse.Namespace) -> int:
    config = load_config(args)
    datasets = [(Path(path).stem, read_training_records(path)) for path in args.datasets]
    k = args.k if args.k is not None else len(datasets)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")

    seeds = [config.run_seed + offset for offset in range(args.seeds)]
    with DirectoryLock(args.out):
        out = Path(args.out)
        written = []
        for seed in seeds:
            try:
                mixed = mix_datasets(datasets, k, seed)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            path = out / f"mixed_seed{seed}.jsonl"
            write_training_records(path, mixed)
            written.append({"seed": seed, "path": path.name, "records": len(mixed)})
        cfg_digest = config_digest(
            {"k": k, "seeds": seeds, "datasets": [name for name, _ in datasets]}
        )
        inputs_digest = config_digest(
            {name: len(records) for name, records in datasets}
        )
        manifest = {
            "k": k,
            "seeds": seeds,
            "datasets": [
                {"name": name, "records": len(records)} for name, records in datasets
            ],
            "outputs": written,
            "corpus_digest": inputs_digest,
            "config_digest": cfg_digest,
            "run_seed": config.run_seed,
            "tool_version": __version__,
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
        )

    for entry in written:
        print(f"seed {entry['seed']}: {entry['records']} records -> {entry['path']}")
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser, transport: bool = False) -> None:
    parser.add_argument("--config", help="TOML config file layered over defaults")
    parser.add_argument("--model", help="model name sent to the endpoint")
    parser.add_argument("--seed", type=int, help="run seed for all derived randomness")
    parser.add_argument("--max-tokens", dest="max_tokens", type=int, help="generation length cap")
    if transport:
        parser.add_argument("--base-url", dest="base_url", help="OpenAI-compatible endpoint base URL")
        parser.add_argument("--token-env", dest="token_env", help="env var holding the bearer token")
        parser.add_argument("--replay", help="replay fixtures from this directory, no network")
        parser.add_argument("--cache", help="write-through response cache directory")
        parser.add_argument("--concurrency", type=int, help="max in-flight requests")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reasonforge",
        description="Self-synthesized reasoning-path training data and evaluation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="run reasoning-path generation over a corpus")
    p_gen.add_argument("--corpus", required=True, help="corpus manifest TOML")
    p_gen.add_argument("--out", required=True, help="output directory for the trace store")
    p_gen.add_argument("--method", help="staged, lmsi, lmsi_gt, star, or gt_only")
    p_gen.add_argument("--stage-mask", dest="stage_mask", help="A_S_P, A_P, S_P, or A_S_hint_P")
    p_gen.add_argument("--temperature", help="sampling temperature for generation")
    p_gen.add_argument(
        "--baseline-samples", dest="baseline_samples", type=int, help="samples per instruction for baseline methods"
    )
    p_gen.add_argument(
        "--no-hint-retry", action="store_true", help="skip the hint pass for uncovered instructions"
    )
    _add_config_flags(p_gen, transport=True)
    p_gen.set_defaults(handler=cmd_generate)

    p_build = sub.add_parser("build", help="filter a trace store into training data")
    p_build.add_argument("--store", required=True, help="trace store directory from generate")
    p_build.add_argument("--corpus", required=True, help="corpus manifest TOML")
    p_build.add_argument("--out", required=True, help="output directory for the dataset")
    p_build.add_argument("--filter", help="ground-truth or majority-vote")
    p_build.add_argument("-p", dest="p", type=int, help="max correct paths kept per instruction")
    _add_config_flags(p_build)
    p_build.set_defaults(handler=cmd_build)

    p_eval = sub.add_parser("eval", help="measure accuracy on a test corpus")
    p_eval.add_argument("--corpus", required=True, help="corpus manifest TOML")
    p_eval.add_argument("--out", required=True, help="output directory for the report")
    p_eval.add_argument("--protocol", required=True, help="cot, cot-3shot, or self-consistency")
    p_eval.add_argument("--exemplars", help="exemplar set name for cot-3shot")
    p_eval.add_argument(
        "--eval-temperature", dest="eval_temperature", help="sampling temperature for evaluation"
    )
    _add_config_flags(p_eval, transport=True)
    p_eval.set_defaults(handler=cmd_eval)

    p_an = sub.add_parser("analyze", help="guideline success rates, z-scores, discrepancies")
    p_an.add_argument("--store", action="append", help="trace store directory (repeat for two)")
    p_an.add_argument("--corpus", required=True, help="corpus manifest TOML")
    p_an.add_argument("--out", required=True, help="output directory for the report")
    p_an.add_argument("--criterion", default="ground-truth", help="ground-truth or majority-vote")
    p_an.add_argument("--training", help="training JSONL for the guideline distribution table")
    p_an.add_argument("--top-k", dest="top_k", type=int, default=DEFAULT_TOP_K)
    _add_config_flags(p_an)
    p_an.set_defaults(handler=cmd_analyze)

    p_mix = sub.add_parser("mix", help="combine training sets into fixed-size mixtures")
    p_mix.add_argument("datasets", nargs="+", help="training JSONL files to mix")
    p_mix.add_argument("--out", required=True, help="output directory for mixtures")
    p_mix.add_argument("--k", type=int, help="mixture arity (defaults to dataset count)")
    p_mix.add_argument("--seeds", type=int, default=1, help="number of mixtures to emit")
    _add_config_flags(p_mix)
    p_mix.set_defaults(handler=cmd_mix)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code in (None, 0):
            return EXIT_OK
        return EXIT_USAGE

    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FixtureMissingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
