"""Command-line entry point: ``chatter-atlas <subcommand>``.

Exit codes: 0 success, 2 input/parse error, 3 embedding backend failure,
4 affinity propagation did not converge (artifacts still written),
5 invalid merge spec.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import ingest
from .cluster import APParams, Clustering, affinity_propagation, rescore
from .embed import (
    EmbeddingCache,
    LocalEmbedderConfig,
    LocalHashEmbedder,
    RemoteEmbedder,
    RemoteEmbedderConfig,
    embed_documents,
    read_embeddings,
    write_embeddings,
)
from .errors import BackendError, ChatterAtlasError, ConfigurationError, InputError, MergeSpecError
from .profile import DEFAULT_MIN_MESSAGES, ChatterProfile, build_profiles, filter_by_activity, read_profiles, write_profiles
from .refine import AutoMergeParams, MergeSpec, apply_merge_spec, auto_merge, prune_singletons
from .report import cluster_report, render
from .similarity import build_affinity_matrix
from .synthetic import planted_corpus

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger("chatter_atlas")

EXIT_OK, EXIT_INPUT, EXIT_BACKEND, EXIT_NOT_CONVERGED, EXIT_MERGE_SPEC = 0, 2, 3, 4, 5


@dataclass
class PipelineConfig:
    input_path: str | None = None
    input_format: str | None = None
    min_messages: int = DEFAULT_MIN_MESSAGES
    exclude_users: list[str] = field(default_factory=list)
    buckets: str = "1-10,11-20,21-50,51-100,101+"
    embedder: str = "local"
    local: LocalEmbedderConfig = field(default_factory=LocalEmbedderConfig)
    remote: RemoteEmbedderConfig | None = None
    cache_dir: str | None = None
    ap: APParams = field(default_factory=APParams)
    preference: float | None = None
    prune_singletons: bool = True
    auto_merge: bool = False
    auto_merge_depth: int = 3
    merge_spec_path: str | None = None
    output_path: str = "chatter-atlas-out"
    output_format: str = "markdown"
    k_terms: int = 8
    k_samples: int = 5

    @classmethod
    def from_sources(cls, file_values: dict[str, Any], flags: dict[str, Any]) -> "PipelineConfig":
        """Merge config-file values and command-line flags (flags win)."""
        values = {**file_values, **{k: v for k, v in flags.items() if v is not None}}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known - {"remote_" + f.name for f in dataclasses.fields(RemoteEmbedderConfig)}
        unknown -= {"damping", "max_iter", "convergence_iter", "dim", "ngram"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")

        local = dict(file_values.get("local", {}))
        ap = dict(file_values.get("ap", {}))
        remote = dict(file_values.get("remote", {}))
        for key in ("dim", "ngram"):
            if key in values:
                local[key] = values.pop(key)
        for key in ("damping", "max_iter", "convergence_iter"):
            if key in values:
                ap[key] = values.pop(key)
        if "max_iter" in ap and "convergence_iter" not in ap:
            ap["convergence_iter"] = min(APParams.convergence_iter, ap["max_iter"])
        for key in list(values):
            if key.startswith("remote_"):
                remote[key[len("remote_"):]] = values.pop(key)
        values.pop("local", None), values.pop("ap", None), values.pop("remote", None)
        try:
            cfg = cls(
                **values,
                local=LocalEmbedderConfig(**local),
                ap=APParams(**ap),
                remote=RemoteEmbedderConfig(**remote) if remote else None,
            )
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None
        if cfg.embedder not in ("local", "remote"):
            raise ConfigurationError(f"embedder must be 'local' or 'remote', got {cfg.embedder!r}")
        if cfg.embedder == "remote" and cfg.remote is None:
            raise ConfigurationError("remote embedder needs --remote-endpoint and --remote-model-id")
        if cfg.output_format not in ("markdown", "json"):
            raise ConfigurationError(f"unknown output format {cfg.output_format!r}")
        if cfg.min_messages < 1:
            raise ConfigurationError("min_messages must be >= 1")
        return cfg

    def backend(self):
        if self.embedder == "remote":
            return RemoteEmbedder(self.remote)
        return LocalHashEmbedder(self.local)

    def auto_merge_params(self) -> AutoMergeParams:
        return AutoMergeParams(max_depth=self.auto_merge_depth, ap=self.ap)


def load_config_file(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _profiles_stage(cfg: PipelineConfig, messages) -> tuple[list[ChatterProfile], dict[str, Any]]:
    all_profiles = build_profiles(messages)
    kept = filter_by_activity(all_profiles, cfg.min_messages)
    kept_keys = {p.user_key for p in kept}
    low = [p.user_key for p in all_profiles if p.user_key not in kept_keys]
    drop = {u.lower() for u in cfg.exclude_users}
    excluded = [p.user_key for p in kept if p.user_key in drop]
    kept = [p for p in kept if p.user_key not in drop]
    meta = {"min_messages": cfg.min_messages, "excluded_low_activity": low, "excluded_users": excluded}
    return kept, meta


def _embed_stage(cfg: PipelineConfig, profiles: Sequence[ChatterProfile]) -> tuple[np.ndarray, Any]:
    backend = cfg.backend()
    cache = EmbeddingCache(cfg.cache_dir) if cfg.cache_dir else None
    vectors = embed_documents(backend, [p.document for p in profiles], cache)
    return vectors, backend


def _cluster_stage(cfg: PipelineConfig, vectors: np.ndarray) -> tuple[Clustering, np.ndarray, float]:
    s = build_affinity_matrix(vectors, cfg.preference)
    return affinity_propagation(s, cfg.ap), s.values, s.preference


def _refine(cfg: PipelineConfig, c: Clustering, vectors, s: np.ndarray, spec: MergeSpec | None) -> Clustering:
    if cfg.prune_singletons:
        c = prune_singletons(c)
    if spec is not None:
        c = apply_merge_spec(c, spec)
    if cfg.auto_merge:
        if len(c.clusters) >= 2:
            c = auto_merge(c, vectors, cfg.auto_merge_params())
        else:
            log.warning("auto-merge skipped: fewer than 2 clusters")
    return rescore(c, s)


def _clustering_doc(c: Clustering, meta: dict[str, Any]) -> str:
    doc = c.to_dict()
    doc["meta"] = meta
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _report_text(cfg, c, profiles, vectors, messages, notes) -> str:
    summary = ingest.dataset_summary(messages)
    hist = ingest.engagement_histogram(messages, ingest.parse_bucket_spec(cfg.buckets))
    reports = cluster_report(c, profiles, vectors, cfg.k_terms, cfg.k_samples)
    return render(reports, summary, hist, cfg.output_format, notes)


def _truncation_notes(backend) -> list[str]:
    n = getattr(backend, "truncated", 0)
    if not n:
        return []
    return [f"{n} document(s) truncated to {backend.config.max_chars} characters before embedding"]


def run_pipeline(cfg: PipelineConfig) -> int:
    """Run ingest through report, writing into ``cfg.output_path``.

    Returns the process exit code.
    """
    if cfg.input_path is None:
        raise ConfigurationError("no input log given")
    spec = MergeSpec.load(cfg.merge_spec_path) if cfg.merge_spec_path else None
    out = Path(cfg.output_path)
    parsed = ingest.read_chat_log(cfg.input_path, cfg.input_format)
    messages = parsed.messages
    profiles, meta = _profiles_stage(cfg, messages)
    if not profiles:
        raise InputError(f"no chatters above threshold (min_messages={cfg.min_messages})")
    if len(profiles) < 2:
        raise InputError("clustering needs at least 2 chatters above threshold")
    if cfg.cache_dir is None:
        cfg = dataclasses.replace(cfg, cache_dir=str(out / "cache"))

    vectors, backend = _embed_stage(cfg, profiles)
    c, s, pref = _cluster_stage(cfg, vectors)
    meta.update(
        users=[p.user_key for p in profiles],
        embedder=backend.model_id,
        preference=pref,
        malformed_records=parsed.malformed,
        truncated_documents=getattr(backend, "truncated", 0),
    )
    if c.converged:
        c = _refine(cfg, c, vectors, s, spec)
    else:
        log.warning("writing all-singleton fallback clustering")

    suffix = "md" if cfg.output_format == "markdown" else "json"
    _write(out / "clustering.json", _clustering_doc(c, meta))
    _write(out / f"report.{suffix}", _report_text(cfg, c, profiles, vectors, messages, _truncation_notes(backend)))
    print(f"clusters={len(c.clusters)} converged={str(c.converged).lower()} chatters={len(profiles)}")
    return EXIT_OK if c.converged else EXIT_NOT_CONVERGED


# -- subcommands ------------------------------------------------------------


def cmd_stats(cfg: PipelineConfig, args) -> int:
    messages = ingest.exclude_users(ingest.read_chat_log(cfg.input_path, cfg.input_format), cfg.exclude_users)
    summary = ingest.dataset_summary(messages)
    hist = ingest.engagement_histogram(messages, ingest.parse_bucket_spec(cfg.buckets))
    text = render([], summary, hist, cfg.output_format)
    _emit(args.output, text)
    return EXIT_OK


def cmd_profiles(cfg: PipelineConfig, args) -> int:
    profiles, meta = _profiles_stage(cfg, ingest.read_chat_log(cfg.input_path, cfg.input_format).messages)
    log.info("%d chatters kept, %d below threshold", len(profiles), len(meta["excluded_low_activity"]))
    with _open_out(args.output) as fh:
        write_profiles(profiles, fh)
    return EXIT_OK


def cmd_embed(cfg: PipelineConfig, args) -> int:
    with open(args.profiles, encoding="utf-8") as fh:
        profiles = read_profiles(fh)
    if not profiles:
        raise InputError("profile file is empty")
    vectors, backend = _embed_stage(cfg, profiles)
    with _open_out(args.output) as fh:
        write_embeddings([p.user_display for p in profiles], vectors, fh, backend.model_id)
    return EXIT_OK


def _read_vectors(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        return read_embeddings(fh)


def cmd_cluster(cfg: PipelineConfig, args) -> int:
    users, vectors = _read_vectors(args.embeddings)
    if len(users) < 2:
        raise InputError("clustering needs at least 2 chatters")
    c, s, pref = _cluster_stage(cfg, vectors)
    if c.converged and cfg.prune_singletons:
        c = rescore(prune_singletons(c), s)
    meta = {"users": [u.lower() for u in users], "preference": pref}
    _emit(args.output, _clustering_doc(c, meta))
    print(f"clusters={len(c.clusters)} converged={str(c.converged).lower()}", file=sys.stderr)
    return EXIT_OK if c.converged else EXIT_NOT_CONVERGED


def _read_clustering(path: str) -> tuple[Clustering, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    return Clustering.from_dict(doc), doc.get("meta", {})


def cmd_merge(cfg: PipelineConfig, args) -> int:
    c, meta = _read_clustering(args.clustering)
    _, vectors = _read_vectors(args.embeddings)
    if len(vectors) != c.n_points:
        raise InputError(f"{len(vectors)} embeddings for a clustering of {c.n_points} points")
    s = build_affinity_matrix(vectors, meta.get("preference", cfg.preference)).values
    if cfg.merge_spec_path:
        c = apply_merge_spec(c, MergeSpec.load(cfg.merge_spec_path))
    if cfg.auto_merge:
        if len(c.clusters) >= 2:
            c = auto_merge(c, vectors, cfg.auto_merge_params())
        else:
            log.warning("auto-merge skipped: fewer than 2 clusters")
    _emit(args.output, _clustering_doc(rescore(c, s), meta))
    return EXIT_OK


def cmd_report(cfg: PipelineConfig, args) -> int:
    c, _ = _read_clustering(args.clustering)
    messages = ingest.read_chat_log(cfg.input_path, cfg.input_format).messages
    with open(args.profiles, encoding="utf-8") as fh:
        profiles = read_profiles(fh)
    _, vectors = _read_vectors(args.embeddings)
    _emit(args.output, _report_text(cfg, c, profiles, vectors, messages, []))
    return EXIT_OK


def cmd_run(cfg: PipelineConfig, args) -> int:
    return run_pipeline(cfg)


def cmd_planted(cfg: PipelineConfig, args) -> int:
    messages, labels = planted_corpus(args.seed, low_activity_users=args.low_activity)
    with _open_out(args.output) as fh:
        ingest.write_jsonl(messages, fh)
    if args.labels:
        _write(Path(args.labels), json.dumps(labels, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        return False


def _open_out(path: str | None):
    if path is None or path == "-":
        return _Stdout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8")


def _emit(path: str | None, text: str) -> None:
    with _open_out(path) as fh:
        fh.write(text)


# -- argument parsing -------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with PipelineConfig fields")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_input(p: argparse.ArgumentParser, positional: bool = True) -> None:
    if positional:
        p.add_argument("input_path", nargs="?", help="chat log (JSONL or CSV)")
    else:
        p.add_argument("--input", dest="input_path", required=True, help="chat log (JSONL or CSV)")
    p.add_argument("--format", dest="input_format", choices=ingest.FORMATS)
    p.add_argument("--exclude-users", type=lambda s: [u for u in s.split(",") if u], default=None)
    p.add_argument("--buckets", help="histogram buckets, e.g. 1-10,11-20,21+")


def _add_threshold(p):
    p.add_argument("--min-messages", type=int)


def _add_embedder(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embedder", choices=("local", "remote"))
    p.add_argument("--dim", type=int)
    p.add_argument("--ngram", type=int)
    p.add_argument("--remote-endpoint")
    p.add_argument("--remote-model-id")
    p.add_argument("--remote-task")
    p.add_argument("--remote-batch-size", type=int)
    p.add_argument("--remote-max-chars", type=int)
    p.add_argument("--remote-retries", type=int)
    p.add_argument("--remote-backoff-base", type=float)
    p.add_argument("--remote-max-in-flight", type=int)
    p.add_argument("--cache-dir")


def _add_ap(p: argparse.ArgumentParser) -> None:
    p.add_argument("--damping", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--convergence-iter", type=int)
    p.add_argument("--preference", type=float, help="diagonal preference (default: median similarity)")


def _add_refine(p: argparse.ArgumentParser) -> None:
    p.add_argument("--merge-spec", dest="merge_spec_path")
    p.add_argument("--auto-merge", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--auto-merge-depth", type=int)


def _add_report(p):
    p.add_argument("--output-format", choices=("markdown", "json"))
    p.add_argument("--k-terms", type=int)
    p.add_argument("--k-samples", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chatter-atlas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset summary and engagement histogram")
    _add_common(p), _add_input(p), _add_report(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("profiles", help="per-chatter documents as JSONL")
    _add_common(p), _add_input(p), _add_threshold(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("embed", help="embed a profiles JSONL file")
    _add_common(p), _add_embedder(p)
    p.add_argument("profiles")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="affinity propagation over embeddings")
    _add_common(p), _add_ap(p)
    p.add_argument("embeddings")
    p.add_argument("--prune-singletons", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("merge", help="apply a merge spec and/or auto-merge")
    _add_common(p), _add_refine(p)
    p.add_argument("clustering")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--damping", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--convergence-iter", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("report", help="render cluster evidence")
    _add_common(p), _add_input(p, positional=False), _add_report(p)
    p.add_argument("clustering")
    p.add_argument("--profiles", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="full pipeline")
    _add_common(p), _add_input(p), _add_threshold(p), _add_embedder(p), _add_ap(p), _add_refine(p), _add_report(p)
    p.add_argument("--prune-singletons", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("-o", "--output", dest="output_path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("planted", help="write a synthetic planted-partition chat log")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--low-activity", type=int, default=5)
    p.add_argument("--labels", help="also write user -> archetype JSON here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_planted, config=None)
    return parser


_NOT_CONFIG = {"command", "func", "config", "verbose", "output", "profiles", "embeddings", "clustering",
               "seed", "low_activity", "labels"}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    try:
        cfg = PipelineConfig.from_sources(load_config_file(args.config), flags)
        if args.command in ("stats", "profiles", "run") and cfg.input_path is None:
            raise ConfigurationError("no input log given")
        return args.func(cfg, args)
    except MergeSpecError as exc:
        log.error("%s", exc)
        return EXIT_MERGE_SPEC
    except BackendError as exc:
        log.error("embedding backend failed: %s", exc)
        return EXIT_BACKEND
    except (ChatterAtlasError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
