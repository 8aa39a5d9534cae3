"""Command-line entry point.

Subcommands: generate | build | classify | tta | analyze | synth |
dump-persistence | export-texts. Exit codes: 0 success, 1 usage error,
2 data error. Options may come from a JSON config file (--config);
explicit flags win over the file, unknown config keys are rejected.
Reports embed the fully resolved configuration and a content hash of
their inputs, and contain no timestamps, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, classifier, synth, textgen, topology, tta
from .embeddings import load_embeddings
from .errors import MissingEmbeddingsError, SynspaceError
from .metrics import MetricConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


_METRIC_NAMES = {
    "set": "set",
    "center": "center",
    "subspace": "subspace",
    "local-center": "local_center",
}
_EPSILON_MODES = {
    "fixed": "fixed-threshold",
    "auto": "auto-persistence",
    "none": "unfiltered",
}


def _load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    return doc


def _resolve(args, spec: dict[str, object]) -> dict:
    """Merge defaults, config file values, and explicit flags (flags win)."""
    config = {}
    if getattr(args, "config", None):
        config = _load_config_file(args.config)
        unknown = set(config) - set(spec)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for key, default in spec.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = default
    return resolved


def _require_paths(resolved: dict, keys) -> None:
    for key in keys:
        if resolved[key] is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")


def _metric_config(resolved: dict) -> MetricConfig:
    kind = _METRIC_NAMES.get(resolved["metric"])
    if kind is None:
        raise UsageError(f"unknown metric {resolved['metric']!r}")
    return MetricConfig(
        kind=kind,
        neighborhood_n=int(resolved["local_n"]),
        subspace_dims=int(resolved["subspace_d"]),
        renormalize_mean=bool(resolved["renormalize_mean"]),
    )


def _topology_config(resolved: dict) -> topology.TopologyConfig:
    mode = _EPSILON_MODES.get(resolved["epsilon_mode"])
    if mode is None:
        raise UsageError(f"unknown epsilon mode {resolved['epsilon_mode']!r}")
    epsilon = float(resolved["epsilon"])
    if mode == "fixed-threshold" and not (0.0 <= epsilon <= 1.0):
        raise UsageError(f"--epsilon must lie in [0, 1], got {epsilon}")
    return topology.TopologyConfig(mode=mode, epsilon=epsilon)


def _write_json(path, doc: dict) -> None:
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )


# --- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = {
        "classes": None,
        "dataset": None,
        "out": None,
        "llm_endpoint": None,
        "llm_key_env": None,
        "llm_cache": None,
        "llm_temperature": None,
        "max_synonyms": 10,
        "max_descriptors": 30,
    }
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("classes", "dataset", "out", "llm_cache"))
    class_path = Path(resolved["classes"])
    raw = class_path.read_text(encoding="utf-8")
    if class_path.suffix == ".json":
        names = json.loads(raw)
    else:
        names = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    client = textgen.LlmClient(
        resolved["llm_endpoint"], resolved["llm_cache"], key_env=resolved["llm_key_env"]
    )
    params = {}
    if resolved["llm_temperature"] is not None:
        params["temperature"] = float(resolved["llm_temperature"])
    lexicons = {}
    for class_id, name in enumerate(names):
        lexicons[class_id] = textgen.fetch_lexicon(
            client,
            name,
            resolved["dataset"],
            max_synonyms=int(resolved["max_synonyms"]),
            max_descriptors=int(resolved["max_descriptors"]),
            params=params,
        )
    textgen.save_lexicon_cache(lexicons, resolved["out"])
    print(f"wrote {len(lexicons)} lexicons to {resolved['out']}")
    return 0


def _build_spec():
    return {
        "spaces": None,
        "lexicon": None,
        "dataset": None,
        "catalog": None,
        "epsilon_mode": "fixed",
        "epsilon": 0.9,
        "metric": "local-center",
        "local_n": 20,
        "subspace_d": 8,
        "renormalize_mean": False,
        "dump_persistence": None,
    }


def _load_class_specs(resolved: dict):
    spaces_path = Path(resolved["spaces"])
    doc = json.loads(spaces_path.read_text(encoding="utf-8"))
    dataset = resolved["dataset"] or doc.get("dataset", "")
    lexicons_by_name = {}
    if resolved["lexicon"]:
        lexicons = textgen.load_lexicon_cache(resolved["lexicon"], dataset_name=dataset)
        lexicons_by_name = {lex.class_name: lex for lex in lexicons.values()}
    specs = []
    input_files = [spaces_path]
    for entry in doc["classes"]:
        name = entry["name"]
        path = spaces_path.parent / entry["embeddings"]
        if not path.is_file():
            raise MissingEmbeddingsError(name, f"{path} not found")
        embeddings = load_embeddings(path)
        input_files.append(path)
        texts = None
        if name in lexicons_by_name:
            texts = textgen.combine(lexicons_by_name[name]).texts
        specs.append(classifier.ClassSpec(name=name, embeddings=embeddings, texts=texts))
    if resolved["lexicon"]:
        input_files.append(Path(resolved["lexicon"]))
    return specs, input_files


def cmd_build(args) -> int:
    resolved = _resolve(args, _build_spec())
    _require_paths(resolved, ("spaces", "catalog"))
    metric = _metric_config(resolved)
    topo = _topology_config(resolved)
    specs, input_files = _load_class_specs(resolved)
    catalog = classifier.build_catalog(
        specs, metric, topo, input_hash=classifier.hash_files(input_files)
    )
    classifier.save_catalog(catalog, resolved["catalog"])
    if resolved["dump_persistence"]:
        for entry in catalog.classes:
            graph = topology.build_similarity_graph(entry.space)
            record = topology.persistence_0d(graph)
            topology.dump_persistence(
                record, Path(resolved["dump_persistence"]) / entry.name
            )
    sizes = ", ".join(
        f"{e.name}:{len(e.core.member_indices)}/{e.space.count}" for e in catalog.classes
    )
    print(f"catalog written to {resolved['catalog']} (core sizes {sizes})")
    return 0


def cmd_classify(args) -> int:
    spec = {"catalog": None, "queries": None, "report": None}
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("catalog", "queries", "report"))
    catalog = classifier.load_catalog(resolved["catalog"])
    queries = load_embeddings(resolved["queries"])
    result = classifier.evaluate(queries, catalog)
    report_dir = Path(resolved["report"])
    report_dir.mkdir(parents=True, exist_ok=True)
    input_hash = classifier.hash_files(
        [Path(resolved["catalog"]) / classifier.CATALOG_FILE, resolved["queries"]]
    )
    _write_json(
        report_dir / "report.json",
        {
            "config": {k: str(v) if isinstance(v, Path) else v for k, v in resolved.items()},
            "catalog_metric": catalog.metric.kind,
            "catalog_topology": catalog.topology.mode,
            "input_hash": input_hash,
            "results": result.as_dict(),
        },
    )
    with open(report_dir / "per_class.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "name", "count", "correct", "accuracy"])
        for entry in catalog.classes:
            count = int(result.confusion[entry.class_id].sum())
            correct = int(result.confusion[entry.class_id, entry.class_id])
            acc = result.per_class_accuracy[entry.class_id]
            writer.writerow(
                [entry.class_id, entry.name, count, correct, "" if acc is None else repr(acc)]
            )
    print(f"top-1 accuracy {result.top1_accuracy:.4f} over {result.total} queries")
    return 0


def cmd_tta(args) -> int:
    spec = {
        "catalog": None,
        "episodes": None,
        "report": None,
        "tau": 100.0,
        "rho": 0.1,
        "lr": 5e-4,
    }
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("catalog", "episodes", "report"))
    catalog = classifier.load_catalog(resolved["catalog"])
    config = tta.TtaConfig(
        temperature=float(resolved["tau"]),
        selection_ratio=float(resolved["rho"]),
        learning_rate=float(resolved["lr"]),
    )
    ep_dir = Path(resolved["episodes"])
    manifest_path = ep_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    records = []
    correct_before = correct_after = labeled = 0
    input_files = [Path(resolved["catalog"]) / classifier.CATALOG_FILE, manifest_path]
    for entry in manifest["episodes"]:
        views = load_embeddings(ep_dir / entry["file"]).normalized()
        input_files.append(ep_dir / entry["file"])
        outcome = tta.run_episode(views, catalog, config)
        label = entry.get("label")
        if label is not None:
            labeled += 1
            correct_before += int(outcome.prediction_before.class_id == label)
            correct_after += int(outcome.prediction_after.class_id == label)
        records.append(
            {
                "file": entry["file"],
                "label": label,
                "prediction_before": outcome.prediction_before.class_id,
                "prediction_after": outcome.prediction_after.class_id,
                "selected": list(outcome.selected),
                "entropy_trace": list(outcome.entropy_trace),
            }
        )
    report_dir = Path(resolved["report"])
    report_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "config": {k: str(v) if isinstance(v, Path) else v for k, v in resolved.items()},
        "input_hash": classifier.hash_files(input_files),
        "episodes": records,
        "labeled_episodes": labeled,
        "accuracy_before": None if labeled == 0 else correct_before / labeled,
        "accuracy_after": None if labeled == 0 else correct_after / labeled,
    }
    _write_json(report_dir / "report.json", doc)
    if labeled:
        print(
            f"adapted accuracy {correct_after / labeled:.4f} "
            f"(unadapted {correct_before / labeled:.4f}) over {labeled} episodes"
        )
    else:
        print(f"processed {len(records)} unlabeled episodes")
    return 0


def _load_groups(manifest_path):
    doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    groups = []
    for item in doc:
        if isinstance(item, dict):
            gid, path = item["id"], item["path"]
        else:
            gid, path = item[0], item[1]
        groups.append((gid, load_embeddings(Path(manifest_path).parent / path)))
    return groups


def cmd_analyze(args) -> int:
    spec = {"groups": None, "groups_b": None, "out": None}
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("groups", "out"))
    groups_a = _load_groups(resolved["groups"])
    if resolved["groups_b"]:
        report_a, report_b = analysis.compare_populations(
            groups_a, _load_groups(resolved["groups_b"])
        )
        analysis.write_report_csv(resolved["out"], {"a": report_a, "b": report_b})
        print(
            f"mean compactness a={report_a.mean_compactness:.4f} "
            f"b={report_b.mean_compactness:.4f}"
        )
    else:
        report = analysis.population_report(groups_a)
        analysis.write_report_csv(resolved["out"], {"a": report})
        print(f"mean compactness {report.mean_compactness:.4f}")
    return 0


def cmd_synth(args) -> int:
    spec = {
        "out": None,
        "seed": 0,
        "classes": 5,
        "synonyms": 40,
        "outlier_rate": 0.1,
        "queries": 500,
        "dim": 64,
        "subclusters": 3,
        "episodes": 40,
        "views": 16,
    }
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("out",))
    if not (0.0 <= float(resolved["outlier_rate"]) < 1.0):
        raise UsageError(f"--outlier-rate must lie in [0, 1), got {resolved['outlier_rate']}")
    manifest = synth.generate_benchmark(
        resolved["out"],
        seed=int(resolved["seed"]),
        num_classes=int(resolved["classes"]),
        synonyms_per_class=int(resolved["synonyms"]),
        outlier_rate=float(resolved["outlier_rate"]),
        num_queries=int(resolved["queries"]),
        dim=int(resolved["dim"]),
        subclusters=int(resolved["subclusters"]),
        num_episodes=int(resolved["episodes"]),
        views_per_episode=int(resolved["views"]),
    )
    print(
        f"benchmark written to {resolved['out']} "
        f"({manifest['num_classes']} classes, {manifest['num_queries']} queries)"
    )
    return 0


def cmd_dump_persistence(args) -> int:
    spec = {"embeddings": None, "out": None}
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("embeddings", "out"))
    es = load_embeddings(resolved["embeddings"]).normalized()
    record = topology.persistence_0d(topology.build_similarity_graph(es))
    topology.dump_persistence(record, resolved["out"])
    print(f"wrote {len(record.merges)} merges to {resolved['out']}")
    return 0


def cmd_export_texts(args) -> int:
    spec = {"lexicon": None, "dataset": None, "out": None}
    resolved = _resolve(args, spec)
    _require_paths(resolved, ("lexicon", "out"))
    lexicons = textgen.load_lexicon_cache(
        resolved["lexicon"], dataset_name=resolved["dataset"] or ""
    )
    out = Path(resolved["out"])
    (out / "texts").mkdir(parents=True, exist_ok=True)
    classes = []
    for class_id in sorted(lexicons):
        lex = lexicons[class_id]
        texts = textgen.combine(lex, class_id=class_id).texts
        texts_rel = f"texts/class_{class_id:04d}.txt"
        (out / texts_rel).write_text("\n".join(texts) + "\n", encoding="utf-8")
        classes.append(
            {
                "name": lex.class_name,
                "texts_file": texts_rel,
                "embeddings": f"embeddings/class_{class_id:04d}.s3em",
            }
        )
    _write_json(
        out / "spaces.json",
        {"dataset": resolved["dataset"] or "", "classes": classes},
    )
    print(f"exported texts for {len(classes)} classes to {out}")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="synspace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, configure):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file with option defaults")
        configure(p)
        p.set_defaults(func=func)
        return p

    def conf_generate(p):
        p.add_argument("--classes", help="JSON array or text file of class names")
        p.add_argument("--dataset")
        p.add_argument("--out")
        p.add_argument("--llm-endpoint", dest="llm_endpoint")
        p.add_argument("--llm-key-env", dest="llm_key_env")
        p.add_argument("--llm-cache", dest="llm_cache")
        p.add_argument("--llm-temperature", dest="llm_temperature", type=float)
        p.add_argument("--max-synonyms", dest="max_synonyms", type=int)
        p.add_argument("--max-descriptors", dest="max_descriptors", type=int)

    def conf_build(p):
        p.add_argument("--spaces", help="manifest listing class names and s3em files")
        p.add_argument("--lexicon")
        p.add_argument("--dataset")
        p.add_argument("--catalog", help="output catalog directory")
        p.add_argument("--epsilon-mode", dest="epsilon_mode", choices=sorted(_EPSILON_MODES))
        p.add_argument("--epsilon", type=float)
        p.add_argument("--metric", choices=sorted(_METRIC_NAMES))
        p.add_argument("--local-n", dest="local_n", type=int)
        p.add_argument("--subspace-d", dest="subspace_d", type=int)
        p.add_argument(
            "--renormalize-mean", dest="renormalize_mean", action="store_const", const=True
        )
        p.add_argument("--dump-persistence", dest="dump_persistence")

    def conf_classify(p):
        p.add_argument("--catalog")
        p.add_argument("--queries")
        p.add_argument("--report")

    def conf_tta(p):
        p.add_argument("--catalog")
        p.add_argument("--episodes")
        p.add_argument("--report")
        p.add_argument("--tau", type=float)
        p.add_argument("--rho", type=float)
        p.add_argument("--lr", type=float)

    def conf_analyze(p):
        p.add_argument("--groups")
        p.add_argument("--groups-b", dest="groups_b")
        p.add_argument("--out")

    def conf_synth(p):
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--classes", type=int)
        p.add_argument("--synonyms", type=int)
        p.add_argument("--outlier-rate", dest="outlier_rate", type=float)
        p.add_argument("--queries", type=int)
        p.add_argument("--dim", type=int)
        p.add_argument("--subclusters", type=int)
        p.add_argument("--episodes", type=int)
        p.add_argument("--views", type=int)

    def conf_dump(p):
        p.add_argument("--embeddings")
        p.add_argument("--out")

    def conf_export(p):
        p.add_argument("--lexicon")
        p.add_argument("--dataset")
        p.add_argument("--out")

    add("generate", cmd_generate, conf_generate)
    add("build", cmd_build, conf_build)
    add("classify", cmd_classify, conf_classify)
    add("tta", cmd_tta, conf_tta)
    add("analyze", cmd_analyze, conf_analyze)
    add("synth", cmd_synth, conf_synth)
    add("dump-persistence", cmd_dump_persistence, conf_dump)
    add("export-texts", cmd_export_texts, conf_export)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SynspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
