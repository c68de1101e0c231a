"""Command-line pipeline: analyze -> prompt -> ask -> evaluate -> render.

Every command reads one JSON run manifest::

    {
      "inputs": [{"path": "algo_1.tsv", "name": "algo_1"}, ...],
      "sense": "minimize",
      "space": "continuous",
      "partition": {"cluster_size_pct": 5, "volume_size_pct": 5,
                    "measure": "Euclidean", "cluster_number": 40},
      "llm": {"endpoint_url": "https://...", "model_id": "..."},
      "output_dir": "out"
    }

Relative paths are resolved against the manifest's directory. ``llm`` may
also be a list of configurations (one scorecard per model in ``evaluate``).

Exit codes: 0 ok, 1 internal error, 2 bad input, 3 constraint violation,
4 endpoint failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, features, partitioning, prompt_engine, reporting, stn_graph, trajectory_io
from .llm_client import ChatClient, LLMConfig, LLMError
from .stubs import stub_transport

log = logging.getLogger("stn_analyst")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_CONSTRAINT, EXIT_ENDPOINT = 0, 1, 2, 3, 4


class InputError(ValueError):
    pass


@dataclass
class Manifest:
    inputs: list[tuple[Path, str]]
    sense: str
    space: str | None
    partition: partitioning.PartitionConfig | None
    llm: list[LLMConfig]
    output_dir: Path

    @classmethod
    def load(cls, path: str | Path, args: argparse.Namespace | None = None) -> "Manifest":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"manifest not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
        base = path.parent
        overrides = vars(args) if args is not None else {}

        inputs = []
        for item in data.get("inputs", []):
            p = Path(item["path"])
            inputs.append((p if p.is_absolute() else base / p, item["name"]))
        if not inputs:
            raise InputError(f"{path}: manifest lists no inputs")
        names = [n for _, n in inputs]
        if len(set(names)) != len(names):
            raise InputError(f"{path}: duplicate algorithm names in inputs")

        part = data.get("partition")
        fields = {
            "cluster_size": "cluster_size_pct",
            "volume_size": "volume_size_pct",
            "measure": "measure",
            "cluster_number": "cluster_number",
        }
        given = {v: overrides[k] for k, v in fields.items() if overrides.get(k) is not None}
        if part is not None or given:
            merged = dict(part or {})
            merged.update(given)
            try:
                config = partitioning.PartitionConfig(**merged)
            except TypeError as exc:
                raise InputError(f"{path}: bad partition section: {exc}") from None
        else:
            config = None

        llm = data.get("llm") or []
        if isinstance(llm, dict):
            llm = [llm]
        llm_configs = [LLMConfig.from_dict(c) for c in llm]
        if overrides.get("endpoint") or overrides.get("model"):
            first = llm[0] if llm else {"endpoint_url": "http://localhost/v1/chat/completions", "model_id": "stub"}
            first = dict(first)
            if overrides.get("endpoint"):
                first["endpoint_url"] = overrides["endpoint"]
            if overrides.get("model"):
                first["model_id"] = overrides["model"]
            llm_configs = [LLMConfig.from_dict(first)]

        out = overrides.get("out") or data.get("output_dir", "out")
        out = Path(out)
        if not out.is_absolute() and not overrides.get("out"):
            out = base / out
        return cls(
            inputs=inputs,
            sense=overrides.get("sense") or data.get("sense", trajectory_io.MINIMIZE),
            space=overrides.get("space") or data.get("space"),
            partition=config,
            llm=llm_configs,
            output_dir=out,
        )


@dataclass
class Analysis:
    dataset: trajectory_io.Dataset
    config: partitioning.PartitionConfig | None
    limits: partitioning.ClusterLimits | None
    partition: partitioning.PartitionResult
    stn: stn_graph.STN
    features: list[features.AlgorithmFeatures]


def analyze_manifest(manifest: Manifest) -> Analysis:
    for p, _ in manifest.inputs:
        if not p.exists():
            raise InputError(f"input file not found: {p}")
    dataset = trajectory_io.load_dataset([(p, n) for p, n in manifest.inputs], manifest.sense, manifest.space)
    solutions = dataset.solutions()
    config, limits = manifest.partition, None
    if config is not None:
        limits = partitioning.cluster_limits(solutions, config)
        if config.cluster_number not in limits:
            raise partitioning.ClusterLimitError(config.cluster_number, limits)
        result = partitioning.partition(solutions, config, limits)
        stn = stn_graph.build_stn(dataset, result)
    else:
        result = partitioning.identity_partition(solutions)
        stn = stn_graph.build_stn(dataset)
    feats = features.extract_all(dataset, stn)
    return Analysis(dataset, config, limits, result, stn, feats)


def features_csv(feats) -> str:
    cols = ("algorithm", "total_best_global_fitness", "connectivity", "avg_fitness", "trajectory_count", "best_fitness")
    table = reporting.Table(cols, tuple(tuple(f.as_row()[c] for c in cols) for f in feats))
    return table.to_csv()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)
    return path


def cmd_analyze(args) -> int:
    manifest = Manifest.load(args.manifest, args)
    analysis = analyze_manifest(manifest)
    out = manifest.output_dir
    _write(out / "features.csv", features_csv(analysis.features))
    _write(out / "stn.dot", stn_graph.export_graph(analysis.stn, "dot"))
    _write(out / "stn.graphml", stn_graph.export_graph(analysis.stn, "graphml"))
    _write(out / "partition.csv", analysis.partition.to_csv())
    if analysis.limits is not None:
        print(f"cluster limits: min {analysis.limits.min_clusters}, max {analysis.limits.max_clusters}")
    for f in analysis.features:
        print(" ".join(prompt_engine.feature_sentences(f)))
    return EXIT_OK


def _load_verdict(out: Path, task: str) -> evaluation.Verdict:
    path = out / f"verdict_{task}.json"
    if not path.is_file():
        raise InputError(f"{path} not found; run `ask --task {task}` first")
    return evaluation.Verdict.from_dict(json.loads(path.read_text(encoding="utf-8")))


def build_prompts(manifest: Manifest, analysis: Analysis, task: str) -> list[prompt_engine.RenderedPrompt]:
    if task == "A":
        return [prompt_engine.render_task_a(analysis.features, manifest.sense)]
    if task == "B":
        if analysis.config is None:
            raise InputError("task B needs a partition section in the manifest")
        return [prompt_engine.render_task_b(analysis.config, analysis.limits)]
    if analysis.config is None:
        raise InputError("task C needs a partition section in the manifest")
    verdict = _load_verdict(manifest.output_dir, "B")
    if verdict.kind != evaluation.PARAMETER_UPDATES:
        raise InputError(f"task B verdict is {verdict.kind}, not parameter updates; cannot build task C")
    feats_csv, config_csv = reporting.emit_task_c_csvs(analysis.features, analysis.config, verdict)
    _write(manifest.output_dir / "task_c_features.csv", feats_csv)
    _write(manifest.output_dir / "task_c_config.csv", config_csv)
    return list(prompt_engine.render_task_c(feats_csv, config_csv))


def _case_for(manifest: Manifest, analysis: Analysis, prompt) -> evaluation.PromptCase | None:
    if prompt.task == "A":
        expected = evaluation.expected_label(analysis.features, manifest.sense)
        n = len(analysis.features)
        return evaluation.PromptCase(
            case_id="task_a",
            task="A",
            difficulty=evaluation.EASY if n == 2 and expected.kind == evaluation.WINNER else evaluation.HARD,
            prompt=prompt,
            expected=expected,
            algorithms=analysis.dataset.names,
        )
    if prompt.task == "B":
        return evaluation.PromptCase(
            case_id="task_b", task="B", difficulty=evaluation.EASY, prompt=prompt, limits=analysis.limits
        )
    return None


def cmd_prompt(args) -> int:
    manifest = Manifest.load(args.manifest, args)
    analysis = analyze_manifest(manifest)
    out = manifest.output_dir
    for prompt in build_prompts(manifest, analysis, args.task):
        _write(out / f"prompt_{prompt.task}.txt", prompt.message_content())
        case = _case_for(manifest, analysis, prompt)
        if case is not None:
            _write(out / "cases" / f"{case.case_id}.json", json.dumps(case.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _client(config: LLMConfig, args, transcript: Path | None = None) -> ChatClient:
    transport = stub_transport(args.stub) if args.offline else None
    return ChatClient(config, transport=transport, transcript_path=transcript)


def _llm_config(manifest: Manifest, args) -> LLMConfig:
    if manifest.llm:
        return manifest.llm[0]
    if args.offline:
        return LLMConfig("http://stub.invalid/v1/chat/completions", "stub-" + args.stub)
    raise InputError("manifest has no llm section (use --offline for the built-in stub)")


def cmd_ask(args) -> int:
    manifest = Manifest.load(args.manifest, args)
    analysis = analyze_manifest(manifest)
    out = manifest.output_dir
    config = _llm_config(manifest, args)
    prompts = build_prompts(manifest, analysis, args.task)
    transcript = out / f"transcript_{args.task}.jsonl"
    out.mkdir(parents=True, exist_ok=True)
    transcript.unlink(missing_ok=True)
    with _client(config, args, transcript) as client:
        for prompt in prompts:
            content = prompt.message_content()
            if args.dump_prompt:
                dump = Path(args.dump_prompt)
                if len(prompts) > 1:
                    dump = dump.with_name(f"{dump.stem}_{prompt.task}{dump.suffix}")
                _write(dump, content)
            _write(out / f"prompt_{prompt.task}.txt", content)
            reply = client.complete(prompt)
            _write(out / f"reply_{prompt.task}.txt", reply.text)
            if prompt.task in ("A", "B"):
                case = _case_for(manifest, analysis, prompt)
                verdict = case.parse(reply.text)
                _write(out / f"verdict_{prompt.task}.json", json.dumps(verdict.to_dict(), indent=2) + "\n")
                print(f"task {prompt.task}: {verdict.kind} {verdict.render() or verdict.violation_reason}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cases = evaluation.load_cases(args.cases)
    manifest = Manifest.load(args.manifest, args) if args.manifest else None
    configs = manifest.llm if manifest and manifest.llm else []
    if not configs:
        if not args.offline:
            raise InputError("no llm configuration (give --manifest with an llm section, or --offline)")
        configs = [LLMConfig("http://stub.invalid/v1/chat/completions", "stub-" + args.stub)]
    cards = []
    for case in cases:
        for config in configs:
            with _client(config, args) as client:
                card = evaluation.run_trials(case, n=args.n, client=client, parallel=args.parallel)
            if card.error:
                log.error("case %s, model %s: %s", case.case_id, config.model_id, card.error)
            cards.append(card)
    if args.votes:
        models = [c.model_id for c in configs]
        for case in cases:
            scores = evaluation.human_score(args.votes, models, case_id=case.case_id, repetitions=args.n)
            for card in cards:
                if card.case is case:
                    card.human_score = scores[card.model_id]
    if args.output:
        out_path = Path(args.output)
    elif manifest is not None:
        out_path = manifest.output_dir / "scorecards.csv"
    else:
        out_path = Path(args.cases) / "scorecards.csv"
    _write(out_path, evaluation.scorecards_csv(cards))
    print(evaluation.scorecards_csv(cards), end="")
    if any(c.error for c in cards):
        return EXIT_ENDPOINT
    return EXIT_OK


def _read(path: Path) -> str | None:
    return path.read_text(encoding="utf-8") if path.is_file() else None


def _section(out: Path, task: str, title: str) -> reporting.TaskSection | None:
    prompt = _read(out / f"prompt_{task}.txt")
    if prompt is None:
        return None
    section = reporting.TaskSection(title, prompts=[prompt_engine.RenderedPrompt(task, prompt)])
    reply = _read(out / f"reply_{task}.txt")
    if reply is not None:
        section.replies.append(reply)
    verdict = _read(out / f"verdict_{task}.json")
    if verdict is not None:
        section.verdicts.append(evaluation.Verdict.from_dict(json.loads(verdict)))
    return section


def render_report(out: Path, fmt: str = "markdown") -> Path:
    sections = {
        "task_a": _section(out, "A", "Task A: winner among the compared algorithms"),
        "task_b": _section(out, "B", "Task B: clustering parameter suggestions"),
    }
    figures = []
    for name, caption in (("features", "Best and average performance per algorithm"),
                          ("config", "Old and suggested clustering configuration")):
        csv_text = _read(out / f"task_c_{name}.csv")
        if csv_text is None:
            continue
        svg = reporting.render_grouped_bar(csv_text, title=caption)
        _write(out / f"plot_{name}.svg", svg)
        figures.append((caption, svg))
    task_c = None
    if figures:
        task_c = reporting.TaskSection("Task C: summary plots", figures=figures)
        for task in ("C1", "C2"):
            prompt = _read(out / f"prompt_{task}.txt")
            if prompt is not None:
                task_c.prompts.append(prompt_engine.RenderedPrompt(task, prompt))
            reply = _read(out / f"reply_{task}.txt")
            if reply is not None:
                task_c.replies.append(reply)
    artifacts = reporting.ReportArtifacts(
        task_a=sections["task_a"], task_b=sections["task_b"], task_c=task_c, scorecards=_read(out / "scorecards.csv")
    )
    report = reporting.assemble_report(artifacts, fmt)
    return _write(out / ("report.md" if fmt == "markdown" else "report.html"), report.text)


def cmd_render(args) -> int:
    if args.csv:
        csv_path = Path(args.csv)
        if not csv_path.is_file():
            raise InputError(f"CSV not found: {csv_path}")
        palette = args.palette.split(",") if args.palette else reporting.DEFAULT_PALETTE
        svg = reporting.render_grouped_bar(csv_path.read_text(encoding="utf-8"), palette, title=args.title)
        _write(Path(args.output) if args.output else csv_path.with_suffix(".svg"), svg)
        return EXIT_OK
    if not args.manifest:
        raise InputError("render needs a CSV path or --manifest")
    manifest = Manifest.load(args.manifest, args)
    render_report(manifest.output_dir, "html" if args.html else "markdown")
    return EXIT_OK


def write_fixture(directory: Path, seed: int, n_algorithms: int = 2, n_runs: int = 10, n_steps: int = 20) -> Path:
    """Synthetic trajectory files plus a manifest, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    dataset = trajectory_io.random_dataset(rng, n_algorithms, n_runs, n_steps)
    directory.mkdir(parents=True, exist_ok=True)
    inputs = []
    for algo in dataset.algorithms:
        name = f"{algo.name}.tsv"
        trajectory_io.write_trajectory_file(directory / name, algo)
        inputs.append({"path": name, "name": algo.name})
    manifest = {"inputs": inputs, "sense": dataset.sense, "space": dataset.space, "output_dir": "out"}
    return _write(directory / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def cmd_export(args) -> int:
    if args.format == "fixture":
        write_fixture(Path(args.output or "fixture"), args.seed if args.seed is not None else 0)
        return EXIT_OK
    if not args.manifest:
        raise InputError(f"export --format {args.format} needs --manifest")
    manifest = Manifest.load(args.manifest, args)
    analysis = analyze_manifest(manifest)
    if args.format == "partition":
        text = analysis.partition.to_csv()
        default = "partition.csv"
    else:
        text = stn_graph.export_graph(analysis.stn, args.format)
        default = f"stn.{args.format}"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        _write(Path(args.output) if args.output else manifest.output_dir / default, text)
    return EXIT_OK


def _add_manifest(p, required=True):
    p.add_argument("--manifest", "-m", required=required, help="run manifest (JSON)")
    p.add_argument("--out", help="output directory (overrides the manifest)")
    p.add_argument("--sense", choices=trajectory_io.SENSES)
    p.add_argument("--space", choices=trajectory_io.SPACES)
    p.add_argument("--cluster-size", type=float)
    p.add_argument("--volume-size", type=float)
    p.add_argument("--measure", choices=partitioning.MEASURES)
    p.add_argument("--cluster-number", type=int)


def _add_llm(p):
    p.add_argument("--endpoint", help="chat-completions URL (overrides the manifest)")
    p.add_argument("--model", help="model id (overrides the manifest)")
    p.add_argument("--offline", action="store_true", help="answer with a built-in stub, never use the network")
    p.add_argument("--stub", choices=("rules", "echo"), default="rules", help="stub used with --offline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stn-analyst", description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, help="seed for synthetic data generation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="build the STN, features and partition")
    _add_manifest(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("prompt", help="render a task prompt without sending it")
    _add_manifest(p)
    p.add_argument("--task", choices=("A", "B", "C"), required=True)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("ask", help="render a task prompt and send it to the LLM")
    _add_manifest(p)
    _add_llm(p)
    p.add_argument("--task", choices=("A", "B", "C"), required=True)
    p.add_argument("--dump-prompt", help="also write the exact message text to this file")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("evaluate", help="score repeated LLM trials on pre-labelled cases")
    p.add_argument("cases", help="directory of *.json cases")
    _add_manifest(p, required=False)
    _add_llm(p)
    p.add_argument("--n", type=int, default=evaluation.DEFAULT_TRIALS, help="trials per case and model")
    p.add_argument("--votes", help="human votes CSV: evaluator,case_id,repetition,winning_model")
    p.add_argument("--parallel", action="store_true")
    p.add_argument("-o", "--output", help="scorecard CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="render a grouped bar SVG, or the full report")
    p.add_argument("csv", nargs="?", help="CSV to plot")
    _add_manifest(p, required=False)
    p.add_argument("-o", "--output", help="SVG path")
    p.add_argument("--palette", help="comma-separated colors")
    p.add_argument("--title")
    p.add_argument("--html", action="store_true", help="write report.html instead of report.md")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export", help="export the STN graph, partition, or a synthetic fixture")
    _add_manifest(p, required=False)
    p.add_argument("--format", choices=("dot", "graphml", "partition", "fixture"), default="dot")
    p.add_argument("-o", "--output", help="output path ('-' for stdout)")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except partitioning.ClusterLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"cluster limits: min {exc.limits.min_clusters}, max {exc.limits.max_clusters}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except partitioning.PartitionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except LLMError as exc:
        print(f"error: endpoint: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (InputError, trajectory_io.TrajectoryFormatError, trajectory_io.DatasetError,
            reporting.ReportingError, evaluation.VotesError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
