"""Command-line entry point: ``kgeir <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cdm import load_checkpoint, save_checkpoint
from .config import RunConfig, dump_config, load_config
from .embeddings import write_embeddings
from .harness.pipeline import (
    aggregate_and_export,
    prepare_population,
    read_traces,
    run_manifest,
    run_strategies,
)
from .harness.session import Strategy
from .harness.synthetic import dina_population
from .ingest import DataError, load_interaction_log, load_q_matrix, summarize, write_interaction_log, write_q_matrix
from .knowledge_graph import extract_paths, constraint_for_need, load_graph, write_graph
from .representativeness import write_audit
from .skill_importance import write_table

ABLATIONS = {
    "IF": dict(disable_informativeness=True),
    "ER": dict(disable_representativeness=True),
    "IF+KI": dict(disable_informativeness=True, disable_knowledge_importance=True),
    "ER+KI": dict(disable_representativeness=True, disable_knowledge_importance=True),
}


def _data_args(p: argparse.ArgumentParser, graph: bool = True) -> None:
    p.add_argument("--log", required=True, help="interaction log CSV (student_id,exercise_id,correct,timestamp)")
    p.add_argument("--q", required=True, help="Q-matrix CSV (exercise_id,skill_id)")
    p.add_argument("--skills", help="optional skill vocabulary CSV (skill_id)")
    if graph:
        p.add_argument("--graph", required=True, help="knowledge graph JSON")


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--cdm", choices=("irt", "mirt", "nacd"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--checkpoint", help="load a trained model instead of training")


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.replace(
        seed=getattr(args, "seed", None),
        cdm=getattr(args, "cdm", None),
        epochs=getattr(args, "epochs", None),
        steps=getattr(args, "steps", None),
    )


def _load_data(args):
    log = load_interaction_log(args.log)
    q = load_q_matrix(args.q, args.skills)
    log.validate_against(q)
    return log, q


def _prepare(args, cfg: RunConfig):
    log, q = _load_data(args)
    graph = load_graph(args.graph)
    model = load_checkpoint(args.checkpoint) if getattr(args, "checkpoint", None) else None
    settings = cfg.model_settings()
    prepared = prepare_population(log, q, graph, settings, cfg.holdout_fraction, cfg.need, cfg.seed, model)
    return prepared, settings


def cmd_ingest(args) -> int:
    log, q = _load_data(args)
    summary = summarize(log, q)
    if args.graph:
        graph = load_graph(args.graph)
        summary["graph_nodes"] = len(graph.nodes)
        summary["graph_edges"] = len(graph.edges)
    summary["log_sha256"] = log.digest()
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    pop = dina_population(args.students, args.exercises, args.skills, args.slip, args.guess, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_interaction_log(pop.log, out / "log.csv")
    write_q_matrix(pop.q, out / "q.csv")
    write_graph(pop.graph, out / "graph.json")
    print(f"wrote {pop.log.n_records} records, {pop.q.n_exercises} exercises, {pop.q.n_skills} skills to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    prepared, settings = _prepare(args, cfg)
    out = Path(args.out)
    save_checkpoint(prepared.model, out / "checkpoint", {"run": vars(cfg), "dataset_sha256": prepared.log.digest()})
    with open(out / "losses.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        fh.writelines(f"{i + 1},{loss!r}\n" for i, loss in enumerate(prepared.losses))
    write_table(prepared.table, out / "skill_importance.csv")
    write_embeddings(out / "exercise_embeddings.csv", prepared.q.exercise_ids, prepared.embeddings.e_star)
    write_embeddings(out / "skill_embeddings.csv", prepared.q.skill_ids, prepared.embeddings.s_star)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    final = prepared.losses[-1] if prepared.losses else float("nan")
    print(f"trained {settings.cdm} on {prepared.observed.n_records} records; final loss {final:.4f}; wrote {out}")
    return 0


def cmd_weights(args) -> int:
    cfg = _config(args)
    from .embeddings import EmbeddingNetwork, build_relation_matrices
    from .skill_importance import importance_table

    log, q = _load_data(args)
    graph = load_graph(args.graph)
    net = EmbeddingNetwork(build_relation_matrices(log, q), cfg.attention_embed_size, cfg.gcn_layers, cfg.delta_a, cfg.seed)
    paths = extract_paths(graph, constraint_for_need(args.need or cfg.need))
    table = importance_table(paths, net.embed(net.init_params()).s_star, log, q)
    write_table(table, args.out)
    print(f"wrote importance weights for {len(table.skill_ids)} skills from {len(paths)} learning paths to {args.out}")
    return 0


def _simulate(args, cfg: RunConfig, strategies: list[Strategy]) -> int:
    prepared, settings = _prepare(args, cfg)
    sim = cfg.simulation()
    students = sorted(prepared.splits)
    if args.students:
        students = students[: args.students]
    traces = run_strategies(prepared, strategies, sim, students, audit=args.audit)
    out = Path(args.out)
    manifest = run_manifest(sim, settings, prepared.log, holdout_fraction=cfg.holdout_fraction, need=cfg.need, students=len(students))
    files = aggregate_and_export(traces, out, manifest)
    if args.audit:
        for t in traces:
            if t.audit:
                target = out / "audit" / t.strategy
                target.mkdir(parents=True, exist_ok=True)
                write_audit(t.audit, target / f"{t.student_id}.csv")
    print(f"replayed {len(students)} students x {len(strategies)} strategies; wrote {', '.join(sorted(p.name for p in files.values()))}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    kinds = args.strategy or ["kg-eir"]
    flags = dict(
        disable_informativeness=args.disable_informativeness,
        disable_representativeness=args.disable_representativeness,
        disable_knowledge_importance=args.disable_knowledge_importance,
    )
    strategies = [Strategy(k, **(flags if k == "kg-eir" else {})) for k in dict.fromkeys(kinds)]
    return _simulate(args, cfg, strategies)


def cmd_ablate(args) -> int:
    cfg = _config(args)
    strategies = [Strategy("kg-eir")] + [Strategy("kg-eir", **flags) for flags in ABLATIONS.values()]
    return _simulate(args, cfg, strategies)


def cmd_export_plots(args) -> int:
    traces = read_traces(args.traces)
    manifest = {"source": Path(args.traces).name}
    files = aggregate_and_export(traces, args.out, manifest)
    print(f"wrote {', '.join(sorted(p.name for p in files.values()))} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgeir", description="Adaptive exercise selection with knowledge-graph weighting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarize a dataset")
    _data_args(p, graph=False)
    p.add_argument("--graph", help="optional knowledge graph JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic DINA dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--students", type=int, default=200)
    p.add_argument("--exercises", type=int, default=100)
    p.add_argument("--skills", type=int, default=10)
    p.add_argument("--slip", type=float, default=0.1)
    p.add_argument("--guess", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit a diagnosis model and write a checkpoint")
    _data_args(p)
    _run_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("weights", help="compute the skill importance table")
    _data_args(p)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--need", help="learner need preset: all, prerequisite, application, hierarchy")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_weights)

    for name, func, text in (
        ("simulate", cmd_simulate, "replay students under selection strategies"),
        ("ablate", cmd_ablate, "replay the full strategy and its component ablations"),
    ):
        p = sub.add_parser(name, help=text)
        _data_args(p)
        _run_args(p)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--steps", type=int)
        p.add_argument("--students", type=int, help="replay only the first N students (sorted by id)")
        p.add_argument("--audit", action="store_true", help="write per-step selection audits")
        if name == "simulate":
            p.add_argument("--strategy", action="append", choices=("random", "expectimax", "kg-eir"))
            p.add_argument("--disable-informativeness", action="store_true")
            p.add_argument("--disable-representativeness", action="store_true")
            p.add_argument("--disable-knowledge-importance", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("export-plots", help="rebuild plot tables from a traces CSV")
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_plots)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
