"""Population preparation, multi-strategy replay and exports."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..cdm import IrtModel, MirtModel, NacdModel, TrainConfig, train
from ..cdm.base import CognitiveModel
from ..embeddings import EmbeddingNetwork, EmbeddingSet, RelationMatrices, build_relation_matrices
from ..ingest import InteractionLog, QMatrix, SessionSplit, split_holdout
from ..knowledge_graph import KnowledgeGraph, PathSet, constraint_for_need, extract_paths
from ..representativeness import DissimilarityMatrix, dissimilarity
from ..skill_importance import SkillImportanceTable, importance_table
from .session import MetricsTrace, SessionContext, SimulationConfig, StepMetrics, Strategy, run_session


@dataclass(frozen=True)
class ModelSettings:
    cdm: str = "nacd"
    attention_embed_size: int = 200
    learning_rate: float = 0.002
    epochs: int = 100
    dropout: float = 0.2
    batch_size: int = 256
    mirt_dim: int = 10
    clip_k: int = 4
    history_window: int = 50
    gcn_layers: int = 2
    delta_a: float = 0.5
    use_embeddings: bool = True
    edge_values: bool = True
    mlp_hidden: int = 64
    factor_dim: int = 32
    disable_exercise_factor: bool = False
    disable_student_factor: bool = False

    def __post_init__(self):
        if self.cdm not in ("irt", "mirt", "nacd"):
            raise ValueError(f"unknown cdm {self.cdm!r}; expected irt, mirt or nacd")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs, self.dropout, self.batch_size, seed)


def create_model(
    settings: ModelSettings,
    student_ids: Sequence[str],
    q: QMatrix,
    weights: np.ndarray,
    relations: RelationMatrices | None,
    seed: int,
) -> CognitiveModel:
    if settings.cdm == "irt":
        return IrtModel.create(student_ids, q.exercise_ids, seed=seed)
    if settings.cdm == "mirt":
        return MirtModel.create(student_ids, q.exercise_ids, dim=settings.mirt_dim, seed=seed)
    return NacdModel.create(
        student_ids,
        q.exercise_ids,
        q.weighted(weights),
        relations=relations if settings.use_embeddings else None,
        att_dim=settings.attention_embed_size,
        mlp_hidden=settings.mlp_hidden,
        factor_dim=settings.factor_dim,
        seed=seed,
        clip_k=settings.clip_k,
        history_window=settings.history_window,
        dropout=settings.dropout,
        gcn_layers=settings.gcn_layers,
        delta_a=settings.delta_a,
        edge_values=settings.edge_values,
        disable_exercise_factor=settings.disable_exercise_factor,
        disable_student_factor=settings.disable_student_factor,
    )


@dataclass
class PreparedPopulation:
    log: InteractionLog
    q: QMatrix
    splits: dict[str, SessionSplit]
    observed: InteractionLog
    relations: RelationMatrices
    paths: PathSet
    table: SkillImportanceTable
    embeddings: EmbeddingSet
    model: CognitiveModel
    losses: list[float]
    diss: DissimilarityMatrix
    seed: int

    @property
    def context(self) -> SessionContext:
        return SessionContext(self.q, self.table.w_k, self.diss)


def observed_part(log: InteractionLog, fraction: float, seed: int = 0) -> tuple[dict[str, SessionSplit], InteractionLog]:
    splits = {s: split_holdout(log, s, fraction, seed) for s in log.students}
    records = tuple(r for s in sorted(splits) for r in splits[s].observed)
    return splits, InteractionLog(records)


def prepare_population(
    log: InteractionLog,
    q: QMatrix,
    graph: KnowledgeGraph,
    settings: ModelSettings = ModelSettings(),
    holdout_fraction: float = 0.5,
    need: str = "all",
    seed: int = 0,
    model: CognitiveModel | None = None,
) -> PreparedPopulation:
    """Split every student's log, derive skill weights and embeddings, and train the CDM on observed records.

    Skill weights come from embeddings at initialization, since the weighted
    Q-matrix must exist before the diagnosis model is trained. A ``model``
    passed in (for example a loaded checkpoint) is used as is.
    """
    log.validate_against(q)
    splits, observed = observed_part(log, holdout_fraction, seed)
    relations = build_relation_matrices(observed, q)
    network = EmbeddingNetwork(relations, settings.attention_embed_size, settings.gcn_layers, settings.delta_a, seed)
    initial = network.embed(network.init_params())
    paths = extract_paths(graph, constraint_for_need(need))
    table = importance_table(paths, initial.s_star, observed, q)
    losses: list[float] = []
    if model is None:
        model = create_model(settings, observed.students, q, table.w_k, relations, seed)
        losses = train(model, observed, settings.train_config(seed)).losses
    embeddings = initial
    if isinstance(model, NacdModel) and model.relations is not None:
        embeddings = model.embedding.embed(model.params)
    return PreparedPopulation(
        log, q, splits, observed, relations, paths, table, embeddings, model, losses,
        dissimilarity(embeddings.e_star, q.exercise_ids), seed,
    )


def run_strategies(
    prepared: PreparedPopulation,
    strategies: Sequence[Strategy],
    cfg: SimulationConfig,
    students: Sequence[str] | None = None,
    audit: bool = False,
) -> list[MetricsTrace]:
    """Replay every student under every strategy; traces are ordered by strategy, then student id."""
    students = sorted(prepared.splits) if students is None else sorted(students)
    ctx = prepared.context
    traces = []
    for strategy in strategies:
        for i, s in enumerate(students):
            split = prepared.splits[s]
            rng = np.random.default_rng([cfg.seed, i])
            traces.append(run_session(prepared.model, s, split.observed, split.heldout, strategy, cfg, ctx, rng, audit))
    return traces


@dataclass
class StepSummary:
    mean_inf: np.ndarray  # nan where no student had a defined AUC
    mean_cov: np.ndarray
    n_inf: np.ndarray
    n_students: int


def aggregate(traces: Sequence[MetricsTrace]) -> dict[str, StepSummary]:
    """Per-strategy, per-step means over students; undefined AUC cells are skipped."""
    if not traces:
        raise ValueError("no traces to aggregate")
    out: dict[str, StepSummary] = {}
    for name in dict.fromkeys(t.strategy for t in traces):
        group = sorted((t for t in traces if t.strategy == name), key=lambda t: t.student_id)
        steps = len(group[0].steps)
        inf = np.array([[np.nan if s.inf is None else s.inf for s in t.steps] for t in group]).reshape(len(group), steps)
        cov = np.array([[s.cov for s in t.steps] for t in group]).reshape(len(group), steps)
        n_inf = (~np.isnan(inf)).sum(axis=0)
        sums = np.nansum(inf, axis=0)
        mean_inf = np.divide(sums, n_inf, out=np.full(steps, np.nan), where=n_inf > 0)
        out[name] = StepSummary(mean_inf, cov.mean(axis=0), n_inf, len(group))
    return out


def _fmt(v) -> str:
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def aggregate_and_export(
    traces: Sequence[MetricsTrace], out_dir: str | Path, manifest: dict | None = None
) -> dict[str, Path]:
    """Write raw traces, per-step means, the strategy x step AUC grid and a run manifest."""
    summary = aggregate(traces)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    files = {name: out / f"{name}.csv" for name in ("traces", "per_step", "heatmap")}
    files["manifest"] = out / "manifest.json"

    with open(files["traces"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "student_id", "step", "selected", "inf", "cov", "n_tested"])
        for t in traces:
            for s in t.steps:
                w.writerow([t.strategy, t.student_id, s.step, s.selected, "" if s.inf is None else repr(s.inf), repr(s.cov), s.n_tested])

    with open(files["per_step"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "step", "mean_inf", "mean_cov", "n_inf", "n_students"])
        for name, summ in summary.items():
            for i in range(len(summ.mean_cov)):
                w.writerow([name, i + 1, _fmt(summ.mean_inf[i]), _fmt(summ.mean_cov[i]), int(summ.n_inf[i]), summ.n_students])

    with open(files["heatmap"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        steps = max(len(s.mean_inf) for s in summary.values())
        w.writerow(["strategy", *range(steps)])
        for name, summ in summary.items():
            w.writerow([name, *(_fmt(v) for v in summ.mean_inf)])

    body = dict(manifest or {})
    body["strategies"] = list(summary)
    body["n_traces"] = len(traces)
    body["files"] = sorted(p.name for p in files.values() if p.suffix == ".csv")
    with open(files["manifest"], "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files


def read_traces(path: str | Path) -> list[MetricsTrace]:
    """Inverse of the ``traces.csv`` export."""
    traces: dict[tuple[str, str], MetricsTrace] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["strategy"], row["student_id"])
            trace = traces.setdefault(key, MetricsTrace(row["student_id"], row["strategy"]))
            inf = float(row["inf"]) if row["inf"] else None
            trace.steps.append(StepMetrics(int(row["step"]), row["selected"], inf, float(row["cov"]), int(row["n_tested"])))
    if not traces:
        raise ValueError(f"no traces in {path}")
    return list(traces.values())


def run_manifest(cfg: SimulationConfig, settings: ModelSettings, log: InteractionLog, **extra) -> dict:
    return {
        "simulation": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "model": asdict(settings),
        "seed": cfg.seed,
        "dataset_sha256": log.digest(),
        **extra,
    }
