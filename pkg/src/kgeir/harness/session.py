"""Replay of one student's held-out records under a selection strategy."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .. import autodiff as ad
from ..cdm.base import CognitiveModel, history_row, row_updates, update_incremental
from ..ingest import DataError, InteractionRecord, QMatrix
from ..informativeness import score_all, select_candidates
from ..representativeness import ALPHAS, CoverageState, DissimilarityMatrix, ScoreBreakdown, select_representative
from .metrics import cov_metric, inf_metric


class StrategyKind(str, enum.Enum):
    RANDOM = "random"
    EXPECTIMAX = "expectimax"
    KG_EIR = "kg-eir"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    disable_informativeness: bool = False
    disable_representativeness: bool = False
    disable_knowledge_importance: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.kind is not StrategyKind.KG_EIR and self.flags:
            raise ValueError("ablation flags apply only to the kg-eir strategy")

    @property
    def flags(self) -> tuple[str, ...]:
        names = ("informativeness", "representativeness", "knowledge_importance")
        return tuple(n for n in names if getattr(self, f"disable_{n}"))

    @property
    def name(self) -> str:
        if not self.flags:
            return self.kind.value
        short = {"informativeness": "IF", "representativeness": "ER", "knowledge_importance": "KI"}
        return self.kind.value + "-no-" + "+".join(short[f] for f in self.flags)


@dataclass(frozen=True)
class SimulationConfig:
    steps: int = 20
    top_k: int = 5
    alphas: tuple[float, float, float] = ALPHAS
    seed: int = 0
    cdm: str = "nacd"
    update_steps: int = 1
    update_lr: float = 0.1
    ecov_variant: str = "saturating"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if len(self.alphas) != 3:
            raise ValueError("three alphas are required")
        if self.update_steps < 0:
            raise ValueError("update_steps must be non-negative")


@dataclass(frozen=True)
class StepMetrics:
    step: int
    selected: str
    inf: float | None
    cov: float
    n_tested: int


@dataclass
class MetricsTrace:
    student_id: str
    strategy: str
    steps: list[StepMetrics] = field(default_factory=list)
    audit: list[tuple[int, ScoreBreakdown, bool]] = field(default_factory=list)

    @property
    def selected(self) -> list[str]:
        return [s.selected for s in self.steps]


@dataclass
class SessionContext:
    """Population-level inputs shared by every session: Q-matrix, skill weights, dissimilarities."""

    q: QMatrix
    skill_weights: np.ndarray
    diss: DissimilarityMatrix | None = None


def strategy_random(q_u: Sequence[str], rng: np.random.Generator) -> str:
    if not q_u:
        raise ValueError("no untested questions left")
    pool = sorted(q_u)
    return pool[int(rng.integers(len(pool)))]


def _context_table(model: CognitiveModel, pool_idx: np.ndarray, prev: list[int], chunk: int = 2048) -> np.ndarray:
    """History-only logit of every pool exercise after each candidate is appended to the history."""
    n, window = len(pool_idx), model.history_window
    if window == 0:
        return np.repeat(model.context_logits(pool_idx, None)[None], n, axis=0)
    out = np.empty(n * n)
    per = max(1, chunk // n)
    for lo in range(0, n, per):
        hi = min(n, lo + per)
        hist = np.array([history_row(prev + [int(j)], window) for j in pool_idx[lo:hi]])
        out[lo * n:hi * n] = model.context_logits(np.tile(pool_idx, hi - lo), np.repeat(hist, n, axis=0))
    return out.reshape(n, n)


def strategy_expectimax(
    model: CognitiveModel,
    student: str,
    q_u: Sequence[str],
    history: Sequence[str] = (),
    update_steps: int = 1,
    update_lr: float = 0.1,
) -> str:
    """Depth-one lookahead: pick the question minimizing the expected residual uncertainty.

    For each candidate both answers are simulated on private row copies; the
    utility is the outcome-weighted sum of ``p(1-p)`` over the other untested
    questions. The model itself is never touched.
    """
    if not q_u:
        raise ValueError("no untested questions left")
    pool = sorted(q_u)
    n = len(pool)
    if n == 1:
        return pool[0]
    idx = np.array([model.exercise_idx(e) for e in pool], dtype=np.int64)
    prev = [model.exercise_idx(e) for e in history]
    hist_now = np.repeat(history_row(prev, model.history_window)[None], 2 * n, axis=0)
    rows2 = {k: np.repeat(v[None], 2 * n, axis=0) for k, v in model.student_rows(student).items()}
    ex2 = np.concatenate([idx, idx])
    p = expit(ad.value_of(model.logits_rows({k: v[:n] for k, v in rows2.items()}, idx, hist_now[:n])))
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    updated = row_updates(model, rows2, ex2, labels, hist_now, update_steps, update_lr)
    # logits of every pool item (columns) under each simulated outcome (rows)
    rep = {k: np.repeat(v, n, axis=0) for k, v in updated.items()}
    student_part = ad.value_of(model.student_logits(rep, np.tile(idx, 2 * n))).reshape(2 * n, n)
    context = _context_table(model, idx, prev)
    prob = expit(student_part + np.concatenate([context, context]))
    unc = prob * (1.0 - prob)
    own = np.concatenate([np.arange(n), np.arange(n)])
    others = unc.sum(axis=1) - unc[np.arange(2 * n), own]
    expected = p * others[:n] + (1.0 - p) * others[n:]
    best = min(range(n), key=lambda i: (expected[i], pool[i]))
    return pool[best]


def _kg_eir_select(
    model: CognitiveModel,
    student: str,
    q_u: Sequence[str],
    q_t: Sequence[str],
    history: Sequence[str],
    ctx: SessionContext,
    cfg: SimulationConfig,
    strategy: Strategy,
) -> tuple[str, list[ScoreBreakdown]]:
    pool = sorted(q_u)
    scores = score_all(model, student, pool, history)
    if strategy.disable_informativeness:
        q_c = pool
    else:
        q_c = select_candidates(scores, cfg.top_k)
    if strategy.disable_representativeness:
        return select_candidates([s for s in scores if s.exercise_id in set(q_c)], 1)[0], []
    weights = np.ones(ctx.q.n_skills) if strategy.disable_knowledge_importance else ctx.skill_weights
    state = CoverageState.from_tested(q_t, ctx.q, weights, cfg.ecov_variant)
    p = model.predict(student, q_c, history)
    responses = dict(zip(q_c, p.tolist()))
    if ctx.diss is None:
        raise ValueError("the representativeness term needs a dissimilarity matrix")
    return select_representative(q_c, state, ctx.q, responses, ctx.diss, q_t, cfg.alphas)


def heldout_labels(heldout: Sequence[InteractionRecord]) -> dict[str, int]:
    """Label per held-out exercise; a repeated exercise keeps its earliest answer."""
    labels: dict[str, int] = {}
    for rec in heldout:
        labels.setdefault(rec.exercise_id, rec.correct)
    return labels


def run_session(
    model: CognitiveModel,
    student: str,
    observed: Sequence[InteractionRecord],
    heldout: Sequence[InteractionRecord],
    strategy: Strategy,
    cfg: SimulationConfig,
    ctx: SessionContext,
    rng: np.random.Generator | None = None,
    audit: bool = False,
) -> MetricsTrace:
    """Select ``cfg.steps`` questions one at a time from the student's held-out records.

    ``model`` is copied; the caller's instance is left untouched.
    """
    labels = heldout_labels(heldout)
    if len(labels) < cfg.steps:
        raise DataError(f"student {student!r} has {len(labels)} held-out questions; {cfg.steps} steps requested")
    model = model.copy()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    history = [r.exercise_id for r in observed]
    q_u = set(labels)
    q_t: list[str] = []
    trace = MetricsTrace(student, strategy.name)
    for t in range(1, cfg.steps + 1):
        breakdown: list[ScoreBreakdown] = []
        if strategy.kind is StrategyKind.RANDOM:
            pick = strategy_random(list(q_u), rng)
        elif strategy.kind is StrategyKind.EXPECTIMAX:
            pick = strategy_expectimax(model, student, list(q_u), history, cfg.update_steps, cfg.update_lr)
        else:
            pick, breakdown = _kg_eir_select(model, student, list(q_u), q_t, history, ctx, cfg, strategy)
        if audit:
            trace.audit.extend((t, b, b.candidate_id == pick) for b in breakdown)
        record = InteractionRecord(student, pick, labels[pick], len(history))
        update_incremental(model, record, cfg.update_steps, cfg.update_lr, history)
        history.append(pick)
        q_u.remove(pick)
        q_t.append(pick)
        remaining = sorted(q_u)
        inf = None
        if remaining:
            inf = inf_metric(model.predict(student, remaining, history), [labels[e] for e in remaining])
        trace.steps.append(StepMetrics(t, pick, inf, cov_metric(q_t, ctx.q), len(q_t)))
    return trace
