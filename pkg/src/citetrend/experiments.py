"""Training, evaluation, the predictivity parameter, and ablations.

Supervision is transductive: models train on prior-node labels (the most
recent prior year held aside as a monitoring slice, never for early
stopping) and are scored on target-node labels.  Training is full-batch
Adam for a fixed number of epochs, deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import CitetrendError
from .features import FeatureSet, build_features
from .graph import CitationGraph, TrendLabels, YearSplit, label_by_percentile
from .models import (ModelConfig, ModelInputs, _ModelBase, build_model,
                     count_parameters, prepare_inputs)
from .optim import AdamState, adam_step


class ExperimentError(CitetrendError):
    pass


class Divergence(ExperimentError):
    pass


class EmptyEvaluationSet(ExperimentError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    learning_rate: float = 1e-3
    weight_decay: float = 5e-4
    dropout: float = 0.1
    leaky_slope: float = 0.01
    percentile: float = 0.9
    window_years: int = 10
    seed: int = 0
    pos_weight_mode: str = "auto"  # "auto" (#neg/#pos) or "fixed"
    pos_weight: float = 1.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.percentile < 1.0:
            raise ValueError(f"percentile must be in (0, 1), got {self.percentile}")
        if self.window_years < 1:
            raise ValueError("window_years must be >= 1")
        if self.pos_weight_mode not in ("auto", "fixed"):
            raise ValueError(f"unknown pos_weight_mode {self.pos_weight_mode!r}")
        if self.pos_weight <= 0:
            raise ValueError("pos_weight must be positive")

    def model_config(self) -> ModelConfig:
        return ModelConfig(dropout=self.dropout, leaky_slope=self.leaky_slope)


@dataclass(frozen=True)
class TrainResult:
    loss_trace: tuple[float, ...]
    val_trace: tuple[float, ...]
    pos_weight: float


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    confusion: tuple[int, int, int, int]  # (tp, fp, tn, fn)
    lambda_: float = math.nan
    model: str = ""
    seed: int = 0
    params: int = 0
    loss_trace: tuple[float, ...] = field(default=())


def label_vector(labels: TrendLabels, ids: Sequence[str]) -> np.ndarray:
    return np.asarray([labels.labels[node_id] for node_id in ids], dtype=np.float64)


def _supervision_masks(prior_years: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Training rows vs the monitoring slice (latest prior year).  When the
    window holds a single prior year, everything trains and nothing is
    monitored."""
    latest = int(prior_years.max())
    train = prior_years < latest
    if not train.any():
        return np.ones_like(train, dtype=bool), np.zeros_like(train, dtype=bool)
    return train, prior_years == latest


def _auto_pos_weight(y: np.ndarray) -> float:
    positives = float(y.sum())
    if positives == 0.0 or positives == y.size:
        return 1.0
    return (y.size - positives) / positives


def _bce_value(logits: np.ndarray, y: np.ndarray, pos_weight: float) -> float:
    z = np.asarray(logits, dtype=np.float64)
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    softplus_neg = np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    per = pos_weight * y * softplus_neg + (1.0 - y) * softplus
    return float(per.mean()) if per.size else math.nan


def train(model: _ModelBase, inputs: ModelInputs, labels: TrendLabels,
          config: TrainConfig) -> TrainResult:
    """Full-batch training for config.epochs Adam steps.

    The loss covers prior nodes below the latest prior year; that last
    year's loss is recorded per epoch as a sanity trace.  Deterministic
    given config.seed.

    Raises:
        Divergence: the training loss became non-finite (message carries
            the epoch index).
    """
    y_p = label_vector(labels, inputs.plan.prior_ids)
    train_mask, val_mask = _supervision_masks(inputs.prior_years)
    train_idx = np.flatnonzero(train_mask)
    val_idx = np.flatnonzero(val_mask)
    y_train = y_p[train_idx]
    if config.pos_weight_mode == "auto":
        pos_weight = _auto_pos_weight(y_train)
    else:
        pos_weight = config.pos_weight

    rng = np.random.default_rng(config.seed)
    state = AdamState(model.params, learning_rate=config.learning_rate,
                      weight_decay=config.weight_decay)
    loss_trace: list[float] = []
    val_trace: list[float] = []
    for epoch in range(config.epochs):
        with ad.Tape() as tape:
            logits_p, _ = model.forward(inputs, mode="train", rng=rng,
                                        include_targets=False)
            picked = ad.gather_rows(logits_p, train_idx)
            loss = ad.bce_with_logits(picked, y_train, pos_weight)
            tape.backward(loss)
        value = loss.item()
        if not math.isfinite(value):
            raise Divergence(f"non-finite loss at epoch {epoch}")
        loss_trace.append(value)
        val_trace.append(_bce_value(logits_p.data[val_idx], y_p[val_idx],
                                    pos_weight))
        adam_step(state, model.params)
    return TrainResult(tuple(loss_trace), tuple(val_trace), pos_weight)


def evaluate(logits: np.ndarray, labels: np.ndarray,
             node_ids: Sequence[str] | None = None) -> EvalReport:
    """Precision / recall / F1 at the 0.5 probability threshold.

    A logit is positive iff sigma(logit) > 0.5, i.e. logit > 0.  Undefined
    ratios (zero denominators) are reported as 0, never NaN.

    Raises:
        EmptyEvaluationSet: no nodes to score.
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if z.size == 0:
        raise EmptyEvaluationSet("no nodes to evaluate")
    if z.shape != y.shape:
        raise ad.ShapeMismatch(f"evaluate: {z.shape} logits vs {y.shape} labels")
    if node_ids is not None and len(node_ids) != z.size:
        raise ad.ShapeMismatch(
            f"evaluate: {z.size} logits vs {len(node_ids)} node ids")
    pred = z > 0.0
    actual = y == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    tn = int(np.sum(~pred & ~actual))
    fn = int(np.sum(~pred & actual))
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = (2.0 * precision * recall / (precision + recall)
          if (precision + recall) else 0.0)
    return EvalReport(precision=precision, recall=recall, f1=f1,
                      confusion=(tp, fp, tn, fn))


def lambda_predictivity(split: YearSplit) -> float:
    """(1 / V_all) * (E_p / (E_all - E_p)) * 100.

    V_all counts prior plus target nodes, E_all prior plus target edges.
    With no target edges the ratio is undefined and the infinity sentinel
    is returned.
    """
    v_all = len(split.prior_node_ids) + len(split.target_node_ids)
    e_p = len(split.prior_edges)
    e_t = len(split.target_edges)
    if e_t == 0:
        return math.inf
    return (1.0 / v_all) * (e_p / e_t) * 100.0


def run_model(kind: str, graph: CitationGraph, split: YearSplit,
              features: FeatureSet, labels: TrendLabels,
              config: TrainConfig,
              inputs: ModelInputs | None = None) -> tuple[_ModelBase, EvalReport]:
    """Build, train, and score one model on the split's target nodes."""
    if inputs is None:
        inputs = prepare_inputs(graph, split, features)
    model = build_model(kind, inputs.text_width, inputs.affil_width,
                        config.model_config(), config.seed)
    result = train(model, inputs, labels, config)
    _, logits_t = model.forward(inputs, mode="eval")
    y_t = label_vector(labels, inputs.plan.target_ids)
    report = evaluate(logits_t.data, y_t, inputs.plan.target_ids)
    report = replace(report, model=kind, seed=config.seed,
                     lambda_=lambda_predictivity(split),
                     params=count_parameters(model),
                     loss_trace=result.loss_trace)
    return model, report


def compare_models(graph: CitationGraph, split: YearSplit,
                   features: FeatureSet, labels: TrendLabels,
                   config: TrainConfig) -> list[EvalReport]:
    """gnn / mlp / logistic, same seed, features, and training budget."""
    inputs = prepare_inputs(graph, split, features)
    reports = []
    for kind in ("gnn", "mlp", "logistic"):
        _, report = run_model(kind, graph, split, features, labels, config,
                              inputs=inputs)
        reports.append(report)
    return reports


@dataclass(frozen=True)
class AblationPoint:
    fraction: float
    seed: int
    gnn_f1: float
    mlp_f1: float


@dataclass(frozen=True)
class AblationCurve:
    points: tuple[AblationPoint, ...]

    def mean_by_fraction(self, column: str) -> dict[float, float]:
        sums: dict[float, list[float]] = {}
        for p in self.points:
            sums.setdefault(p.fraction, []).append(getattr(p, column))
        return {f: sum(v) / len(v) for f, v in sums.items()}


def _remove_edges(split: YearSplit, fraction: float,
                  rng: np.random.Generator) -> YearSplit:
    merged = list(split.prior_edges) + list(split.target_edges)
    n_remove = math.floor(fraction * len(merged))
    removed = set(map(int, rng.permutation(len(merged))[:n_remove]))
    kept = [e for i, e in enumerate(merged) if i not in removed]
    boundary = len(split.prior_edges)
    kept_p = [e for i, e in enumerate(merged) if i not in removed and i < boundary]
    kept_t = [e for i, e in enumerate(merged) if i not in removed and i >= boundary]
    assert len(kept) == len(kept_p) + len(kept_t)
    return split.replace_edges(kept_p, kept_t)


def ablate_edges(graph: CitationGraph, split: YearSplit,
                 fractions: Sequence[float], config: TrainConfig,
                 seeds: Sequence[int] | None = None,
                 features: FeatureSet | None = None,
                 labels: TrendLabels | None = None) -> AblationCurve:
    """Retrain gnn and mlp from scratch per (fraction, seed) after removing
    floor(fraction * |E|) edges uniformly at random.

    Features and labels are node-intrinsic, so they are computed once and
    shared across every run.
    """
    fractions = list(fractions)
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise ValueError(f"fractions must lie in [0, 1]: {fractions}")
    if sorted(fractions) != fractions:
        raise ValueError("fractions must be sorted ascending")
    if seeds is None:
        seeds = [config.seed + k for k in range(5)]
    if features is None:
        features = build_features(graph, split)
    if labels is None:
        labels = label_by_percentile(graph, split.node_ids, config.percentile)

    points = []
    for fraction in fractions:
        for seed in seeds:
            removal_rng = np.random.default_rng([seed, int(round(fraction * 1e6))])
            reduced = _remove_edges(split, fraction, removal_rng)
            run_config = replace(config, seed=seed)
            inputs = prepare_inputs(graph, reduced, features)
            _, gnn = run_model("gnn", graph, reduced, features, labels,
                               run_config, inputs=inputs)
            _, mlp = run_model("mlp", graph, reduced, features, labels,
                               run_config, inputs=inputs)
            points.append(AblationPoint(fraction, seed, gnn.f1, mlp.f1))
    return AblationCurve(tuple(points))


# -- CSV emission ------------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.6f}"


def eval_report_csv(reports: Sequence[EvalReport]) -> str:
    """Fixed-column CSV: model,seed,precision,recall,f1,lambda,params."""
    lines = ["model,seed,precision,recall,f1,lambda,params"]
    for r in reports:
        lines.append(f"{r.model},{r.seed},{_fmt(r.precision)},{_fmt(r.recall)},"
                     f"{_fmt(r.f1)},{_fmt(r.lambda_)},{r.params}")
    return "\n".join(lines) + "\n"


def ablation_csv(curve: AblationCurve) -> str:
    """Fixed-column CSV: fraction,seed,gnn_f1,mlp_f1."""
    lines = ["fraction,seed,gnn_f1,mlp_f1"]
    for p in curve.points:
        lines.append(f"{_fmt(p.fraction)},{p.seed},{_fmt(p.gnn_f1)},{_fmt(p.mlp_f1)}")
    return "\n".join(lines) + "\n"
