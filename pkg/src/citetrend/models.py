"""Trend-prediction models over a causal year split.

Three predictors share the same embedding stacks (text -> 100, affiliation
-> 100, year -> 2, each with leaky ReLU and dropout):

* TrendModel: two graph-attention layers (202 -> 202 -> 30) and a one-logit
  head.  Attention runs over explicit edge lists with a self-loop per node;
  coefficients are softmax-normalized per receiving node.  Target nodes
  only ever receive messages from prior nodes, so the prior half of the
  computation can run first and be cached (prior_stage / predict_targets).
* MlpBaseline: attention layers swapped for plain dense layers whose
  widths are solved at build time so the trainable parameter count equals
  TrendModel's exactly.
* LogisticModel: one linear layer on the flattened feature blocks.

Every forward pass computes prior rows and target rows in separate matrix
products and reduces edge groups in a fixed order.  Prior activations
therefore never depend on target data in any bit, which is the causality
guarantee the rest of the package leans on.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import CitetrendError
from .features import FeatureSet
from .graph import CitationGraph, YearSplit


class ModelError(CitetrendError):
    pass


class CausalityViolation(ModelError):
    pass


class ParityError(ModelError):
    pass


class CacheShapeMismatch(ModelError):
    pass


class UnknownCitedNode(ModelError):
    pass


class CheckpointError(ModelError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Widths and regularization shared by the GAT and the MLP baseline."""

    text_units: int = 100
    affil_units: int = 100
    year_units: int = 2
    hidden1: int = 202
    hidden2: int = 30
    dropout: float = 0.1
    leaky_slope: float = 0.01

    @property
    def embed_width(self) -> int:
        return self.text_units + self.affil_units + self.year_units


def build_neighborhoods(split: YearSplit) -> dict[str, tuple[str, ...]]:
    """Per-node neighbor lists: the node itself first, then the prior nodes
    it cites, ordered by their position in the split.

    Raises:
        CausalityViolation: an edge terminates at a target node, or a
            target edge does not originate at a target node.
    """
    order = {node_id: i for i, node_id in enumerate(split.node_ids)}
    cited: dict[str, list[str]] = {node_id: [] for node_id in split.node_ids}
    for citing, target in split.prior_edges:
        if citing not in split.prior_node_ids or target not in split.prior_node_ids:
            raise CausalityViolation(
                f"prior edge ({citing!r}, {target!r}) leaves the prior set")
        cited[citing].append(target)
    for citing, target in split.target_edges:
        if citing not in split.target_node_ids:
            raise CausalityViolation(
                f"target edge ({citing!r}, {target!r}) does not start at a target node")
        if target not in split.prior_node_ids:
            raise CausalityViolation(
                f"target edge ({citing!r}, {target!r}) does not cite a prior node")
        cited[citing].append(target)
    return {
        node_id: (node_id, *sorted(cited[node_id], key=order.__getitem__))
        for node_id in split.node_ids
    }


@dataclass(frozen=True)
class EdgePlan:
    """Flattened neighbor lists in the model's row order.

    Prior rows come first (0..n_p-1 in prior_ids order), then target rows.
    src/dst arrays are grouped by source node ascending, self-loop first,
    cited neighbors after it; dst_t indexes the combined row space where a
    target's self-loop points at row n_p + t.
    """

    prior_ids: tuple[str, ...]
    target_ids: tuple[str, ...]
    src_p: np.ndarray
    dst_p: np.ndarray
    src_t: np.ndarray
    dst_t: np.ndarray

    @property
    def n_prior(self) -> int:
        return len(self.prior_ids)

    @property
    def n_target(self) -> int:
        return len(self.target_ids)


def _flatten_edges(ids: Sequence[str], cited: Mapping[str, list[int]],
                   self_loop: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    src: list[int] = []
    dst: list[int] = []
    for local, (node_id, self_row) in enumerate(zip(ids, self_loop)):
        src.append(local)
        dst.append(self_row)
        for neighbor in sorted(cited[node_id]):
            src.append(local)
            dst.append(neighbor)
    return np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)


def build_edge_plan(split: YearSplit) -> EdgePlan:
    neighborhoods = build_neighborhoods(split)  # validates causality
    prior_ids = tuple(i for i in split.node_ids if i in split.prior_node_ids)
    target_ids = tuple(i for i in split.node_ids if i in split.target_node_ids)
    p_index = {node_id: i for i, node_id in enumerate(prior_ids)}
    n_p = len(prior_ids)

    cited_p = {i: [p_index[j] for j in neighborhoods[i][1:]] for i in prior_ids}
    cited_t = {i: [p_index[j] for j in neighborhoods[i][1:]] for i in target_ids}
    src_p, dst_p = _flatten_edges(prior_ids, cited_p, self_loop=range(n_p))
    src_t, dst_t = _flatten_edges(target_ids, cited_t,
                                  self_loop=(n_p + t for t in range(len(target_ids))))
    return EdgePlan(prior_ids, target_ids, src_p, dst_p, src_t, dst_t)


@dataclass(frozen=True)
class ModelInputs:
    """Dense feature blocks split into prior and target row groups, plus
    the edge plan and per-prior-node publication years."""

    plan: EdgePlan
    text_p: np.ndarray
    affil_p: np.ndarray
    year_p: np.ndarray
    text_t: np.ndarray
    affil_t: np.ndarray
    year_t: np.ndarray
    flat_p: np.ndarray
    flat_t: np.ndarray
    prior_years: np.ndarray

    @property
    def text_width(self) -> int:
        return self.text_p.shape[1]

    @property
    def affil_width(self) -> int:
        return self.affil_p.shape[1]

    def target_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.text_t, self.affil_t, self.year_t


def prepare_inputs(graph: CitationGraph, split: YearSplit,
                   features: FeatureSet) -> ModelInputs:
    """Gather feature rows into prior/target blocks in edge-plan order."""
    plan = build_edge_plan(split)
    text, affil, year = features.dense_blocks()
    flat = np.hstack([text, affil, year])
    rows_p = np.asarray([features.row_index[i] for i in plan.prior_ids], dtype=np.int64)
    rows_t = np.asarray([features.row_index[i] for i in plan.target_ids], dtype=np.int64)
    return ModelInputs(
        plan=plan,
        text_p=np.ascontiguousarray(text[rows_p]),
        affil_p=np.ascontiguousarray(affil[rows_p]),
        year_p=np.ascontiguousarray(year[rows_p]),
        text_t=np.ascontiguousarray(text[rows_t]),
        affil_t=np.ascontiguousarray(affil[rows_t]),
        year_t=np.ascontiguousarray(year[rows_t]),
        flat_p=np.ascontiguousarray(flat[rows_p]),
        flat_t=np.ascontiguousarray(flat[rows_t]),
        prior_years=np.asarray([graph.year_of(i) for i in plan.prior_ids],
                               dtype=np.int64),
    )


@dataclass(frozen=True)
class PriorCache:
    """Frozen prior-stage results: layer activations and projections for
    every prior node, reusable against arbitrary new target nodes."""

    prior_ids: tuple[str, ...]
    prior_index: Mapping[str, int]
    h1: np.ndarray
    proj1: np.ndarray
    proj2: np.ndarray
    text_width: int
    affil_width: int


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class _Dense:
    """Weight/bias pair; bias starts at zero."""

    def __init__(self, rng, d_in: int, d_out: int):
        self.W = ad.parameter(_glorot(rng, d_in, d_out, (d_in, d_out)))
        self.b = ad.parameter(np.zeros(d_out))

    def params(self) -> list[Tensor]:
        return [self.W, self.b]

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.W), self.b)


class _GatLayer:
    """Shared projection plus a single-layer attention scorer over
    concatenated (source, neighbor) projections."""

    def __init__(self, rng, d_in: int, d_out: int):
        self.W = ad.parameter(_glorot(rng, d_in, d_out, (d_in, d_out)))
        self.b = ad.parameter(np.zeros(d_out))
        self.att_w = ad.parameter(_glorot(rng, 2 * d_out, 1, (2 * d_out, 1)))
        self.att_b = ad.parameter(np.zeros(1))

    def params(self) -> list[Tensor]:
        return [self.W, self.b, self.att_w, self.att_b]


class _Stacks:
    """The three embedding stacks; output is the 202-wide concatenation."""

    def __init__(self, rng, text_width: int, affil_width: int, cfg: ModelConfig):
        self.text = _Dense(rng, text_width, cfg.text_units)
        self.affil = _Dense(rng, affil_width, cfg.affil_units)
        self.year = _Dense(rng, 2, cfg.year_units)

    def params(self) -> list[Tensor]:
        return self.text.params() + self.affil.params() + self.year.params()


class _ModelBase:
    kind = "base"

    def __init__(self, text_width: int, affil_width: int,
                 config: ModelConfig, seed: int):
        self.text_width = int(text_width)
        self.affil_width = int(affil_width)
        self.config = config
        self.seed = int(seed)
        self.params: list[Tensor] = []

    # -- shared building blocks -------------------------------------------

    def _act(self, x: Tensor, train: bool, rng) -> Tensor:
        out = ad.leaky_relu(x, self.config.leaky_slope)
        if train and self.config.dropout > 0.0:
            out = ad.dropout(out, self.config.dropout, rng)
        return out

    def _embed(self, stacks: "_Stacks", text: np.ndarray, affil: np.ndarray,
               year: np.ndarray, train: bool, rng) -> Tensor:
        t = self._act(stacks.text(Tensor(text)), train, rng)
        a = self._act(stacks.affil(Tensor(affil)), train, rng)
        y = self._act(stacks.year(Tensor(year)), train, rng)
        return ad.concat([t, a, y], axis=1)

    def _check_widths(self, text_width: int, affil_width: int) -> None:
        if (text_width, affil_width) != (self.text_width, self.affil_width):
            raise ad.ShapeMismatch(
                f"model built for feature widths ({self.text_width}, "
                f"{self.affil_width}), got ({text_width}, {affil_width})")


class TrendModel(_ModelBase):
    """Graph-attention trend predictor with a cacheable prior stage."""

    kind = "gnn"

    def __init__(self, text_width: int, affil_width: int,
                 config: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__(text_width, affil_width, config, seed)
        rng = np.random.default_rng(seed)
        d = config.embed_width
        self.stacks = _Stacks(rng, text_width, affil_width, config)
        self.layer1 = _GatLayer(rng, d, config.hidden1)
        self.layer2 = _GatLayer(rng, config.hidden1, config.hidden2)
        self.head = _Dense(rng, config.hidden2, 1)
        self.params = (self.stacks.params() + self.layer1.params()
                       + self.layer2.params() + self.head.params())

    # -- attention over an edge list --------------------------------------

    def _attend(self, layer: _GatLayer, src_vals: Tensor, dst_vals: Tensor,
                groups: np.ndarray, n_groups: int) -> Tensor:
        pair = ad.concat([src_vals, dst_vals], axis=1)
        raw = ad.add(ad.matmul(pair, layer.att_w), layer.att_b)
        score = ad.leaky_relu(ad.reshape(raw, (raw.shape[0],)),
                              self.config.leaky_slope)
        alpha = ad.segment_softmax(score, groups, n_groups)
        weighted = ad.mul(ad.reshape(alpha, (alpha.shape[0], 1)), dst_vals)
        return ad.scatter_reduce(weighted, groups, n_groups, "sum")

    def _gat_prior(self, layer: _GatLayer, h: Tensor, plan: EdgePlan,
                   train: bool, rng) -> tuple[Tensor, Tensor]:
        """Returns (projection, activation) for the prior rows."""
        proj = ad.matmul(h, layer.W)
        agg = self._attend(layer,
                           ad.gather_rows(proj, plan.src_p),
                           ad.gather_rows(proj, plan.dst_p),
                           plan.src_p, plan.n_prior)
        return proj, self._act(ad.add(agg, layer.b), train, rng)

    def _gat_target(self, layer: _GatLayer, proj_p: Tensor, h_t: Tensor,
                    src_t: np.ndarray, dst_t: np.ndarray, n_t: int,
                    train: bool, rng) -> Tensor:
        proj_t = ad.matmul(h_t, layer.W)
        combined = ad.concat([proj_p, proj_t], axis=0)
        agg = self._attend(layer,
                           ad.gather_rows(proj_t, src_t),
                           ad.gather_rows(combined, dst_t),
                           src_t, n_t)
        return self._act(ad.add(agg, layer.b), train, rng)

    # -- forward passes ----------------------------------------------------

    def _prior_pass(self, inputs: ModelInputs, train: bool, rng):
        plan = inputs.plan
        h0 = self._embed(self.stacks, inputs.text_p, inputs.affil_p,
                         inputs.year_p, train, rng)
        proj1, h1 = self._gat_prior(self.layer1, h0, plan, train, rng)
        proj2, h2 = self._gat_prior(self.layer2, h1, plan, train, rng)
        logits = ad.reshape(self.head(h2), (plan.n_prior,))
        return proj1, h1, proj2, logits

    def _target_pass(self, proj1_p: Tensor, proj2_p: Tensor,
                     text_t, affil_t, year_t,
                     src_t: np.ndarray, dst_t: np.ndarray,
                     train: bool, rng) -> Tensor:
        n_t = text_t.shape[0]
        h0_t = self._embed(self.stacks, text_t, affil_t, year_t, train, rng)
        h1_t = self._gat_target(self.layer1, proj1_p, h0_t, src_t, dst_t,
                                n_t, train, rng)
        h2_t = self._gat_target(self.layer2, proj2_p, h1_t, src_t, dst_t,
                                n_t, train, rng)
        return ad.reshape(self.head(h2_t), (n_t,))

    def forward(self, inputs: ModelInputs, mode: str = "eval",
                rng: np.random.Generator | None = None,
                include_targets: bool = True) -> tuple[Tensor, Tensor | None]:
        """Logits for (prior, target) rows; target half optional.

        Train mode needs an rng for dropout and records onto the active
        tape; eval mode is deterministic and tape-free.
        """
        train = self._train_mode(mode, rng)
        self._check_widths(inputs.text_width, inputs.affil_width)
        proj1, _h1, proj2, logits_p = self._prior_pass(inputs, train, rng)
        if not include_targets:
            return logits_p, None
        logits_t = self._target_pass(proj1, proj2, *inputs.target_blocks(),
                                     inputs.plan.src_t, inputs.plan.dst_t,
                                     train, rng)
        return logits_p, logits_t

    @staticmethod
    def _train_mode(mode: str, rng) -> bool:
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        if mode == "train" and rng is None:
            raise ValueError("train mode requires an rng for dropout")
        return mode == "train"

    # -- two-stage path ----------------------------------------------------

    def prior_stage(self, inputs: ModelInputs) -> PriorCache:
        """Evaluation-mode prior computation, frozen for reuse."""
        self._check_widths(inputs.text_width, inputs.affil_width)
        proj1, h1, proj2, _ = self._prior_pass(inputs, train=False, rng=None)
        prior_ids = inputs.plan.prior_ids
        return PriorCache(
            prior_ids=prior_ids,
            prior_index={node_id: i for i, node_id in enumerate(prior_ids)},
            h1=h1.data.copy(),
            proj1=proj1.data.copy(),
            proj2=proj2.data.copy(),
            text_width=inputs.text_width,
            affil_width=inputs.affil_width,
        )

    def predict_targets(self, cache: PriorCache, target_ids: Sequence[str],
                        target_blocks: tuple[np.ndarray, np.ndarray, np.ndarray],
                        target_edges: Iterable[tuple[str, str]]) -> np.ndarray:
        """Logits for new target nodes against a cached prior stage.

        target_blocks rows align with target_ids; target_edges pairs are
        (target_id, cited_prior_id).  No prior-row layer is recomputed.

        Raises:
            CacheShapeMismatch: feature widths differ from the cached run.
            UnknownCitedNode: an edge cites a node outside the cached set.
        """
        text_t, affil_t, year_t = target_blocks
        if (text_t.shape[1], affil_t.shape[1]) != (cache.text_width,
                                                   cache.affil_width):
            raise CacheShapeMismatch(
                f"cache built for widths ({cache.text_width}, "
                f"{cache.affil_width}), got ({text_t.shape[1]}, {affil_t.shape[1]})")
        t_index = {node_id: i for i, node_id in enumerate(target_ids)}
        cited: dict[str, list[int]] = {node_id: [] for node_id in target_ids}
        for citing, target in target_edges:
            if citing not in t_index:
                raise UnknownCitedNode(
                    f"edge ({citing!r}, {target!r}) does not start at a given target")
            if target not in cache.prior_index:
                raise UnknownCitedNode(
                    f"edge ({citing!r}, {target!r}) cites a node outside the cached prior set")
            cited[citing].append(cache.prior_index[target])
        n_p = len(cache.prior_ids)
        src_t, dst_t = _flatten_edges(tuple(target_ids), cited,
                                      self_loop=(n_p + t for t in range(len(target_ids))))
        logits = self._target_pass(
            Tensor(cache.proj1), Tensor(cache.proj2),
            np.ascontiguousarray(text_t, dtype=np.float64),
            np.ascontiguousarray(affil_t, dtype=np.float64),
            np.ascontiguousarray(year_t, dtype=np.float64),
            src_t, dst_t, train=False, rng=None)
        return logits.data


class MlpBaseline(_ModelBase):
    """Dense-layer twin of TrendModel with exact parameter parity.

    The two hidden widths are solved at build time so the total trainable
    count matches the attention model's, absorbing the attention-scorer
    parameters the dense layers do not have.
    """

    kind = "mlp"

    def __init__(self, text_width: int, affil_width: int,
                 config: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__(text_width, affil_width, config, seed)
        rng = np.random.default_rng(seed)
        d = config.embed_width
        self.width1, self.width2 = solve_mlp_widths(d, config.hidden1,
                                                    config.hidden2)
        self.stacks = _Stacks(rng, text_width, affil_width, config)
        self.dense1 = _Dense(rng, d, self.width1)
        self.dense2 = _Dense(rng, self.width1, self.width2)
        self.head = _Dense(rng, self.width2, 1)
        self.params = (self.stacks.params() + self.dense1.params()
                       + self.dense2.params() + self.head.params())

    def _side(self, text, affil, year, train, rng) -> Tensor:
        h0 = self._embed(self.stacks, text, affil, year, train, rng)
        h1 = self._act(self.dense1(h0), train, rng)
        h2 = self._act(self.dense2(h1), train, rng)
        return ad.reshape(self.head(h2), (text.shape[0],))

    def forward(self, inputs: ModelInputs, mode: str = "eval",
                rng: np.random.Generator | None = None,
                include_targets: bool = True) -> tuple[Tensor, Tensor | None]:
        train = TrendModel._train_mode(mode, rng)
        self._check_widths(inputs.text_width, inputs.affil_width)
        logits_p = self._side(inputs.text_p, inputs.affil_p, inputs.year_p,
                              train, rng)
        if not include_targets:
            return logits_p, None
        logits_t = self._side(inputs.text_t, inputs.affil_t, inputs.year_t,
                              train, rng)
        return logits_p, logits_t


class LogisticModel(_ModelBase):
    """Single linear layer on the flattened feature blocks (no graph)."""

    kind = "logistic"

    def __init__(self, text_width: int, affil_width: int,
                 config: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__(text_width, affil_width, config, seed)
        rng = np.random.default_rng(seed)
        d = text_width + affil_width + 2
        self.linear = _Dense(rng, d, 1)
        self.params = self.linear.params()

    def forward(self, inputs: ModelInputs, mode: str = "eval",
                rng: np.random.Generator | None = None,
                include_targets: bool = True) -> tuple[Tensor, Tensor | None]:
        TrendModel._train_mode(mode, rng)  # validates the mode string
        self._check_widths(inputs.text_width, inputs.affil_width)
        logits_p = ad.reshape(self.linear(Tensor(inputs.flat_p)),
                              (inputs.flat_p.shape[0],))
        if not include_targets:
            return logits_p, None
        logits_t = ad.reshape(self.linear(Tensor(inputs.flat_t)),
                              (inputs.flat_t.shape[0],))
        return logits_p, logits_t


MODEL_KINDS = {"gnn": TrendModel, "mlp": MlpBaseline, "logistic": LogisticModel}


def build_model(kind: str, text_width: int, affil_width: int,
                config: ModelConfig = ModelConfig(), seed: int = 0) -> _ModelBase:
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ModelError(f"unknown model kind {kind!r}") from None
    return cls(text_width, affil_width, config, seed)


def count_parameters(model: _ModelBase) -> int:
    """Total trainable element count."""
    return sum(p.size for p in model.params)


def gat_parameter_total(d_in: int, h1: int, h2: int) -> int:
    """Trainable parameters of the attention layers plus head (stacks
    excluded; they are identical across models)."""
    layer1 = d_in * h1 + h1 + (2 * h1 + 1)
    layer2 = h1 * h2 + h2 + (2 * h2 + 1)
    head = h2 + 1
    return layer1 + layer2 + head


def solve_mlp_widths(d_in: int, h1: int, h2: int) -> tuple[int, int]:
    """Smallest dense widths (u1, u2) with u1 >= h1 whose layer1 + layer2 +
    head parameter total equals the attention side exactly.

    Solves u1*(d_in+1) + u2*(u1+2) + 1 = T by scanning u1 upward and
    accepting the first integer u2 >= 1.

    Raises:
        ParityError: no exact integer solution exists.
    """
    target = gat_parameter_total(d_in, h1, h2)
    u1 = h1
    while True:
        numerator = target - 1 - u1 * (d_in + 1)
        if numerator < u1 + 2:  # u2 would drop below 1
            raise ParityError(
                f"no exact parameter match for d_in={d_in}, h1={h1}, h2={h2}")
        if numerator % (u1 + 2) == 0:
            return u1, numerator // (u1 + 2)
        u1 += 1


def map_gat_weights_to_mlp(gat: TrendModel, mlp: MlpBaseline) -> None:
    """Copy GAT weights into the MLP, zero-padding the widened layers.

    With every non-self edge removed, attention over a self-only
    neighborhood is the constant 1, so the GAT collapses to dense layers;
    under this mapping the two models compute the same function.  Requires
    mlp widths >= gat widths (true for the default configuration).
    """
    cfg = gat.config
    if mlp.width1 < cfg.hidden1 or mlp.width2 < cfg.hidden2:
        raise ModelError(
            f"cannot embed widths ({cfg.hidden1}, {cfg.hidden2}) into "
            f"({mlp.width1}, {mlp.width2})")
    for src, dst in zip(gat.stacks.params(), mlp.stacks.params()):
        dst.data[...] = src.data
    mlp.dense1.W.data[...] = 0.0
    mlp.dense1.W.data[:, :cfg.hidden1] = gat.layer1.W.data
    mlp.dense1.b.data[...] = 0.0
    mlp.dense1.b.data[:cfg.hidden1] = gat.layer1.b.data
    mlp.dense2.W.data[...] = 0.0
    mlp.dense2.W.data[:cfg.hidden1, :cfg.hidden2] = gat.layer2.W.data
    mlp.dense2.b.data[...] = 0.0
    mlp.dense2.b.data[:cfg.hidden2] = gat.layer2.b.data
    mlp.head.W.data[...] = 0.0
    mlp.head.W.data[:cfg.hidden2] = gat.head.W.data
    mlp.head.b.data[...] = gat.head.b.data


# -- checkpoints ------------------------------------------------------------

_CKPT_MAGIC = b"CITETREND-CKPT\n"
_CKPT_VERSION = 1


def _config_digest(config: ModelConfig) -> str:
    canonical = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_checkpoint(model: _ModelBase, path) -> None:
    """Versioned container: JSON header plus raw little-endian float64
    parameter buffers.  Round-trips bit-exactly."""
    header = {
        "version": _CKPT_VERSION,
        "model": model.kind,
        "config": asdict(model.config),
        "config_digest": _config_digest(model.config),
        "text_width": model.text_width,
        "affil_width": model.affil_width,
        "seed": model.seed,
        "shapes": [list(p.shape) for p in model.params],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(len(blob).to_bytes(8, "big"))
        fh.write(blob)
        for p in model.params:
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> _ModelBase:
    """Rebuild the saved model with its exact weights.

    Raises:
        CheckpointError: unrecognized container, version, or corrupted
            parameter payload.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(_CKPT_MAGIC):
        raise CheckpointError(f"{path}: not a model checkpoint")
    offset = len(_CKPT_MAGIC)
    blob_len = int.from_bytes(raw[offset:offset + 8], "big")
    offset += 8
    try:
        header = json.loads(raw[offset:offset + blob_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    offset += blob_len
    if header.get("version") != _CKPT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {header.get('version')!r}")
    config = ModelConfig(**header["config"])
    if _config_digest(config) != header["config_digest"]:
        raise CheckpointError(f"{path}: config digest mismatch")
    model = build_model(header["model"], header["text_width"],
                        header["affil_width"], config, header["seed"])
    for p, shape in zip(model.params, header["shapes"]):
        if list(p.shape) != shape:
            raise CheckpointError(f"{path}: parameter shape drift")
        n_bytes = p.size * 8
        chunk = raw[offset:offset + n_bytes]
        if len(chunk) != n_bytes:
            raise CheckpointError(f"{path}: truncated parameter payload")
        p.data[...] = np.frombuffer(chunk, dtype="<f8").reshape(p.shape)
        offset += n_bytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after parameters")
    return model
