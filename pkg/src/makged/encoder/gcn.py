"""Three-layer GCN subgraph encoder with a logistic triple classifier.

Everything is float64 numpy with hand-written backward passes so that the
gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..dataset import DatasetSplit, LabeledExample, Label
from ..errors import UnknownEntity
from ..kg import KnowledgeGraph
from ..subgraphs import DEFAULT_CAP, KINDS, DirectionalSubgraph, SubgraphKind, extract_all_four

CHECKPOINT_FORMAT = "makged-gcn/1"
_TENSORS = ("node_features", "w1", "w2", "w3", "clf_w", "clf_b")


@dataclass
class GcnParameters:
    node_features: np.ndarray  # |E| x dim
    w1: np.ndarray  # dim x hidden
    w2: np.ndarray  # hidden x hidden
    w3: np.ndarray  # hidden x dim
    clf_w: np.ndarray  # 4 * dim
    clf_b: np.ndarray  # shape (1,)

    @property
    def dim(self) -> int:
        return self.w3.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _TENSORS}

    def copy(self) -> GcnParameters:
        return GcnParameters(**{k: v.copy() for k, v in self.tensors().items()})


@dataclass(frozen=True)
class SubgraphEmbedding:
    vector: np.ndarray
    kind: SubgraphKind


def init_parameters(num_entities: int, dim: int = 64, hidden: int = 128, seed: int = 0) -> GcnParameters:
    rng = np.random.default_rng(seed)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return GcnParameters(
        node_features=rng.normal(0.0, 0.1, size=(num_entities, dim)),
        w1=glorot(dim, hidden),
        w2=glorot(hidden, hidden),
        w3=glorot(hidden, dim),
        clf_w=rng.normal(0.0, 0.01, size=4 * dim),
        clf_b=np.zeros(1),
    )


@dataclass
class GraphBatch:
    """Disjoint union of subgraphs: block-diagonal normalised adjacency and mean-pool matrix."""

    node_ids: np.ndarray
    adj: sp.csr_matrix
    pool: sp.csr_matrix
    kinds: list[SubgraphKind] = field(default_factory=list)

    @property
    def num_graphs(self) -> int:
        return self.pool.shape[0]


def _normalized_adjacency(sg: DirectionalSubgraph) -> tuple[list[int], np.ndarray]:
    nodes = sg.nodes()
    local = {e: i for i, e in enumerate(nodes)}
    a = np.eye(len(nodes))
    for h, _, t in sg.triples:
        if h != t:
            a[local[h], local[t]] = a[local[t], local[h]] = 1.0
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return nodes, a * d[:, None] * d[None, :]


def build_batch(subgraphs: Sequence[DirectionalSubgraph]) -> GraphBatch:
    node_ids: list[int] = []
    blocks = []
    rows, cols, vals = [], [], []
    for gi, sg in enumerate(subgraphs):
        nodes, a_hat = _normalized_adjacency(sg)
        offset = len(node_ids)
        node_ids.extend(nodes)
        if nodes:
            blocks.append(a_hat)
            rows.extend([gi] * len(nodes))
            cols.extend(range(offset, offset + len(nodes)))
            vals.extend([1.0 / len(nodes)] * len(nodes))
    n = len(node_ids)
    adj = sp.block_diag(blocks, format="csr") if blocks else sp.csr_matrix((0, 0))
    pool = sp.csr_matrix((vals, (rows, cols)), shape=(len(subgraphs), n))
    return GraphBatch(np.asarray(node_ids, dtype=np.int64), adj, pool, [sg.kind for sg in subgraphs])


def _forward(params: GcnParameters, batch: GraphBatch, relu: bool = True):
    act = (lambda x: np.maximum(x, 0.0)) if relu else (lambda x: x)
    x0 = params.node_features[batch.node_ids]
    a = batch.adj
    ax0 = a @ x0
    p1 = ax0 @ params.w1
    h1 = act(p1)
    ah1 = a @ h1
    p2 = ah1 @ params.w2
    h2 = act(p2)
    ah2 = a @ h2
    h3 = ah2 @ params.w3
    z = batch.pool @ h3
    return z, (ax0, p1, ah1, p2, ah2)


def _backward(params: GcnParameters, batch: GraphBatch, cache, dz: np.ndarray, relu: bool = True):
    ax0, p1, ah1, p2, ah2 = cache
    a = batch.adj
    dh3 = batch.pool.T @ dz
    dw3 = ah2.T @ dh3
    dh2 = a.T @ (dh3 @ params.w3.T)
    dp2 = dh2 * (p2 > 0) if relu else dh2
    dw2 = ah1.T @ dp2
    dh1 = a.T @ (dp2 @ params.w2.T)
    dp1 = dh1 * (p1 > 0) if relu else dh1
    dw1 = ax0.T @ dp1
    dx0 = a.T @ (dp1 @ params.w1.T)
    dfeat = np.zeros_like(params.node_features)
    np.add.at(dfeat, batch.node_ids, dx0)
    return {"node_features": dfeat, "w1": dw1, "w2": dw2, "w3": dw3}


def _check_coverage(params: GcnParameters, subgraphs: Sequence[DirectionalSubgraph]) -> None:
    n = params.node_features.shape[0]
    for sg in subgraphs:
        for e in sg.nodes():
            if not 0 <= e < n:
                raise UnknownEntity(f"entity id {e} has no node feature row")


def encode_batch(params: GcnParameters, subgraphs: Sequence[DirectionalSubgraph], relu: bool = True) -> np.ndarray:
    _check_coverage(params, subgraphs)
    z, _ = _forward(params, build_batch(subgraphs), relu)
    return z


def encode_subgraph(params: GcnParameters, sg: DirectionalSubgraph) -> SubgraphEmbedding:
    """Mean-pooled node states after three graph convolutions; zeros for an empty subgraph."""
    return SubgraphEmbedding(encode_batch(params, [sg])[0], sg.kind)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def classifier_loss_and_grads(
    params: GcnParameters,
    batch: GraphBatch,
    labels: np.ndarray,
    relu: bool = True,
    slots: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Mean binary cross-entropy of the logistic head, label 1 meaning Incorrect.

    ``batch`` holds ``4 * len(labels)`` subgraphs in example-major, ``KINDS``
    order. Returns the loss, gradients for every tensor, and the logits.
    """
    dim = params.dim
    z, cache = _forward(params, batch, relu)
    n = len(labels)
    zc = z.reshape(n, 4 * dim)
    logits = zc @ params.clf_w + params.clf_b[0]
    # softplus(x) - y * x, computed stably
    loss = float(np.mean(np.logaddexp(0.0, logits) - labels * logits))
    dlogits = (_sigmoid(logits) - labels) / n
    grads = _backward(params, batch, cache, np.outer(dlogits, params.clf_w).reshape(z.shape), relu)
    grads["clf_w"] = zc.T @ dlogits
    grads["clf_b"] = np.array([dlogits.sum()])
    return loss, grads, logits


class Adam:
    def __init__(self, params: GcnParameters, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        self.t = 0

    def step(self, params: GcnParameters, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p = getattr(params, name)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch: int = 64
    epochs: int = 100
    hidden: int = 128
    dim: int = 64
    seed: int = 0
    cap: int | None = DEFAULT_CAP


@dataclass
class TrainResult:
    params: GcnParameters
    losses: list[float]
    config: TrainConfig


def example_subgraphs(
    g: KnowledgeGraph, examples: Sequence[LabeledExample], cap: int | None, seed: int
) -> list[list[DirectionalSubgraph]]:
    out = []
    for ex in examples:
        four = extract_all_four(g, ex.triple, cap, seed)
        out.append([four[k] for k in KINDS])
    return out


def _labels(examples: Sequence[LabeledExample]) -> np.ndarray:
    return np.array([1.0 if ex.label is Label.INCORRECT else 0.0 for ex in examples])


def train_encoder(split: DatasetSplit, g: KnowledgeGraph, config: TrainConfig | None = None) -> TrainResult:
    config = config or TrainConfig()
    if not split.train:
        raise ValueError("training split is empty")
    params = init_parameters(g.num_entities, config.dim, config.hidden, config.seed)
    opt = Adam(params, config.lr)
    rng = np.random.default_rng(config.seed)
    subgraphs = example_subgraphs(g, split.train, config.cap, config.seed)
    labels = _labels(split.train)
    n = len(labels)

    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            batch = build_batch([sg for i in idx for sg in subgraphs[i]])
            loss, grads, _ = classifier_loss_and_grads(params, batch, labels[idx])
            opt.step(params, grads)
            total += loss * len(idx)
        losses.append(total / n)
    return TrainResult(params, losses, config)


def predict_proba(
    params: GcnParameters,
    g: KnowledgeGraph,
    examples: Sequence[LabeledExample],
    cap: int | None = DEFAULT_CAP,
    seed: int = 0,
    chunk: int = 256,
) -> np.ndarray:
    """Probability that each example is Incorrect."""
    out = []
    for start in range(0, len(examples), chunk):
        part = examples[start : start + chunk]
        sgs = [sg for four in example_subgraphs(g, part, cap, seed) for sg in four]
        z = encode_batch(params, sgs).reshape(len(part), 4 * params.dim)
        out.append(_sigmoid(z @ params.clf_w + params.clf_b[0]))
    return np.concatenate(out) if out else np.zeros(0)


def accuracy(params: GcnParameters, g: KnowledgeGraph, examples: Sequence[LabeledExample], cap=DEFAULT_CAP, seed=0) -> float:
    if not examples:
        return float("nan")
    pred = predict_proba(params, g, examples, cap, seed) >= 0.5
    return float(np.mean(pred == (_labels(examples) == 1.0)))


def save_checkpoint(path: str | Path, params: GcnParameters, config: TrainConfig | None = None, extra: dict | None = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(config) if config else None,
        "tensors": {
            name: {"shape": list(t.shape), "data": t.ravel(order="C").tolist()} for name, t in params.tensors().items()
        },
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[GcnParameters, TrainConfig | None]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    tensors = {
        name: np.asarray(spec["data"], dtype=np.float64).reshape(spec["shape"]) for name, spec in doc["tensors"].items()
    }
    config = TrainConfig(**doc["config"]) if doc.get("config") else None
    return GcnParameters(**tensors), config
