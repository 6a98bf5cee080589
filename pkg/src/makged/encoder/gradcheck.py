"""Central-difference verification of the encoder and language-model gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from ..subgraphs import KINDS, DirectionalSubgraph
from .gcn import GcnParameters, build_batch, classifier_loss_and_grads, encode_subgraph
from .lm import ToyConditionedModel, TrainingSequence, assemble_training_sequence, fuse, hashed_text_embedding

# denominators below this are treated as absolute error
REL_FLOOR = 1e-6


def _probe_indices(shape, rows: list[int] | None, max_checks: int | None, rng) -> list[tuple[int, ...]]:
    if rows is not None:
        cand = [(r, c) for r in rows for c in range(shape[1])]
    else:
        cand = list(np.ndindex(*shape))
    if max_checks is not None and len(cand) > max_checks:
        pick = rng.choice(len(cand), size=max_checks, replace=False)
        cand = [cand[i] for i in sorted(pick)]
    return cand


def _pairs(
    tensors: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    loss_fn: Callable[[], float],
    epsilon: float,
    max_checks: int | None,
    seed: int,
    rows: dict[str, list[int]] | None = None,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    rng = np.random.default_rng(seed)
    out = {}
    for name, t in tensors.items():
        idx = _probe_indices(t.shape, (rows or {}).get(name), max_checks, rng)
        a_vals, n_vals = [], []
        for ix in idx:
            old = t[ix]
            t[ix] = old + epsilon
            up = loss_fn()
            t[ix] = old - epsilon
            down = loss_fn()
            t[ix] = old
            n_vals.append((up - down) / (2 * epsilon))
            a_vals.append(analytic[name][ix])
        out[name] = (np.asarray(a_vals), np.asarray(n_vals))
    return out


def max_relative_error(pairs: dict[str, tuple[np.ndarray, np.ndarray]]) -> float:
    worst = 0.0
    for a, n in pairs.values():
        if a.size == 0:
            continue
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gcn_gradient_pairs(
    params: GcnParameters,
    sg: DirectionalSubgraph,
    epsilon: float = 1e-5,
    label: float = 1.0,
    relu: bool = True,
    max_checks: int | None = 40,
    seed: int = 0,
):
    """(analytic, numeric) gradient samples of the BCE loss with ``sg`` in its kind's slot."""
    slots = [sg if k is sg.kind else DirectionalSubgraph(k, sg.center, sg.target, ()) for k in KINDS]
    batch = build_batch(slots)
    labels = np.array([label])
    _, grads, _ = classifier_loss_and_grads(params, batch, labels, relu)

    def loss_fn() -> float:
        return classifier_loss_and_grads(params, batch, labels, relu)[0]

    rows = {"node_features": sg.nodes()}
    return _pairs(params.tensors(), grads, loss_fn, epsilon, max_checks, seed, rows)


def gcn_gradient_check(params, sg, epsilon=1e-5, **kw) -> float:
    return max_relative_error(gcn_gradient_pairs(params, sg, epsilon, **kw))


def lm_gradient_pairs(model: ToyConditionedModel, seq: TrainingSequence, epsilon: float = 1e-5, max_checks: int | None = 40, seed: int = 0):
    _, grads = model.loss_and_grads(seq)
    return _pairs(model.params(), grads, lambda: model.loss_and_grads(seq)[0], epsilon, max_checks, seed)


def lm_gradient_check(model, seq, epsilon=1e-5, **kw) -> float:
    return max_relative_error(lm_gradient_pairs(model, seq, epsilon, **kw))


def gradient_oracle_check(
    params: GcnParameters,
    sg: DirectionalSubgraph,
    epsilon: float = 1e-5,
    model: ToyConditionedModel | None = None,
    seq: TrainingSequence | None = None,
    seed: int = 0,
    max_checks: int | None = 40,
) -> float:
    """Worst relative error over both gradient paths.

    Without an explicit model/sequence, a small toy model is conditioned on
    the fused embedding of ``sg`` and a hashed text embedding.
    """
    gcn_err = gcn_gradient_check(params, sg, epsilon, max_checks=max_checks, seed=seed)
    if seq is None:
        z = encode_subgraph(params, sg)
        cond = fuse(z, hashed_text_embedding(f"subgraph {sg.kind.value}", 8))
        rng = np.random.default_rng(seed)
        seq = assemble_training_sequence(rng.integers(0, 12, size=5).tolist(), cond, rng.integers(0, 12, size=2).tolist())
    if model is None:
        model = ToyConditionedModel(12, 6, len(seq.conditioning.vector), seed=seed)
    lm_err = lm_gradient_check(model, seq, epsilon, max_checks=max_checks, seed=seed)
    return max(gcn_err, lm_err)
