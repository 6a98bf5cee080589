"""Embedding fusion, instruction-tuning sequences and their token-level NLL."""

from __future__ import annotations

import hashlib
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from ..errors import EmptyInstruction, ZeroProbabilityToken
from .gcn import SubgraphEmbedding


@dataclass(frozen=True)
class TextEmbedding:
    vector: np.ndarray


@dataclass(frozen=True)
class FusedEmbedding:
    vector: np.ndarray
    graph_dim: int


def fuse(z: SubgraphEmbedding | np.ndarray, e_text: TextEmbedding | np.ndarray) -> FusedEmbedding:
    """Concatenate ``[z ; e_text]``, graph part first."""
    zv = np.asarray(z.vector if isinstance(z, SubgraphEmbedding) else z, dtype=np.float64).ravel()
    tv = np.asarray(e_text.vector if isinstance(e_text, TextEmbedding) else e_text, dtype=np.float64).ravel()
    return FusedEmbedding(np.concatenate([zv, tv]), len(zv))


def hashed_text_embedding(text: str, dim: int = 128) -> TextEmbedding:
    """Signed feature-hashing bag of lowercase word tokens, L2-normalised.

    A stand-in text encoder for desk runs where no LLM embedding is available.
    """
    v = np.zeros(dim)
    for tok in re.findall(r"\w+", text.lower()):
        digest = hashlib.blake2b(tok.encode(), digest_size=8).digest()
        h = int.from_bytes(digest, "little")
        v[h % dim] += 1.0 if (h >> 63) & 1 else -1.0
    norm = np.linalg.norm(v)
    return TextEmbedding(v / norm if norm > 0 else v)


@dataclass(frozen=True)
class TrainingSequence:
    instruction_tokens: tuple[int, ...]
    conditioning: FusedEmbedding
    answer_tokens: tuple[int, ...] = field(default=())

    @property
    def full(self) -> tuple[int, ...]:
        return self.instruction_tokens + self.answer_tokens

    def __len__(self) -> int:
        return len(self.instruction_tokens) + len(self.answer_tokens)


def assemble_training_sequence(
    instruction: Sequence[int], e_concat: FusedEmbedding, answer: Sequence[int] = ()
) -> TrainingSequence:
    """Instruction tokens, then answer tokens; the fused embedding rides alongside as conditioning."""
    if len(instruction) == 0:
        raise EmptyInstruction("instruction must contain at least one token")
    return TrainingSequence(tuple(int(t) for t in instruction), e_concat, tuple(int(t) for t in answer))


@runtime_checkable
class TokenProbabilityModel(Protocol):
    vocab_size: int

    def probabilities(self, prefix: Sequence[int], conditioning: np.ndarray) -> np.ndarray:
        """Next-token distribution over the vocabulary."""
        ...


def instruction_tuning_loss(model: TokenProbabilityModel, seq: TrainingSequence) -> float:
    """Mean negative log-probability over every token of the full sequence."""
    tokens = seq.full
    cond = seq.conditioning.vector
    total = 0.0
    for i, tok in enumerate(tokens):
        if not 0 <= tok < model.vocab_size:
            raise ValueError(f"token {tok} outside vocabulary of size {model.vocab_size}")
        p = float(model.probabilities(tokens[:i], cond)[tok])
        if p <= 0.0:
            raise ZeroProbabilityToken(i, tok)
        total -= math.log(p)
    return total / len(tokens)


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


class UniformModel:
    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def probabilities(self, prefix, conditioning) -> np.ndarray:
        return np.full(self.vocab_size, 1.0 / self.vocab_size)


class ToyConditionedModel:
    """Bilinear-softmax language model conditioned on a fused embedding.

    The prefix state is the mean input embedding of the tokens seen so far
    (zeros before the first token). With ``x = [prefix_state ; conditioning]``
    the next-token logits are ``out_emb @ (mix @ x) + bias``.
    """

    def __init__(
        self,
        vocab_size: int,
        token_dim: int,
        cond_dim: int,
        seed: int = 0,
        scale: float = 0.5,
    ):
        rng = np.random.default_rng(seed)
        self.vocab_size = vocab_size
        self.token_dim = token_dim
        self.cond_dim = cond_dim
        self.in_emb = rng.normal(0.0, scale, size=(vocab_size, token_dim))
        self.out_emb = rng.normal(0.0, scale, size=(vocab_size, token_dim))
        self.mix = rng.normal(0.0, scale, size=(token_dim, token_dim + cond_dim))
        self.bias = np.zeros(vocab_size)

    def params(self) -> dict[str, np.ndarray]:
        return {"in_emb": self.in_emb, "out_emb": self.out_emb, "mix": self.mix, "bias": self.bias}

    def _prefix_state(self, prefix: Sequence[int]) -> np.ndarray:
        if len(prefix) == 0:
            return np.zeros(self.token_dim)
        return self.in_emb[list(prefix)].mean(axis=0)

    def _logits(self, prefix: Sequence[int], conditioning: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.concatenate([self._prefix_state(prefix), np.asarray(conditioning, dtype=np.float64)])
        u = self.mix @ x
        return self.out_emb @ u + self.bias, u, x

    def probabilities(self, prefix: Sequence[int], conditioning: np.ndarray) -> np.ndarray:
        return _softmax(self._logits(prefix, conditioning)[0])

    def loss_and_grads(self, seq: TrainingSequence) -> tuple[float, dict[str, np.ndarray]]:
        """Same value as :func:`instruction_tuning_loss`, plus analytic parameter gradients."""
        tokens = seq.full
        n = len(tokens)
        cond = seq.conditioning.vector
        grads = {k: np.zeros_like(v) for k, v in self.params().items()}
        loss = 0.0
        for i, tok in enumerate(tokens):
            logits, u, x = self._logits(tokens[:i], cond)
            p = _softmax(logits)
            loss -= math.log(p[tok])
            dlogits = p.copy()
            dlogits[tok] -= 1.0
            dlogits /= n
            grads["bias"] += dlogits
            grads["out_emb"] += np.outer(dlogits, u)
            du = self.out_emb.T @ dlogits
            grads["mix"] += np.outer(du, x)
            if i > 0:
                dstate = (self.mix.T @ du)[: self.token_dim] / i
                np.add.at(grads["in_emb"], list(tokens[:i]), dstate)
        return loss / n, grads
