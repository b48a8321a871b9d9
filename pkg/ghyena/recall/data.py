"""Geometric associative recall: vocabularies, sequences and positional features.

A sequence of even length n holds (n - 2) / 2 consecutive (key, value) bigrams, one filler
value token and the query. The query copies the key of a bigram that occurs in the prefix
and the target is that bigram's value.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ghyena.core.config import settings
from ghyena.core.errors import GHyenaError
from ghyena.nn.geometry import check_rotation

POS_DIM = 16


@dataclass(frozen=True)
class AssocRecallVocab:
    keys: np.ndarray  # (V, 3)
    values: np.ndarray  # (V, 3)

    @property
    def size(self) -> int:
        return self.keys.shape[0]


@dataclass
class AssocRecallInstance:
    tokens: np.ndarray  # (N, 3)
    target: np.ndarray  # (3,)
    pos_features: np.ndarray = field(default=None)  # (N, 16)

    def __post_init__(self) -> None:
        self.tokens = np.asarray(self.tokens, dtype=float)
        self.target = np.asarray(self.target, dtype=float).reshape(3)
        if self.pos_features is None:
            self.pos_features = positional_encoding(self.n)

    @property
    def n(self) -> int:
        return self.tokens.shape[0]


def _directions(rng: np.random.Generator, count: int) -> np.ndarray:
    d = rng.normal(size=(count, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def gen_vocab(v: int, rng: np.random.Generator) -> AssocRecallVocab:
    """``v`` bigrams with isotropic directions and magnitudes uniform in [1, v]."""
    if v < 1:
        raise GHyenaError("vocabulary size must be at least 1")
    keys = _directions(rng, v) * rng.uniform(1.0, v, size=(v, 1))
    values = _directions(rng, v) * rng.uniform(1.0, v, size=(v, 1))
    return AssocRecallVocab(keys=keys, values=values)


def gen_sequence(vocab: AssocRecallVocab, n: int, rng: np.random.Generator) -> AssocRecallInstance:
    if n < 4 or n % 2:
        raise GHyenaError(f"sequence length must be even and at least 4, got {n}")
    pairs = (n - 2) // 2
    picks = rng.integers(0, vocab.size, size=pairs)
    filler = rng.integers(0, vocab.size)
    present = np.unique(picks)
    query = present[rng.integers(0, present.size)]

    tokens = np.empty((n, 3))
    tokens[0:2 * pairs:2] = vocab.keys[picks]
    tokens[1:2 * pairs:2] = vocab.values[picks]
    tokens[n - 2] = vocab.values[filler]
    tokens[n - 1] = vocab.keys[query]
    return AssocRecallInstance(tokens=tokens, target=vocab.values[query].copy())


def positional_encoding(n: int, dim: int = POS_DIM) -> np.ndarray:
    """Sinusoidal features: ``pe[i, 2c] = sin(i / 10000^(2c/dim))`` and cos at ``2c + 1``."""
    if dim % 2:
        raise GHyenaError(f"positional encoding width must be even, got {dim}")
    pos = np.arange(n, dtype=float)[:, None]
    freq = np.power(10000.0, -np.arange(0, dim, 2, dtype=float) / dim)
    pe = np.empty((n, dim))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe


def rotate_instance(instance: AssocRecallInstance, r: np.ndarray) -> AssocRecallInstance:
    r = check_rotation(r)
    return AssocRecallInstance(tokens=instance.tokens @ r.T, target=r @ instance.target,
                               pos_features=instance.pos_features)


def instance_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def generate_instance(vocab_size: int, n: int, seed: int, stream: int, index: int) -> AssocRecallInstance:
    """One sequence from its own fresh vocabulary."""
    rng = instance_rng(seed, stream, index)
    return gen_sequence(gen_vocab(vocab_size, rng), n, rng)


def generate_dataset(
    count: int,
    vocab_size: int,
    n: int,
    seed: int,
    stream: int,
    threads: Optional[int] = None,
    start: int = 0,
) -> List[AssocRecallInstance]:
    """``count`` instances; instance i depends only on (seed, stream, start + i)."""
    threads = threads or settings.THREADS
    indices = range(start, start + count)
    if threads <= 1 or count < 2:
        return [generate_instance(vocab_size, n, seed, stream, i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: generate_instance(vocab_size, n, seed, stream, i), indices))


def check_instance(instance: AssocRecallInstance) -> bool:
    """Query equals an earlier bigram key and the target equals that bigram's value."""
    n = instance.n
    pairs = (n - 2) // 2
    keys = instance.tokens[0:2 * pairs:2]
    values = instance.tokens[1:2 * pairs:2]
    hits = np.all(keys == instance.tokens[n - 1], axis=1)
    return bool(n % 2 == 0 and hits.any() and np.all(values[hits] == instance.target))


def stack_targets(instances: Sequence[AssocRecallInstance]) -> np.ndarray:
    return np.stack([inst.target for inst in instances])


# Stream ids for the split generators.
STREAMS = {"train": 0, "val": 1, "test": 2}
