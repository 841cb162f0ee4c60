"""Persona word expansion: extend a dialogue's persona vocabulary with
topically related external words via cosine similarity in topic space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .corpus import DialogueExample
from .stopwords import is_stopword
from .topic import TopicWordVector


@dataclass
class ExpansionResult:
    """Scored external words for one dialogue, best first."""

    words: list[tuple[str, float]]
    source: int | None = None

    def tokens(self) -> list[str]:
        return [token for token, _ in self.words]


def persona_vocab(example: DialogueExample, topic_vocab) -> set[str]:
    """Non-stop-word persona tokens that also occur in the topic vocabulary.

    ``topic_vocab`` may be anything supporting ``in`` over tokens (a
    Vocabulary, a word-vector mapping, or a plain set).
    """
    result = set()
    for sentence in example.persona_sentences:
        for token in sentence:
            if not is_stopword(token) and token in topic_vocab:
                result.add(token)
    return result


def cosine(u1: np.ndarray, u2: np.ndarray) -> float:
    """Standard cosine similarity; defined as 0 when either vector is zero."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if u1.shape != u2.shape:
        raise ValueError(f"cosine needs equal dims, got {u1.shape} vs {u2.shape}")
    n1 = float(np.linalg.norm(u1))
    n2 = float(np.linalg.norm(u2))
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(np.dot(u1, u2) / (n1 * n2))


def _vector(entry) -> np.ndarray:
    return entry.vector if isinstance(entry, TopicWordVector) else np.asarray(entry)


def nearest_words(word: str, vectors: Mapping[str, TopicWordVector], m: int,
                  exclude: set[str] = frozenset()) -> list[tuple[str, float]]:
    """Top-m tokens by cosine similarity to ``word`` in topic space.

    The word itself and everything in ``exclude`` are never returned. Ties
    break by score descending then token ascending.
    """
    if word not in vectors:
        raise KeyError(f"{word!r} is not in the topic vocabulary")
    seed = _vector(vectors[word])
    scored = []
    for token, entry in vectors.items():
        if token == word or token in exclude:
            continue
        scored.append((token, cosine(seed, _vector(entry))))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:m]


def expand(example: DialogueExample, vectors: Mapping[str, TopicWordVector],
           m: int, n_w: int, source: int | None = None) -> ExpansionResult:
    """Union of each persona word's m nearest external words, deduplicated by
    keeping the highest score, sorted by score, truncated to n_w."""
    seeds = persona_vocab(example, vectors)
    best: dict[str, float] = {}
    for seed in sorted(seeds):
        for token, score in nearest_words(seed, vectors, m, exclude=seeds):
            if token not in best or score > best[token]:
                best[token] = score
    ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))
    return ExpansionResult(words=ranked[:max(0, n_w)], source=source)
