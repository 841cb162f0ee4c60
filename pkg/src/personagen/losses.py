"""Training objectives: response likelihood, persona sentence matching, and
the persona bag-of-words objective, plus their target constructors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Vocabulary
from .numkit import (
    Tensor,
    as_tensor,
    clip,
    cross_entropy,
    log,
    mean,
    mul,
    scale,
    sigmoid,
    stack,
    sub,
    sum_,
)
from .stopwords import is_stopword

PROB_FLOOR = 1e-12


def jaccard(set1: set, set2: set) -> float:
    """|intersection| / |union|; 0 when both sets are empty."""
    if not set1 and not set2:
        return 0.0
    return len(set1 & set2) / len(set1 | set2)


@dataclass
class PMatchTarget:
    """0-1 labels over persona sentences."""

    labels: np.ndarray

    def any(self) -> bool:
        return bool(self.labels.any())


def p_match_targets(persona_sentences: list[list[str]], response: list[str],
                    threshold: float) -> PMatchTarget:
    """Label sentence i with 1 iff the Jaccard index between its non-stop-word
    token set and the response's reaches ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    response_set = {t for t in response if not is_stopword(t)}
    labels = np.zeros(len(persona_sentences))
    for i, sentence in enumerate(persona_sentences):
        sentence_set = {t for t in sentence if not is_stopword(t)}
        if jaccard(sentence_set, response_set) >= threshold:
            labels[i] = 1.0
    return PMatchTarget(labels)


def p_match_loss(a_s: Tensor, target: PMatchTarget) -> Tensor:
    """-sum_i a_i log a_s_i over the labeled sentences (probabilities floored
    at 1e-12). Zero when no sentence is labeled."""
    a_s = as_tensor(a_s)
    if a_s.shape != target.labels.shape:
        raise ValueError(f"weights have shape {a_s.shape}, labels {target.labels.shape}")
    labeled = np.flatnonzero(target.labels)
    if labeled.size == 0:
        return Tensor(0.0)
    total = cross_entropy(a_s, int(labeled[0]), floor=PROB_FLOOR)
    for i in labeled[1:]:
        total = total + cross_entropy(a_s, int(i), floor=PROB_FLOOR)
    return total


@dataclass
class PBowsTarget:
    """Per-vocabulary-entry weights in {0, 1, 1 + lambda}."""

    weights: np.ndarray


def p_bows_targets(response: list[str], persona_word_set: set[str],
                   vocab: Vocabulary, lam: float) -> PBowsTarget:
    """1 for each non-stop response token's vocabulary slot, raised to
    1 + lambda when the token is persona-based information (a predefined or
    expanded persona word). Out-of-vocabulary tokens set nothing."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    weights = np.zeros(len(vocab))
    for token in response:
        if is_stopword(token):
            continue
        index = vocab.token_to_index.get(token)
        if index is None:
            continue
        weights[index] = 1.0 + lam if token in persona_word_set else 1.0
    return PBowsTarget(weights)


def p_bows_loss(output_activations: Sequence[Tensor], target: PBowsTarget) -> Tensor:
    """Bag-of-words cross entropy on the sigmoid of summed output activations.

    The stated formula is applied literally, including slots whose target is
    1 + lambda, so individual terms can be negative; probabilities are clamped
    to [1e-12, 1 - 1e-12].
    """
    if not output_activations:
        raise ValueError("p_bows_loss needs at least one decode step")
    summed = sum_(stack(output_activations), axis=0)
    if summed.shape != target.weights.shape:
        raise ValueError(f"activations cover {summed.shape}, target {target.weights.shape}")
    probs = clip(sigmoid(summed), PROB_FLOOR, 1.0 - PROB_FLOOR)
    b = Tensor(target.weights)
    positive = mul(b, log(probs))
    negative = mul(sub(1.0, b), log(sub(1.0, probs)))
    return scale(mean(positive + negative), -1.0)


def nll_loss(step_distributions: Sequence[Tensor], targets: Sequence[int]) -> Tensor:
    """Mean negative log probability of the target token at each step."""
    if len(step_distributions) != len(targets):
        raise ValueError("one target per decode step required")
    if not targets:
        raise ValueError("nll_loss needs at least one step")
    steps = [cross_entropy(p, int(t), floor=PROB_FLOOR)
             for p, t in zip(step_distributions, targets)]
    return mean(stack(steps))


def joint_loss(nll, p_match, p_bows, gamma1: float, gamma2: float) -> Tensor:
    """nll + gamma1 * p_match + gamma2 * p_bows."""
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("loss weights must be non-negative")
    return as_tensor(nll) + scale(as_tensor(p_match), gamma1) + scale(as_tensor(p_bows), gamma2)
