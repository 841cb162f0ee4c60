"""Variational topic model over tf-idf conversation vectors.

A diagonal-Gaussian encoder compresses a document vector into a latent of the
same dimension as the topic count; the decoder reconstructs a distribution
over the topic vocabulary through a softmax output layer. After training, the
output layer's weight matrix (topics x vocabulary) is read column-wise as a
topic-space representation for every vocabulary word.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import RESERVED_TOKENS, TfIdfDoc, Vocabulary
from .numkit import (
    AdamState,
    Affine,
    Tape,
    Tensor,
    adam_step,
    backward,
    clip,
    clip_global_norm,
    exp,
    log,
    mul,
    scale,
    softmax,
    softplus,
    sub,
    sum_,
)

PROB_FLOOR = 1e-12


@dataclass
class TopicModel:
    vocab: Vocabulary
    topics: int
    enc_hidden: Affine
    enc_mu: Affine
    enc_logvar: Affine
    dec_hidden: Affine
    dec_out: Affine

    @classmethod
    def create(cls, vocab: Vocabulary, topics: int, hidden: int,
               rng: np.random.Generator, scale: float = 0.05) -> "TopicModel":
        v = len(vocab)
        return cls(
            vocab=vocab,
            topics=topics,
            enc_hidden=Affine(v, hidden, rng, scale),
            enc_mu=Affine(hidden, topics, rng, scale),
            enc_logvar=Affine(hidden, topics, rng, scale),
            dec_hidden=Affine(topics, topics, rng, scale),
            dec_out=Affine(topics, v, rng, scale),
        )

    def named_params(self) -> list[tuple[str, Tensor]]:
        params: list[tuple[str, Tensor]] = []
        for name, layer in (("enc_hidden", self.enc_hidden), ("enc_mu", self.enc_mu),
                            ("enc_logvar", self.enc_logvar), ("dec_hidden", self.dec_hidden),
                            ("dec_out", self.dec_out)):
            params.extend(layer.named_params(name))
        return params

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]


@dataclass
class TopicWordVector:
    token: str
    vector: np.ndarray


def _as_dense_tensor(doc, size: int) -> Tensor:
    if isinstance(doc, Tensor):
        return doc
    if isinstance(doc, TfIdfDoc):
        return Tensor(doc.to_dense(size))
    return Tensor(np.asarray(doc, dtype=np.float64))


def encode(doc, model: TopicModel) -> tuple[Tensor, Tensor, Tensor]:
    """Document vector -> (mu, log variance, encoder hidden)."""
    v = _as_dense_tensor(doc, len(model.vocab))
    h_v = softplus(model.enc_hidden(v))
    return model.enc_mu(h_v), model.enc_logvar(h_v), h_v


def reparameterize(mu: Tensor, logvar: Tensor, eps) -> Tensor:
    """z = mu + exp(logvar / 2) * eps, elementwise."""
    sigma = exp(scale(logvar, 0.5))
    return mu + mul(sigma, eps)


def decode(z, model: TopicModel) -> Tensor:
    """Latent vector -> probability vector over the topic vocabulary."""
    h = softplus(model.dec_hidden(z))
    return softmax(model.dec_out(h), axis=-1)


def elbo_loss(doc, model: TopicModel, eps) -> Tensor:
    """Negative ELBO of one document: reconstruction cross-entropy (tf-idf
    weights as soft counts) plus the closed-form Gaussian KL to N(0, I)."""
    v = _as_dense_tensor(doc, len(model.vocab))
    mu, logvar, _ = encode(v, model)
    z = reparameterize(mu, logvar, eps)
    recon_probs = decode(z, model)
    log_probs = log(clip(recon_probs, PROB_FLOOR, 1.0))
    recon = scale(sum_(mul(v, log_probs)), -1.0)
    kl = scale(sum_(sub(mul(mu, mu) + exp(logvar), logvar) - 1.0), 0.5)
    return recon + kl


def _batch_loss(model: TopicModel, dense: np.ndarray, eps: np.ndarray) -> Tensor:
    """Mean negative ELBO over a (batch, vocab) matrix, one eps row per doc."""
    v = Tensor(dense)
    h = softplus(model.enc_hidden(v))
    mu = model.enc_mu(h)
    logvar = model.enc_logvar(h)
    z = mu + mul(exp(scale(logvar, 0.5)), Tensor(eps))
    probs = softmax(model.dec_out(softplus(model.dec_hidden(z))), axis=-1)
    recon = scale(sum_(mul(v, log(clip(probs, PROB_FLOOR, 1.0)))), -1.0)
    kl = scale(sum_(sub(mul(mu, mu) + exp(logvar), logvar) - 1.0), 0.5)
    return scale(recon + kl, 1.0 / dense.shape[0])


@dataclass
class TopicTrainConfig:
    topics: int = 50
    hidden: int = 256
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3
    grad_clip: float = 5.0
    seed: int = 0
    init_scale: float = 0.05


def train_topic_model(docs: list[TfIdfDoc], vocab: Vocabulary,
                      config: TopicTrainConfig = TopicTrainConfig(),
                      model: TopicModel | None = None,
                      ) -> tuple[TopicModel, list[tuple[int, float]]]:
    """Minimize mean negative ELBO with Adam over shuffled mini-batches.

    Returns the trained model and a per-epoch (epoch, mean loss) trace. All
    randomness (init, shuffling, latent noise) flows from the config seed, so
    two runs with the same seed produce identical traces.
    """
    if not docs:
        raise ValueError("train_topic_model needs at least one document")
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = TopicModel.create(vocab, config.topics, config.hidden, rng, config.init_scale)
    params = model.params()
    state = AdamState.create(params, lr=config.lr)
    size = len(vocab)
    dense_all = np.stack([d.to_dense(size) for d in docs])

    trace: list[tuple[int, float]] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(docs))
        total = 0.0
        for start in range(0, len(docs), config.batch_size):
            batch = order[start:start + config.batch_size]
            eps = rng.standard_normal((len(batch), model.topics))
            try:
                with Tape() as tape:
                    loss = _batch_loss(model, dense_all[batch], eps)
                grad_map = backward(loss, tape)
            except FloatingPointError as err:
                raise RuntimeError(
                    f"non-finite topic loss at epoch {epoch}, batch starting {start}: {err}") from err
            grads = [grad_map.get(p, np.zeros_like(p.data)) for p in params]
            clip_global_norm(grads, config.grad_clip)
            adam_step(params, grads, state)
            total += loss.item() * len(batch)
        trace.append((epoch, total / len(docs)))
    return model, trace


def word_topic_vectors(model: TopicModel) -> dict[str, TopicWordVector]:
    """Column of the decoder output weights for every non-reserved token."""
    weight = model.dec_out.w.data  # (topics, vocab)
    vectors = {}
    for index in range(len(RESERVED_TOKENS), len(model.vocab)):
        token = model.vocab.token(index)
        vectors[token] = TopicWordVector(token, weight[:, index].copy())
    return vectors


def top_topic_words(model: TopicModel, count: int) -> list[list[str]]:
    """Highest-weight vocabulary words per topic (reserved slots excluded)."""
    weight = model.dec_out.w.data
    start = len(RESERVED_TOKENS)
    result = []
    for k in range(model.topics):
        row = weight[k, start:]
        order = np.argsort(-row)[:count]
        result.append([model.vocab.token(start + int(i)) for i in order])
    return result
