"""Shared fixtures: a small Persona-Chat-format file, toy embeddings, and
plain-numpy oracle implementations used to cross-check the tensor code."""

from __future__ import annotations

import numpy as np
import pytest

SAMPLE_CHAT = """\
1 your persona: i like music.
2 your persona: i like to skateboard.
3 your persona: i like the guitar.
4 your persona: i am a vegan.
5 wanna come over and watch the godfather?\ti do not have a car, i have a skateboard.
6 you can skateboard over. i do not live too far. i have candy and soda to share.\tno thanks, i do not eat any animal products.
7 i promise there are no animal products in my candy and soda.\tmost candy has some form of dairy. as a vegan i can not have that.
"""


@pytest.fixture
def sample_chat_file(tmp_path):
    path = tmp_path / "sample_chat.txt"
    path.write_text(SAMPLE_CHAT, encoding="utf-8")
    return path


def make_cluster_corpus(seed: int = 1234, n_docs: int = 200, cluster_size: int = 25,
                        words_per_doc: int = 20):
    """Two disjoint word clusters; even docs draw from red*, odd from blue*."""
    rng = np.random.default_rng(seed)
    cluster_a = [f"red{i:02d}" for i in range(cluster_size)]
    cluster_b = [f"blue{i:02d}" for i in range(cluster_size)]
    docs = []
    for i in range(n_docs):
        words = cluster_a if i % 2 == 0 else cluster_b
        docs.append([str(w) for w in rng.choice(words, size=words_per_doc)])
    return docs, cluster_a, cluster_b


@pytest.fixture(scope="session")
def cluster_topic_model():
    """Topic model trained on the synthetic 2-cluster corpus (shared: the
    training run is deterministic and takes well under a second)."""
    import time

    from personagen.corpus import build_vocab, compute_tfidf
    from personagen.topic import TopicTrainConfig, train_topic_model

    started = time.time()
    docs_tokens, cluster_a, cluster_b = make_cluster_corpus()
    vocab = build_vocab(docs_tokens, size_limit=54, remove_stopwords=True)
    docs = compute_tfidf(docs_tokens, vocab)
    config = TopicTrainConfig(topics=2, hidden=32, epochs=40, batch_size=50, lr=1e-2, seed=7)
    model, trace = train_topic_model(docs, vocab, config)
    return {
        "model": model,
        "trace": trace,
        "vocab": vocab,
        "docs": docs,
        "cluster_a": cluster_a,
        "cluster_b": cluster_b,
        "train_seconds": time.time() - started,
    }


TOY_THEMES = [
    ("guitar", "drums"),
    ("salad", "tofu"),
    ("skating", "ramps"),
    ("novels", "poems"),
    ("roses", "tulips"),
    ("soccer", "goals"),
    ("painting", "brushes"),
    ("espresso", "beans"),
]


def toy_dialogue_text() -> str:
    """Eight two-exchange dialogues whose responses reuse persona words, in
    the line-numbered dialogue file format."""
    lines = []
    for theme, side in TOY_THEMES:
        lines.append(f"1 your persona: i love {theme}.")
        lines.append(f"2 your persona: my buddy makes {side} all day.")
        lines.append("3 your persona: i work at the corner store.")
        lines.append(f"4 what do you like?\ti love {theme}.")
        lines.append(f"5 tell me more.\tmy {theme} makes me happy.")
    return "\n".join(lines) + "\n"


def toy_expansions() -> dict[int, list[str]]:
    """Hand-built expansion records: the dialogue's side word plus the next
    theme's word (all guaranteed in-vocabulary)."""
    records = {}
    for i, (_, side) in enumerate(TOY_THEMES):
        records[i] = [side, TOY_THEMES[(i + 1) % len(TOY_THEMES)][0]]
    return records


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("toy") / "dialogues.txt"
    path.write_text(toy_dialogue_text(), encoding="utf-8")
    return path


@pytest.fixture
def tiny_embeddings_file(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text(
        "music 1.0 0.0 0.5\n"
        "guitar 0.9 0.1 0.4\n"
        "vegan 0.0 1.0 0.2\n"
        "candy 0.1 0.9 0.1\n",
        encoding="utf-8",
    )
    return path


# ---------------------------------------------------------------------------
# straight-line numpy oracles (independent of the tensor code paths)
# ---------------------------------------------------------------------------


def np_sigmoid(v):
    return 1.0 / (1.0 + np.exp(-np.asarray(v, dtype=np.float64)))


def np_softmax(v):
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


def np_gru_step(x, h, p):
    x = np.asarray(x)
    h = np.asarray(h)
    z = np_sigmoid(x @ p.w_z.data + h @ p.u_z.data + p.b_z.data)
    r = np_sigmoid(x @ p.w_r.data + h @ p.u_r.data + p.b_r.data)
    n = np.tanh(x @ p.w_n.data + (r * h) @ p.u_n.data + p.b_n.data)
    return (1.0 - z) * h + z * n


def np_bigru(seq, fwd, bwd):
    seq = [np.asarray(x) for x in seq]
    h = np.zeros(fwd.hidden_dim)
    fwd_states = []
    for x in seq:
        h = np_gru_step(x, h, fwd)
        fwd_states.append(h)
    h = np.zeros(bwd.hidden_dim)
    bwd_states = [None] * len(seq)
    for t in reversed(range(len(seq))):
        h = np_gru_step(seq[t], h, bwd)
        bwd_states[t] = h
    steps = [np.concatenate([f, b]) for f, b in zip(fwd_states, bwd_states)]
    final = np.concatenate([fwd_states[-1], bwd_states[0]])
    return steps, final


def np_affine(x, layer):
    return np.asarray(x) @ layer.w.data + layer.b.data


def np_tanh_mlp(x, mlp):
    return np.tanh(np_affine(x, mlp.affine))


def np_retrieve(q, keys, values):
    scores = np.asarray(keys) @ np.asarray(q)
    weights = np_softmax(scores)
    return weights @ np.asarray(values), weights
