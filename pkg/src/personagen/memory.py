"""Key-value memories and every retrieval procedure used by the model:
plain attention reads, history-chained persona sentence retrieval, and
mutual-reinforcement multi-hop reads over the two persona word memories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .numkit import Tensor, matmul, softmax, stack, zeros


@dataclass
class KeyValueMemory:
    """Parallel key and value matrices; rows are slots.

    ``keys`` is (n, key_dim) and ``values`` is (n, value_dim); both are None
    for an empty memory, which still carries its dimensions so reads can
    return a zero vector of the right size.
    """

    keys: Tensor | None
    values: Tensor | None
    key_dim: int
    value_dim: int

    @classmethod
    def empty(cls, key_dim: int, value_dim: int) -> "KeyValueMemory":
        return cls(None, None, key_dim, value_dim)

    @property
    def slots(self) -> int:
        return 0 if self.keys is None else self.keys.shape[0]


def build_memory(representations: Sequence[Tensor],
                 key_mlp: Callable[[Tensor], Tensor],
                 value_mlp: Callable[[Tensor], Tensor],
                 key_dim: int | None = None,
                 value_dim: int | None = None) -> KeyValueMemory:
    """Map each representation through the key and value networks.

    ``key_dim``/``value_dim`` are only needed for the empty-input case (they
    are otherwise inferred from the first outputs, or from ``out_dim``
    attributes when the callables expose one).
    """
    if not representations:
        kd = key_dim if key_dim is not None else getattr(key_mlp, "out_dim", None)
        vd = value_dim if value_dim is not None else getattr(value_mlp, "out_dim", None)
        if kd is None or vd is None:
            raise ValueError("empty build_memory needs explicit key_dim/value_dim")
        return KeyValueMemory.empty(kd, vd)
    keys = [key_mlp(rep) for rep in representations]
    values = [value_mlp(rep) for rep in representations]
    key_mat = stack(keys)
    value_mat = stack(values)
    return KeyValueMemory(key_mat, value_mat, key_mat.shape[1], value_mat.shape[1])


def retrieve(query: Tensor, mem: KeyValueMemory) -> Tensor:
    """Attention read: softmax(keys @ query) weighted sum of values.

    An empty memory reads as a zero vector so downstream additive updates are
    unaffected.
    """
    out, _ = retrieve_with_weights(query, mem)
    return out


def retrieve_with_weights(query: Tensor, mem: KeyValueMemory) -> tuple[Tensor, Tensor | None]:
    if query.shape != (mem.key_dim,):
        raise ValueError(f"query has shape {query.shape}, memory keys have dim {mem.key_dim}")
    if mem.slots == 0:
        return zeros(mem.value_dim), None
    scores = matmul(mem.keys, query)          # (n,)
    weights = softmax(scores, axis=-1)        # (n,)
    return matmul(weights, mem.values), weights


@dataclass
class PirTrace:
    """Per-step record of the history-driven persona sentence retrieval."""

    queries: list[Tensor] = field(default_factory=list)
    outputs: list[Tensor] = field(default_factory=list)
    weights: list[Tensor] = field(default_factory=list)

    @property
    def last_weights(self) -> Tensor:
        return self.weights[-1]


def persona_information_retrieval(history_vectors: Sequence[Tensor],
                                  mem_s: KeyValueMemory) -> tuple[Tensor, PirTrace]:
    """Chained retrieval over the persona sentence memory.

    Step i queries with the i-th history vector plus the previous step's
    output (the first step uses the history vector alone); returns the final
    output and the full trace, whose last-step weights feed the sentence
    matching loss.
    """
    if not history_vectors:
        raise ValueError("persona_information_retrieval needs at least one history vector")
    if mem_s.slots == 0:
        raise ValueError("persona sentence memory is empty")
    trace = PirTrace()
    output: Tensor | None = None
    for i, c in enumerate(history_vectors):
        query = c if i == 0 else c + output
        output, weights = retrieve_with_weights(query, mem_s)
        trace.queries.append(query)
        trace.outputs.append(output)
        trace.weights.append(weights)
    return output, trace


@dataclass
class MultihopResult:
    """Final-hop reads and query of the mutual-reinforcement retrieval."""

    o_w: Tensor
    o_e: Tensor
    query: Tensor
    w_weights: list[Tensor | None] = field(default_factory=list)
    e_weights: list[Tensor | None] = field(default_factory=list)


def multihop(q0: Tensor, mem_w: KeyValueMemory, mem_e: KeyValueMemory,
             hops: int) -> MultihopResult:
    """Alternating reads from the two persona word memories.

    Each hop reads both memories with the shared query, then adds both
    outputs back into the query so the two retrievals influence each other on
    the next hop. Requires at least one hop.
    """
    if hops < 1:
        raise ValueError("multihop needs at least one hop")
    if mem_w.key_dim != mem_e.key_dim or mem_w.value_dim != mem_e.value_dim:
        raise ValueError("both memories must share key/value dimensions")
    query = q0
    o_w = o_e = None
    w_weights: list[Tensor | None] = []
    e_weights: list[Tensor | None] = []
    for _ in range(hops):
        o_w, ww = retrieve_with_weights(query, mem_w)
        o_e, ew = retrieve_with_weights(query, mem_e)
        w_weights.append(ww)
        e_weights.append(ew)
        query = query + o_w + o_e
    return MultihopResult(o_w, o_e, query, w_weights, e_weights)
