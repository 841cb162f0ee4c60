"""Teacher-forced joint training loop for the dialogue model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net import BoundExample, DialogueModel, LossSettings
from .numkit import AdamState, Tape, adam_step, backward, clip_global_norm, mean, stack


@dataclass
class TrainSettings:
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-4
    grad_clip: float = 5.0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_nll: float
    valid_loss: float | None = None


@dataclass
class TrainResult:
    trace: list[EpochRecord] = field(default_factory=list)
    best_valid: float | None = None
    best_params: dict[str, np.ndarray] | None = None


def evaluate_loss(model: DialogueModel, examples: list[BoundExample],
                  settings: LossSettings) -> tuple[float, float]:
    """Mean (joint, nll) loss over examples with no recording."""
    if not examples:
        return 0.0, 0.0
    joint = 0.0
    nll = 0.0
    for bound in examples:
        parts = model.example_loss(bound, settings)
        joint += parts.joint.item()
        nll += parts.nll.item()
    return joint / len(examples), nll / len(examples)


def train_dialogue_model(model: DialogueModel, train_examples: list[BoundExample],
                         valid_examples: list[BoundExample] | None,
                         loss_settings: LossSettings, train_settings: TrainSettings,
                         rng: np.random.Generator,
                         log=None) -> TrainResult:
    """Run Adam over shuffled mini-batches of the joint loss.

    The batch loss is the mean of per-example joint losses; gradients are
    clipped to a global norm before each update. Validation (when provided)
    runs after every epoch and the best parameter snapshot is kept. A
    non-finite loss aborts with the batch id and component losses.
    """
    if not train_examples:
        raise ValueError("no training examples")
    params = model.params()
    names = [name for name, _ in model.named_params()]
    state = AdamState.create(params, lr=train_settings.lr)
    result = TrainResult()

    for epoch in range(1, train_settings.epochs + 1):
        order = rng.permutation(len(train_examples))
        epoch_joint = 0.0
        epoch_nll = 0.0
        for batch_id, start in enumerate(range(0, len(order), train_settings.batch_size)):
            batch = [train_examples[i] for i in order[start:start + train_settings.batch_size]]
            try:
                with Tape() as tape:
                    parts = [model.example_loss(b, loss_settings) for b in batch]
                    batch_loss = mean(stack([p.joint for p in parts]))
                grad_map = backward(batch_loss, tape)
            except FloatingPointError as err:
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {batch_id}: {err}") from err
            if not np.isfinite(batch_loss.item()):
                components = [(p.nll.item(), p.p_match.item(), p.p_bows.item()) for p in parts]
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {batch_id} (components: {components})")
            grads = [grad_map.get(p, np.zeros_like(p.data)) for p in params]
            clip_global_norm(grads, train_settings.grad_clip)
            adam_step(params, grads, state)
            epoch_joint += batch_loss.item() * len(batch)
            epoch_nll += float(np.mean([p.nll.item() for p in parts])) * len(batch)

        record = EpochRecord(
            epoch=epoch,
            train_loss=epoch_joint / len(train_examples),
            train_nll=epoch_nll / len(train_examples),
        )
        if valid_examples:
            record.valid_loss, _ = evaluate_loss(model, valid_examples, loss_settings)
            if result.best_valid is None or record.valid_loss < result.best_valid:
                result.best_valid = record.valid_loss
                result.best_params = {name: p.data.copy() for name, p in zip(names, params)}
        result.trace.append(record)
        if log is not None:
            log(record)

    if result.best_params is None:
        result.best_params = {name: p.data.copy() for name, p in zip(names, params)}
    return result


def restore_params(model: DialogueModel, snapshot: dict[str, np.ndarray]) -> None:
    for name, tensor in model.named_params():
        if name not in snapshot:
            raise KeyError(f"missing parameter {name} in snapshot")
        if snapshot[name].shape != tensor.data.shape:
            raise ValueError(f"parameter {name} has shape {snapshot[name].shape}, "
                             f"expected {tensor.data.shape}")
        tensor.data[...] = snapshot[name]
