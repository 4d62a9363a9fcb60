"""Staged blockwise distillation, the vanilla-KD baseline, and plain CE
training, all driven by SGD with momentum and a per-stage cyclic
learning-rate schedule.

Each training stage runs some epochs at a fixed partition, then merges
neighboring blocks and starts the next stage. Within a batch every
student block owns its loss term, its parameters, and its momentum
buffers, so blocks may be stepped by concurrent workers with results
bit-identical to the sequential order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset, batches, num_batches
from .errors import ConfigurationError, ContractError, StableKDError
from .instrumentation import DistanceTrace, MetricRecord, param_distance
from .losses import (
    block_term,
    cross_entropy,
    kl_divergence,
    teacher_boundary_activations,
)
from .network import Network
from .partition import Partition, align_partition, recompose, validate
from .tensor import Parameter, Tensor, backward


@dataclass(frozen=True)
class StageSchedule:
    """Recomposition count n and per-stage epoch counts e_0..e_n."""

    n: int
    epochs: tuple[int, ...]

    def __post_init__(self):
        if self.n < 0:
            raise ConfigurationError(f"recomposition count must be >= 0, got {self.n}")
        if len(self.epochs) != self.n + 1:
            raise ConfigurationError(f"need {self.n + 1} stage epoch counts, got {len(self.epochs)}")
        if any(e < 1 for e in self.epochs):
            raise ConfigurationError(f"every stage needs at least one epoch, got {self.epochs}")

    @property
    def total_epochs(self) -> int:
        return sum(self.epochs)

    @staticmethod
    def split(total_epochs: int, n: int) -> "StageSchedule":
        """First n stages get floor(e/(n+1)) epochs, the last the remainder."""
        share = total_epochs // (n + 1)
        if share < 1:
            raise ConfigurationError(f"{total_epochs} epochs cannot fill {n + 1} stages")
        return StageSchedule(n, tuple([share] * n + [total_epochs - n * share]))


@dataclass(frozen=True)
class OptimConfig:
    max_lr: float = 0.5  # the baseline default is 0.1; the CLI resolves that
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 128

    def __post_init__(self):
        if self.max_lr <= 0:
            raise ConfigurationError(f"max_lr must be positive, got {self.max_lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be positive, got {self.batch_size}")


@dataclass
class TrainState:
    """Loop state carried across batches of one run."""

    stage: int = 0
    global_step: int = 0
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    partition: Partition | None = None
    seed: int = 0


@dataclass
class RunResult:
    net: Network
    records: list[MetricRecord]
    trace: DistanceTrace


BASE_LR_DIVISOR = 25.0  # cycle floor relative to the stage peak chain


def lr_at(global_step: int, schedule: StageSchedule, steps_per_epoch: int, max_lr: float) -> float:
    """Triangular cycle per stage: base -> peak -> base, peak halving per stage."""
    if steps_per_epoch < 1:
        raise ContractError(f"steps_per_epoch must be positive, got {steps_per_epoch}")
    if global_step < 0 or global_step >= schedule.total_epochs * steps_per_epoch:
        raise ContractError(
            f"step {global_step} outside the {schedule.total_epochs * steps_per_epoch}-step horizon"
        )
    start = 0
    for c, e_c in enumerate(schedule.epochs):
        span = e_c * steps_per_epoch
        if global_step < start + span:
            u = (global_step - start) / span
            peak = max_lr / (2.0 ** c)
            base = max_lr / BASE_LR_DIVISOR
            return base + (peak - base) * (1.0 - abs(2.0 * u - 1.0))
        start += span
    raise AssertionError("unreachable")


def sgd_step(params: list[Parameter], grads: dict[str, np.ndarray], lr: float,
             momentum: float, weight_decay: float, buffers: dict[str, np.ndarray]) -> None:
    """v <- momentum*v + (grad + weight_decay*theta); theta <- theta - lr*v."""
    if {p.pid for p in params} != set(grads):
        raise ContractError("gradient map must cover exactly the parameters being stepped")
    for p in params:
        if not p.trainable:
            raise ContractError(f"cannot step frozen parameter {p.pid}")
        g = grads[p.pid]
        if g.shape != p.data.shape:
            raise ContractError(f"gradient shape {g.shape} does not match {p.pid} {p.data.shape}")
        if weight_decay:
            g = g + p.data * p.dtype.type(weight_decay)
        v = buffers.get(p.pid)
        if v is None:
            v = np.zeros_like(p.data)
            buffers[p.pid] = v
        np.multiply(v, p.dtype.type(momentum), out=v)
        np.add(v, g, out=v)
        p.data = p.data - v * p.dtype.type(lr)


def evaluate(net: Network, dataset: Dataset, batch_size: int = 512) -> float:
    """Composed-forward accuracy, in deterministic order."""
    correct = 0
    for start in range(0, len(dataset), batch_size):
        x = dataset.inputs[start : start + batch_size]
        y = dataset.labels[start : start + batch_size]
        correct += int((net.predict(x) == y).sum())
    return correct / max(1, len(dataset))


def _check_frozen(teacher: Network) -> None:
    if teacher.trainable:
        raise ContractError("teacher must be frozen before distillation")


def _trainable_params(net: Network) -> list[Parameter]:
    return [p for p in net.params.values() if p.trainable]


def _scope_snapshot(net: Network, scope: tuple[str, ...]) -> dict[str, np.ndarray]:
    return {pid: net.params[pid].data.copy() for pid in scope}


def _mean(values: list[float]) -> float:
    return float(np.mean(np.asarray(values, dtype=np.float64))) if values else 0.0


def _stage_context(exc: Exception, stage: int, epoch: int) -> StableKDError:
    msg = f"stage {stage}, epoch {epoch}: {exc}"
    if isinstance(exc, StableKDError):
        return type(exc)(msg)
    return ContractError(msg)


def run_stablekd(teacher: Network, student: Network, partition: Partition,
                 schedule: StageSchedule, optim: OptimConfig, lam: float,
                 data: Dataset, seed: int, *, val_data: Dataset | None = None,
                 workers: int = 1, temperature: float = 1.0,
                 distance_scope: tuple[str, ...] | None = None) -> RunResult:
    """The full staged pipeline: k initial blocks, n recompositions.

    Stage c trains schedule.epochs[c] epochs under the current partition,
    stepping each student block with the gradient of its own loss term,
    then merges neighbor blocks (skipped after the final stage, where no
    further training would consume the merge).
    """
    _check_frozen(teacher)
    validate(partition, teacher)
    validate(partition, student)
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")
    if lam < 0:
        raise ConfigurationError(f"lambda must be non-negative, got {lam}")

    eval_data = val_data if val_data is not None else data
    scope = tuple(sorted(distance_scope)) if distance_scope else tuple(
        sorted(p.pid for p in _trainable_params(student)))
    trace = DistanceTrace(scope=scope)
    records: list[MetricRecord] = []
    steps_per_epoch = num_batches(data, optim.batch_size)
    state = TrainState(partition=partition, seed=seed)
    part = partition
    global_epoch = 0

    for c, e_c in enumerate(schedule.epochs):
        spart = align_partition(part, student)
        k = spart.k
        block_params = [
            [p for i in range(*spart.block_range(j)) for p in student.layer_params(i)]
            for j in range(k)
        ]
        state.stage = c
        state.buffers = {}  # block ownership changes at stage boundaries
        buffers = state.buffers
        pool = ThreadPoolExecutor(max_workers=min(workers, k)) if workers > 1 and k > 1 else None

        try:
            for _ in range(e_c):
                t0 = time.perf_counter()
                ce_vals: list[float] = []
                kl_vals: list[float] = []
                mse_vals: list[list[float]] = [[] for _ in range(k - 1)]
                dist_vals: list[float] = []
                correct = 0
                try:
                    for bx, by in batches(data, optim.batch_size, (seed, global_epoch)):
                        lr = lr_at(state.global_step, schedule, steps_per_epoch, optim.max_lr)
                        acts = teacher_boundary_activations(teacher, part, bx)
                        prev = _scope_snapshot(student, scope)

                        def step_block(j, acts=acts, by=by, lr=lr):
                            term, info = block_term(student, part, j, acts, by, lam, temperature)
                            grads = backward(term, params=block_params[j])
                            sgd_step(block_params[j], grads, lr, optim.momentum,
                                     optim.weight_decay, buffers)
                            return info

                        if pool is None:
                            infos = [step_block(j) for j in range(k)]
                        else:
                            infos = list(pool.map(step_block, range(k)))

                        for j, info in enumerate(infos[:-1]):
                            mse_vals[j].append(info["mse"])
                        ce_vals.append(infos[-1]["ce"])
                        kl_vals.append(infos[-1]["kl"])
                        correct += infos[-1]["correct"]
                        d = param_distance(prev, _scope_snapshot(student, scope), scope)
                        dist_vals.append(d)
                        trace.append(state.global_step, d)
                        state.global_step += 1
                except Exception as exc:  # attach loop position to any failure
                    raise _stage_context(exc, c, global_epoch) from exc

                records.append(MetricRecord(
                    epoch=global_epoch,
                    stage=c,
                    k_current=k,
                    lr_peak=optim.max_lr / (2.0 ** c),
                    loss_ce=_mean(ce_vals),
                    loss_kl=_mean(kl_vals),
                    loss_mse=[_mean(v) for v in mse_vals],
                    train_acc=correct / len(data),
                    val_acc=evaluate(student, eval_data),
                    step_param_dist_mean=_mean(dist_vals),
                    wall_seconds=time.perf_counter() - t0,
                ))
                global_epoch += 1
        finally:
            if pool is not None:
                pool.shutdown()

        if c < schedule.n:
            part = recompose(part)
            state.partition = part

    return RunResult(student, records, trace)


def _run_end_to_end(net: Network, loss_of_batch, optim: OptimConfig, epochs: int,
                    data: Dataset, seed: int, *, val_data: Dataset | None,
                    distance_scope: tuple[str, ...] | None) -> RunResult:
    """Single-stage loop shared by the vanilla-KD and plain-CE paths."""
    eval_data = val_data if val_data is not None else data
    params = _trainable_params(net)
    scope = tuple(sorted(distance_scope)) if distance_scope else tuple(sorted(p.pid for p in params))
    trace = DistanceTrace(scope=scope)
    records: list[MetricRecord] = []
    schedule = StageSchedule(0, (epochs,))
    steps_per_epoch = num_batches(data, optim.batch_size)
    buffers: dict[str, np.ndarray] = {}
    step = 0

    for epoch in range(epochs):
        t0 = time.perf_counter()
        ce_vals: list[float] = []
        kl_vals: list[float] = []
        dist_vals: list[float] = []
        correct = 0
        try:
            for bx, by in batches(data, optim.batch_size, (seed, epoch)):
                lr = lr_at(step, schedule, steps_per_epoch, optim.max_lr)
                loss, parts = loss_of_batch(bx, by)
                grads = backward(loss, params=params)
                prev = _scope_snapshot(net, scope)
                sgd_step(params, grads, lr, optim.momentum, optim.weight_decay, buffers)
                ce_vals.append(parts["ce"])
                kl_vals.append(parts.get("kl", 0.0))
                correct += parts["correct"]
                d = param_distance(prev, _scope_snapshot(net, scope), scope)
                dist_vals.append(d)
                trace.append(step, d)
                step += 1
        except Exception as exc:
            raise _stage_context(exc, 0, epoch) from exc

        records.append(MetricRecord(
            epoch=epoch,
            stage=0,
            k_current=1,
            lr_peak=optim.max_lr,
            loss_ce=_mean(ce_vals),
            loss_kl=_mean(kl_vals),
            loss_mse=[],
            train_acc=correct / len(data),
            val_acc=evaluate(net, eval_data),
            step_param_dist_mean=_mean(dist_vals),
            wall_seconds=time.perf_counter() - t0,
        ))
    return RunResult(net, records, trace)


def run_vanilla_kd(teacher: Network, student: Network, optim: OptimConfig, alpha: float,
                   epochs: int, data: Dataset, seed: int, *, val_data: Dataset | None = None,
                   temperature: float = 1.0,
                   distance_scope: tuple[str, ...] | None = None) -> RunResult:
    """End-to-end distillation with (1-alpha)*CE + alpha*KL, one LR cycle."""
    _check_frozen(teacher)
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie strictly inside (0, 1), got {alpha}")

    def loss_of_batch(bx, by):
        s_logits = student.forward(Tensor(np.asarray(bx, dtype=student.dtype)))
        t_logits = teacher.forward(Tensor(np.asarray(bx, dtype=teacher.dtype)))
        ce = cross_entropy(s_logits, by)
        kl = kl_divergence(s_logits, t_logits, temperature)
        loss = ce * (1.0 - alpha) + kl * alpha
        correct = int((np.argmax(s_logits.data, axis=1) == by).sum())
        return loss, {"ce": ce.item(), "kl": kl.item(), "correct": correct}

    return _run_end_to_end(student, loss_of_batch, optim, epochs, data, seed,
                           val_data=val_data, distance_scope=distance_scope)


def run_ce(net: Network, optim: OptimConfig, epochs: int, data: Dataset, seed: int, *,
           val_data: Dataset | None = None,
           distance_scope: tuple[str, ...] | None = None) -> RunResult:
    """Plain cross-entropy training (teacher pretraining and CE probes)."""

    def loss_of_batch(bx, by):
        logits = net.forward(Tensor(np.asarray(bx, dtype=net.dtype)))
        ce = cross_entropy(logits, by)
        correct = int((np.argmax(logits.data, axis=1) == by).sum())
        return ce, {"ce": ce.item(), "correct": correct}

    return _run_end_to_end(net, loss_of_batch, optim, epochs, data, seed,
                           val_data=val_data, distance_scope=distance_scope)
