"""Optimization-stability diagnostics.

Records per-step parameter movement (Euclidean distance between
consecutive optimizer steps, over a configurable parameter scope), the
cumulative version of that trace, and a fluctuation score that totals
the downward movements of a validation-accuracy curve. Also hosts the
two exploratory experiment presets built on these probes. Logging never
feeds back into training: runs with tracing on and off produce
identical parameters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError, IncompatibilityError
from .network import Network, clone_architecture, init_params
from .rng import generator


@dataclass
class MetricRecord:
    """One training-log row, serialized as a JSON Lines object."""

    epoch: int
    stage: int
    k_current: int
    lr_peak: float
    loss_ce: float
    loss_kl: float
    loss_mse: list[float]
    train_acc: float
    val_acc: float
    step_param_dist_mean: float
    wall_seconds: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "stage": self.stage,
            "k_current": self.k_current,
            "lr_peak": self.lr_peak,
            "loss_ce": self.loss_ce,
            "loss_kl": self.loss_kl,
            "loss_mse": self.loss_mse,
            "train_acc": self.train_acc,
            "val_acc": self.val_acc,
            "step_param_dist_mean": self.step_param_dist_mean,
            "wall_seconds": self.wall_seconds,
        }


@dataclass
class DistanceTrace:
    """Per-step parameter distances and their running sum, one scope."""

    scope: tuple[str, ...]
    steps: list[int] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)
    cumulative: list[float] = field(default_factory=list)

    def append(self, step: int, distance: float) -> None:
        if distance < 0:
            raise ContractError(f"negative distance {distance}")
        self.steps.append(step)
        self.distances.append(distance)
        prev = self.cumulative[-1] if self.cumulative else 0.0
        self.cumulative.append(prev + distance)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "distance", "cumulative"])
            for s, d, c in zip(self.steps, self.distances, self.cumulative):
                writer.writerow([s, repr(d), repr(c)])


def param_distance(theta_prev: Mapping[str, np.ndarray], theta_curr: Mapping[str, np.ndarray],
                   scope: Iterable[str]) -> float:
    """L2 norm of the concatenated difference over the scoped parameters."""
    total = 0.0
    for pid in sorted(scope):
        if pid not in theta_prev or pid not in theta_curr:
            raise ContractError(f"scope parameter {pid} missing from a snapshot")
        a, b = theta_prev[pid], theta_curr[pid]
        if a.shape != b.shape:
            raise ContractError(f"scope parameter {pid} changed shape {a.shape} -> {b.shape}")
        d = a.astype(np.float64) - b.astype(np.float64)
        total += float(np.dot(d.ravel(), d.ravel()))
    return float(np.sqrt(total))


def fluctuation_score(val_acc: Sequence[float]) -> float:
    """Total downward movement of an accuracy curve; 0 for monotone rises."""
    if len(val_acc) < 2:
        raise ContractError(f"fluctuation_score needs at least 2 points, got {len(val_acc)}")
    score = 0.0
    for prev, cur in zip(val_acc, val_acc[1:]):
        if cur < prev:
            score += float(prev) - float(cur)
    return score


# --- exploratory experiment presets ----------------------------------------

@dataclass
class FluctuationPreset:
    """Three identical distillation runs that differ only in the peak LR."""

    teacher: Network
    student: Network
    train: "Dataset"
    val: "Dataset"
    lrs: tuple[float, ...] = (0.005, 0.01, 0.02)
    epochs: int = 30
    alpha: float = 0.5
    batch_size: int = 32
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0


def experiment_fluctuation(preset: FluctuationPreset) -> dict:
    """Vanilla-KD accuracy curves and fluctuation scores per peak LR."""
    from .trainer import OptimConfig, run_vanilla_kd

    runs = {}
    for lr in preset.lrs:
        student = clone_architecture(preset.student)
        init_params(student, preset.seed)
        optim = OptimConfig(max_lr=lr, momentum=preset.momentum,
                            weight_decay=preset.weight_decay, batch_size=preset.batch_size)
        runs[lr] = run_vanilla_kd(preset.teacher, student, optim, preset.alpha,
                                  preset.epochs, preset.train, preset.seed, val_data=preset.val)
    curves = {lr: [r.val_acc for r in res.records] for lr, res in runs.items()}
    scores = {lr: fluctuation_score(curve) for lr, curve in curves.items()}
    return {"runs": runs, "curves": curves, "scores": scores}


@dataclass
class HeadDistancePreset:
    """Fresh identically-seeded heads on backbones of differing maturity."""

    small: Network               # template; final affine is the monitored head
    large: Network               # template with the same head input width
    train: "Dataset"
    val: "Dataset"
    pretrain_epochs: int = 20
    epochs: int = 15
    max_lr: float = 0.1
    batch_size: int = 32
    momentum: float = 0.9
    weight_decay: float = 5e-4
    head_seed: int = 1234
    seed: int = 0


def _head_param_ids(net: Network) -> tuple[str, str]:
    idx = len(net.layers) - 1
    return (f"L{idx:02d}.w", f"L{idx:02d}.b")


def _plant_head(net: Network, head_seed: int) -> tuple[str, str]:
    """Overwrite the head with values drawn from a backbone-independent key."""
    wid, bid = _head_param_ids(net)
    w = net.params[wid]
    bound = float(np.sqrt(6.0 / w.data.shape[0]))
    rng = generator(head_seed, 0)
    w.data = rng.uniform(-bound, bound, size=w.data.shape).astype(w.dtype)
    b = net.params[bid]
    b.data = np.zeros_like(b.data)
    return wid, bid


def experiment_head_distance(preset: HeadDistancePreset) -> dict:
    """Head-parameter distance traces for random vs pretrained backbones.

    Pretrains the small and large backbones with plain CE, then retrains
    three conditions (random small, pretrained small, pretrained large)
    whose head parameters start bit-identical, recording the head's
    per-step distance trace for each.
    """
    from .trainer import OptimConfig, run_ce

    sw = preset.small.params[_head_param_ids(preset.small)[0]]
    lw = preset.large.params[_head_param_ids(preset.large)[0]]
    if sw.data.shape != lw.data.shape:
        raise IncompatibilityError(
            f"head shapes differ: small {sw.data.shape} vs large {lw.data.shape}; "
            "conditions cannot share initial head values"
        )

    optim = OptimConfig(max_lr=preset.max_lr, momentum=preset.momentum,
                        weight_decay=preset.weight_decay, batch_size=preset.batch_size)

    pre_small = clone_architecture(preset.small)
    init_params(pre_small, preset.seed + 101)
    pre_small_state = run_ce(pre_small, optim, preset.pretrain_epochs, preset.train,
                             preset.seed + 101, val_data=preset.val).net.state()
    pre_large = clone_architecture(preset.large)
    init_params(pre_large, preset.seed + 202)
    pre_large_state = run_ce(pre_large, optim, preset.pretrain_epochs, preset.train,
                             preset.seed + 202, val_data=preset.val).net.state()

    conditions = {}
    for name, template, state in (
        ("random_small", preset.small, None),
        ("pretrained_small", preset.small, pre_small_state),
        ("pretrained_large", preset.large, pre_large_state),
    ):
        net = clone_architecture(template)
        init_params(net, preset.seed + 303)
        if state is not None:
            net.load_state(state)
        scope = _plant_head(net, preset.head_seed)
        conditions[name] = run_ce(net, optim, preset.epochs, preset.train, preset.seed,
                                  val_data=preset.val, distance_scope=scope)
    return {name: res for name, res in conditions.items()}
