"""Training losses: CE, KL, blockwise feature MSE, and their aggregates.

The blockwise aggregate routes every student block's input through the
frozen teacher prefix, so the gradient of the total with respect to one
block's parameters is exactly that block's own term gradient: teacher
prefixes carry no student parameters and no student block ever consumes
another student block's output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, DimensionError, IncompatibilityError
from .network import Activation, Network, apply_block
from .partition import Partition, align_partition, validate
from .tensor import Tensor, accumulate, make_node


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a plain logits array (not taped)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _check_labels(labels, n: int, classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match batch size {n}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise DataError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DataError(f"label out of range for {classes} classes")
    return labels


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], via log-sum-exp."""
    if logits.data.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be 2-d, got {logits.shape}")
    n, classes = logits.shape
    labels = _check_labels(labels, n, classes)
    logp = _log_softmax(logits.data)
    val = np.asarray(-logp[np.arange(n), labels].mean(), dtype=logits.dtype)

    def rule(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1
        accumulate(logits, p * (g / n))

    return make_node(val, (logits,), rule)


def kl_divergence(student_logits: Tensor, teacher_logits: Tensor, temperature: float = 1.0) -> Tensor:
    """Mean KL(teacher || student) on softened rows, scaled by temperature^2."""
    if student_logits.shape != teacher_logits.shape or student_logits.data.ndim != 2:
        raise DimensionError(
            f"kl_divergence: logits shapes {student_logits.shape} and {teacher_logits.shape} differ"
        )
    if temperature <= 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    n = student_logits.shape[0]
    t = student_logits.dtype.type(temperature)
    lps = _log_softmax(student_logits.data / t)
    lpt = _log_softmax(teacher_logits.data / t)
    pt = np.exp(lpt)
    gap = lpt - lps
    rows = (pt * gap).sum(axis=1)
    val = np.asarray(rows.mean() * t * t, dtype=student_logits.dtype)

    def rule(g):
        if student_logits.requires_grad:
            ps = np.exp(lps)
            accumulate(student_logits, (ps - pt) * (g * t / n))
        if teacher_logits.requires_grad:
            accumulate(teacher_logits, pt * (gap - rows[:, None]) * (g * t / n))

    return make_node(val, (student_logits, teacher_logits), rule)


def _as_tensor(a) -> Tensor:
    return a.tensor if isinstance(a, Activation) else a


def mse_feature(a, b) -> Tensor:
    """Mean squared elementwise difference over all elements."""
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.shape != tb.shape:
        raise IncompatibilityError(
            f"mse_feature: activation shapes {ta.shape} and {tb.shape} differ (missing projector?)"
        )
    diff = ta.data - tb.data
    size = diff.size
    val = np.asarray(np.mean(diff * diff), dtype=ta.dtype)

    def rule(g):
        scaled = diff * (2.0 * g / size)
        accumulate(ta, scaled)
        accumulate(tb, -scaled)

    return make_node(val, (ta, tb), rule)


def vanilla_kd_loss(student_logits: Tensor, teacher_logits: Tensor, labels, alpha: float,
                    temperature: float = 1.0) -> Tensor:
    """(1 - alpha) * CE + alpha * KL, with alpha in the open interval (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    ce = cross_entropy(student_logits, labels)
    kl = kl_divergence(student_logits, teacher_logits, temperature)
    return ce * (1.0 - alpha) + kl * alpha


@dataclass
class LossBreakdown:
    """Per-term view of the blockwise loss; all components are scalars >= 0."""

    ce: Tensor
    kl: Tensor
    mse_per_block: list[Tensor]  # indexed 1..k-1
    total: Tensor
    block_terms: list[Tensor]    # one scalar term per block, length k

    def values(self) -> dict:
        return {
            "ce": self.ce.item(),
            "kl": self.kl.item(),
            "mse": [m.item() for m in self.mse_per_block],
            "total": self.total.item(),
        }


def teacher_boundary_activations(teacher: Network, partition: Partition, x: np.ndarray) -> list[np.ndarray]:
    """Boundary outputs [x, a_1, ..., a_{k-1}, logits], computed once per batch."""
    tpart = align_partition(partition, teacher)
    acts = [np.asarray(x, dtype=teacher.dtype)]
    cur = Tensor(acts[0])
    for i in range(tpart.k):
        cur = apply_block(teacher, cur, i, tpart)
        acts.append(cur.data)
    return acts


def block_term(student: Network, partition: Partition, block: int, teacher_acts: list[np.ndarray],
               labels, lam: float, temperature: float = 1.0) -> tuple[Tensor, dict]:
    """Loss term owned by one student block, fed by the teacher prefix.

    Blocks 0..k-2 pay feature MSE against the teacher's boundary output;
    the final block pays CE plus lam * KL on the teacher-routed logits.
    Returns the scalar term and a dict of its component values.
    """
    spart = align_partition(partition, student)
    k = spart.k
    routed_in = Tensor(teacher_acts[block])
    out = apply_block(student, routed_in, block, spart)
    if block < k - 1:
        term = mse_feature(Tensor(teacher_acts[block + 1]), out)
        return term, {"mse": term.item()}
    ce = cross_entropy(out, labels)
    kl = kl_divergence(out, Tensor(teacher_acts[k]), temperature)
    term = ce + kl * lam
    correct = int((np.argmax(out.data, axis=1) == np.asarray(labels)).sum())
    return term, {"ce": ce.item(), "kl": kl.item(), "_ce_t": ce, "_kl_t": kl, "correct": correct}


def stablekd_loss(x, labels, teacher: Network, student: Network, partition: Partition,
                  lam: float = 1.0, temperature: float = 1.0) -> LossBreakdown:
    """Blockwise aggregate: feature MSE per body block, CE + lam*KL at the head."""
    if lam < 0:
        raise ConfigurationError(f"lambda must be non-negative, got {lam}")
    validate(partition, teacher)
    validate(partition, student)
    x = np.asarray(x, dtype=teacher.dtype)
    acts = teacher_boundary_activations(teacher, partition, x)
    k = align_partition(partition, student).k

    mse_terms: list[Tensor] = []
    block_terms: list[Tensor] = []
    ce: Tensor | None = None
    kl: Tensor | None = None
    for j in range(k):
        term, info = block_term(student, partition, j, acts, labels, lam, temperature)
        block_terms.append(term)
        if j < k - 1:
            mse_terms.append(term)
        else:
            ce, kl = info["_ce_t"], info["_kl_t"]
    total = block_terms[0]
    for term in block_terms[1:]:
        total = total + term
    assert ce is not None and kl is not None
    return LossBreakdown(ce=ce, kl=kl, mse_per_block=mse_terms, total=total, block_terms=block_terms)
