"""Decomposition strategies over sequential networks.

A partition tiles the layer list into k contiguous blocks, identified by
their exclusive end indices. The classifier head (final affine together
with its preceding flatten) always forms the tail of the last block.
Recomposition merges neighbor pairs, halving the block count; it touches
no parameters, so forward passes are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .errors import ConfigurationError, ValidationError
from .network import Network


@dataclass(frozen=True)
class Partition:
    """Block ends (exclusive, strictly increasing, last == layer count)."""

    boundaries: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.boundaries)

    def block_range(self, i: int) -> tuple[int, int]:
        start = 0 if i == 0 else self.boundaries[i - 1]
        return start, self.boundaries[i]


def head_start(net: Network) -> int:
    """Index of the first head layer: the final affine, plus its flatten."""
    last = len(net.layers) - 1
    if last >= 1 and net.layers[last - 1].kind == "flatten":
        return last - 1
    return last


def _split_candidates(net: Network) -> list[int]:
    """Layer indices inside the body where the feature width changes."""
    hs = head_start(net)
    return [i for i in range(1, hs) if net.width_after(i) != net.width_after(i - 1)]


def _block_param_counts(net: Network, bounds: list[int]) -> list[int]:
    counts = []
    start = 0
    for end in bounds:
        counts.append(sum(p.data.size for i in range(start, end) for p in net.layer_params(i)))
        start = end
    return counts


def max_blocks(net: Network) -> int:
    return 2 + len(_split_candidates(net))


def make_partition(net: Network, k: int) -> Partition:
    """Head as its own block; body split at width changes, balanced.

    The k-2 interior split points are chosen among the width-change
    candidates to make body block parameter counts as equal as possible
    (sum of squared deviations), ties broken toward earlier layers.
    """
    n_layers = len(net.layers)
    if k == 1:
        return Partition((n_layers,))
    limit = max_blocks(net)
    if k < 1 or k > limit:
        raise ConfigurationError(f"k={k} infeasible for this architecture; maximum feasible k is {limit}")
    hs = head_start(net)
    candidates = _split_candidates(net)
    best: tuple[int, ...] | None = None
    best_cost = None
    for chosen in combinations(candidates, k - 2):
        bounds = list(chosen) + [hs]
        counts = _block_param_counts(net, bounds)
        mean = sum(counts) / len(counts)
        cost = sum((c - mean) ** 2 for c in counts)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best = tuple(bounds)
    assert best is not None
    return Partition(best + (n_layers,))


def recompose(d: Partition) -> Partition:
    """Merge block i with block i+1 for every odd i (1-based), i <= k-1.

    A trailing unpaired block survives unchanged; the result has
    ceil(k/2) blocks. Parameters are untouched.
    """
    kept = [b for j, b in enumerate(d.boundaries) if j % 2 == 1]
    if not kept or kept[-1] != d.boundaries[-1]:
        kept.append(d.boundaries[-1])
    return Partition(tuple(kept))


def validate(d: Partition, net: Network) -> None:
    """Assert every partition invariant against the network's layer list."""
    a = align_partition(d, net)
    bounds = a.boundaries
    if not bounds:
        raise ValidationError("partition has no blocks")
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValidationError(f"boundaries {bounds} are not strictly increasing (empty or overlapping block)")
    if bounds[0] < 1:
        raise ValidationError(f"first boundary {bounds[0]} leaves an empty block")
    if bounds[-1] != len(net.layers):
        raise ValidationError(f"boundaries {bounds} do not tile the {len(net.layers)}-layer network")
    if len(bounds) >= 2 and bounds[-2] > head_start(net):
        raise ValidationError(
            f"boundary {bounds[-2]} splits the classifier head (head starts at layer {head_start(net)})"
        )


def align_partition(d: Partition, net: Network) -> Partition:
    """Adjust boundaries for a network that gained boundary projectors.

    A projector appended at the end of a block belongs to that block. If
    the boundary list already spans the layer count it is returned
    unchanged; otherwise each block absorbs its original layer count
    plus any projector layers that immediately follow it.
    """
    n_layers = len(net.layers)
    if d.boundaries and d.boundaries[-1] == n_layers:
        return d
    sizes = [d.boundaries[0]] + [b - a for a, b in zip(d.boundaries, d.boundaries[1:])]
    bounds = []
    i = 0
    for m in sizes:
        taken = 0
        while taken < m:
            if i >= n_layers:
                raise ValidationError(f"partition {d.boundaries} does not fit a {n_layers}-layer network")
            if net.layers[i].kind != "projector1x1":
                taken += 1
            i += 1
        while i < n_layers and net.layers[i].kind == "projector1x1":
            i += 1
        bounds.append(i)
    if bounds[-1] != n_layers:
        raise ValidationError(f"partition {d.boundaries} does not fit a {n_layers}-layer network")
    return Partition(tuple(bounds))
