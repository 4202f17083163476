"""Tree-partition mutual information between inputs and residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .datamodel import Dataset
from .errors import ConfigurationError, EvaluationError
from .partition import (
    JointSample,
    PartitionParams,
    TreePartition,
    cell_term,
    grow_full_tree,
    prune,
)

# Confidence-sequence parameter of the underlying independence test.  It has
# no operational recipe; it is carried for reporting only and does not
# influence the estimate or the threshold.
D_M_NOTE = "d_m: confidence-sequence parameter of the independence test; reported only"

DEFAULT_PARTITION = PartitionParams(ell=0.3, lam=0.1, b_scale=0.015)


@dataclass(frozen=True)
class ScheduleParams:
    """Partition parameters plus the decision threshold ``a_m = a_scale * m**-a_exp``."""

    partition: PartitionParams = DEFAULT_PARTITION
    a_scale: float = 0.02
    a_exp: float = 0.16
    d_m_note: str = D_M_NOTE

    def __post_init__(self):
        if not self.a_scale > 0:
            raise ConfigurationError(f"a_scale must be positive, got {self.a_scale}")
        if not 0.0 < self.a_exp < 1.0 / 3.0:
            raise ConfigurationError(f"a_exp must lie in (0, 1/3), got {self.a_exp}")


@dataclass(frozen=True)
class MIEstimate:
    value: float
    m: int
    leaf_count: int
    params: ScheduleParams
    partition: TreePartition | None = field(default=None, repr=False, compare=False)


def residuals(ds: Dataset, predict: Callable[[np.ndarray], np.ndarray]) -> JointSample:
    """Pair each input with ``y - predict(x)``, preserving row order."""
    pred = np.asarray(predict(ds.xs), dtype=float)
    if pred.ndim == 1:
        pred = pred.reshape(-1, 1)
    if pred.shape != ds.ys.shape:
        pred = np.broadcast_to(pred, ds.ys.shape)
    bad = ~np.all(np.isfinite(pred), axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"prediction for row {row} is not finite", row=row)
    return JointSample(ds.xs, ds.ys - pred)


def partition_mi(tree: TreePartition) -> float:
    """Plug-in MI of the partition's leaves, in nats."""
    total = math.fsum(cell_term(c.count, c.x_count, c.r_count, tree.m) for c in tree.root.iter_leaves())
    # the leaves' product masses sum to one, so the sum is a KL divergence
    assert total > -1e-12, total
    return max(total, 0.0)


def estimate_mi(samples: JointSample, params: ScheduleParams | None = None) -> MIEstimate:
    """Grow the median-split tree, prune it, and evaluate the plug-in sum."""
    params = params or ScheduleParams()
    tree = prune(grow_full_tree(samples, params.partition))
    return MIEstimate(partition_mi(tree), samples.m, tree.leaf_count, params, tree)


def threshold(m: int, params: ScheduleParams | None = None) -> float:
    params = params or ScheduleParams()
    if m < 1:
        raise ConfigurationError("threshold needs m >= 1")
    return params.a_scale * float(m) ** (-params.a_exp)
