"""Tree-structured partitions of the joint (X, R) space.

Cells are built by recursive axis-aligned splits at empirical medians and
then pruned with a per-leaf complexity penalty.  Every cell is a product
``A = A_x x A_r`` of an X-box and an R-box, and each node also records how
many of the ``m`` samples fall in its X-projection (whatever their residual)
and in its R-projection (whatever their input).  Those two marginal counts
are what the mutual-information plug-in needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class PartitionParams:
    """Minimum cell mass ``b_m = b_scale * m**-ell`` and pruning weight ``lam``."""

    ell: float = 0.3
    lam: float = 0.1
    b_scale: float = 0.015

    def __post_init__(self):
        if not 0.0 < self.ell < 1.0 / 3.0:
            raise ConfigurationError(f"ell must lie in (0, 1/3), got {self.ell}")
        if not self.lam > 0.0:
            raise ConfigurationError(f"lam must be positive, got {self.lam}")
        if not self.b_scale > 0.0:
            raise ConfigurationError(f"b_scale must be positive, got {self.b_scale}")

    def b_m(self, m: int) -> float:
        return self.b_scale * float(m) ** (-self.ell)

    def min_cell_size(self, m: int) -> int:
        # round first so 1000.0000000000001 does not become 1001
        return max(2, math.ceil(round(m * self.b_m(m), 9)))


@dataclass(frozen=True)
class JointSample:
    """``m`` paired rows: inputs ``x`` (m x p) and residuals ``r`` (m x q)."""

    x: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        r = np.array(self.r, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if r.ndim == 1:
            r = r.reshape(-1, 1)
        if x.ndim != 2 or r.ndim != 2 or x.shape[0] != r.shape[0]:
            raise DimensionError(f"incompatible shapes {x.shape} and {r.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
            raise ConfigurationError("joint sample has non-finite entries")
        x.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", r)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.r.shape[1]

    def joint(self) -> np.ndarray:
        return np.hstack([self.x, self.r])


@dataclass(frozen=True)
class Cell:
    """A node of the partition tree.

    ``lo``/``hi`` bound the half-open box ``(lo, hi]`` per joint coordinate.
    Internal nodes carry ``dim``/``threshold`` and two children; a sample
    goes left when its coordinate is ``<= threshold``.
    """

    lo: tuple
    hi: tuple
    count: int
    x_count: int
    r_count: int
    depth: int
    dims_split: tuple = ()
    dim: int | None = None
    threshold: float | None = None
    left: "Cell | None" = None
    right: "Cell | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def iter_leaves(self) -> Iterator["Cell"]:
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)

    def iter_nodes(self) -> Iterator["Cell"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def to_dict(self) -> dict:
        out = {"count": self.count, "x_count": self.x_count, "r_count": self.r_count}
        if not self.is_leaf:
            out.update(dim=self.dim, threshold=self.threshold,
                       left=self.left.to_dict(), right=self.right.to_dict())
        return out


@dataclass(frozen=True)
class TreePartition:
    root: Cell
    m: int
    p: int
    q: int
    k_min: int
    params: PartitionParams = field(default_factory=PartitionParams)

    @property
    def leaves(self) -> list[Cell]:
        return list(self.root.iter_leaves())

    @property
    def leaf_count(self) -> int:
        return sum(1 for _ in self.root.iter_leaves())

    @property
    def depth(self) -> int:
        return max(leaf.depth for leaf in self.root.iter_leaves())

    def assign(self, x, r) -> np.ndarray:
        """Leaf index (in ``leaves`` order) of every row of ``(x, r)``."""
        z = JointSample(x, r).joint()
        out = np.empty(z.shape[0], dtype=int)
        counter = iter(range(1 << 62))

        def walk(node, rows):
            if node.is_leaf:
                out[rows] = next(counter)
                return
            go_left = z[rows, node.dim] <= node.threshold
            walk(node.left, rows[go_left])
            walk(node.right, rows[~go_left])

        walk(self.root, np.arange(z.shape[0]))
        return out

    def to_dict(self) -> dict:
        return {
            "m": self.m, "p": self.p, "q": self.q, "k_min": self.k_min,
            "params": {"ell": self.params.ell, "lam": self.params.lam, "b_scale": self.params.b_scale},
            "root": self.root.to_dict(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _median_threshold(values: np.ndarray) -> float:
    # lower median as an order statistic: rank-based, so monotone maps of a
    # coordinate leave the split memberships unchanged
    k = (values.size + 1) // 2 - 1
    return float(np.partition(values, k)[k])


def grow_full_tree(samples: JointSample, params: PartitionParams | None = None,
                   k_min: int | None = None) -> TreePartition:
    """Split recursively at empirical medians until cells would get too small.

    The split dimension cycles with depth (``depth mod (p + q)``); when that
    coordinate cannot be split (ties leave a child below ``k_min``) the
    next dimensions are tried in cyclic order.  ``k_min`` defaults to
    ``max(2, ceil(m * b_m))``.
    """
    params = params or PartitionParams()
    m, p, q = samples.m, samples.p, samples.q
    if m < 1:
        raise DimensionError("cannot partition an empty sample")
    if k_min is None:
        k_min = params.min_cell_size(m)
    D = p + q
    cols = [np.ascontiguousarray(c) for c in samples.joint().T]

    def grow(idx, xin, rin, lo, hi, depth, path):
        count = idx.size
        if count // 2 >= k_min:
            for offset in range(D):
                d = (depth + offset) % D
                vals = cols[d][idx]
                t = _median_threshold(vals)
                go_left = vals <= t
                n_left = int(np.count_nonzero(go_left))
                if n_left < k_min or count - n_left < k_min:
                    continue
                if d < p:
                    v = cols[d][xin] <= t
                    xin_l, xin_r, rin_l, rin_r = xin[v], xin[~v], rin, rin
                else:
                    v = cols[d][rin] <= t
                    xin_l, xin_r, rin_l, rin_r = xin, xin, rin[v], rin[~v]
                hi_l = hi[:d] + (t,) + hi[d + 1:]
                lo_r = lo[:d] + (t,) + lo[d + 1:]
                left = grow(idx[go_left], xin_l, rin_l, lo, hi_l, depth + 1, path + ((d, t, True),))
                right = grow(idx[~go_left], xin_r, rin_r, lo_r, hi, depth + 1, path + ((d, t, False),))
                return Cell(lo, hi, count, xin.size, rin.size, depth, path, d, t, left, right)
        return Cell(lo, hi, count, xin.size, rin.size, depth, path)

    everything = np.arange(m)
    inf = (math.inf,) * D
    root = grow(everything, everything, everything, (-math.inf,) * D, inf, 0, ())
    return TreePartition(root, m, p, q, k_min, params)


def cell_term(count: int, x_count: int, r_count: int, m: int) -> float:
    """One summand ``P(A) log(P(A) / (P(A_x) P(A_r)))`` in nats (0 for empty cells)."""
    if count == 0:
        return 0.0
    assert x_count > 0 and r_count > 0
    return (count / m) * math.log(count * m / (x_count * r_count))


def leaf_penalty(lam: float, m: int, dims: int) -> float:
    """Cost charged per leaf: ``lam * dims * log(m) / m``."""
    return lam * dims * math.log(m) / m


def prune(tree: TreePartition, lam: float | None = None) -> TreePartition:
    """Best subtree under ``sum of cell terms - penalty * #leaves``.

    Bottom-up: each internal node keeps its children only if their best
    penalized value strictly beats collapsing the node into one leaf, so ties
    go to the smaller tree.  ``lam == 0`` returns the tree unchanged.
    """
    lam = tree.params.lam if lam is None else float(lam)
    if lam < 0:
        raise ConfigurationError("lam must be nonnegative")
    if lam == 0:
        return tree
    pen = leaf_penalty(lam, tree.m, tree.p + tree.q)
    m = tree.m

    def best(node: Cell) -> tuple[float, Cell]:
        collapsed = cell_term(node.count, node.x_count, node.r_count, m) - pen
        if node.is_leaf:
            return collapsed, node
        vl, left = best(node.left)
        vr, right = best(node.right)
        if vl + vr > collapsed:
            if left is node.left and right is node.right:
                return vl + vr, node
            return vl + vr, replace(node, left=left, right=right)
        return collapsed, replace(node, dim=None, threshold=None, left=None, right=None)

    _, root = best(tree.root)
    if root is tree.root:
        return tree
    return replace(tree, root=root)


def empirical_measures(tree: TreePartition) -> np.ndarray:
    """Per leaf: ``(P_m(A), P_m(A_x x R^q), P_m(R^p x A_r))`` as an (L, 3) array."""
    rows = [(c.count, c.x_count, c.r_count) for c in tree.root.iter_leaves()]
    return np.array(rows, dtype=float) / tree.m
