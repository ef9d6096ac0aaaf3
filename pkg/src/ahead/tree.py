"""Adaptive hierarchical decomposition trees.

The construction is shared by the 1-d tree (fanout B over an interval), the
2-d tree (``grid2d``) and the direct m-d tree (``highdim.build_de_tree``):
users are split into ``c`` groups; group ``i`` answers an OUE query over the
current decomposition ``E_i``; every node whose estimate exceeds ``theta`` is
split into ``B`` equal parts for the next layer, and every other node is
frozen and re-estimated by each later group.

``post_process`` then runs layer-wise Norm-Sub, bottom-up inverse-variance
fusion and top-down uniform expansion, leaving a complete tree whose leaves
are single cells.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from . import fo
from .data import partition_users
from .errors import ConfigurationError, InputError
from .regions import Box, Interval, Region, region_from_list


# ------------------------------------------------------------ parameters


def exact_log(value: int, base: int) -> int | None:
    """Integer k with base**k == value, or None."""
    if value < 1 or base < 2:
        return None
    k, acc = 0, 1
    while acc < value:
        acc *= base
        k += 1
    return k if acc == value else None


def pad_domain(size: int, base: int) -> int:
    """Smallest power of ``base`` that is >= ``size``."""
    acc = base
    while acc < size:
        acc *= base
    return acc


def node_variance(epsilon: float, n_users: int, groups: int) -> float:
    """OUE variance of one node estimate when N users are split into ``groups``."""
    e = math.exp(epsilon)
    return 4 * e * groups / (n_users * (e - 1) ** 2)


def threshold(epsilon: float, n_users: int, groups: int, fanout: int) -> float:
    return math.sqrt((fanout + 1) * node_variance(epsilon, n_users, groups))


@dataclass(frozen=True)
class AheadParams:
    """Parameters of one adaptive tree.

    ``domain_size`` is the (padded) side length of every axis; ``fanout`` is
    the number of children per split over all ``dims`` axes together.
    """

    fanout: int
    theta: float
    groups: int
    epsilon: float
    n_users: int
    domain_size: int
    dims: int = 1

    def __post_init__(self):
        if self.fanout < 2:
            raise ConfigurationError("fanout must be at least 2")
        if self.split_per_axis is None:
            raise ConfigurationError(
                f"fanout {self.fanout} is not a perfect {self.dims}-th power")
        if exact_log(self.domain_size, self.split_per_axis) is None:
            raise ConfigurationError(
                f"domain side {self.domain_size} is not a power of {self.split_per_axis}")
        if self.groups != exact_log(self.domain_size ** self.dims, self.fanout):
            raise ConfigurationError("groups must equal log_B(|D|^dims)")

    @property
    def split_per_axis(self) -> int | None:
        s = round(self.fanout ** (1.0 / self.dims))
        for cand in (s - 1, s, s + 1):
            if cand >= 2 and cand ** self.dims == self.fanout:
                return cand
        return None

    @property
    def variance(self) -> float:
        return node_variance(self.epsilon, self.n_users, self.groups)

    def with_theta(self, theta: float) -> AheadParams:
        return replace(self, theta=float(theta))


def compute_params_nd(epsilon: float, n_users: int, domain_side: int, fanout: int,
                      dims: int) -> AheadParams:
    """Parameters for a tree over a `domain_side`^`dims` cube, padding each side."""
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    per_axis = round(fanout ** (1.0 / dims))
    if per_axis < 2 or per_axis ** dims != fanout:
        raise ConfigurationError(f"fanout {fanout} is not a perfect {dims}-th power")
    side = pad_domain(domain_side, per_axis)
    groups = exact_log(side ** dims, fanout)
    if groups is None:
        raise ConfigurationError(f"log_{fanout}({side}^{dims}) is not an integer")
    if n_users < groups:
        raise ConfigurationError(f"{n_users} users cannot fill {groups} groups")
    return AheadParams(fanout=fanout, theta=threshold(epsilon, n_users, groups, fanout),
                       groups=groups, epsilon=float(epsilon), n_users=int(n_users),
                       domain_size=side, dims=dims)


def compute_params(epsilon: float, n_users: int, domain_size: int,
                   fanout: int = 2) -> AheadParams:
    """1-d parameters; a domain that is not a power of ``fanout`` is padded."""
    return compute_params_nd(epsilon, n_users, domain_size, fanout, 1)


def fanout_objective(b: float) -> float:
    """Expected error of a below-threshold node's children, up to a factor
    sigma^2 ln|D| that does not depend on the fanout."""
    return (b + (b - 1) ** 2 * (b + 1)) / (b ** 2 * math.log(b))


def optimal_fanout(domain_size: int, max_fanout: int = 64) -> int:
    if domain_size < 4:
        raise InputError("domain_size must be at least 4")
    candidates = range(2, max(2, min(domain_size, max_fanout)) + 1)
    return min(candidates, key=fanout_objective)


def baseline_child_error(variance: float, fanout: int) -> float:
    """Squared error of estimating all B children of a node directly."""
    return fanout * variance


def adaptive_child_error_bound(f: float, variance: float, fanout: int) -> float:
    """Upper bound on the squared error when the children share f/B each."""
    return ((fanout - 1) * f * f + variance) / fanout


# ----------------------------------------------------------------- nodes


class Estimate(NamedTuple):
    value: float
    variance: float
    layer: int
    n_reports: int


@dataclass(eq=False)
class TreeNode:
    region: Region
    level: int
    raw_estimates: list[Estimate] = field(default_factory=list)
    fused_value: float = math.nan
    fused_variance: float = math.nan
    children: list[TreeNode] = field(default_factory=list)
    frozen: bool = False

    @property
    def interval(self) -> Region:
        return self.region

    @property
    def estimated(self) -> bool:
        return bool(self.raw_estimates)

    def iter_nodes(self) -> Iterator[TreeNode]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.iter_nodes() if not n.children]

    def nodes_at_level(self, level: int) -> list[TreeNode]:
        return [n for n in self.iter_nodes() if n.level == level]

    def height(self) -> int:
        return max(n.level for n in self.iter_nodes())

    def __repr__(self):
        return (f"TreeNode({self.region}, level={self.level}, fused={self.fused_value:.6g}, "
                f"estimates={len(self.raw_estimates)}, children={len(self.children)}, "
                f"frozen={self.frozen})")


# ----------------------------------------------------------- construction


def _root_region(side: int, dims: int) -> Region:
    return Interval(0, side - 1) if dims == 1 else Box.full(side, dims)


def _split(region: Region, per_axis: int) -> list[Region]:
    return region.split(per_axis)


def _bounds(regions: list[Region]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([[a.lo for a in r.axes] for r in regions], dtype=np.int64)
    hi = np.array([[a.hi for a in r.axes] for r in regions], dtype=np.int64)
    return lo, hi


def prefix_table(hist: np.ndarray) -> np.ndarray:
    """Cumulative counts with a leading zero on every axis."""
    table = np.pad(hist.astype(np.int64), [(1, 0)] * hist.ndim)
    for axis in range(hist.ndim):
        table = np.cumsum(table, axis=axis)
    return table


def region_counts(table: np.ndarray, regions: list[Region]) -> np.ndarray:
    """Number of users in each region, from a ``prefix_table``."""
    lo, hi = _bounds(regions)
    dims = lo.shape[1]
    total = np.zeros(len(regions), dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=dims):
        idx = tuple(np.where(bit, hi[:, ax] + 1, lo[:, ax]) for ax, bit in enumerate(corner))
        sign = 1 if (dims - sum(corner)) % 2 == 0 else -1
        total += sign * table[idx]
    return total


def _as_records(values, dims: int, side: int) -> np.ndarray:
    arr = np.asarray(values)
    if dims == 1 and arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != dims:
        raise InputError(f"expected records with {dims} attribute(s), got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= side):
        raise InputError(f"values must lie in [0, {side})")
    return arr.astype(np.int64)


def _cell_labels(regions: list[Region], side: int, dims: int) -> np.ndarray:
    labels = np.empty((side,) * dims, dtype=np.int64)
    for k, r in enumerate(regions):
        labels[tuple(slice(a.lo, a.hi + 1) for a in r.axes)] = k
    return labels


def build_adaptive_tree(values, params: AheadParams, rng: np.random.Generator, *,
                        per_user: bool = False, seed: int | None = None) -> TreeNode:
    """Run the interactive layer-by-layer construction and return the root.

    With ``per_user=False`` each layer's OUE aggregate is drawn from its exact
    count distribution; with ``per_user=True`` every user in the layer's group
    perturbs a one-hot report on a stream derived from (``seed``, user index).
    """
    side, dims, c = params.domain_size, params.dims, params.groups
    records = _as_records(values, dims, side)
    n = len(records)
    if n < c:
        raise ConfigurationError(f"{n} users cannot fill {c} groups")
    assignment = partition_users(n, c, rng)
    sizes = np.bincount(assignment, minlength=c)
    if (sizes == 0).any():
        raise ConfigurationError(f"user group {int(np.argmin(sizes)) + 1} is empty")
    if per_user and seed is None:
        seed = int(rng.integers(2**63))

    flat = np.ravel_multi_index(tuple(records.T), (side,) * dims)
    per_axis = params.split_per_axis
    variance = params.variance

    root = TreeNode(_root_region(side, dims), level=0, fused_value=1.0, fused_variance=0.0)
    layer = [root]
    for i in range(1, c + 1):
        nxt: list[TreeNode] = []
        for node in layer:
            if node.frozen:
                nxt.append(node)
            elif node is root or node.raw_estimates[-1].value > params.theta:
                node.children = [TreeNode(r, level=i) for r in _split(node.region, per_axis)]
                nxt.extend(node.children)
            else:
                node.frozen = True
                nxt.append(node)
        layer = nxt

        members = assignment == (i - 1)
        cfg = fo.OracleConfig(params.epsilon, len(layer), fo.Mechanism.OUE)
        regions = [nd.region for nd in layer]
        if per_user:
            labels = _cell_labels(regions, side, dims).ravel()[flat[members]]
            reports = fo.perturb_users(labels, cfg, seed, np.flatnonzero(members))
            est = fo.oue_aggregate(np.asarray(reports), cfg)
        else:
            hist = np.bincount(flat[members], minlength=side ** dims).reshape((side,) * dims)
            est = fo.simulate_oue(region_counts(prefix_table(hist), regions), cfg, rng)
        for node, value in zip(layer, est.values):
            node.raw_estimates.append(Estimate(float(value), variance, i, est.n_reports))
    return root


def build_tree(user_values, params: AheadParams, rng: np.random.Generator, *,
               per_user: bool = False, seed: int | None = None) -> TreeNode:
    """1-d construction; returns the prototype tree (call ``post_process`` next)."""
    if params.dims != 1:
        raise ConfigurationError("build_tree expects 1-d parameters")
    return build_adaptive_tree(user_values, params, rng, per_user=per_user, seed=seed)


# -------------------------------------------------------- post-processing


def norm_sub(freqs) -> np.ndarray:
    """Project onto the simplex by clamping negatives and shifting the positives."""
    x = np.array(freqs, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InputError("norm_sub expects a non-empty vector")
    while True:
        pos = x > 0
        if not pos.any():
            return np.full(x.size, 1.0 / x.size)
        x[~pos] = 0.0
        x[pos] -= (x[pos].sum() - 1.0) / pos.sum()
        if (x >= 0).all():
            return x


def weighted_lambda(var_n: float, var_children_sum: float) -> tuple[float, float]:
    """Weights for a node's own estimate and the sum of its children."""
    if var_n <= 0 or var_children_sum <= 0:
        raise InputError("variances must be positive")
    total = var_n + var_children_sum
    return var_children_sum / total, var_n / total


def _inverse_variance_mean(values, variances) -> tuple[float, float]:
    w = 1.0 / np.asarray(variances, dtype=float)
    return float(np.dot(w, values) / w.sum()), float(1.0 / w.sum())


def _expand_uniform(node: TreeNode, per_axis: int) -> None:
    if node.region.cells == 1:
        node.children = []
        return
    parts = _split(node.region, per_axis)
    k = len(parts)
    node.children = [TreeNode(r, level=node.level + 1, fused_value=node.fused_value / k,
                              fused_variance=node.fused_variance / k ** 2) for r in parts]
    for child in node.children:
        _expand_uniform(child, per_axis)


def _raw_values(root: TreeNode) -> None:
    for node in root.iter_nodes():
        if node is root:
            node.fused_value, node.fused_variance = 1.0, 0.0
        elif node.raw_estimates:
            first = node.raw_estimates[0]
            node.fused_value, node.fused_variance = first.value, first.variance


def post_process(root: TreeNode, params: AheadParams, *, fuse: bool = True) -> TreeNode:
    """Norm-Sub each layer, fuse bottom-up, expand frozen nodes to single cells.

    With ``fuse=False`` the first two steps are skipped and every node keeps the
    raw estimate of the layer that created it; only the expansion runs.
    Works in place and returns ``root``; raw estimates are left untouched so
    calling it again gives the same tree.
    """
    if not fuse:
        _raw_values(root)
        _expand_frozen(root, params)
        return root
    by_layer: dict[int, list[tuple[TreeNode, int]]] = {}
    for node in root.iter_nodes():
        for k, est in enumerate(node.raw_estimates):
            by_layer.setdefault(est.layer, []).append((node, k))
    cleaned: dict[int, list[float]] = {id(n): [math.nan] * len(n.raw_estimates)
                                       for n in root.iter_nodes()}
    for entries in by_layer.values():
        vec = norm_sub([node.raw_estimates[k].value for node, k in entries])
        for (node, k), v in zip(entries, vec):
            cleaned[id(node)][k] = float(v)

    def fuse_node(node: TreeNode) -> None:
        if node.frozen:
            node.fused_value, node.fused_variance = _inverse_variance_mean(
                cleaned[id(node)], [e.variance for e in node.raw_estimates])
            return
        for child in node.children:
            fuse_node(child)
        if node is root:
            node.fused_value, node.fused_variance = 1.0, 0.0
        elif not node.children:
            node.fused_value = cleaned[id(node)][0]
            node.fused_variance = node.raw_estimates[0].variance
        else:
            own, var_n = cleaned[id(node)][0], node.raw_estimates[0].variance
            kids = sum(ch.fused_value for ch in node.children)
            var_kids = sum(ch.fused_variance for ch in node.children)
            l1, l2 = weighted_lambda(var_n, var_kids)
            node.fused_value = l1 * own + l2 * kids
            node.fused_variance = l1 * l1 * var_n + l2 * l2 * var_kids

    fuse_node(root)
    _expand_frozen(root, params)
    return root


def _expand_frozen(root: TreeNode, params: AheadParams) -> None:
    for node in list(root.iter_nodes()):
        if node.frozen:
            _expand_uniform(node, params.split_per_axis)


# ------------------------------------------------------------ answering


def cover(root: TreeNode, query: Region) -> list[TreeNode]:
    """Coarsest nodes that tile ``query`` (top-down greedy)."""
    if not root.region.contains(query):
        raise InputError(f"query {query} outside domain {root.region}")
    out: list[TreeNode] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if query.contains(node.region):
            out.append(node)
        elif node.region.overlaps(query):
            if not node.children:
                raise ConfigurationError("tree is not complete; run post_process first")
            stack.extend(reversed(node.children))
    return out


def answer_range(root: TreeNode, query: Interval) -> float:
    total = sum(n.fused_value for n in cover(root, query))
    return min(1.0, max(0.0, total))


# --------------------------------------------------------- serialization


def tree_to_dict(node: TreeNode) -> dict:
    key = "interval" if isinstance(node.region, Interval) else "box"
    return {
        key: node.region.to_list(),
        "level": node.level,
        "fused_value": node.fused_value,
        "fused_variance": node.fused_variance,
        "frozen": node.frozen,
        "raw_estimates": [list(e) for e in node.raw_estimates],
        "children": [tree_to_dict(c) for c in node.children],
    }


def tree_from_dict(data: dict) -> TreeNode:
    region = region_from_list(data["interval"] if "interval" in data else data["box"])
    return TreeNode(
        region=region,
        level=int(data["level"]),
        raw_estimates=[Estimate(float(v), float(s), int(l), int(n))
                       for v, s, l, n in data.get("raw_estimates", [])],
        fused_value=float(data["fused_value"]),
        fused_variance=float(data["fused_variance"]),
        children=[tree_from_dict(c) for c in data.get("children", [])],
        frozen=bool(data.get("frozen", False)),
    )


def tree_to_json(root: TreeNode, indent: int | None = None) -> str:
    return json.dumps(tree_to_dict(root), indent=indent)


def tree_from_json(text: str) -> TreeNode:
    return tree_from_dict(json.loads(text))
