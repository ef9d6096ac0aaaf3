"""Range queries over m attributes.

Two strategies share the adaptive tree core:

* DE builds one tree over the full m-d cube with fanout 2^m (m <= 3).
* LLE splits users into one group per attribute pair, builds a 2-d tree per
  pair, makes the pair trees agree on every shared 1-d stripe, and answers an
  m-d query by fitting the 2^m inside/outside lattice to the pairwise answers.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, InputError
from .grid2d import compute_params_2d
from .regions import Box, Interval
from .tree import (AheadParams, TreeNode, build_adaptive_tree, compute_params_nd,
                   exact_log, pad_domain, post_process, tree_from_dict, tree_to_dict, cover)
from .data import partition_users

log = logging.getLogger(__name__)

MDQuery = Box
MAX_DE_DIMS = 3


def _check_records(records, side: int) -> np.ndarray:
    arr = np.asarray(records)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InputError(f"expected (n, m) records with m >= 2, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= side):
        raise InputError(f"record values must lie in [0, {side})")
    return arr.astype(np.int64)


def answer_box(root: TreeNode, query: Box) -> float:
    total = sum(n.fused_value for n in cover(root, query))
    return min(1.0, max(0.0, total))


# -------------------------------------------------------------------- DE


def compute_params_de(epsilon: float, n_users: int, domain_side: int, m: int) -> AheadParams:
    if m > MAX_DE_DIMS:
        raise ConfigurationError(f"direct estimation supports at most {MAX_DE_DIMS} attributes")
    return compute_params_nd(epsilon, n_users, domain_side, 2 ** m, m)


def build_de_tree(records, params: AheadParams, rng: np.random.Generator, *,
                  per_user: bool = False, seed: int | None = None) -> TreeNode:
    if params.dims > MAX_DE_DIMS:
        raise ConfigurationError(f"direct estimation supports at most {MAX_DE_DIMS} attributes")
    if params.dims < 2:
        raise ConfigurationError("direct estimation needs m >= 2")
    return build_adaptive_tree(records, params, rng, per_user=per_user, seed=seed)


# ------------------------------------------------------------------- LLE


@dataclass(eq=False)
class PairTree:
    attrs: tuple[int, int]
    params: AheadParams
    root: TreeNode


@dataclass(eq=False)
class TreeForest:
    m: int
    domain_side: int
    pairs: list[PairTree]
    group_sizes: list[int] = field(default_factory=list)

    def tree_for(self, i: int, j: int) -> PairTree:
        for pt in self.pairs:
            if pt.attrs == (i, j):
                return pt
        raise InputError(f"no tree for attributes ({i}, {j})")


def lle_group_count(m: int, domain_side: int, fanout: int = 4) -> int:
    """Total user groups across all pair trees: C(m,2) * log_B(side^2)."""
    c = exact_log(domain_side * domain_side, fanout)
    if c is None:
        raise ConfigurationError(f"side {domain_side} does not fit fanout {fanout}")
    return math.comb(m, 2) * c


def build_lle_forest(records, epsilon: float, domain_side: int, rng: np.random.Generator, *,
                     fanout: int = 4, consistency: bool = True, per_user: bool = False,
                     seed: int | None = None) -> TreeForest:
    per_axis = round(math.sqrt(fanout))
    if per_axis < 2 or per_axis ** 2 != fanout:
        raise ConfigurationError(f"fanout {fanout} is not a perfect square")
    side = pad_domain(domain_side, per_axis)
    recs = _check_records(records, side)
    m = recs.shape[1]
    pairs = list(itertools.combinations(range(m), 2))
    assignment = partition_users(len(recs), len(pairs), rng)
    sizes = np.bincount(assignment, minlength=len(pairs))
    if per_user and seed is None:
        seed = int(rng.integers(2**63))
    trees = []
    for g, (i, j) in enumerate(pairs):
        members = np.flatnonzero(assignment == g)
        if len(members) == 0:
            raise ConfigurationError(f"pair group ({i}, {j}) is empty")
        params = compute_params_2d(epsilon, len(members), side, fanout)
        sub_seed = None if seed is None else int(np.random.SeedSequence([seed, g]).generate_state(1)[0])
        root = build_adaptive_tree(recs[members][:, [i, j]], params, rng,
                                   per_user=per_user, seed=sub_seed)
        trees.append(PairTree((i, j), params, post_process(root, params)))
    forest = TreeForest(m, side, trees, sizes.tolist())
    if consistency:
        enforce_attribute_consistency(forest)
    return forest


def _level_grids(pt: PairTree) -> dict[int, np.ndarray]:
    """Object grids of nodes per level, indexed [x slice, y slice]."""
    s = pt.params.split_per_axis
    side = pt.params.domain_size
    grids: dict[int, np.ndarray] = {}
    for node in pt.root.iter_nodes():
        k = s ** node.level
        grid = grids.get(node.level)
        if grid is None:
            grid = grids[node.level] = np.empty((k, k), dtype=object)
        w = side // k
        grid[node.region.x.lo // w, node.region.y.lo // w] = node
    for lvl, grid in grids.items():
        if any(g is None for g in grid.flat):
            raise ConfigurationError("pair tree is not complete; run post_process first")
    return grids


def enforce_attribute_consistency(forest: TreeForest) -> TreeForest:
    """Make every pair tree report the same stripe marginals on shared attributes.

    Each level of each tree is first shifted uniformly so its total is 1.  Then,
    for each attribute in ascending order, the stripe sums of all trees holding
    that attribute are replaced by their inverse-variance weighted mean
    (shifted to total 1), the difference being spread evenly over the nodes of
    the stripe.  Since every correction sums to zero, fixing one attribute does
    not disturb the stripes of another.
    """
    if len(forest.pairs) < 2:
        return forest
    grids = [_level_grids(pt) for pt in forest.pairs]
    levels = sorted(set.intersection(*(set(g) for g in grids)) - {0})
    for lvl in levels:
        values = [np.vectorize(lambda n: n.fused_value, otypes=[float])(g[lvl]) for g in grids]
        variances = [np.vectorize(lambda n: n.fused_variance, otypes=[float])(g[lvl])
                     for g in grids]
        k = values[0].shape[0]
        for v in values:
            v += (1.0 - v.sum()) / v.size
        for a in range(forest.m):
            holders = [(t, 1 if pt.attrs[0] == a else 0)
                       for t, pt in enumerate(forest.pairs) if a in pt.attrs]
            if len(holders) < 2:
                continue
            # stripes of attribute a: sum over the other axis
            f_t = np.array([values[t].sum(axis=ax) for t, ax in holders])
            var_t = np.array([variances[t].sum(axis=ax) for t, ax in holders])
            w = 1.0 / np.maximum(var_t, 1e-300)
            fused = (w * f_t).sum(axis=0) / w.sum(axis=0)
            # keep the fused stripes summing to 1 so other attributes stay consistent
            fused += (1.0 - fused.sum()) / k
            for (t, ax), ft in zip(holders, f_t):
                delta = (fused - ft) / k
                values[t] += delta[:, None] if ax == 1 else delta[None, :]
        for g, v in zip(grids, values):
            for node, val in zip(g[lvl].flat, v.flat):
                node.fused_value = float(val)
    return forest


def stripe_marginals(pt: PairTree, attr: int, level: int) -> np.ndarray:
    """Stripe sums of one pair tree along ``attr`` at ``level``."""
    grid = _level_grids(pt)[level]
    vals = np.vectorize(lambda n: n.fused_value, otypes=[float])(grid)
    return vals.sum(axis=1 if pt.attrs[0] == attr else 0)


# ------------------------------------------------------ lattice solving


@dataclass(frozen=True, eq=False)
class QueryLattice:
    """Joint frequencies of the 2^m inside/outside patterns; index 1 = inside."""

    frequencies: np.ndarray
    converged: bool
    iterations: int
    max_violation: float

    @property
    def inside(self) -> float:
        return float(self.frequencies[(1,) * self.frequencies.ndim])


def pair_table(inside_both: float, inside_i: float, inside_j: float) -> np.ndarray:
    """2x2 table P(bit_i, bit_j) from the three rectangle answers, clamped at 0."""
    t = np.array([[1.0 - inside_i - inside_j + inside_both, inside_j - inside_both],
                  [inside_i - inside_both, inside_both]])
    return np.maximum(t, 0.0)


def _pair_design(pairs: list[tuple[int, int]], m: int) -> np.ndarray:
    """0/1 matrix mapping the flattened 2^m lattice to the stacked 2x2 pair margins."""
    cells = np.array(list(itertools.product((0, 1), repeat=m)))
    rows = [(cells[:, i] == a) & (cells[:, j] == b)
            for i, j in pairs for a in (0, 1) for b in (0, 1)]
    return np.array(rows, dtype=float)


def realizable_tables(tables: dict[tuple[int, int], np.ndarray], m: int
                      ) -> dict[tuple[int, int], np.ndarray]:
    """Closest (least-squares) pair tables that some joint distribution produces.

    Noisy pair answers need not agree on shared margins, or even admit any
    joint distribution; the fit is only well posed on realizable tables.
    """
    pairs = list(tables)
    target = []
    for p in pairs:
        t = np.maximum(tables[p], 0.0)
        target.append((t / t.sum() if t.sum() > 0 else np.full((2, 2), 0.25)).ravel())
    design = _pair_design(pairs, m)
    fit = optimize.lsq_linear(design, np.concatenate(target), bounds=(0.0, 1.0),
                              method="bvls", tol=1e-14)
    joint = np.maximum(fit.x, 0.0)
    joint /= joint.sum()
    margins = (design @ joint).reshape(len(pairs), 2, 2)
    return dict(zip(pairs, margins))


def solve_query_lattice(tables: dict[tuple[int, int], np.ndarray], m: int, *,
                        max_sweeps: int = 1000, tol: float = 1e-6) -> QueryLattice:
    """Maximum-entropy 2^m lattice matching the pair tables, by proportional scaling.

    Starting from the uniform lattice, each sweep rescales the joint so that
    each pair margin in turn matches its table.
    """
    if m < 2:
        raise InputError("need at least two attributes")
    f = np.full((2,) * m, 1.0 / 2 ** m)
    violation = math.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for (i, j), target in tables.items():
            other = tuple(a for a in range(m) if a not in (i, j))
            cur = f.sum(axis=other)
            ratio = np.divide(target, cur, out=np.zeros_like(target), where=cur > 0)
            shape = [1] * m
            shape[i] = shape[j] = 2
            f = f * ratio.reshape(shape)
        violation = max(float(np.abs(f.sum(axis=tuple(a for a in range(m) if a not in p))
                                     - t).max()) for p, t in tables.items())
        if violation < tol:
            break
    return QueryLattice(f, violation < tol, sweeps, violation)


def _check_query(forest: TreeForest, query: Box) -> None:
    if query.dims != forest.m:
        raise InputError(f"query has {query.dims} bounds, forest has {forest.m} attributes")
    full = Interval(0, forest.domain_side - 1)
    if not all(full.contains(a) for a in query.axes):
        raise InputError(f"query {query} outside domain")


def query_tables(forest: TreeForest, query: Box) -> dict[tuple[int, int], np.ndarray]:
    _check_query(forest, query)
    full = Interval(0, forest.domain_side - 1)
    tables = {}
    for pt in forest.pairs:
        i, j = pt.attrs
        qi, qj = query.axes[i], query.axes[j]
        both = answer_box(pt.root, Box(qi, qj))
        only_i = answer_box(pt.root, Box(qi, full))
        only_j = answer_box(pt.root, Box(full, qj))
        tables[(i, j)] = pair_table(both, only_i, only_j)
    return tables


def query_lattice(forest: TreeForest, query: Box, **solver) -> QueryLattice:
    tables = realizable_tables(query_tables(forest, query), forest.m)
    return solve_query_lattice(tables, forest.m, **solver)


def answer_md_query(forest: TreeForest, query: Box, **solver) -> float:
    lattice = query_lattice(forest, query, **solver)
    if not lattice.converged:
        log.warning("lattice fit stopped after %d sweeps, max violation %.3g",
                    lattice.iterations, lattice.max_violation)
    return min(1.0, max(0.0, lattice.inside))


# --------------------------------------------------------- serialization


def forest_to_dict(forest: TreeForest) -> dict:
    return {
        "m": forest.m,
        "domain_side": forest.domain_side,
        "group_sizes": list(forest.group_sizes),
        "pairs": [{"attrs": list(pt.attrs),
                   "params": {"fanout": pt.params.fanout, "theta": pt.params.theta,
                              "groups": pt.params.groups, "epsilon": pt.params.epsilon,
                              "n_users": pt.params.n_users,
                              "domain_size": pt.params.domain_size, "dims": pt.params.dims},
                   "tree": tree_to_dict(pt.root)} for pt in forest.pairs],
    }


def forest_from_dict(data: dict) -> TreeForest:
    pairs = [PairTree(tuple(p["attrs"]), AheadParams(**p["params"]), tree_from_dict(p["tree"]))
             for p in data["pairs"]]
    return TreeForest(int(data["m"]), int(data["domain_side"]), pairs,
                      list(data.get("group_sizes", [])))
