"""Two-attribute trees: every split cuts both axes of a square box at once.

With fanout 4 each box is halved on both axes, with fanout 16 it is quartered.
Children are listed row-major (y outer, x inner).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .regions import Box
from .tree import AheadParams, TreeNode, compute_params_nd, build_adaptive_tree, cover

Grid2dParams = AheadParams


def compute_params_2d(epsilon: float, n_users: int, domain_side: int,
                      fanout: int = 4) -> Grid2dParams:
    """Parameters over a ``domain_side`` x ``domain_side`` square; c = log_B(side^2)."""
    return compute_params_nd(epsilon, n_users, domain_side, fanout, 2)


def build_tree_2d(user_pairs, params: Grid2dParams, rng: np.random.Generator, *,
                  per_user: bool = False, seed: int | None = None) -> TreeNode:
    if params.dims != 2:
        raise ConfigurationError("build_tree_2d expects 2-d parameters")
    return build_adaptive_tree(user_pairs, params, rng, per_user=per_user, seed=seed)


def answer_range_2d(root: TreeNode, query: Box) -> float:
    total = sum(n.fused_value for n in cover(root, query))
    return min(1.0, max(0.0, total))
