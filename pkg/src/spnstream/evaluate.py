"""Density queries, conditionals, and sampling.

Two evaluation paths exist.  ``log_density_rows`` flattens the pool into a
``CompiledNet`` and runs the batched kernel over complete rows; this is the
path training uses.  ``log_density`` walks the graph directly and accepts
partial evidence, marginalizing unassigned variables inside each Gaussian
leaf; a leaf with no assigned variable contributes a factor of one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from . import kernels
from .gstats import GaussianStats
from .nodes import (LeafNode, NodePool, ProductNode, Scope, SumNode,
                    derived_weights, topological_order)

LOG_2PI = float(np.log(2.0 * np.pi))


def _leaf_factor(stats: GaussianStats, floor: float, positions=None):
    """Cholesky pieces of a (possibly restricted) regularized leaf Gaussian.

    Returns (mean, inverse Cholesky factor, log normalization constant) for
    N(mean, cov + floor * I) restricted to the given coordinate positions.
    """
    if positions is None:
        mean = stats.mean
        cov = stats.cov
    else:
        idx = np.asarray(positions, dtype=np.intp)
        mean = stats.mean[idx]
        cov = stats.cov[np.ix_(idx, idx)]
    k = mean.shape[0]
    reg = cov + floor * np.eye(k)
    chol = np.linalg.cholesky(reg)
    ichol = solve_triangular(chol, np.eye(k), lower=True)
    const = -0.5 * k * LOG_2PI - float(np.log(np.diag(chol)).sum())
    return mean, ichol, const


def leaf_log_density_rows(leaf: LeafNode, floor: float, X: np.ndarray) -> np.ndarray:
    """Log-density of a leaf at complete rows, using its scope columns of X."""
    mean, ichol, const = _leaf_factor(leaf.stats, floor)
    dev = X[:, list(leaf.scope)] - mean
    y = dev @ ichol.T
    return const - 0.5 * np.einsum("ij,ij->i", y, y)


# ======================================================================
# Compiled (flattened) evaluation
# ======================================================================

@dataclass(eq=False)
class CompiledNet:
    """Flat-array view of a pool, consumed by the kernels module."""

    order: list[int]
    index: dict[int, int]
    kind: np.ndarray
    child_ptr: np.ndarray
    child_idx: np.ndarray
    child_logw: np.ndarray
    leaf_ptr: np.ndarray
    leaf_vars: np.ndarray
    leaf_mean: np.ndarray
    mat_ptr: np.ndarray
    leaf_ichol: np.ndarray
    leaf_const: np.ndarray
    structure_version: int

    def eval_rows(self, X: np.ndarray) -> np.ndarray:
        """Per-node log-density matrix, shape (n_nodes, n_rows)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty((self.kind.shape[0], X.shape[0]), dtype=np.float64)
        kernels.eval_flat(self.kind, self.child_ptr, self.child_idx, self.child_logw,
                          self.leaf_ptr, self.leaf_vars, self.leaf_mean,
                          self.mat_ptr, self.leaf_ichol, self.leaf_const, X, out)
        return out

    def refresh_leaf(self, pool: NodePool, nid: int) -> None:
        """Recompute one leaf's flattened parameters after a stats update."""
        i = self.index[nid]
        leaf = pool.node(nid)
        lo, hi = self.leaf_ptr[i], self.leaf_ptr[i + 1]
        k = hi - lo
        mean, ichol, const = _leaf_factor(leaf.stats, pool.variance_floor)
        self.leaf_mean[lo:hi] = mean
        self.leaf_ichol[self.mat_ptr[i]:self.mat_ptr[i] + k * k] = ichol.ravel()
        self.leaf_const[i] = const

    def refresh_weights(self, pool: NodePool) -> None:
        """Recompute sum-edge log weights from current counts."""
        for nid in self.order:
            node = pool.node(nid)
            if isinstance(node, SumNode):
                i = self.index[nid]
                lo = self.child_ptr[i]
                w = derived_weights(node, pool.weight_mode)
                with np.errstate(divide="ignore"):
                    self.child_logw[lo:lo + len(node.children)] = np.log(w)


def compile_pool(pool: NodePool) -> CompiledNet:
    """Flatten the pool (reachable part, topological order) for the kernels."""
    order = topological_order(pool)
    index = {nid: i for i, nid in enumerate(order)}
    n = len(order)
    kind = np.zeros(n, dtype=np.int8)
    child_counts = []
    leaf_sizes = []
    for nid in order:
        node = pool.node(nid)
        if isinstance(node, LeafNode):
            child_counts.append(0)
            leaf_sizes.append(len(node.scope))
        else:
            kind[index[nid]] = kernels.KIND_SUM if isinstance(node, SumNode) else kernels.KIND_PRODUCT
            child_counts.append(len(node.children))
            leaf_sizes.append(0)

    child_ptr = np.zeros(n + 1, dtype=np.int64)
    child_ptr[1:] = np.cumsum(child_counts)
    child_idx = np.zeros(child_ptr[-1], dtype=np.int64)
    child_logw = np.zeros(child_ptr[-1], dtype=np.float64)

    leaf_ptr = np.zeros(n + 1, dtype=np.int64)
    leaf_ptr[1:] = np.cumsum(leaf_sizes)
    leaf_vars = np.zeros(leaf_ptr[-1], dtype=np.int64)
    leaf_mean = np.zeros(leaf_ptr[-1], dtype=np.float64)
    mat_sizes = [s * s for s in leaf_sizes]
    mat_ptr = np.zeros(n + 1, dtype=np.int64)
    mat_ptr[1:] = np.cumsum(mat_sizes)
    leaf_ichol = np.zeros(mat_ptr[-1], dtype=np.float64)
    leaf_const = np.zeros(n, dtype=np.float64)

    net = CompiledNet(order, index, kind, child_ptr, child_idx, child_logw,
                      leaf_ptr, leaf_vars, leaf_mean, mat_ptr[:-1].copy(), leaf_ichol,
                      leaf_const, pool.structure_version)
    # mat_ptr needs only a start offset per node
    for nid in order:
        i = index[nid]
        node = pool.node(nid)
        if isinstance(node, LeafNode):
            lo, hi = leaf_ptr[i], leaf_ptr[i + 1]
            leaf_vars[lo:hi] = node.scope
            net.refresh_leaf(pool, nid)
        else:
            lo = child_ptr[i]
            for j, c in enumerate(node.children):
                child_idx[lo + j] = index[c]
    net.refresh_weights(pool)
    return net


def log_density_rows(pool: NodePool, X: np.ndarray, net: CompiledNet | None = None) -> np.ndarray:
    """Joint log-density at complete rows, shape (n_rows,)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != pool.dim:
        raise ValueError(f"rows have width {X.shape[1]}, pool dimension is {pool.dim}")
    if net is None:
        net = compile_pool(pool)
    out = net.eval_rows(X)
    return out[net.index[pool.root]].copy()


def subtree_log_density_rows(pool: NodePool, nid: int, X: np.ndarray) -> np.ndarray:
    """Reference graph-walk evaluation of one subtree at complete rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    values: dict[int, np.ndarray] = {}
    for cur in topological_order(pool, nid):
        node = pool.node(cur)
        if isinstance(node, LeafNode):
            values[cur] = leaf_log_density_rows(node, pool.variance_floor, X)
        elif isinstance(node, ProductNode):
            values[cur] = np.sum([values[c] for c in node.children], axis=0)
        else:
            w = derived_weights(node, pool.weight_mode)
            stacked = np.stack([values[c] for c in node.children])
            with np.errstate(divide="ignore"):
                values[cur] = logsumexp(stacked + np.log(w)[:, None], axis=0)
    return values[nid]


# ======================================================================
# Partial-evidence queries
# ======================================================================

def _check_assignment(pool: NodePool, assignment: Mapping[int, float]) -> dict[int, float]:
    out = {}
    for key, value in assignment.items():
        k = int(key)
        if k < 0 or k >= pool.dim:
            raise ValueError(f"assignment variable {k} is outside dimension {pool.dim}")
        v = float(value)
        if not np.isfinite(v):
            raise ValueError(f"assignment value for variable {k} is not finite")
        out[k] = v
    return out


def log_density(pool: NodePool, evidence: Mapping[int, float]) -> float:
    """Log of the joint density marginalized over unassigned variables.

    With empty evidence this is log of the total mass, which is 0.0 for any
    valid network.
    """
    ev = _check_assignment(pool, evidence)
    values: dict[int, float] = {}
    for cur in topological_order(pool):
        node = pool.node(cur)
        if isinstance(node, LeafNode):
            assigned = [v for v in node.scope if v in ev]
            if not assigned:
                values[cur] = 0.0
                continue
            positions = [i for i, v in enumerate(node.scope) if v in ev]
            mean, ichol, const = _leaf_factor(node.stats, pool.variance_floor, positions)
            dev = np.array([ev[v] for v in assigned]) - mean
            y = ichol @ dev
            values[cur] = const - 0.5 * float(y @ y)
        elif isinstance(node, ProductNode):
            values[cur] = float(sum(values[c] for c in node.children))
        else:
            w = derived_weights(node, pool.weight_mode)
            vals = np.array([values[c] for c in node.children])
            with np.errstate(divide="ignore"):
                values[cur] = float(logsumexp(vals + np.log(w)))
    return values[pool.root]


def conditional_log_density(pool: NodePool, query: Mapping[int, float],
                            evidence: Mapping[int, float]) -> float:
    """log f(query | evidence) via two marginal evaluations."""
    q = _check_assignment(pool, query)
    ev = _check_assignment(pool, evidence)
    overlap = set(q) & set(ev)
    if overlap:
        raise ValueError(f"query and evidence share variables {sorted(overlap)}")
    denom = log_density(pool, ev)
    if denom == -np.inf:
        raise ValueError("evidence has zero density under the model")
    joint = dict(ev)
    joint.update(q)
    return log_density(pool, joint) - denom


# ======================================================================
# Sampling and moments
# ======================================================================

def sample(pool: NodePool, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw rows from the network's distribution.

    Descends from the root, picking one child of each sum node according to
    its derived weights (deterministically, without consuming randomness,
    when only one weight is positive) and drawing each reached leaf from
    its regularized Gaussian.  Returns shape (d,) when size is None,
    otherwise (size, d).
    """
    n = 1 if size is None else int(size)
    out = np.empty((n, pool.dim), dtype=np.float64)
    factors: dict[int, tuple] = {}
    weights: dict[int, np.ndarray] = {}
    for i in range(n):
        stack = [pool.root]
        while stack:
            nid = stack.pop()
            node = pool.node(nid)
            if isinstance(node, LeafNode):
                if nid not in factors:
                    k = len(node.scope)
                    reg = node.stats.cov + pool.variance_floor * np.eye(k)
                    factors[nid] = (node.stats.mean, np.linalg.cholesky(reg))
                mean, chol = factors[nid]
                z = rng.standard_normal(len(node.scope))
                out[i, list(node.scope)] = mean + chol @ z
            elif isinstance(node, ProductNode):
                stack.extend(reversed(node.children))
            else:
                if nid not in weights:
                    weights[nid] = derived_weights(node, pool.weight_mode)
                w = weights[nid]
                positive = np.flatnonzero(w > 0.0)
                if len(positive) == 1:
                    pick = int(positive[0])
                else:
                    pick = int(rng.choice(len(w), p=w / w.sum()))
                stack.append(node.children[pick])
    return out[0] if size is None else out


def analytic_mean(pool: NodePool) -> np.ndarray:
    """Exact per-variable mean of the network's distribution."""
    means: dict[int, np.ndarray] = {}
    for cur in topological_order(pool):
        node = pool.node(cur)
        vec = np.zeros(pool.dim)
        if isinstance(node, LeafNode):
            vec[list(node.scope)] = node.stats.mean
        elif isinstance(node, ProductNode):
            for c in node.children:
                vec += means[c]
        else:
            w = derived_weights(node, pool.weight_mode)
            for wi, c in zip(w, node.children):
                vec += wi * means[c]
        means[cur] = vec
    return means[pool.root]
