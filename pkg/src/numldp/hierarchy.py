"""Hierarchy-based estimators: HH with constrained inference, HH-ADMM, and HaarHRR.

Trees are stored as flat node vectors in top-down order: the root first,
then each layer left to right, leaves last. Layers are numbered from the
bottom, so layer 1 holds the leaves and layer ``h + 1`` the root. Users
are split across layers ``1..h``; the root (total mass 1) is known.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .core import DegenerateError, DomainError, ReportBatch, as_params, as_rng, mix64
from .oracles import (
    HrrParams,
    cfo_aggregate,
    cfo_perturb,
    hrr_aggregate,
    hrr_perturb,
    norm_sub,
    project_simplex,
)


@dataclass(frozen=True)
class TreeShape:
    """``beta``-ary tree over ``d`` leaves, padded up to ``beta**h``."""

    d: int
    beta: int = 4

    def __post_init__(self):
        if self.d < 2:
            raise DomainError(f"hierarchy needs d >= 2, got {self.d}")
        if self.beta < 2:
            raise DomainError(f"branching factor must be >= 2, got {self.beta}")

    @property
    def h(self) -> int:
        h = 1
        while self.beta**h < self.d:
            h += 1
        return h

    @property
    def leaves(self) -> int:
        return self.beta**self.h

    def layer_size(self, layer: int) -> int:
        return self.beta ** (self.h + 1 - layer)

    def offset(self, layer: int) -> int:
        return sum(self.layer_size(k) for k in range(self.h + 1, layer, -1))

    @property
    def n_nodes(self) -> int:
        return self.offset(0)

    def layer_slice(self, layer: int) -> slice:
        start = self.offset(layer)
        return slice(start, start + self.layer_size(layer))

    def ancestor(self, v, layer: int):
        return np.asarray(v) // self.beta ** (layer - 1)


def pad_leaves(x, shape: TreeShape) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(shape.leaves)
    out[: x.size] = x
    return out


def tree_from_leaves(leaves, shape: TreeShape) -> np.ndarray:
    """Consistent node vector whose leaf layer is ``leaves`` (padded with zeros)."""
    x = np.zeros(shape.n_nodes)
    layer = pad_leaves(leaves, shape)
    for ell in range(1, shape.h + 2):
        x[shape.layer_slice(ell)] = layer
        if ell <= shape.h:
            layer = layer.reshape(-1, shape.beta).sum(axis=1)
    return x


def constraint_matrix(shape: TreeShape) -> sparse.csr_matrix:
    """One row per internal node: +1 on the node, -1 on each child."""
    rows, cols, vals = [], [], []
    r = 0
    for ell in range(shape.h + 1, 1, -1):
        parent0 = shape.offset(ell)
        child0 = shape.offset(ell - 1)
        for i in range(shape.layer_size(ell)):
            rows.append(r)
            cols.append(parent0 + i)
            vals.append(1.0)
            for c in range(shape.beta):
                rows.append(r)
                cols.append(child0 + shape.beta * i + c)
                vals.append(-1.0)
            r += 1
    return sparse.csr_matrix((vals, (rows, cols)), shape=(r, shape.n_nodes))


@dataclass
class HierarchyTree:
    shape: TreeShape
    layers: dict  # layer number -> estimate vector
    counts: dict = field(default_factory=dict)  # layer number -> users assigned

    def vector(self) -> np.ndarray:
        x = np.zeros(self.shape.n_nodes)
        for ell, est in self.layers.items():
            x[self.shape.layer_slice(ell)] = est
        return x

    @classmethod
    def from_vector(cls, x, shape: TreeShape, counts=None) -> "HierarchyTree":
        x = np.asarray(x, dtype=float)
        layers = {ell: x[shape.layer_slice(ell)].copy() for ell in range(1, shape.h + 2)}
        return cls(shape, layers, dict(counts or {}))

    def leaves(self) -> np.ndarray:
        return self.layers[1][: self.shape.d]


# -- population split and HH reporting --------------------------------------


def assign_layers(n: int, h: int, seed) -> np.ndarray:
    """Layer in ``1..h`` per user, from a keyed hash of (stream key, user index)."""
    key = as_rng(seed).integers(0, 2**64, dtype=np.uint64)
    idx = np.arange(n, dtype=np.uint64)
    return (mix64(mix64(idx) ^ key) % np.uint64(h)).astype(np.int64) + 1


def hh_report(v, shape: TreeShape, eps, seed) -> ReportBatch:
    """Each user reports one uniformly chosen layer and the CFO-perturbed ancestor there."""
    rng = as_rng(seed)
    v = np.asarray(v, dtype=np.int64)
    if np.any(v < 0) or np.any(v >= shape.d):
        raise DomainError(f"input index outside [0, {shape.d})")
    layer = assign_layers(v.size, shape.h, rng)
    key = np.zeros(v.size, dtype=np.uint64)
    value = np.zeros(v.size, dtype=np.int64)
    g = {}
    for ell in range(1, shape.h + 1):
        sel = layer == ell
        batch = cfo_perturb(shape.ancestor(v[sel], ell), shape.layer_size(ell), eps, rng)
        value[sel] = batch["value"]
        if "key" in batch.columns:
            key[sel] = batch["key"]
        g[ell] = (batch.mechanism, batch.meta.get("g"))
    meta = {"d": shape.d, "beta": shape.beta, "epsilon": as_params(eps).epsilon, "oracles": g}
    return ReportBatch("hh", {"layer": layer, "key": key, "value": value}, meta)


def hh_aggregate(batch: ReportBatch, shape: TreeShape) -> HierarchyTree:
    """Per-layer unbiased frequency estimates, each debiased by its own oracle."""
    eps = float(batch.meta["epsilon"])
    layer = batch["layer"]
    layers = {shape.h + 1: np.ones(1)}
    counts = {}
    for ell in range(1, shape.h + 1):
        sel = layer == ell
        counts[ell] = int(sel.sum())
        if counts[ell] == 0:
            raise DegenerateError(f"no users assigned to layer {ell}")
        kind, g = batch.meta["oracles"][ell]
        sub = ReportBatch(
            kind,
            {"key": batch["key"][sel], "value": batch["value"][sel]},
            {"d": shape.layer_size(ell), "g": g, "epsilon": eps},
        )
        layers[ell] = cfo_aggregate(sub)
    return HierarchyTree(shape, layers, counts)


# -- constrained inference ---------------------------------------------------


def project_tree_consistency(x, shape: TreeShape) -> np.ndarray:
    """Least-squares projection onto ``{x : A x = 0}`` by the two-pass tree method.

    Bottom-up pass blends each node with the sum of its children's partial
    estimates; top-down pass spreads each parent's residual evenly over
    its children.
    """
    x = np.asarray(x, dtype=float)
    k = shape.beta
    z = {1: x[shape.layer_slice(1)].copy()}
    for ell in range(2, shape.h + 2):
        child_sum = z[ell - 1].reshape(-1, k).sum(axis=1)
        kl, kl1 = float(k) ** ell, float(k) ** (ell - 1)
        z[ell] = (kl - kl1) / (kl - 1) * x[shape.layer_slice(ell)] + (kl1 - 1) / (kl - 1) * child_sum
    out = np.zeros_like(x)
    top = shape.h + 1
    out[shape.layer_slice(top)] = z[top]
    parent = z[top]
    for ell in range(shape.h, 0, -1):
        zs = z[ell]
        residual = parent - zs.reshape(-1, k).sum(axis=1)
        cur = zs + np.repeat(residual / k, k)
        out[shape.layer_slice(ell)] = cur
        parent = cur
    return out


def constrained_inference(tree: HierarchyTree) -> HierarchyTree:
    x = project_tree_consistency(tree.vector(), tree.shape)
    return HierarchyTree.from_vector(x, tree.shape, tree.counts)


def project_nonneg_normalized(x, shape: TreeShape) -> np.ndarray:
    """Project every layer onto the simplex independently.

    This is Norm-Sub's result whenever a layer's positive mass is at least
    1. For layers with less, the iterative clamp is not a true projection and
    ADMM can cycle on it, so the exact projection is used throughout.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for ell in range(1, shape.h + 2):
        sl = shape.layer_slice(ell)
        out[sl] = project_simplex(x[sl])
    return out


def hh_leaves(tree: HierarchyTree) -> np.ndarray:
    """Leaves of the consistent tree (possibly negative), padding stripped."""
    return constrained_inference(tree).leaves()


def ci_norm_sub(x, shape: TreeShape) -> np.ndarray:
    """Constrained inference, Norm-Sub on the leaves, then rebuild the tree.

    The two-step alternative to HH-ADMM; the result is a valid distribution
    and a consistent tree, but not the closest such tree to ``x``.
    """
    if isinstance(x, HierarchyTree):
        x = x.vector()
    leaves = project_tree_consistency(x, shape)[shape.layer_slice(1)]
    return tree_from_leaves(norm_sub(leaves), shape)


def tree_range_query(x, shape: TreeShape, lo: int, hi: int) -> float:
    """Sum of leaves ``[lo, hi)`` from the fewest tree nodes that cover the range."""
    x = np.asarray(x, dtype=float)
    if not 0 <= lo <= hi <= shape.leaves:
        raise DomainError(f"range [{lo}, {hi}) outside [0, {shape.leaves}]")
    total = 0.0
    ell = 1
    while lo < hi:
        base = shape.offset(ell)
        while lo < hi and lo % shape.beta:
            total += x[base + lo]
            lo += 1
        while lo < hi and hi % shape.beta:
            hi -= 1
            total += x[base + hi]
        if lo < hi and ell == shape.h + 1:
            total += x[base]
            break
        lo //= shape.beta
        hi //= shape.beta
        ell += 1
    return float(total)


# -- HH-ADMM ----------------------------------------------------------------


@dataclass
class AdmmResult:
    leaves: np.ndarray
    x: np.ndarray
    iterations: int
    converged: bool
    objective: list


def hh_admm(
    x_noisy,
    shape: TreeShape,
    max_iters: int = 5000,
    tol: float = 1e-6,
    rho: float = 1.0,
) -> AdmmResult:
    """Solve ``min 1/2 ||x - x~||^2`` s.t. tree consistency, ``x >= 0``, root = 1.

    Splits the objective, the consistency set and the per-layer simplex into
    three blocks (``y``, ``z``, ``w``) with scaled duals and stops when every
    primal residual falls below ``tol`` in max-norm. The returned tree is
    rebuilt from the nonnegative block's leaves, so it is exactly consistent.
    """
    if isinstance(x_noisy, HierarchyTree):
        x_noisy = x_noisy.vector()
    xt = np.asarray(x_noisy, dtype=float)
    x = xt.copy()
    y = np.zeros_like(x)
    z = np.zeros_like(x)
    w = np.zeros_like(x)
    mu = np.zeros_like(x)
    nu = np.zeros_like(x)
    eta = np.zeros_like(x)
    objective = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        y = rho * (x - xt + mu) / (1 + rho)
        z = project_tree_consistency(x + nu, shape)
        w = project_nonneg_normalized(x + eta, shape)
        x = ((y + xt - mu) + (z - nu) + (w - eta)) / 3
        r1, r2, r3 = x - xt - y, x - z, x - w
        mu += r1
        nu += r2
        eta += r3
        objective.append(0.5 * float(np.sum((x - xt) ** 2)))
        if max(np.abs(r1).max(), np.abs(r2).max(), np.abs(r3).max()) < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"HH-ADMM stopped at max_iters={max_iters} with residual above {tol}")
    leaves = w[shape.layer_slice(1)]
    leaves = leaves / leaves.sum()
    tree = tree_from_leaves(leaves, shape)
    return AdmmResult(leaves[: shape.d].copy(), tree, it, converged, objective)


def admm_objective(x, x_noisy) -> float:
    return 0.5 * float(np.sum((np.asarray(x) - np.asarray(x_noisy)) ** 2))


# -- Haar / HRR -------------------------------------------------------------


def haar_height(d: int) -> int:
    if d < 2:
        raise DomainError(f"Haar needs d >= 2, got {d}")
    return max(1, math.ceil(math.log2(d)))


def haar_forward(leaves):
    """Return ``(total, coeffs)`` with ``coeffs[l-1][a] = (C_l - C_r) / 2^(l/2)`` for layer ``l``."""
    x = np.asarray(leaves, dtype=float)
    h = haar_height(x.size)
    if x.size != 2**h:
        raise DomainError(f"Haar input length must be a power of 2, got {x.size}")
    coeffs = []
    level = x
    for ell in range(1, h + 1):
        pairs = level.reshape(-1, 2)
        coeffs.append((pairs[:, 0] - pairs[:, 1]) / 2 ** (ell / 2))
        level = pairs.sum(axis=1)
    return float(level[0]), coeffs


def haar_inverse(total: float, coeffs) -> np.ndarray:
    level = np.array([total], dtype=float)
    for ell in range(len(coeffs), 0, -1):
        diff = np.asarray(coeffs[ell - 1], dtype=float) * 2 ** (ell / 2)
        out = np.empty(2 * level.size)
        out[0::2] = (level + diff) / 2
        out[1::2] = (level - diff) / 2
        level = out
    return level


def haar_report(v, d: int, eps, seed) -> ReportBatch:
    """Each user picks a layer and HRR-reports the signed one-hot Haar vector there."""
    rng = as_rng(seed)
    v = np.asarray(v, dtype=np.int64)
    if np.any(v < 0) or np.any(v >= d):
        raise DomainError(f"input index outside [0, {d})")
    h = haar_height(d)
    layer = assign_layers(v.size, h, rng)
    rows = np.zeros(v.size, dtype=np.int64)
    bits = np.zeros(v.size, dtype=np.int64)
    privacy = as_params(eps)
    for ell in range(1, h + 1):
        sel = layer == ell
        node = v[sel] >> ell
        # left subtree of the node holds bit (ell - 1) == 0
        sign = 1 - 2 * ((v[sel] >> (ell - 1)) & 1)
        r, b = hrr_perturb(node, HrrParams(2 ** (h - ell), privacy), rng, sign=sign)
        rows[sel], bits[sel] = r, b
    meta = {"d": d, "epsilon": privacy.epsilon}
    return ReportBatch("haar", {"layer": layer, "row": rows, "bit": bits}, meta)


def haar_coefficients(batch: ReportBatch, d: int, eps) -> list:
    """Debiased per-layer Haar coefficients from HRR reports."""
    h = haar_height(d)
    privacy = as_params(eps)
    layer = batch["layer"]
    coeffs = []
    for ell in range(1, h + 1):
        sel = layer == ell
        if not np.any(sel):
            raise DegenerateError(f"no users assigned to layer {ell}")
        params = HrrParams(2 ** (h - ell), privacy)
        diff = hrr_aggregate(batch["row"][sel], batch["bit"][sel], params)
        coeffs.append(diff / 2 ** (ell / 2))
    return coeffs


def haar_reconstruct(batch: ReportBatch, d: int, eps) -> np.ndarray:
    """Leaf estimates (possibly negative) with the root mass fixed to 1."""
    leaves = haar_inverse(1.0, haar_coefficients(batch, d, eps))
    return leaves[:d]
