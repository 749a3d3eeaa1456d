"""Conditioned plane trees, their path encodings, and continuum-limit checks.

This module samples critical Bienaymé–Galton–Watson trees conditioned on
their total vertex count, converts trees to and from their depth-first step
sequence, contour, and height encodings, and builds the loop graphs obtained
by ringing every internal vertex.  It also provides the continuum reference
objects used by the scaling tests: a simulated normalized Brownian excursion
(as the norm of a three-dimensional Brownian bridge), the pseudo-metric an
excursion induces on [0, 1], and a Gromov–Hausdorff-style distortion
diagnostic between a sampled tree metric and such an excursion.

Conditioned sampling goes through an exchangeable bridge — independent
offspring counts conditioned to sum to ``n - 1`` — followed by a cyclic
rotation at the first minimum of the partial-sum walk, which is a bijection
onto step sequences whose walk first hits -1 exactly at step ``n``.  Two-point
and geometric offspring laws admit exact bridge samplers (a shuffle of a
fixed type count, and a uniform weak composition); other atomic laws fall
back to batched rejection.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .weights import CoverageError, FeasibilityError, OffspringDistribution

__all__ = [
    "BRIDGE_METHODS",
    "DEFAULT_EXCURSION_GRID",
    "MultiGraph",
    "ParityError",
    "PathFunction",
    "PlaneTree",
    "PseudoMetricExcursion",
    "contour_function",
    "contract_looptree",
    "critical_geometric_offspring",
    "critical_two_point_offspring",
    "excursion_maximum_samples",
    "first_visit_times",
    "gh_distortion",
    "height_function",
    "looptree",
    "lukasiewicz_path",
    "sample_brownian_excursion",
    "sample_conditioned_bgw",
    "sample_trunk_star",
    "spine_depth_samples",
    "spine_height_check",
    "to_newick",
    "tree_depths",
    "tree_distance_matrix",
    "tree_from_counts",
    "tree_from_newick",
    "tree_parents",
    "write_path_csv",
]

DEFAULT_EXCURSION_GRID = 1 << 14
BRIDGE_METHODS = ("auto", "shuffle", "stars-bars", "rejection")
_GEOMETRIC_RATIO_TOL = 1e-9
_CRITICALITY_TOL = 1e-6


class ParityError(ValueError):
    """Raised when no tree of the requested size exists for the offspring law."""


# -- plane trees ------------------------------------------------------------


@dataclass(frozen=True)
class PlaneTree:
    """Rooted plane tree: ordered child lists indexed by vertex id.

    Vertex ids are 0..size-1; trees built by this module label vertices in
    depth-first (preorder) order, although the structure does not require it.
    """

    children: list[list[int]]
    root: int = 0

    def __post_init__(self):
        n = len(self.children)
        if n == 0:
            raise ValueError("a plane tree has at least its root")
        if not 0 <= self.root < n:
            raise ValueError("root id out of range")
        seen = 0
        for kids in self.children:
            for c in kids:
                if not 0 <= c < n:
                    raise ValueError(f"child id {c} out of range")
                seen += 1
        if seen != n - 1:
            raise ValueError("child lists must contain each non-root vertex once")

    @property
    def size(self) -> int:
        return len(self.children)

    @property
    def n_leaves(self) -> int:
        return sum(1 for kids in self.children if not kids)

    def degree(self, v: int) -> int:
        return len(self.children[v])

    def preorder(self) -> list[int]:
        """Vertices in depth-first order, children visited left to right."""
        order: list[int] = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(self.children[v]))
        return order

    def validate(self) -> None:
        """Check connectivity and in-degrees exactly (O(size))."""
        order = self.preorder()
        if len(order) != self.size or len(set(order)) != self.size:
            raise ValueError("tree is not connected or repeats a vertex")


def tree_parents(tree: PlaneTree) -> np.ndarray:
    """Parent ids per vertex; the root maps to -1."""
    parents = np.full(tree.size, -1, dtype=np.int64)
    for v, kids in enumerate(tree.children):
        for c in kids:
            parents[c] = v
    return parents


def tree_depths(tree: PlaneTree) -> np.ndarray:
    """Root-to-vertex edge counts per vertex id."""
    depths = np.zeros(tree.size, dtype=np.int64)
    stack = [tree.root]
    while stack:
        v = stack.pop()
        for c in tree.children[v]:
            depths[c] = depths[v] + 1
            stack.append(c)
    return depths


def tree_from_counts(counts: Sequence[int]) -> PlaneTree:
    """Build the tree whose preorder child counts are ``counts``.

    The associated walk (partial sums of ``counts[i] - 1``) must stay above
    -1 until the final step, i.e. the sequence is the depth-first encoding of
    a single tree.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    if n == 0:
        raise ValueError("empty count sequence")
    if counts.min(initial=0) < 0:
        raise ValueError("child counts must be nonnegative")
    walk = np.cumsum(counts - 1)
    if walk[-1] != -1 or (n > 1 and walk[:-1].min() <= -1):
        raise ValueError("counts are not the depth-first encoding of one tree")
    children: list[list[int]] = [[] for _ in range(n)]
    stack = [0]
    pending = [int(counts[0])]
    for i in range(1, n):
        while pending[-1] == 0:
            stack.pop()
            pending.pop()
        children[stack[-1]].append(i)
        pending[-1] -= 1
        stack.append(i)
        pending.append(int(counts[i]))
    return PlaneTree(children=children)


def lukasiewicz_path(tree: PlaneTree) -> np.ndarray:
    """Depth-first step sequence: child count minus one per preorder vertex.

    Partial sums stay >= 0 before the last step and end at -1; building a
    tree from ``steps + 1`` with :func:`tree_from_counts` inverts this map.
    """
    steps = np.empty(tree.size, dtype=np.int64)
    for i, v in enumerate(tree.preorder()):
        steps[i] = len(tree.children[v]) - 1
    return steps


# -- offspring laws used throughout the tree tests ---------------------------


def critical_two_point_offspring() -> OffspringDistribution:
    """Offspring law with mass 1/2 on 0 and 1/2 on 2 (mean 1, variance 1)."""
    return OffspringDistribution(atoms={0: 0.5, 2: 0.5})


def critical_geometric_offspring(cutoff: int = 64) -> OffspringDistribution:
    """Geometric offspring law 2^-(k+1) (mean 1, variance 2), truncated far
    beyond double precision at ``cutoff``."""
    atoms = {k: 0.5 ** (k + 1) for k in range(cutoff + 1)}
    return OffspringDistribution(atoms=atoms)


def _atomic_support(nu: OffspringDistribution) -> tuple[np.ndarray, np.ndarray]:
    if nu.tail is not None:
        raise ValueError("tree sampling requires a purely atomic offspring law")
    vals = np.array(sorted(k for k, m in nu.atoms.items() if m > 0.0), dtype=np.int64)
    if vals.size == 0:
        raise ValueError("offspring law has no support")
    probs = np.array([nu.atoms[int(k)] for k in vals], dtype=np.float64)
    return vals, probs / probs.sum()


def _is_geometric(vals: np.ndarray, probs: np.ndarray) -> bool:
    if vals.size < 8 or vals[0] != 0 or not np.array_equal(vals, np.arange(vals.size)):
        return False
    ratios = probs[1:] / probs[:-1]
    return bool(np.all(np.abs(ratios - ratios[0]) <= _GEOMETRIC_RATIO_TOL))


# -- conditioned sampling -----------------------------------------------------


def _check_attainable(vals: np.ndarray, n: int) -> None:
    target = n - 1
    lo, hi = int(vals[0]) * n, int(vals[-1]) * n
    offsets = [int(v - vals[0]) for v in vals[1:]]
    g = math.gcd(*offsets) if offsets else 0
    shifted = target - int(vals[0]) * n
    ok = lo <= target <= hi and (shifted == 0 or (g > 0 and shifted % g == 0))
    if not ok:
        raise ParityError(
            f"no tree with {n} vertices exists for offspring support {vals.tolist()}"
        )


def _bridge_counts(
    nu: OffspringDistribution,
    n: int,
    rng: np.random.Generator,
    method: str = "auto",
    max_batches: int = 10_000,
) -> np.ndarray:
    """Exchangeable offspring counts of length n conditioned to sum to n - 1."""
    if n < 1:
        raise ValueError("tree size must be at least 1")
    if method not in BRIDGE_METHODS:
        raise ValueError(f"unknown bridge method {method!r}; use one of {BRIDGE_METHODS}")
    vals, probs = _atomic_support(nu)
    _check_attainable(vals, n)
    target = n - 1

    two_point = vals.size <= 2 and vals[0] == 0
    geometric = _is_geometric(vals, probs)
    if method == "auto":
        method = "shuffle" if two_point else ("stars-bars" if geometric else "rejection")

    if method == "shuffle":
        if not two_point:
            raise ValueError("the shuffle bridge needs support {0, s}")
        if n == 1:
            return np.zeros(1, dtype=np.int64)
        s = int(vals[-1])
        k = target // s
        counts = np.concatenate(
            [np.full(k, s, dtype=np.int64), np.zeros(n - k, dtype=np.int64)]
        )
        return rng.permutation(counts)

    if method == "stars-bars":
        if not geometric:
            raise ValueError("the stars-bars bridge needs a geometric offspring law")
        # Conditioned on the sum, geometric counts are uniform over weak
        # compositions of n - 1 into n parts: shuffle n - 1 stars with
        # n - 1 bars and read off the gap lengths.
        symbols = np.concatenate(
            [np.ones(target, dtype=np.int8), np.zeros(n - 1, dtype=np.int8)]
        )
        symbols = rng.permutation(symbols)
        bars = np.flatnonzero(symbols == 0)
        edges = np.concatenate([[-1], bars, [symbols.size]])
        return np.diff(edges) - 1

    batch_rows = max(1, min(256, (4_000_000 + n - 1) // n))
    for _ in range(max_batches):
        draws = rng.choice(vals, size=(batch_rows, n), p=probs)
        hits = np.flatnonzero(draws.sum(axis=1) == target)
        if hits.size:
            return draws[hits[0]].astype(np.int64)
    raise FeasibilityError(
        f"bridge rejection found no sum-{target} draw in {max_batches} batches; "
        "the requested size may be far out on the tail"
    )


def _rotate_to_first_passage(counts: np.ndarray) -> np.ndarray:
    """Cyclic shift placing the walk minimum last (cycle lemma).

    For exchangeable counts summing to n - 1 this is exactly the conditioned
    depth-first encoding: the rotated walk stays above -1 until its final
    step.
    """
    walk = np.cumsum(counts.astype(np.int64) - 1)
    j = int(np.argmin(walk))
    return np.concatenate([counts[j + 1 :], counts[: j + 1]])


def sample_conditioned_bgw(
    nu: OffspringDistribution,
    total_vertices: int,
    rng: np.random.Generator,
    *,
    bridge_method: str = "auto",
    max_batches: int = 10_000,
) -> PlaneTree:
    """Critical branching tree conditioned to have exactly ``total_vertices``.

    Raises :class:`ParityError` when the size is unattainable for the
    offspring support (e.g. even sizes under support {0, 2}) and
    :class:`FeasibilityError` when the rejection bridge exhausts its budget.
    """
    counts = _bridge_counts(nu, total_vertices, rng, bridge_method, max_batches)
    return tree_from_counts(_rotate_to_first_passage(counts))


# -- path encodings -----------------------------------------------------------


@dataclass(frozen=True)
class PathFunction:
    """Piecewise-linear function on [0, 1] sampled at i/denominator."""

    samples: np.ndarray
    denominator: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.denominator < 0:
            raise ValueError("denominator must be nonnegative")
        if samples.ndim != 1 or samples.size != self.denominator + 1:
            raise ValueError("need denominator + 1 samples on the unit grid")

    @property
    def grid(self) -> np.ndarray:
        if self.denominator == 0:
            return np.zeros(1)
        return np.arange(self.samples.size) / self.denominator

    def value(self, t) -> np.ndarray | float:
        t = np.clip(t, 0.0, 1.0)
        if self.denominator == 0:
            scalar = np.isscalar(t)
            out = np.full(np.shape(t), float(self.samples[0]))
            return float(self.samples[0]) if scalar else out
        return np.interp(t, self.grid, self.samples)

    @property
    def maximum(self) -> float:
        return float(self.samples.max())

    def rescaled(self, factor: float) -> "PathFunction":
        return PathFunction(samples=self.samples * factor, denominator=self.denominator)


def contour_function(tree: PlaneTree) -> PathFunction:
    """Depth profile of the edge walk around the tree.

    The walk traverses each edge twice, so a tree with n vertices yields
    2(n - 1) unit steps sampled at i / (2(n - 1)); it starts and ends at 0
    and its maximum is the tree height.
    """
    n = tree.size
    if n == 1:
        return PathFunction(samples=np.zeros(1), denominator=0)
    samples = np.empty(2 * (n - 1) + 1, dtype=np.float64)
    samples[0] = 0.0
    pos = 1
    depth = 0
    stack: list[tuple[int, int]] = [(tree.root, 0)]
    while stack:
        v, idx = stack[-1]
        kids = tree.children[v]
        if idx < len(kids):
            stack[-1] = (v, idx + 1)
            stack.append((kids[idx], 0))
            depth += 1
            samples[pos] = depth
            pos += 1
        else:
            stack.pop()
            if stack:
                depth -= 1
                samples[pos] = depth
                pos += 1
    return PathFunction(samples=samples, denominator=2 * (n - 1))


def height_function(tree: PlaneTree) -> PathFunction:
    """Depths of the preorder vertices, sampled at i / (n - 1)."""
    depths = tree_depths(tree)
    order = tree.preorder()
    samples = depths[order].astype(np.float64)
    return PathFunction(samples=samples, denominator=tree.size - 1)


def first_visit_times(tree: PlaneTree) -> np.ndarray:
    """Contour step at which each preorder vertex is first visited.

    The i-th preorder vertex (0-based) is first reached at contour index
    2 i - depth(i), an integer position on the contour grid.
    """
    depths = tree_depths(tree)
    order = np.asarray(tree.preorder(), dtype=np.int64)
    times = np.empty(tree.size, dtype=np.int64)
    times[order] = 2 * np.arange(tree.size, dtype=np.int64) - depths[order]
    return times


# -- loop graphs --------------------------------------------------------------


@dataclass(frozen=True)
class MultiGraph:
    """Undirected multigraph as an explicit edge list (parallel edges kept)."""

    n_vertices: int
    edges: list[tuple[int, int]]

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError("edge endpoint out of range")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def cycle_rank(self) -> int:
        """Independent cycles, E - V + 1, assuming the graph is connected."""
        return self.n_edges - self.n_vertices + 1

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


def _looptree_edges(
    tree: PlaneTree,
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Loop edges split into (kept, rightmost-child) lists."""
    kept: list[tuple[int, int]] = []
    rightmost: list[tuple[int, int]] = []
    for v, kids in enumerate(tree.children):
        if not kids:
            continue
        for a, b in zip(kids, kids[1:]):
            kept.append((a, b))
        kept.append((v, kids[0]))
        rightmost.append((v, kids[-1]))
    return kept, rightmost


def looptree(tree: PlaneTree) -> MultiGraph:
    """Replace each internal vertex by the cycle through its children.

    Every internal vertex with k children contributes k - 1 edges between
    consecutive children plus edges to its leftmost and rightmost child (a
    double edge when k = 1), k + 1 edges in total; a star with k children
    becomes a (k + 1)-cycle.
    """
    kept, rightmost = _looptree_edges(tree)
    edges = sorted(tuple(sorted(e)) for e in kept + rightmost)
    return MultiGraph(n_vertices=tree.size, edges=edges)


def contract_looptree(tree: PlaneTree) -> tuple[MultiGraph, np.ndarray]:
    """Contract every rightmost-child loop edge; vertices collapse onto leaves.

    Returns the contracted multigraph and the projection ``pi`` mapping each
    tree vertex to its contracted vertex id.  Each contracted class contains
    exactly one leaf (the end of the rightmost-child chain), so ``pi`` is a
    bijection from leaves to contracted vertices, and the graph's independent
    cycle count equals the number of internal vertices.
    """
    n = tree.size
    parent_of = np.arange(n)

    def find(x: int) -> int:
        root = x
        while parent_of[root] != root:
            root = parent_of[root]
        while parent_of[x] != root:
            parent_of[x], x = root, parent_of[x]
        return root

    kept, rightmost = _looptree_edges(tree)
    for u, v in rightmost:
        parent_of[find(u)] = find(v)

    reps = np.array([find(v) for v in range(n)])
    leaves = [v for v in range(n) if not tree.children[v]]
    rep_to_id = {find(leaf): i for i, leaf in enumerate(leaves)}
    pi = np.array([rep_to_id[r] for r in reps], dtype=np.int64)
    edges = sorted(tuple(sorted((int(pi[u]), int(pi[v])))) for u, v in kept)
    return MultiGraph(n_vertices=len(leaves), edges=edges), pi


# -- spine decomposition ------------------------------------------------------


def sample_trunk_star(
    nu_star: OffspringDistribution,
    h: int,
    rng: np.random.Generator,
) -> tuple[PlaneTree, list[int]]:
    """Spine of h vertices with independent ``nu_star`` offspring each.

    ``nu_star`` must place no mass on 0 so every spine vertex has a child;
    the next spine vertex is chosen uniformly among the children of the
    current one, and all off-spine children are leaves.  Returns the tree and
    the spine vertex ids (root first).
    """
    if h < 1:
        raise ValueError("spine height must be at least 1")
    if nu_star.mass(0) > 0.0:
        raise ValueError("spine offspring law must not produce zero children")
    vals, probs = _atomic_support(nu_star)
    children: list[list[int]] = [[]]
    spine = [0]
    v = 0
    for level in range(h):
        k = int(rng.choice(vals, p=probs))
        kids = list(range(len(children), len(children) + k))
        children[v] = kids
        children.extend([] for _ in range(k))
        if level < h - 1:
            v = int(kids[rng.integers(k)])
            spine.append(v)
    return PlaneTree(children=children), spine


def spine_depth_samples(
    nu: OffspringDistribution,
    p: int,
    n_samples: int,
    rng: np.random.Generator,
    *,
    bridge_method: str = "auto",
) -> np.ndarray:
    """Rescaled root-to-uniform-vertex distances in conditioned trees.

    Each sample draws a conditioned tree with 2p + 1 vertices and one uniform
    vertex, and returns the vertex depth times sigma / (2 sqrt(p)), the
    normalization under which the limiting law has density 2 x exp(-x^2).
    Depths are read off the depth-first walk directly (the depth of the k-th
    preorder vertex counts the running minima of the walk over [j, k]), so no
    trees are materialized.
    """
    if p < 1 or n_samples < 1:
        raise ValueError("p and n_samples must be positive")
    if abs(nu.mean - 1.0) > _CRITICALITY_TOL:
        raise ValueError("offspring law must be critical (mean 1)")
    sigma = math.sqrt(nu.variance)
    if not math.isfinite(sigma) or sigma <= 0.0:
        raise ValueError("offspring law needs finite nonzero variance")
    n = 2 * p + 1
    scale = sigma / (2.0 * math.sqrt(p))
    out = np.empty(n_samples, dtype=np.float64)
    for i in range(n_samples):
        counts = _rotate_to_first_passage(_bridge_counts(nu, n, rng, bridge_method))
        walk = np.concatenate([[0], np.cumsum(counts - 1)])
        v = int(rng.integers(n))
        seg = walk[: v + 1]
        suffix_min = np.minimum.accumulate(seg[::-1])[::-1]
        out[i] = np.count_nonzero(seg[:-1] == suffix_min[:-1]) * scale
    return out


def spine_height_check(
    nu: OffspringDistribution,
    p: int,
    n_samples: int,
    rng: np.random.Generator,
    *,
    bridge_method: str = "auto",
) -> float:
    """Kolmogorov–Smirnov distance of rescaled depths to CDF 1 - exp(-x^2)."""
    xs = np.sort(spine_depth_samples(nu, p, n_samples, rng, bridge_method=bridge_method))
    cdf = 1.0 - np.exp(-np.square(xs))
    ranks = np.arange(xs.size, dtype=np.float64)
    return float(
        max(np.max(cdf - ranks / xs.size), np.max((ranks + 1.0) / xs.size - cdf))
    )


# -- continuum reference objects ----------------------------------------------


def sample_brownian_excursion(
    n_grid: int = DEFAULT_EXCURSION_GRID,
    rng: Optional[np.random.Generator] = None,
) -> PathFunction:
    """Normalized Brownian excursion on a uniform grid of ``n_grid`` steps.

    Sampled exactly on the grid as the Euclidean norm of three independent
    standard Brownian bridges; the maximum has mean sqrt(pi/2).
    """
    if n_grid < 2:
        raise ValueError("need at least two grid steps")
    if rng is None:
        rng = np.random.default_rng()
    increments = rng.standard_normal((3, n_grid)) / math.sqrt(n_grid)
    paths = np.concatenate([np.zeros((3, 1)), np.cumsum(increments, axis=1)], axis=1)
    t = np.arange(n_grid + 1) / n_grid
    bridges = paths - t * paths[:, -1:]
    samples = np.sqrt(np.sum(np.square(bridges), axis=0))
    return PathFunction(samples=samples, denominator=n_grid)


def excursion_maximum_samples(
    n_paths: int,
    rng: np.random.Generator,
    n_grid: int = DEFAULT_EXCURSION_GRID,
    batch: int = 64,
) -> np.ndarray:
    """Maxima of independent normalized Brownian excursions, batched.

    Equivalent to ``sample_brownian_excursion(n_grid, rng).maximum`` repeated
    ``n_paths`` times, but vectorized across paths.
    """
    if n_paths < 1 or n_grid < 2:
        raise ValueError("need at least one path and two grid steps")
    out = np.empty(n_paths, dtype=np.float64)
    t = np.arange(n_grid + 1) / n_grid
    done = 0
    while done < n_paths:
        b = min(batch, n_paths - done)
        increments = rng.standard_normal((b, 3, n_grid)) / math.sqrt(n_grid)
        paths = np.concatenate(
            [np.zeros((b, 3, 1)), np.cumsum(increments, axis=2)], axis=2
        )
        bridges = paths - t * paths[:, :, -1:]
        out[done : done + b] = np.sqrt(np.square(bridges).sum(axis=1)).max(axis=1)
        done += b
    return out


@dataclass(frozen=True)
class PseudoMetricExcursion:
    """Pseudo-metric d(s, t) = e(s) + e(t) - 2 min e over [s, t] on [0, 1]."""

    excursion: PathFunction

    def __post_init__(self):
        if np.any(self.excursion.samples < 0.0):
            raise ValueError("excursion values must be nonnegative")

    def distance(self, s: float, t: float) -> float:
        a, b = (s, t) if s <= t else (t, s)
        a = min(max(a, 0.0), 1.0)
        b = min(max(b, 0.0), 1.0)
        e = self.excursion
        va = float(e.value(a))
        vb = float(e.value(b))
        low = min(va, vb)
        if e.denominator > 0:
            lo = math.ceil(a * e.denominator)
            hi = math.floor(b * e.denominator)
            if lo <= hi:
                low = min(low, float(e.samples[lo : hi + 1].min()))
        return va + vb - 2.0 * low

    def distance_matrix(self, times: Sequence[float]) -> np.ndarray:
        times = list(times)
        m = len(times)
        out = np.zeros((m, m), dtype=np.float64)
        for i in range(m):
            for j in range(i + 1, m):
                out[i, j] = out[j, i] = self.distance(times[i], times[j])
        return out


def tree_distance_matrix(tree: PlaneTree, vertices: Sequence[int]) -> np.ndarray:
    """Pairwise graph distances between the given vertices (edge counts)."""
    parents = tree_parents(tree)
    depths = tree_depths(tree)
    vs = list(vertices)
    m = len(vs)
    out = np.zeros((m, m), dtype=np.float64)
    for i in range(m):
        for j in range(i + 1, m):
            a, b = vs[i], vs[j]
            da, db = int(depths[a]), int(depths[b])
            while da > db:
                a = int(parents[a])
                da -= 1
            while db > da:
                b = int(parents[b])
                db -= 1
            while a != b:
                a, b = int(parents[a]), int(parents[b])
                da -= 1
            d = float(depths[vs[i]] + depths[vs[j]] - 2 * da)
            out[i, j] = out[j, i] = d
    return out


def gh_distortion(
    tree_metric: np.ndarray,
    excursion: PseudoMetricExcursion,
    correspondence: Iterable[tuple[int, float]],
) -> float:
    """Distortion of a correspondence between a finite metric and an excursion.

    ``correspondence`` pairs tree indices (rows of ``tree_metric``) with times
    in [0, 1]; every row index must appear at least once.  Returns the
    largest absolute gap |tree_metric[a, b] - d(s, t)| over pairs of matched
    points, the usual bound on twice the Gromov–Hausdorff distance.
    """
    metric = np.asarray(tree_metric, dtype=np.float64)
    if metric.ndim != 2 or metric.shape[0] != metric.shape[1]:
        raise ValueError("tree_metric must be a square matrix")
    pairs = [(int(i), float(s)) for i, s in correspondence]
    if not pairs:
        raise CoverageError("empty correspondence")
    covered = {i for i, _ in pairs}
    if covered != set(range(metric.shape[0])):
        raise CoverageError("correspondence must cover every tree index")
    if any(not 0.0 <= s <= 1.0 for _, s in pairs):
        raise ValueError("correspondence times must lie in [0, 1]")
    times = [s for _, s in pairs]
    d_exc = excursion.distance_matrix(times)
    idx = np.array([i for i, _ in pairs])
    gaps = np.abs(metric[np.ix_(idx, idx)] - d_exc)
    return float(gaps.max())


# -- serialization ------------------------------------------------------------


def to_newick(tree: PlaneTree) -> str:
    """Parenthesized string with vertex ids, children left to right."""
    parts: list[str] = []
    stack: list[tuple[int, int]] = [(tree.root, 0)]
    while stack:
        v, idx = stack[-1]
        kids = tree.children[v]
        if idx == 0 and kids:
            parts.append("(")
        if idx < len(kids):
            if idx > 0:
                parts.append(",")
            stack[-1] = (v, idx + 1)
            stack.append((kids[idx], 0))
        else:
            if kids:
                parts.append(")")
            parts.append(str(v))
            stack.pop()
    return "".join(parts) + ";"


def tree_from_newick(text: str) -> PlaneTree:
    """Inverse of :func:`to_newick` for contiguous 0-based vertex ids."""
    text = text.strip()
    if not text.endswith(";"):
        raise ValueError("newick string must end with ';'")
    body = text[:-1]
    children_of: dict[int, list[int]] = {}
    kids_stack: list[list[int]] = [[]]
    pos = 0
    while pos < len(body):
        ch = body[pos]
        if ch == "(":
            kids_stack.append([])
            pos += 1
        elif ch in ",)":
            pos += 1
        else:
            end = pos
            while end < len(body) and body[end].isdigit():
                end += 1
            if end == pos:
                raise ValueError(f"unexpected character {ch!r} in newick string")
            vid = int(body[pos:end])
            if vid in children_of:
                raise ValueError(f"vertex id {vid} appears twice")
            closed = pos > 0 and body[pos - 1] == ")"
            children_of[vid] = kids_stack.pop() if closed else []
            kids_stack[-1].append(vid)
            pos = end
    if len(kids_stack) != 1 or len(kids_stack[0]) != 1:
        raise ValueError("newick string does not describe a single tree")
    n = len(children_of)
    if sorted(children_of) != list(range(n)):
        raise ValueError("vertex ids must be 0..n-1")
    children = [children_of[v] for v in range(n)]
    return PlaneTree(children=children, root=kids_stack[0][0])


def write_path_csv(path, pf: PathFunction) -> None:
    """Write a sampled path as CSV rows of (t, value)."""
    grid = pf.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value"])
        for t, v in zip(grid, pf.samples):
            writer.writerow([repr(float(t)), repr(float(v))])
