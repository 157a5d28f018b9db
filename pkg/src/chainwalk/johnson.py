"""Johnson graphs, their walk spectra, and per-vertex collision data.

Vertices of J(N, R) are the R-element subsets of an N-element ground set,
adjacent when they differ by swapping one element.  The degree-normalized
adjacency operator has second-largest eigenvalue 1 - N/(R(N-R)), so the
classical spectral gap is delta = N/(R(N-R)).

The quantum walk operator acts on the directed-edge space spanned by |x>|y>
for adjacent x, y.  With a_x the uniform edge bundle leaving x and b_x the
bundle entering x, W = Ref_B . Ref_A where Ref_A reflects about span{a_x} and
Ref_B about span{b_x}.  W is the identity off span(A u B), so eigenphases are
computed on that subspace only; the premise checked downstream is that the
smallest nonzero phase is at least sqrt(delta).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Tuple

import numpy as np

from .errors import CapacityError, ParameterError, ValidationError
from .oracle import RestrictedFunction

_DEFAULT_MAX_VERTICES = 5000
_PHASE_ZERO_TOL = 1e-6


@dataclass(frozen=True)
class JohnsonGraph:
    """J(N, R) over an explicit ground set of domain points."""

    ground_set: Tuple[int, ...]
    subset_size: int

    def __post_init__(self) -> None:
        pts = tuple(sorted(set(self.ground_set)))
        if pts != tuple(self.ground_set):
            object.__setattr__(self, "ground_set", pts)
        n = len(pts)
        if not (0 < self.subset_size < n):
            raise ParameterError(
                f"need 0 < R < N, got R={self.subset_size}, N={n}"
            )

    @property
    def ground_size(self) -> int:
        return len(self.ground_set)

    @property
    def degree(self) -> int:
        return self.subset_size * (self.ground_size - self.subset_size)

    @property
    def vertex_count(self) -> int:
        return math.comb(self.ground_size, self.subset_size)


def vertices(graph: JohnsonGraph) -> Iterator[Tuple[int, ...]]:
    """All vertices in lexicographic order, as sorted tuples."""
    return itertools.combinations(graph.ground_set, graph.subset_size)


def neighbors(graph: JohnsonGraph, vertex: Iterable[int]) -> list:
    """The R(N-R) vertices reachable by one element swap."""
    v = tuple(sorted(vertex))
    inside = set(v)
    if len(v) != graph.subset_size or not inside.issubset(graph.ground_set):
        raise ParameterError(f"not a vertex of this graph: {v}")
    outside = [p for p in graph.ground_set if p not in inside]
    out = []
    for drop in v:
        kept = [p for p in v if p != drop]
        for add in outside:
            out.append(tuple(sorted(kept + [add])))
    return out


def closed_form_gap(ground_size: int, subset_size: int) -> float:
    return ground_size / (subset_size * (ground_size - subset_size))


def spectral_gap(graph: JohnsonGraph, max_vertices: int = _DEFAULT_MAX_VERTICES) -> float:
    """Eigensolved gap 1 - lambda_2 of the degree-normalized adjacency.

    lambda_2 is the second-largest eigenvalue counted with multiplicity and
    with sign.  Dense solve, guarded by `max_vertices`.
    """
    count = graph.vertex_count
    if count > max_vertices:
        raise CapacityError(f"{count} vertices exceeds dense solver cap {max_vertices}")
    verts = list(vertices(graph))
    index = {v: i for i, v in enumerate(verts)}
    adj = np.zeros((count, count))
    for v in verts:
        i = index[v]
        for w in neighbors(graph, v):
            adj[i, index[w]] = 1.0
    eigenvalues = np.linalg.eigvalsh(adj / graph.degree)
    return float(1.0 - eigenvalues[-2])


@dataclass(frozen=True)
class WalkSpectrum:
    """Eigenphase summary of the edge-space walk operator."""

    delta: float
    phase_gap: float
    marked_fraction: float
    eigenphases: Tuple[float, ...]


def walk_operator_spectrum(
    graph: JohnsonGraph,
    marked: Optional[Callable[[Tuple[int, ...]], bool]] = None,
    max_edges: int = 20000,
) -> WalkSpectrum:
    """Eigenphases of W = Ref_B . Ref_A on the directed edge space.

    Builds explicit orthonormal bundles a_x (edges leaving x) and b_x (edges
    entering x), restricts W to span(A u B) via an SVD basis, and takes exact
    eigenvalues of that block.  Off the block W is the identity, so every
    nonzero phase is found.  `marked` only contributes the marked-vertex
    fraction reported alongside.
    """
    verts = list(vertices(graph))
    v_count = len(verts)
    d = graph.degree
    if v_count * d > max_edges:
        raise CapacityError(
            f"edge space of size {v_count * d} exceeds cap {max_edges}"
        )
    index = {v: i for i, v in enumerate(verts)}
    edge_index: dict[tuple[int, int], int] = {}
    for v in verts:
        i = index[v]
        for w in neighbors(graph, v):
            edge_index[(i, index[w])] = len(edge_index)
    e_count = len(edge_index)

    amp = 1.0 / math.sqrt(d)
    a_mat = np.zeros((e_count, v_count))
    b_mat = np.zeros((e_count, v_count))
    for (i, j), e in edge_index.items():
        a_mat[e, i] = amp   # bundle leaving vertex i
        b_mat[e, j] = amp   # bundle entering vertex j

    stacked = np.hstack([a_mat, b_mat])
    u, singular, _ = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(singular > 1e-9 * singular[0]))
    basis = u[:, :rank]

    def reflect(block: np.ndarray, bundle: np.ndarray) -> np.ndarray:
        return 2.0 * bundle @ (bundle.T @ block) - block

    w_block = basis.T @ reflect(reflect(basis, a_mat), b_mat)
    eigenvalues = np.linalg.eigvals(w_block)
    if np.max(np.abs(np.abs(eigenvalues) - 1.0)) > 1e-8:
        raise ValidationError("walk block lost unitarity beyond tolerance")
    phases = np.angle(eigenvalues)
    nonzero = np.abs(phases) > _PHASE_ZERO_TOL
    phase_gap = float(np.min(np.abs(phases[nonzero]))) if np.any(nonzero) else math.pi

    if marked is None:
        fraction = 0.0
    else:
        fraction = sum(1 for v in verts if marked(v)) / v_count
    return WalkSpectrum(
        delta=spectral_gap(graph),
        phase_gap=phase_gap,
        marked_fraction=float(fraction),
        eigenphases=tuple(float(p) for p in sorted(phases)),
    )


@dataclass(frozen=True)
class VertexData:
    """Images and in-vertex multicollision tuples of one subset."""

    subset: Tuple[int, ...]
    images: Tuple[Tuple[int, int], ...]
    multicollisions: Tuple[Tuple[int, Tuple[int, ...]], ...]

    @property
    def count(self) -> int:
        return len(self.multicollisions)


def vertex_data(restriction: RestrictedFunction, subset: Iterable[int]) -> VertexData:
    """Ground-truth view of one vertex under the restricted function.

    The subset must avoid the exclusion closure.  A multicollision is an image
    with at least two preimages inside the subset; each is one tuple carrying
    every in-subset preimage, listed in image order.
    """
    raw = tuple(int(p) for p in subset)
    pts = tuple(sorted(set(raw)))
    if len(pts) != len(raw):
        raise ParameterError("subset has repeated points")
    groups: dict[int, list[int]] = {}
    images = []
    for x in pts:
        y = restriction.value(x)   # raises DomainError on excluded points
        images.append((x, y))
        groups.setdefault(y, []).append(x)
    multis = tuple(
        (image, tuple(sorted(pre)))
        for image, pre in sorted(groups.items())
        if len(pre) >= 2
    )
    return VertexData(subset=pts, images=tuple(images), multicollisions=multis)
