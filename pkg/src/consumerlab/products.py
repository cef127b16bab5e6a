"""Product construction and value-landscape analysis.

A product is a connected graph on six vertices. Its functional side is a
utility fixed by edge count; its surface side is a six-element signature
read off a circular layout that a relaxation pass drives toward equal
edge lengths. Nearby signatures can hide very different utilities, which
is what makes the search landscape rugged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .serialize import atomic_write_text, fmt_float

N_VERTICES = 6
MIN_EDGES = 5
MAX_EDGES = 15
VERTEX_PAIRS: tuple[tuple[int, int], ...] = tuple(
    (i, j) for i in range(N_VERTICES) for j in range(i + 1, N_VERTICES)
)


class GenerationError(RuntimeError):
    """Raised when constrained type-set generation runs out of attempts."""

    def __init__(self, message: str, achieved: int):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class ProductTopology:
    """Undirected graph on six vertices, stored as sorted (i, j) pairs."""

    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not (MIN_EDGES <= len(self.edges) <= MAX_EDGES):
            raise ValueError(f"edge count {len(self.edges)} outside [{MIN_EDGES}, {MAX_EDGES}]")
        for i, j in self.edges:
            if not (0 <= i < j < N_VERTICES):
                raise ValueError(f"bad edge ({i}, {j})")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")
        if not _is_connected(self.edges):
            raise ValueError("graph is not connected")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((N_VERTICES, N_VERTICES), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj


def _is_connected(edges) -> bool:
    neighbors: dict[int, list[int]] = {v: [] for v in range(N_VERTICES)}
    for i, j in edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in neighbors[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == N_VERTICES


MAX_TOPOLOGY_RETRIES = 10_000


def random_topology(rng: np.random.Generator) -> ProductTopology:
    """Draw a uniform edge count in [5, 15], then a random edge subset of
    that size, retrying until the graph is connected."""
    for _ in range(MAX_TOPOLOGY_RETRIES):
        count = int(rng.integers(MIN_EDGES, MAX_EDGES + 1))
        picks = rng.choice(len(VERTEX_PAIRS), size=count, replace=False)
        edges = tuple(sorted(VERTEX_PAIRS[k] for k in picks))
        if _is_connected(edges):
            return ProductTopology(edges)
    raise RuntimeError("no connected graph found in 10000 draws; rng is broken")


# ---------------------------------------------------------------------------
# circular layout relaxation


@dataclass(frozen=True)
class LayoutResult:
    signature: np.ndarray     # per-vertex distance from the layout centroid
    residual: float           # std deviation of edge chord lengths at the layout
    converged: bool
    angles: tuple[float, ...]  # final vertex angles on the unit circle


_PAIR_I = np.array([i for i, j in VERTEX_PAIRS])
_PAIR_J = np.array([j for i, j in VERTEX_PAIRS])
# pair incidence: d(theta_i - theta_j)/d(theta_v) for every vertex pair
_PAIR_INC = np.zeros((len(VERTEX_PAIRS), N_VERTICES))
for _p, (_i, _j) in enumerate(VERTEX_PAIRS):
    _PAIR_INC[_p, _i] = 1.0
    _PAIR_INC[_p, _j] = -1.0
_TWO_PI = 2.0 * math.pi


def _edge_arrays(topologies):
    # pad per-topology edge lists to a common width; mask marks real edges
    count = len(topologies)
    width = max(t.edge_count for t in topologies)
    ei = np.zeros((count, width), dtype=np.intp)
    ej = np.zeros((count, width), dtype=np.intp)
    mask = np.zeros((count, width))
    inc = np.zeros((count, width, N_VERTICES))
    for k, topo in enumerate(topologies):
        for e, (i, j) in enumerate(topo.edges):
            ei[k, e] = i
            ej[k, e] = j
            mask[k, e] = 1.0
            inc[k, e, i] = 1.0
            inc[k, e, j] = -1.0
    m = np.array([float(t.edge_count) for t in topologies])
    return ei, ej, mask, inc, m


def _batch_objective(theta, ei, ej, mask, inc, m, min_separation, separation_weight):
    """Objective, gradient and chord variance for a (k, 6) block of layouts.

    Objective: variance of edge chord lengths plus a short-range quadratic
    repulsion that keeps vertices from collapsing onto one another (all
    chord lengths zero would otherwise be a perfect minimum). Rows are
    independent, so results do not depend on batch composition.
    """
    rows = np.arange(theta.shape[0])[:, None]
    half = 0.5 * (theta[rows, ei] - theta[rows, ej])
    s = np.sin(half)
    lengths = 2.0 * np.abs(s) * mask
    mean = lengths.sum(axis=1) / m
    mean_sq = (lengths * lengths).sum(axis=1) / m
    variance = mean_sq - mean * mean
    d_len = np.cos(half) * np.where(s >= 0.0, 1.0, -1.0)
    coeff = (2.0 / m)[:, None] * (lengths - mean[:, None]) * d_len * mask
    grad = np.einsum("ke,kev->kv", coeff, inc)

    diff = theta[:, _PAIR_I] - theta[:, _PAIR_J]
    wrapped = diff - _TWO_PI * np.round(diff / _TWO_PI)
    gap = min_separation - np.abs(wrapped)
    np.maximum(gap, 0.0, out=gap)
    penalty = separation_weight * (gap * gap).sum(axis=1)
    pair_grad = -2.0 * separation_weight * gap * np.where(wrapped >= 0.0, 1.0, -1.0)
    grad += pair_grad @ _PAIR_INC
    return variance + penalty, grad, variance


def layout_objective(theta, edges, min_separation: float = 0.1,
                     separation_weight: float = 1.0) -> float:
    """Objective the relaxation descends (exposed for independent checks)."""
    arrays = _edge_arrays([ProductTopology(tuple(edges))])
    value, _, _ = _batch_objective(np.asarray(theta, dtype=float)[None, :],
                                   *arrays, min_separation, separation_weight)
    return float(value[0])


_INITIAL_ANGLES = np.array([_TWO_PI * v / N_VERTICES for v in range(N_VERTICES)])


def layout_signatures(topologies, step: float = 0.01, tol: float = 1e-8,
                      max_iter: int = 10_000, min_separation: float = 0.1,
                      separation_weight: float = 1.0) -> list[LayoutResult]:
    """Relax circular layouts for a whole block of product graphs at once.

    Vertices start evenly spaced on the unit circle (vertex-index order)
    and follow fixed-step gradient descent on the chord-length variance
    plus the overlap repulsion. A layout stops once its largest angle
    update drops below `tol`; layouts still moving at the iteration cap
    report their best iterate with converged=False. Deterministic, and
    independent of how layouts are grouped into blocks.
    """
    count = len(topologies)
    ei, ej, mask, inc, m = _edge_arrays(topologies)
    theta = np.tile(_INITIAL_ANGLES, (count, 1))
    best_obj = np.full(count, np.inf)
    best_theta = theta.copy()
    final_theta = theta.copy()
    converged = np.zeros(count, dtype=bool)
    live = np.arange(count)  # rows still descending; converged rows drop out
    for _ in range(max_iter):
        objective, grad, _ = _batch_objective(
            theta, ei, ej, mask, inc, m, min_separation, separation_weight)
        improved = objective < best_obj
        if improved.any():
            best_obj[improved] = objective[improved]
            best_theta[improved] = theta[improved]
        update = step * grad
        theta -= update
        newly = np.abs(update).max(axis=1) < tol
        if newly.any():
            done = live[newly]
            final_theta[done] = theta[newly]
            converged[done] = True
            keep = ~newly
            if not keep.any():
                live = live[keep]
                break
            theta = theta[keep]
            best_obj = best_obj[keep]
            best_theta = best_theta[keep]
            ei, ej, mask, inc, m = (ei[keep], ej[keep], mask[keep],
                                    inc[keep], m[keep])
            live = live[keep]
    if live.size:
        final_theta[live] = best_theta
    all_arrays = _edge_arrays(topologies)
    _, _, final_var = _batch_objective(
        final_theta, *all_arrays, min_separation, separation_weight)

    xs = np.cos(final_theta)
    ys = np.sin(final_theta)
    dx = xs - xs.mean(axis=1)[:, None]
    dy = ys - ys.mean(axis=1)[:, None]
    signatures = np.sqrt(dx * dx + dy * dy)
    return [LayoutResult(signature=signatures[k].copy(),
                         residual=math.sqrt(max(float(final_var[k]), 0.0)),
                         converged=bool(converged[k]),
                         angles=tuple(final_theta[k]))
            for k in range(count)]


def layout_signature(topology: ProductTopology, **kwargs) -> LayoutResult:
    """Relax one product graph's circular layout and read its signature."""
    return layout_signatures([topology], **kwargs)[0]


# ---------------------------------------------------------------------------
# utility and valuation

EXPECTED_EDGES = 8


def utility_from_edges(edge_count: int, slope: float = 1.0) -> float:
    """Logistic utility of the edge count, centered on 8 edges.

    Strictly increasing, bounded in (-1, 1), zero at 8: counts above 8
    earn positive utility, counts below earn negative utility.
    """
    if not MIN_EDGES <= edge_count <= MAX_EDGES:
        raise ValueError(f"edge count {edge_count} outside [{MIN_EDGES}, {MAX_EDGES}]")
    return 2.0 / (1.0 + math.exp(-slope * (edge_count - EXPECTED_EDGES))) - 1.0


def valuation(ideal, signature) -> float:
    """Euclidean distance between two signatures (a consumer's ideal is
    itself a signature-shaped vector)."""
    a = np.asarray(ideal, dtype=float)
    b = np.asarray(signature, dtype=float)
    if a.shape != (N_VERTICES,) or b.shape != (N_VERTICES,):
        raise ValueError("signatures must have six components")
    diff = a - b
    return float(math.sqrt(np.dot(diff, diff)))


# ---------------------------------------------------------------------------
# product types and type sets


@dataclass(frozen=True, eq=False)
class ProductType:
    type_id: int
    topology: ProductTopology
    signature: np.ndarray
    utility: float


def make_product_type(type_id: int, topology: ProductTopology,
                      slope: float = 1.0, **layout_kwargs) -> ProductType:
    layout = layout_signature(topology, **layout_kwargs)
    return ProductType(type_id=type_id, topology=topology,
                       signature=layout.signature,
                       utility=utility_from_edges(topology.edge_count, slope))


_CANDIDATE_BLOCK = 32


def generate_type_set(n: int, min_distance: float, rng: np.random.Generator,
                      max_attempts: int = 10_000, slope: float = 1.0,
                      **layout_kwargs) -> list[ProductType]:
    """Generate `n` product types whose signatures are pairwise at least
    `min_distance` apart.

    Candidates are drawn (and laid out in blocks, which does not change
    any layout) until enough pass the spacing audit; raises
    GenerationError (carrying the achieved count) once `max_attempts`
    candidates have been examined, which signals an infeasible distance.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if min_distance < 0.0:
        raise ValueError("min_distance must be >= 0")
    accepted: list[ProductType] = []
    attempts = 0
    while attempts < max_attempts:
        block = [random_topology(rng) for _ in range(_CANDIDATE_BLOCK)]
        layouts = layout_signatures(block, **layout_kwargs)
        for topology, layout in zip(block, layouts):
            attempts += 1
            if all(valuation(layout.signature, t.signature) >= min_distance
                   for t in accepted):
                accepted.append(ProductType(
                    type_id=len(accepted), topology=topology,
                    signature=layout.signature,
                    utility=utility_from_edges(topology.edge_count, slope)))
                if len(accepted) == n:
                    return accepted
            if attempts >= max_attempts:
                break
    raise GenerationError(
        f"generated {len(accepted)}/{n} types within {max_attempts} attempts; "
        f"min_distance={min_distance} is likely too large", achieved=len(accepted))


# ---------------------------------------------------------------------------
# landscape maxima


def signature_matrix(types) -> np.ndarray:
    return np.stack([t.signature for t in types])


def pairwise_signature_distances(types) -> np.ndarray:
    sigs = signature_matrix(types)
    gram = sigs @ sigs.T
    sq = np.diag(gram)
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def mean_nearest_neighbor_distance(types) -> float:
    """Mean distance from each type to its nearest distinct neighbor."""
    if len(types) < 2:
        raise ValueError("need at least two types")
    dists = pairwise_signature_distances(types)
    np.fill_diagonal(dists, np.inf)
    return float(dists.min(axis=1).mean())


# scale on the mean nearest-neighbor distance used when no explicit maxima
# radius is given; calibrated so the small spurious "maxima" that isolated
# low-utility types would otherwise form get absorbed by nearby better types
DEFAULT_MAXIMA_RADIUS_FACTOR = 1.45


def default_maxima_radius(types, factor: float = DEFAULT_MAXIMA_RADIUS_FACTOR) -> float:
    return factor * mean_nearest_neighbor_distance(types)


def identify_maxima(types, radius: float) -> list[int]:
    """Type ids whose utility is not strictly beaten by any other type
    within `radius` in signature space. Never empty: the global maximum
    always qualifies."""
    if not types:
        raise ValueError("empty type set")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    dists = pairwise_signature_distances(types)
    utils = np.array([t.utility for t in types])
    maxima = []
    for i, t in enumerate(types):
        beaten = (dists[i] <= radius) & (utils > utils[i])
        if not beaten.any():
            maxima.append(t.type_id)
    return maxima


def nearest_max_distance(product_type: ProductType, maxima) -> float:
    """Distance from a type's signature to the nearest maximum (0 when the
    type is itself a maximum)."""
    if not maxima:
        raise ValueError("maxima set is empty")
    max_ids = {m.type_id for m in maxima}
    if product_type.type_id in max_ids:
        return 0.0
    return min(valuation(product_type.signature, m.signature) for m in maxima)


def landscape_distances(types, radius: float | None = None) -> tuple[list[int], list[float]]:
    """Identify maxima (default radius: scaled mean nearest-neighbor
    distance) and return (maxima ids, per-type distance to the nearest
    maximum)."""
    if radius is None:
        radius = default_maxima_radius(types)
    max_ids = identify_maxima(types, radius)
    by_id = {t.type_id: t for t in types}
    maxima = [by_id[i] for i in max_ids]
    return max_ids, [nearest_max_distance(t, maxima) for t in types]


# ---------------------------------------------------------------------------
# type-set CSV

TYPE_CSV_HEADER = "type_id,edge_count,utility,s0,s1,s2,s3,s4,s5"


def write_type_csv(types, path: str, extra_header: str = "",
                   extra_cells=None, trailer: str | None = None) -> None:
    """Write one row per type; reals carry 17 significant digits so a
    re-read reproduces them exactly."""
    lines = [TYPE_CSV_HEADER + extra_header]
    for k, t in enumerate(types):
        cells = [str(t.type_id), str(t.topology.edge_count), fmt_float(t.utility)]
        cells.extend(fmt_float(float(s)) for s in t.signature)
        if extra_cells is not None:
            cells.extend(extra_cells[k])
        lines.append(",".join(cells))
    if trailer is not None:
        lines.append(trailer)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_type_rows(path: str) -> list[dict]:
    """Read type rows back (utility and signature as exact floats). Lines
    starting with '#' are skipped."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            row = dict(zip(header, parts))
            rows.append({
                "type_id": int(row["type_id"]),
                "edge_count": int(row["edge_count"]),
                "utility": float(row["utility"]),
                "signature": np.array([float(row[f"s{i}"]) for i in range(6)]),
                "extra": {k: v for k, v in row.items()
                          if k not in {"type_id", "edge_count", "utility"}
                          and not (len(k) == 2 and k[0] == "s")},
            })
    return rows
