"""Directed interaction graphs: sampling, cycle structure, spectral analysis.

Convention used everywhere: entry ``c[i, j] = 1`` encodes the edge j -> i
(species j catalyses species i), i.e. the stored matrix is the transpose of
the usual adjacency matrix. File formats list edges as ``src dst`` and the
loader transposes, so on disk the orientation reads naturally.

All functions are pure: they never mutate their inputs and take explicit
RNG streams, so they are safe to call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonConvergenceError",
    "InteractionMatrix",
    "ModelParams",
    "GraphAnalysis",
    "SpectralData",
    "sample_er_digraph",
    "resample_vertex",
    "has_directed_cycle",
    "has_undirected_cycle",
    "strongly_connected_components",
    "is_acs",
    "acs_from_eigenvector",
    "terminal_vertices",
    "path_counts",
    "spectral_radius_pf",
    "analyze_graph",
    "parse_interaction_matrix",
    "load_interaction_matrix",
    "dump_edge_list",
    "dump_dense",
]


class NonConvergenceError(RuntimeError):
    """An iterative solve exceeded its iteration budget."""


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary d x d interaction matrix with zero diagonal.

    ``entries[i, j] = 1`` means there is an edge from vertex j to vertex i.
    The array is validated and frozen read-only on construction.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("entries must be a square matrix")
        if a.shape[0] < 2:
            raise ValueError("need at least 2 vertices")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("entries must be 0 or 1")
        if np.diagonal(a).any():
            raise ValueError("diagonal must be zero (self-loops not allowed)")
        a = a.astype(np.int8, copy=True)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def as_float(self) -> np.ndarray:
        return self.entries.astype(np.float64)

    def edge_count(self) -> int:
        return int(self.entries.sum())

    def edges(self) -> list[tuple[int, int]]:
        """Edges as (src, dst) pairs, sorted."""
        dst, src = np.nonzero(self.entries)
        return sorted(zip(src.tolist(), dst.tolist()))

    @classmethod
    def zero(cls, d: int) -> "InteractionMatrix":
        return cls(np.zeros((d, d), dtype=np.int8))

    @classmethod
    def from_edges(cls, d: int, edges) -> "InteractionMatrix":
        """Build from (src, dst) pairs; the stored matrix is the transpose."""
        a = np.zeros((d, d), dtype=np.int8)
        for src, dst in edges:
            if src == dst:
                raise ValueError(f"self-loop {src}->{dst} not allowed")
            if not (0 <= src < d and 0 <= dst < d):
                raise ValueError(f"edge {src}->{dst} out of range for d={d}")
            a[dst, src] = 1
        return cls(a)


@dataclass(frozen=True)
class ModelParams:
    """Vertex count and per-edge probability; theta = p*d is derived.

    The model proper requires 0 < p < 1; the endpoints are accepted so that
    test fixtures can force empty or complete graphs.
    """

    d: int
    p: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("d must be an integer >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", float(self.p))

    @property
    def theta(self) -> float:
        return self.p * self.d

    @classmethod
    def from_theta(cls, d: int, theta: float) -> "ModelParams":
        return cls(d=d, p=theta / d)


@dataclass(frozen=True, eq=False)
class GraphAnalysis:
    """Combinatorial summary of one interaction graph."""

    sccs: tuple
    acyclic: bool
    terminal_set: np.ndarray
    path_counts: np.ndarray | None
    directed_cycle_present: bool
    undirected_cycle_present: bool


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Spectral radius and a non-negative basis of its eigenspace.

    ``lam`` is the spectral radius rho(C). Each basis vector v is
    non-negative, has unit 1-norm and satisfies C v = lam v to within the
    requested tolerance. For an acyclic graph lam = 0 and the basis is
    empty. ``multiplicity`` equals the number of basis vectors (the
    geometric multiplicity of lam).
    """

    lam: float
    pf_basis: tuple
    multiplicity: int


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_er_digraph(params: ModelParams, rng: np.random.Generator) -> InteractionMatrix:
    """Erdos-Renyi digraph: each off-diagonal entry is 1 with probability p."""
    d = params.d
    a = rng.random((d, d)) < params.p
    np.fill_diagonal(a, False)
    return InteractionMatrix(a.astype(np.int8))


def resample_vertex(C: InteractionMatrix, j: int, p: float,
                    rng: np.random.Generator) -> InteractionMatrix:
    """Redraw row j and column j (off-diagonal) i.i.d. Bernoulli(p).

    Draw order is fixed for reproducibility: first the incoming entries
    ``c[j, i]`` for i != j in ascending i, then the outgoing entries
    ``c[i, j]`` likewise. All other entries are copied unchanged.
    """
    d = C.d
    if not 0 <= j < d:
        raise IndexError(f"vertex {j} out of range for d={d}")
    a = np.array(C.entries, dtype=np.int8)
    others = np.delete(np.arange(d), j)
    a[j, others] = rng.random(d - 1) < p
    a[others, j] = rng.random(d - 1) < p
    return InteractionMatrix(a)


# ---------------------------------------------------------------------------
# Cycle structure
# ---------------------------------------------------------------------------

def _successor_lists(entries: np.ndarray) -> list[list[int]]:
    # out-neighbours of v are the nonzero rows of column v
    return [np.flatnonzero(entries[:, v]).tolist() for v in range(entries.shape[0])]


def strongly_connected_components(C: InteractionMatrix) -> tuple:
    """Partition of the vertices into SCCs (Tarjan, iterative).

    Returns a tuple of sorted vertex tuples. Components are emitted in
    reverse topological order of the condensation.
    """
    entries = C.entries
    d = entries.shape[0]
    succ = _successor_lists(entries)
    index = [-1] * d
    low = [0] * d
    on_stack = [False] * d
    stack: list[int] = []
    comps: list[tuple] = []
    counter = 0

    for root in range(d):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            descended = False
            for i in range(pi, len(succ[v])):
                w = succ[v][i]
                if index[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    descended = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if descended:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(tuple(sorted(comp)))
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
    return tuple(comps)


def has_directed_cycle(C: InteractionMatrix) -> bool:
    """True iff the graph contains a directed cycle (length >= 2).

    With self-loops excluded this is equivalent to some SCC having size
    at least 2, and to the matrix not being nilpotent.
    """
    return any(len(c) > 1 for c in strongly_connected_components(C))


def has_undirected_cycle(C: InteractionMatrix) -> bool:
    """True iff the simple undirected projection contains a cycle.

    The projection has an edge {i, j} iff c_ij = 1 or c_ji = 1; a lone
    directed 2-cycle collapses to a single undirected edge and is not a
    cycle of the simple graph.
    """
    entries = C.entries
    d = entries.shape[0]
    und = (entries | entries.T)
    nbrs = [np.flatnonzero(und[v]).tolist() for v in range(d)]
    visited = [False] * d
    for root in range(d):
        if visited[root]:
            continue
        visited[root] = True
        todo = [(root, -1)]
        while todo:
            v, parent = todo.pop()
            for w in nbrs[v]:
                if not visited[w]:
                    visited[w] = True
                    todo.append((w, v))
                elif w != parent:
                    return True
    return False


def is_acs(C: InteractionMatrix, subset) -> bool:
    """Whether every vertex of the induced subgraph has an in-edge from it.

    The subset is autocatalytic iff each member i has some member j != i
    with c_ij = 1.
    """
    idx = np.asarray(sorted(set(int(v) for v in subset)), dtype=int)
    if idx.size == 0:
        raise ValueError("subset must be nonempty")
    if idx.min() < 0 or idx.max() >= C.d:
        raise ValueError("subset out of range")
    sub = C.entries[np.ix_(idx, idx)]
    return bool((sub.sum(axis=1) >= 1).all())


def acs_from_eigenvector(C: InteractionMatrix, v, atol: float = 1e-12) -> np.ndarray:
    """Support of a non-negative eigenvector; verified to be an ACS."""
    v = np.asarray(v, dtype=float)
    if v.min() < -atol:
        raise ValueError("eigenvector must be non-negative")
    support = np.flatnonzero(v > atol)
    if support.size == 0:
        raise ValueError("eigenvector must be nonzero")
    if not is_acs(C, support):
        raise ValueError("support of the given vector is not an ACS")
    return support


def terminal_vertices(C: InteractionMatrix) -> np.ndarray:
    """Vertices with at least one incoming edge and no outgoing edge."""
    entries = C.entries
    has_in = entries.any(axis=1)
    has_out = entries.any(axis=0)
    return np.flatnonzero(has_in & ~has_out)


def path_counts(C: InteractionMatrix) -> np.ndarray:
    """p(j) = number of vertices i != j with a directed path from i to j.

    Requires an acyclic graph; computed from the boolean reachability
    closure.
    """
    if has_directed_cycle(C):
        raise ValueError("path counts are defined for acyclic graphs only")
    a = C.as_float()
    reach = a > 0
    power = reach.astype(np.float64)
    for _ in range(C.d - 1):
        power = (power @ a) > 0
        if not power.any():
            break
        reach |= power
        power = power.astype(np.float64)
    return reach.sum(axis=1).astype(int)


# ---------------------------------------------------------------------------
# Spectral analysis
# ---------------------------------------------------------------------------

def _pf_vector_irreducible(block: np.ndarray, tol: float, max_iter: int):
    """Perron vector and radius of an irreducible non-negative block.

    Power iteration on block + I; the unit diagonal shift makes the
    iteration matrix primitive, so a bare power method cannot cycle even
    for periodic blocks.
    """
    n = block.shape[0]
    shifted = block + np.eye(n)
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        w = shifted @ v
        v = w / w.sum()
        bv = block @ v
        lam = bv.sum()
        if np.abs(bv - lam * v).sum() <= tol * max(1.0, lam):
            return lam, v
    raise NonConvergenceError(
        f"Perron iteration did not reach tol={tol} in {max_iter} iterations")


def _reachable_from(entries: np.ndarray, sources) -> set:
    succ = _successor_lists(entries)
    seen = set(int(s) for s in sources)
    todo = list(seen)
    while todo:
        v = todo.pop()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def spectral_radius_pf(C: InteractionMatrix, tol: float = 1e-10,
                       max_iter: int = 100_000) -> SpectralData:
    """Spectral radius of C and a non-negative basis of its eigenspace.

    The matrix is reducible in general, so the eigenspace is assembled
    from the condensation: every SCC whose block radius equals rho(C) is a
    "basic" class, and each basic class with no path to another basic
    class contributes one eigenvector. That vector carries the block's
    Perron vector on the class itself and the unique non-negative
    extension on the vertices reachable from it, obtained by solving
    (rho I - C_DD) v_D = C_DA v_A, which is nonsingular because every
    class strictly downstream of a final basic class has radius < rho.
    """
    comps = strongly_connected_components(C)
    nontrivial = [c for c in comps if len(c) > 1]
    if not nontrivial:
        return SpectralData(lam=0.0, pf_basis=(), multiplicity=0)

    a = C.as_float()
    radii = []
    vectors = []
    for comp in nontrivial:
        block = a[np.ix_(comp, comp)]
        lam_b, v_b = _pf_vector_irreducible(block, tol, max_iter)
        radii.append(lam_b)
        vectors.append(v_b)

    rho = max(radii)
    rho_atol = max(1e-8, 10 * tol)
    basic = [i for i, lam_b in enumerate(radii) if lam_b >= rho - rho_atol]

    # final basic classes: reach no vertex of another basic class
    basis = []
    for i in basic:
        comp = nontrivial[i]
        reach = _reachable_from(C.entries, comp)
        others = set()
        for j in basic:
            if j != i:
                others.update(nontrivial[j])
        if reach & others:
            continue
        downstream = sorted(reach - set(comp))
        v = np.zeros(C.d)
        v[list(comp)] = vectors[i]
        if downstream:
            sub = a[np.ix_(downstream, downstream)]
            cross = a[np.ix_(downstream, list(comp))]
            sol = np.linalg.solve(rho * np.eye(len(downstream)) - sub,
                                  cross @ vectors[i])
            v[downstream] = np.clip(sol, 0.0, None)
        v /= v.sum()
        resid = np.abs(a @ v - rho * v).sum()
        if resid > max(100 * tol, 1e-8):
            raise NonConvergenceError(
                f"eigenvector residual {resid:.3e} exceeds tolerance")
        basis.append(v)

    return SpectralData(lam=float(rho), pf_basis=tuple(basis),
                        multiplicity=len(basis))


def analyze_graph(C: InteractionMatrix) -> GraphAnalysis:
    """One-stop combinatorial summary (SCCs, terminals, cycles, p(j))."""
    sccs = strongly_connected_components(C)
    acyclic = all(len(c) == 1 for c in sccs)
    return GraphAnalysis(
        sccs=sccs,
        acyclic=acyclic,
        terminal_set=terminal_vertices(C),
        path_counts=path_counts(C) if acyclic else None,
        directed_cycle_present=not acyclic,
        undirected_cycle_present=has_undirected_cycle(C),
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def parse_interaction_matrix(text: str, d: int | None = None) -> InteractionMatrix:
    """Parse either the edge-list or the dense text format.

    Edge list: one ``src dst`` pair per line (0-based); blank lines and
    ``#`` comments are ignored; d defaults to max index + 1. Dense: first
    line is d, then d rows of d space-separated 0/1 entries where row i
    lists the incoming indicators of vertex i.
    """
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise ValueError("no data lines found")
    if len(rows[0]) == 1:
        dd = int(rows[0][0])
        if len(rows) != dd + 1:
            raise ValueError(f"dense format: expected {dd} rows, got {len(rows) - 1}")
        a = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int8)
        if a.shape != (dd, dd):
            raise ValueError("dense format: ragged or wrongly sized rows")
        return InteractionMatrix(a)
    edges = []
    for r in rows:
        if len(r) != 2:
            raise ValueError(f"edge line must have two fields, got {r!r}")
        edges.append((int(r[0]), int(r[1])))
    if d is None:
        d = max(max(s, t) for s, t in edges) + 1
        d = max(d, 2)
    return InteractionMatrix.from_edges(d, edges)


def load_interaction_matrix(path, d: int | None = None) -> InteractionMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_interaction_matrix(fh.read(), d=d)


def dump_edge_list(C: InteractionMatrix) -> str:
    return "".join(f"{s} {t}\n" for s, t in C.edges())


def dump_dense(C: InteractionMatrix) -> str:
    lines = [str(C.d)]
    for row in C.entries:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
