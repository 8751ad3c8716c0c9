"""Trajectory crossing time: exact computation on acyclic specs via
enumeration plus a transportation linear program, a Monte Carlo upper bound
under the independent coupling, and the disjointness test used by the
advantage lower bound.

The crossing cost of a pair of terminal-padded paths follows the asymmetric
set definition: the first path's visited set starts at index 0, the second's
at index 1, and the cost is the smallest t >= 1 at which the sets intersect.
Both paths contain the terminal state, so the cost is always finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (CyclicSpecError, EnumerationCapError,
                     InfeasibleMarginalsError)
from .mrp import TERMINAL, MrpSpec, Tables, sample_trajectory
from .rng import Stream, mix64

DEFAULT_ATOM_CAP = 100_000


@dataclass(frozen=True)
class TrajectoryAtom:
    """One possible trajectory of an acyclic spec: its state path (with the
    terminal sentinel appended once) and exact probability."""

    path: tuple[str, ...]
    prob: float


def _positive_succ(spec: MrpSpec) -> dict[str, list]:
    return {s: [e for e in spec.transitions[s] if e.p > 0.0] for s in spec.states}


def _check_acyclic(spec: MrpSpec) -> None:
    # depth-first cycle detection over positive-probability edges
    succ = _positive_succ(spec)
    color: dict[str, int] = {}  # 1 = on stack, 2 = done
    for root in spec.states:
        if color.get(root):
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for e in it:
                if e.to == TERMINAL:
                    continue
                c = color.get(e.to, 0)
                if c == 1:
                    raise CyclicSpecError(
                        f"cycle through {e.to!r}: exact enumeration needs an acyclic spec")
                if c == 0:
                    color[e.to] = 1
                    stack.append((e.to, iter(succ[e.to])))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()


def enumerate_trajectories(spec: MrpSpec, s: str, cap: int = DEFAULT_ATOM_CAP) -> list[TrajectoryAtom]:
    """Exhaustively list the trajectories starting at `s` with their exact
    probabilities (products of edge probabilities).

    Raises CyclicSpecError when positive-probability cycles exist and
    EnumerationCapError when more than `cap` atoms would be produced.
    """
    spec.edges(s)  # raises UnknownStateError for unknown states
    _check_acyclic(spec)
    succ = _positive_succ(spec)
    atoms: list[TrajectoryAtom] = []
    stack = [((s,), 1.0)]
    while stack:
        path, prob = stack.pop()
        for e in reversed(succ[path[-1]]):
            if e.to == TERMINAL:
                atoms.append(TrajectoryAtom(path + (TERMINAL,), prob * e.p))
                if len(atoms) > cap:
                    raise EnumerationCapError(f"more than {cap} trajectories from {s!r}")
            else:
                stack.append((path + (e.to,), prob * e.p))
    return atoms


def crossing_cost(path: tuple[str, ...], other: tuple[str, ...]) -> int:
    """First time the visited sets of two terminal-padded paths intersect.

    The first path contributes indices 0..t, the second indices 1..t; beyond
    their length paths are padded with their final (terminal) entry.
    """
    if path[-1] != TERMINAL or other[-1] != TERMINAL:
        raise ValueError("paths must end with the terminal sentinel")
    seen_a = {path[0]}
    seen_b: set[str] = set()
    la, lb = len(path) - 1, len(other) - 1
    t = 0
    while True:
        t += 1
        a_t = path[t] if t < la else TERMINAL
        b_t = other[t] if t < lb else TERMINAL
        seen_a.add(a_t)
        seen_b.add(b_t)
        if a_t in seen_b or b_t in seen_a:
            return t


# ---------------------------------------------------------------------------
# Transportation problem

@dataclass(frozen=True)
class TransportProblem:
    """Finite transportation instance: two probability vectors and a cost
    matrix (crossing times)."""

    supply: np.ndarray
    demand: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "supply", np.asarray(self.supply, dtype=np.float64))
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=np.float64))
        object.__setattr__(self, "cost", np.asarray(self.cost, dtype=np.float64))
        if self.cost.shape != (len(self.supply), len(self.demand)):
            raise ValueError("cost shape must be (len(supply), len(demand))")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("costs must be finite")
        for name, v in (("supply", self.supply), ("demand", self.demand)):
            if np.any(v < 0):
                raise InfeasibleMarginalsError(f"{name} has negative mass")
            if abs(v.sum() - 1.0) > 1e-12:
                raise InfeasibleMarginalsError(f"{name} sums to {v.sum()!r}, not 1")


@dataclass(frozen=True)
class CouplingResult:
    """Optimal coupling: expected crossing time, joint mass matrix, and the
    dual potentials certifying optimality."""

    optimal_cost: float
    plan: np.ndarray
    dual_supply: np.ndarray
    dual_demand: np.ndarray

    def support_size(self) -> int:
        return int(np.count_nonzero(self.plan > 0.0))


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    m, n = len(a), len(b)
    rem_a, rem_b = a.copy(), b.copy()
    basis: list[tuple[int, int]] = []
    flows: dict[tuple[int, int], float] = {}
    i = j = 0
    while True:
        f = min(rem_a[i], rem_b[j])
        basis.append((i, j))
        flows[(i, j)] = f
        rem_a[i] -= f
        rem_b[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if rem_a[i] <= rem_b[j]:
            if i < m - 1:
                i += 1
            else:
                j += 1
        else:
            if j < n - 1:
                j += 1
            else:
                i += 1
    return basis, flows


def _potentials(basis, m, n, cost):
    row_adj: list[list[int]] = [[] for _ in range(m)]
    col_adj: list[list[int]] = [[] for _ in range(n)]
    for (i, j) in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, x = stack.pop()
        if kind == "r":
            for j in row_adj[x]:
                if np.isnan(v[j]):
                    v[j] = cost[x, j] - u[x]
                    stack.append(("c", j))
        else:
            for i in col_adj[x]:
                if np.isnan(u[i]):
                    u[i] = cost[i, x] - v[x]
                    stack.append(("r", i))
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise RuntimeError("basis is not a spanning tree")
    return u, v, row_adj, col_adj


def _tree_path(basis_set, row_adj, col_adj, start_row, end_col):
    """Path of cells from row node `start_row` to column node `end_col` in
    the basis spanning tree."""
    parent: dict[tuple[str, int], tuple[str, int]] = {}
    seen = {("r", start_row)}
    queue = [("r", start_row)]
    while queue:
        node = queue.pop(0)
        kind, x = node
        nbrs = ((("c", j) for j in row_adj[x]) if kind == "r"
                else (("r", i) for i in col_adj[x]))
        for nb in nbrs:
            if nb not in seen:
                seen.add(nb)
                parent[nb] = node
                if nb == ("c", end_col):
                    cells = []
                    cur = nb
                    while cur != ("r", start_row):
                        prev = parent[cur]
                        i = cur[1] if cur[0] == "r" else prev[1]
                        j = cur[1] if cur[0] == "c" else prev[1]
                        cells.append((i, j))
                        cur = prev
                    cells.reverse()
                    return cells
                queue.append(nb)
    raise RuntimeError("basis is not a spanning tree")


def _exact_basic_flows(basis, a, b):
    """Recompute basic flows exactly from the marginals by leaf elimination."""
    m, n = len(a), len(b)
    row_cells: list[list[tuple[int, int]]] = [[] for _ in range(m)]
    col_cells: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for cell in basis:
        row_cells[cell[0]].append(cell)
        col_cells[cell[1]].append(cell)
    rem_a, rem_b = a.copy(), b.copy()
    alive = set(basis)
    deg = {("r", i): len(row_cells[i]) for i in range(m)}
    deg.update({("c", j): len(col_cells[j]) for j in range(n)})
    leaves = [node for node, d in deg.items() if d == 1]
    flows = np.zeros((m, n))
    while leaves:
        kind, x = leaves.pop()
        if deg[(kind, x)] != 1:
            continue
        cells = row_cells[x] if kind == "r" else col_cells[x]
        cell = next(c for c in cells if c in alive)
        i, j = cell
        f = rem_a[i] if kind == "r" else rem_b[j]
        flows[i, j] = f
        rem_a[i] -= f
        rem_b[j] -= f
        alive.discard(cell)
        for node in (("r", i), ("c", j)):
            deg[node] -= 1
            if deg[node] == 1:
                leaves.append(node)
    flows[np.abs(flows) <= 1e-13] = 0.0
    return flows


def solve_transportation(problem: TransportProblem) -> CouplingResult:
    """Globally optimal transportation plan via the transportation simplex.

    Pivoting uses Bland's anti-cycling rule (smallest-index entering cell,
    smallest-index leaving cell among ties), so degenerate bases cannot
    cycle.  The returned flows are recomputed exactly from the marginals on
    the optimal basis tree, and optimality is certified by a complementary
    slackness check on the dual potentials.
    """
    a = problem.supply.copy()
    b = problem.demand.copy()
    cost = problem.cost
    m, n = len(a), len(b)
    gap = a.sum() - b.sum()
    if abs(gap) > 1e-9:
        raise InfeasibleMarginalsError(f"supply minus demand is {gap!r}")
    if n:
        b = b * (a.sum() / b.sum())

    basis, flows = _northwest_corner(a, b)
    basis_set = set(basis)
    tol = 1e-9 * (1.0 + float(np.max(np.abs(cost))) if cost.size else 1.0)

    max_pivots = 10_000 * (m + n)
    for _ in range(max_pivots):
        u, v, row_adj, col_adj = _potentials(basis, m, n, cost)
        reduced = cost - u[:, None] - v[None, :]
        entering = None
        for i in range(m):
            row = reduced[i]
            for j in range(n):
                if row[j] < -tol and (i, j) not in basis_set:
                    entering = (i, j)
                    break
            if entering:
                break
        if entering is None:
            break
        path = _tree_path(basis_set, row_adj, col_adj, entering[0], entering[1])
        cycle = [entering] + path
        minus = cycle[1::2]
        theta = min(flows[c] for c in minus)
        leaving = min(c for c in minus if flows[c] == theta)
        for k, c in enumerate(cycle):
            if k % 2 == 0:
                flows[c] = flows.get(c, 0.0) + theta
            else:
                flows[c] -= theta
        basis_set.discard(leaving)
        basis_set.add(entering)
        basis = sorted(basis_set)
        del flows[leaving]
    else:
        raise RuntimeError("transportation simplex failed to terminate")

    plan = _exact_basic_flows(basis, a, b)
    u, v, _, _ = _potentials(basis, m, n, cost)
    reduced = cost - u[:, None] - v[None, :]
    if np.min(reduced) < -10 * tol or abs(float(np.sum(plan * reduced))) > 1e-8 * (1 + abs(np.max(cost))):
        raise RuntimeError("optimality certificate failed")
    total = float(np.sum(plan * cost))
    return CouplingResult(total, plan, u, v)


# ---------------------------------------------------------------------------
# Crossing times

def solve_crossing(spec: MrpSpec, s: str, s_prime: str,
                   cap: int = DEFAULT_ATOM_CAP) -> CouplingResult:
    """Enumerate trajectories from both states, build the crossing-cost
    matrix, and solve the transportation problem exactly."""
    atoms_s = enumerate_trajectories(spec, s, cap)
    atoms_sp = enumerate_trajectories(spec, s_prime, cap)
    cost = np.empty((len(atoms_s), len(atoms_sp)))
    for i, at in enumerate(atoms_s):
        for j, bt in enumerate(atoms_sp):
            cost[i, j] = crossing_cost(at.path, bt.path)
    supply = np.array([at.prob for at in atoms_s])
    demand = np.array([bt.prob for bt in atoms_sp])
    return solve_transportation(TransportProblem(supply, demand, cost))


def crossing_time_exact(spec: MrpSpec, s: str, s_prime: str,
                        cap: int = DEFAULT_ATOM_CAP) -> float:
    """Exact trajectory crossing time H(s, s') on an acyclic spec: the
    minimum expected crossing cost over all couplings of the two trajectory
    laws."""
    return solve_crossing(spec, s, s_prime, cap).optimal_cost


def crossing_time_upper(spec: MrpSpec, s: str, s_prime: str, n: int,
                        seed: int) -> tuple[float, float]:
    """Monte Carlo upper bound on H(s, s') under the independent coupling.

    Returns (estimate, standard error).  Valid on cyclic specs, where exact
    enumeration is unavailable; the estimate upper-bounds the minimum over
    couplings in expectation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tables = Tables(spec)
    idx = spec.index()
    i, j = idx[s], idx[s_prime]
    costs = np.empty(n)
    for r in range(n):
        ta = sample_trajectory(spec, Stream(mix64(seed, r, 0)), _tables=tables, _start=i)
        tb = sample_trajectory(spec, Stream(mix64(seed, r, 1)), _tables=tables, _start=j)
        costs[r] = crossing_cost(ta.states + (TERMINAL,), tb.states + (TERMINAL,))
    se = float(costs.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(costs.mean()), se


def check_disjoint(spec: MrpSpec, s: str, s_prime: str) -> bool:
    """True iff no trajectory from the initial distribution can visit both
    states.

    Decided exactly on the chain augmented with (visited-s, visited-s') bits:
    the probability of absorbing with both bits set is positive iff a
    both-bits configuration is reachable through positive-probability edges.
    """
    spec.edges(s)
    spec.edges(s_prime)
    succ = _positive_succ(spec)

    def bits(x: str) -> int:
        return (1 if x == s else 0) | (2 if x == s_prime else 0)

    seen: set[tuple[str, int]] = set()
    stack = []
    for x, p in spec.initial:
        if p > 0:
            b = bits(x)
            if b == 3:
                return False
            stack.append((x, b))
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        x, b = node
        for e in succ[x]:
            if e.to == TERMINAL:
                continue
            nb = b | bits(e.to)
            if nb == 3:
                return False
            if (e.to, nb) not in seen:
                stack.append((e.to, nb))
    return True
