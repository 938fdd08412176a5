"""Convex-cost network flow: layered network construction and exact solvers.

A problem instance maps to a directed layered network: a source feeds R entry
nodes for the first step, every state at step t is split into an entry node
u_t_i and an exit node w_t_i joined by an edge carrying the node-count cost,
transition edges w_t_i -> u_(t+1)_j carry the pairwise-count cost, and the
last exit layer drains into a sink.  Integer flows of value M on this network
are in one-to-one correspondence with feasible contingency tables, and the
flow cost equals the table objective.

Both solvers handle convex edge costs natively on the residual network via
incremental costs c(z+1) - c(z); edges whose cost is +inf below some z_min
(a Poisson term with a positive observation) are treated as carrying a
mandatory z_min units, realized as a pseudoflow whose excesses and deficits
are shipped together with the source supply.
"""

from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    MISSING,
    CgmInstance,
    ContingencyTables,
    Gaussian,
    NoiseModel,
    Poisson,
    h_noise_cost,
    log_factorial,
    log_factorial_array,
)

__all__ = [
    "InfeasibleError",
    "CostHandle",
    "ZeroCost",
    "TransitionCost",
    "ObservationCost",
    "InteriorCost",
    "SurrogateInteriorCost",
    "Edge",
    "CgmLayout",
    "FlowNetwork",
    "Flow",
    "SolveStats",
    "build_flow_network",
    "build_surrogate_network",
    "solve_ssp",
    "solve_capacity_scaling",
    "extract_tables",
    "flow_balance",
    "flow_cost",
    "network_to_dot",
    "network_to_json",
]

INF = math.inf


class InfeasibleError(Exception):
    """The network admits no finite-cost flow meeting all supplies."""


# ---------------------------------------------------------------------------
# edge cost handles


class CostHandle:
    """Cost c(z) of carrying z units on one edge, defined for z = 0..capacity.

    table() must agree with value() pointwise; solvers consume increments
    c(z+1) - c(z) from the table, so subclasses should vectorize it.
    """

    def value(self, z: int) -> float:
        raise NotImplementedError

    def increment(self, z: int) -> float:
        return self.value(z + 1) - self.value(z)

    def table(self, cap: int) -> np.ndarray:
        return np.array([self.value(z) for z in range(cap + 1)])


@dataclass(frozen=True)
class ZeroCost(CostHandle):
    def value(self, z: int) -> float:
        return 0.0

    def table(self, cap: int) -> np.ndarray:
        return np.zeros(cap + 1)


@dataclass(frozen=True)
class TransitionCost(CostHandle):
    """log z! - z * log(phi) for one transition edge; discrete convex."""

    log_phi: float

    def value(self, z: int) -> float:
        return log_factorial(z) - z * self.log_phi

    def table(self, cap: int) -> np.ndarray:
        z = np.arange(cap + 1)
        return log_factorial_array(z) - z * self.log_phi


def _observation_table(model: NoiseModel, y: float, cap: int) -> np.ndarray:
    z = np.arange(cap + 1, dtype=float)
    if model is MISSING:
        return np.zeros(cap + 1)
    if isinstance(model, Gaussian):
        return (y - z) ** 2 / (2.0 * model.var)
    yi = int(y)
    out = np.empty(cap + 1)
    out[0] = 0.0 if yi == 0 else INF
    if cap >= 1:
        out[1:] = -yi * np.log(z[1:]) + z[1:] + log_factorial(yi)
    return out


@dataclass(frozen=True)
class ObservationCost(CostHandle):
    """Negative log likelihood of the observation as a function of the count."""

    model: NoiseModel
    y: float

    def value(self, z: int) -> float:
        return h_noise_cost(self.model, self.y, z)

    def table(self, cap: int) -> np.ndarray:
        return _observation_table(self.model, self.y, cap)


@dataclass(frozen=True)
class InteriorCost(CostHandle):
    """-log z! plus the observation cost.

    Concave plus convex: NOT discrete convex in general, so the exact solvers
    reject networks carrying it.  It exists so that the cost of a flow on the
    as-built network equals the true objective of the corresponding tables.
    """

    model: NoiseModel
    y: float

    def value(self, z: int) -> float:
        return -log_factorial(z) + h_noise_cost(self.model, self.y, z)

    def table(self, cap: int) -> np.ndarray:
        return -log_factorial_array(np.arange(cap + 1)) + _observation_table(
            self.model, self.y, cap
        )


@dataclass(frozen=True)
class SurrogateInteriorCost(CostHandle):
    """Affine upper bound of -log z! anchored at n_lin, plus the observation cost.

    alpha must be a supergradient of -log z! at n_lin; the result is discrete
    convex whenever the observation term is.
    """

    model: NoiseModel
    y: float
    n_lin: int
    alpha: float

    def value(self, z: int) -> float:
        affine = -log_factorial(self.n_lin) + self.alpha * (z - self.n_lin)
        return affine + h_noise_cost(self.model, self.y, z)

    def table(self, cap: int) -> np.ndarray:
        z = np.arange(cap + 1, dtype=float)
        affine = -log_factorial(self.n_lin) + self.alpha * (z - self.n_lin)
        return affine + _observation_table(self.model, self.y, cap)


# ---------------------------------------------------------------------------
# network


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    cost: CostHandle
    capacity: int


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CgmLayout:
    """Node and edge indexing of the layered construction.

    Node 0 is the source 'o', node 1 the sink 'd'; step t contributes an
    entry layer u_t_* and an exit layer w_t_*.  The edge-id arrays map table
    coordinates back to edges: node_edges[t, i] is the u->w edge whose flow
    is the node count, trans_edges[t, i, j] the transition edge.
    """

    n_steps: int
    n_states: int
    population: int
    source_edges: np.ndarray
    node_edges: np.ndarray
    trans_edges: np.ndarray
    sink_edges: np.ndarray

    def __post_init__(self) -> None:
        for name in ("source_edges", "node_edges", "trans_edges", "sink_edges"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    def u_node(self, t: int, i: int) -> int:
        return 2 + 2 * t * self.n_states + i

    def w_node(self, t: int, i: int) -> int:
        return 2 + (2 * t + 1) * self.n_states + i

    def node_name(self, v: int) -> str:
        if v == 0:
            return "o"
        if v == 1:
            return "d"
        t, rem = divmod(v - 2, 2 * self.n_states)
        layer, i = divmod(rem, self.n_states)
        return f"{'uw'[layer]}_{t + 1}_{i + 1}"


@dataclass(frozen=True)
class FlowNetwork:
    n_nodes: int
    edges: tuple[Edge, ...]
    supplies: np.ndarray
    layout: Optional[CgmLayout] = None

    def __post_init__(self) -> None:
        supplies = np.asarray(self.supplies, dtype=np.int64)
        if supplies.shape != (self.n_nodes,):
            raise ValueError("supplies must have one entry per node")
        if int(supplies.sum()) != 0:
            raise ValueError("supplies must sum to zero")
        object.__setattr__(self, "supplies", _readonly(supplies))

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Flow:
    """Integer flow values per edge, indexed like FlowNetwork.edges."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", _readonly(values))


# ---------------------------------------------------------------------------
# construction


def _build(instance: CgmInstance, interior: Callable[[int, int], CostHandle]) -> FlowNetwork:
    N, R, M = instance.n_steps, instance.n_states, instance.population
    source_edges = np.empty(R, dtype=np.int64)
    node_edges = np.empty((N, R), dtype=np.int64)
    trans_edges = np.empty((max(N - 1, 0), R, R), dtype=np.int64)
    sink_edges = np.empty(R, dtype=np.int64)
    edges: list[Edge] = []

    def u_node(t: int, i: int) -> int:
        return 2 + 2 * t * R + i

    def w_node(t: int, i: int) -> int:
        return 2 + (2 * t + 1) * R + i

    for i in range(R):
        source_edges[i] = len(edges)
        edges.append(Edge(0, u_node(0, i), ZeroCost(), M))
    log_phi = instance.log_potentials if N > 1 else None
    for t in range(N):
        boundary = t == 0 or t == N - 1
        for i in range(R):
            node_edges[t, i] = len(edges)
            if boundary:
                handle: CostHandle = ObservationCost(
                    instance.noise[t][i], float(instance.observations[t, i])
                )
            else:
                handle = interior(t, i)
            edges.append(Edge(u_node(t, i), w_node(t, i), handle, M))
        if t < N - 1:
            for i in range(R):
                for j in range(R):
                    trans_edges[t, i, j] = len(edges)
                    edges.append(
                        Edge(
                            w_node(t, i),
                            u_node(t + 1, j),
                            TransitionCost(float(log_phi[t, i, j])),
                            M,
                        )
                    )
    for i in range(R):
        sink_edges[i] = len(edges)
        edges.append(Edge(w_node(N - 1, i), 1, ZeroCost(), M))

    layout = CgmLayout(
        n_steps=N,
        n_states=R,
        population=M,
        source_edges=source_edges,
        node_edges=node_edges,
        trans_edges=trans_edges,
        sink_edges=sink_edges,
    )
    supplies = np.zeros(2 + 2 * N * R, dtype=np.int64)
    supplies[0] = M
    supplies[1] = -M
    return FlowNetwork(
        n_nodes=2 + 2 * N * R, edges=tuple(edges), supplies=supplies, layout=layout
    )


def build_flow_network(instance: CgmInstance) -> FlowNetwork:
    """Network whose minimum-cost flows are exactly the MAP tables.

    Interior node edges carry the true (nonconvex) cost -log z! + h(z); the
    exact solvers refuse such networks, but flow_cost on them reproduces the
    true objective of any feasible flow.
    """

    def interior(t: int, i: int) -> CostHandle:
        return InteriorCost(instance.noise[t][i], float(instance.observations[t, i]))

    return _build(instance, interior)


def build_surrogate_network(
    instance: CgmInstance, linearization: ContingencyTables, strategy
) -> FlowNetwork:
    """Network of one difference-of-convex iteration.

    Interior node edges carry the affine surrogate of -log z! anchored at the
    linearization table (which need not be feasible; the all-zero table is
    the customary starting point) plus the observation cost.  All installed
    handles are discrete convex.
    """
    from .dca import alpha_value

    if linearization.node.shape != (instance.n_steps, instance.n_states):
        raise ValueError("linearization shape does not match instance")

    def interior(t: int, i: int) -> CostHandle:
        n_lin = int(linearization.node[t, i])
        return SurrogateInteriorCost(
            instance.noise[t][i],
            float(instance.observations[t, i]),
            n_lin,
            alpha_value(strategy, n_lin),
        )

    return _build(instance, interior)


# ---------------------------------------------------------------------------
# flow inspection


def flow_balance(network: FlowNetwork, values: np.ndarray) -> np.ndarray:
    """Out minus in at every node; equals supplies for a feasible flow."""
    values = np.asarray(values)
    tails = np.fromiter((e.tail for e in network.edges), dtype=np.int64, count=network.n_edges)
    heads = np.fromiter((e.head for e in network.edges), dtype=np.int64, count=network.n_edges)
    out = np.bincount(tails, weights=values, minlength=network.n_nodes)
    into = np.bincount(heads, weights=values, minlength=network.n_nodes)
    return (out - into).astype(np.int64)


def flow_cost(network: FlowNetwork, flow: Flow) -> float:
    """Sum of edge costs at the flow's values; +inf if any term is."""
    total = 0.0
    for e, z in zip(network.edges, flow.values):
        c = e.cost.value(int(z))
        if c == INF:
            return INF
        total += c
    return total


def extract_tables(network: FlowNetwork, flow: Flow) -> ContingencyTables:
    """Read contingency tables off a feasible flow on an as-built network."""
    layout = network.layout
    if layout is None:
        raise ValueError("network has no table layout")
    values = flow.values
    if values.shape != (network.n_edges,):
        raise ValueError("flow does not match network")
    if (values < 0).any() or any(
        int(z) > e.capacity for e, z in zip(network.edges, values)
    ):
        raise ValueError("flow violates edge bounds")
    if not np.array_equal(flow_balance(network, values), network.supplies):
        raise ValueError("flow violates conservation")
    node = values[layout.node_edges]
    edge = values[layout.trans_edges]
    return ContingencyTables(node=node, edge=edge)


# ---------------------------------------------------------------------------
# solvers


@dataclass
class SolveStats:
    method: str = ""
    shipments: int = 0
    units: int = 0
    path_costs: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    restoration_pushes: int = 0
    dijkstra_pops: int = 0
    min_reduced_cost: float = 0.0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "shipments": self.shipments,
            "units": self.units,
            "path_costs": list(self.path_costs),
            "phases": list(self.phases),
            "restoration_pushes": self.restoration_pushes,
            "dijkstra_pops": self.dijkstra_pops,
            "min_reduced_cost": self.min_reduced_cost,
            "wall_time": self.wall_time,
        }


class _ResidualState:
    """Mutable solver state: flow, excesses, potentials, cost tables.

    Costs are kept as one dense table per edge (value at every feasible z),
    so increment lookups inside the search loop are plain list indexing.
    Potentials keep all residual reduced costs nonnegative, which lets every
    search after the initial label-correcting pass be label-setting.
    """

    def __init__(self, network: FlowNetwork, stats: SolveStats):
        self.network = network
        self.stats = stats
        n_edges = network.n_edges
        self.n_nodes = network.n_nodes
        self.tails = [e.tail for e in network.edges]
        self.heads = [e.head for e in network.edges]
        self.cap = [e.capacity for e in network.edges]
        max_cap = max(self.cap, default=0)

        table = np.full((n_edges, max_cap + 2), INF)
        for idx, e in enumerate(network.edges):
            table[idx, : e.capacity + 1] = e.cost.table(e.capacity)
        # trailing +inf column makes "forward step off the end" self-blocking
        self.table_np = table
        self.table = table.tolist()

        self.lower = []
        for idx in range(n_edges):
            finite = np.isfinite(table[idx, : self.cap[idx] + 1])
            if not finite.any():
                raise InfeasibleError(f"edge {idx} has no finite cost at any flow value")
            low = int(finite.argmax())
            if not finite[low:].all():
                raise ValueError(f"edge {idx} cost has interior +inf values")
            self.lower.append(low)

        diffs = np.diff(table, axis=1)
        for idx in range(n_edges):
            seg = diffs[idx, self.lower[idx] : self.cap[idx]]
            if seg.size > 1 and (np.diff(seg) < -1e-9).any():
                raise ValueError(
                    f"edge {idx} cost is not discrete convex; exact solvers require "
                    "convex edge costs"
                )

        self.z = list(self.lower)
        balance = [0] * self.n_nodes
        for idx in range(n_edges):
            if self.z[idx]:
                balance[self.tails[idx]] += self.z[idx]
                balance[self.heads[idx]] -= self.z[idx]
        self.excess = [int(b) - c for b, c in zip(network.supplies.tolist(), balance)]

        adj: list[list[tuple[int, int, bool]]] = [[] for _ in range(self.n_nodes)]
        for idx in range(n_edges):
            adj[self.tails[idx]].append((self.heads[idx], idx, True))
            adj[self.heads[idx]].append((self.tails[idx], idx, False))
        self.adj = adj

        self.pi = self._initial_potentials()

    def _initial_potentials(self) -> list:
        """One label-correcting pass; tolerates the negative initial increments."""
        dist = [0.0] * self.n_nodes
        in_queue = [True] * self.n_nodes
        queue = deque(range(self.n_nodes))
        table, z, cap, lower = self.table, self.z, self.cap, self.lower
        relaxations = 0
        guard = max(4 * self.n_nodes * (len(self.tails) + 1), 10_000)
        while queue:
            v = queue.popleft()
            in_queue[v] = False
            dv = dist[v]
            for other, idx, forward in self.adj[v]:
                if forward:
                    ze = z[idx]
                    if ze >= cap[idx]:
                        continue
                    c = table[idx][ze + 1] - table[idx][ze]
                else:
                    ze = z[idx]
                    if ze <= lower[idx]:
                        continue
                    c = table[idx][ze - 1] - table[idx][ze]
                if c == INF:
                    continue
                nd = dv + c
                if nd < dist[other]:
                    dist[other] = nd
                    relaxations += 1
                    if relaxations > guard:
                        raise ValueError("negative-cost cycle in network")
                    if not in_queue[other]:
                        in_queue[other] = True
                        queue.append(other)
        return [-d for d in dist]

    def ship(self, delta: int) -> bool:
        """Move delta units from a nearest (excess, deficit) pair; False if none."""
        excess = self.excess
        sources = [v for v in range(self.n_nodes) if excess[v] >= delta]
        if not sources or not any(e <= -delta for e in excess):
            return False

        table, z, cap, lower, pi = self.table, self.z, self.cap, self.lower, self.pi
        dist = [INF] * self.n_nodes
        parent_edge = [-1] * self.n_nodes
        parent_node = [-1] * self.n_nodes
        parent_fwd = [False] * self.n_nodes
        heap = []
        for s in sources:
            dist[s] = 0.0
            heap.append((0.0, s))
        heapq.heapify(heap)
        pops = 0
        target = -1
        d_target = INF
        inv_delta = 1.0 / delta
        while heap:
            d, v = heapq.heappop(heap)
            if d > dist[v]:
                continue
            pops += 1
            if excess[v] <= -delta:
                target = v
                d_target = d
                break
            base = d - pi[v]
            for other, idx, forward in self.adj[v]:
                ze = z[idx]
                if forward:
                    zn = ze + delta
                    if zn > cap[idx]:
                        continue
                    c = (table[idx][zn] - table[idx][ze]) * inv_delta
                    if c == INF:
                        continue
                else:
                    zn = ze - delta
                    if zn < lower[idx]:
                        continue
                    c = (table[idx][zn] - table[idx][ze]) * inv_delta
                nd = base + c + pi[other]
                # reduced increments are nonnegative up to tolerance residue;
                # clamping keeps the search label-setting and finite
                if nd < d:
                    nd = d
                if nd < dist[other]:
                    dist[other] = nd
                    parent_edge[other] = idx
                    parent_node[other] = v
                    parent_fwd[other] = forward
                    heapq.heappush(heap, (nd, other))
        self.stats.dijkstra_pops += pops
        if target < 0:
            return False

        for v in range(self.n_nodes):
            dv = dist[v]
            self.pi[v] -= dv if dv < d_target else d_target

        true_cost = 0.0
        v = target
        path = []
        while parent_node[v] >= 0:
            path.append((parent_edge[v], parent_fwd[v]))
            v = parent_node[v]
        source = v
        for idx, forward in path:
            ze = z[idx]
            zn = ze + delta if forward else ze - delta
            true_cost += table[idx][zn] - table[idx][ze]
            z[idx] = zn
        excess[source] -= delta
        excess[target] += delta
        self.stats.shipments += 1
        self.stats.units += delta
        self.stats.path_costs.append(true_cost)
        return True

    def restore(self, delta: int) -> None:
        """Re-establish nonnegative delta-step reduced costs by saturating pushes."""
        table, cap, lower, pi = self.table, self.cap, self.lower, self.pi
        excess = self.excess
        n_edges = len(self.tails)
        while True:
            z_np = np.array(self.z)
            cap_np = np.array(self.cap)
            pi_np = np.array(self.pi)
            tails_np = np.array(self.tails)
            heads_np = np.array(self.heads)
            rows = np.arange(n_edges)

            fwd_ok = z_np + delta <= cap_np
            idx_f = np.where(fwd_ok, z_np + delta, z_np)
            step_f = np.where(
                fwd_ok, self.table_np[rows, idx_f] - self.table_np[rows, z_np], INF
            )
            red_f = step_f / delta - pi_np[tails_np] + pi_np[heads_np]

            low_np = np.array(lower)
            bwd_ok = z_np - delta >= low_np
            idx_b = np.where(bwd_ok, z_np - delta, z_np)
            step_b = np.where(
                bwd_ok, self.table_np[rows, idx_b] - self.table_np[rows, z_np], INF
            )
            red_b = step_b / delta - pi_np[heads_np] + pi_np[tails_np]

            candidates = np.where((red_f < -1e-12) | (red_b < -1e-12))[0]
            if candidates.size == 0:
                return
            z = self.z
            for idx in candidates:
                idx = int(idx)
                tail, head = self.tails[idx], self.heads[idx]
                shift = pi[head] - pi[tail]
                while z[idx] + delta <= cap[idx]:
                    step = table[idx][z[idx] + delta] - table[idx][z[idx]]
                    if step / delta + shift >= -1e-12:
                        break
                    z[idx] += delta
                    excess[tail] -= delta
                    excess[head] += delta
                    self.stats.restoration_pushes += 1
                while z[idx] - delta >= lower[idx]:
                    step = table[idx][z[idx] - delta] - table[idx][z[idx]]
                    if step / delta - shift >= -1e-12:
                        break
                    z[idx] -= delta
                    excess[tail] += delta
                    excess[head] -= delta
                    self.stats.restoration_pushes += 1

    def finalize(self) -> tuple[Flow, float]:
        values = np.array(self.z, dtype=np.int64)
        cost = float(self.table_np[np.arange(len(self.z)), values].sum())

        z_np = values
        cap_np = np.array(self.cap)
        low_np = np.array(self.lower)
        pi_np = np.array(self.pi)
        tails_np = np.array(self.tails)
        heads_np = np.array(self.heads)
        rows = np.arange(len(self.z))
        worst = 0.0
        fwd = z_np < cap_np
        if fwd.any():
            inc = self.table_np[rows[fwd], z_np[fwd] + 1] - self.table_np[rows[fwd], z_np[fwd]]
            red = inc - pi_np[tails_np[fwd]] + pi_np[heads_np[fwd]]
            red = red[np.isfinite(red)]
            if red.size:
                worst = min(worst, float(red.min()))
        bwd = z_np > low_np
        if bwd.any():
            inc = self.table_np[rows[bwd], z_np[bwd] - 1] - self.table_np[rows[bwd], z_np[bwd]]
            red = inc - pi_np[heads_np[bwd]] + pi_np[tails_np[bwd]]
            if red.size:
                worst = min(worst, float(red.min()))
        self.stats.min_reduced_cost = worst
        return Flow(values=values), cost


def _infeasible_detail(state: _ResidualState) -> str:
    stuck = [v for v in range(state.n_nodes) if state.excess[v] > 0]
    names = state.network.layout
    label = names.node_name if names is not None else (lambda v: f"v{v}")
    return "no residual path can carry remaining supply from " + ", ".join(
        label(v) for v in stuck[:8]
    )


def solve_ssp(network: FlowNetwork) -> tuple[Flow, float, SolveStats]:
    """Exact min-cost flow by unit augmentations along shortest residual paths.

    Requires every edge cost to be discrete convex.  Deterministic: ties in
    the search are broken by node index, so reruns are bit-identical.
    """
    t0 = time.perf_counter()
    stats = SolveStats(method="ssp")
    state = _ResidualState(network, stats)
    while any(e > 0 for e in state.excess):
        if not state.ship(1):
            raise InfeasibleError(_infeasible_detail(state))
    flow, cost = state.finalize()
    stats.wall_time = time.perf_counter() - t0
    return flow, cost, stats


def solve_capacity_scaling(network: FlowNetwork) -> tuple[Flow, float, SolveStats]:
    """Exact min-cost flow shipping geometrically shrinking blocks.

    Each phase halves the block size delta, restores delta-step optimality
    with saturating pushes, then ships blocks between large excesses and
    deficits.  The final unit phase guarantees exactness, so the result
    matches solve_ssp's cost (flows may differ on ties).
    """
    t0 = time.perf_counter()
    stats = SolveStats(method="cs")
    state = _ResidualState(network, stats)
    top = max((e for e in state.excess if e > 0), default=0)
    delta = 1 << (top.bit_length() - 1) if top > 0 else 1
    while delta >= 1:
        stats.phases.append(delta)
        # halving delta invalidates delta-step optimality, so every phase
        # (the unit phase included) re-establishes it before shipping
        state.restore(delta)
        while state.ship(delta):
            pass
        if delta == 1 and any(e > 0 for e in state.excess):
            raise InfeasibleError(_infeasible_detail(state))
        delta //= 2
    flow, cost = state.finalize()
    stats.wall_time = time.perf_counter() - t0
    return flow, cost, stats


# ---------------------------------------------------------------------------
# debug dumps


def _node_label(network: FlowNetwork, v: int) -> str:
    if network.layout is not None:
        return network.layout.node_name(v)
    return f"v{v}"


def network_to_dot(network: FlowNetwork) -> str:
    lines = ["digraph flow {"]
    for v in range(network.n_nodes):
        b = int(network.supplies[v])
        extra = f' [xlabel="{b:+d}"]' if b else ""
        lines.append(f'  "{_node_label(network, v)}"{extra};')
    for e in network.edges:
        lines.append(
            f'  "{_node_label(network, e.tail)}" -> "{_node_label(network, e.head)}"'
            f' [label="cap {e.capacity}"];'
        )
    lines.append("}")
    return "\n".join(lines)


def network_to_json(network: FlowNetwork) -> dict:
    return {
        "n_nodes": network.n_nodes,
        "nodes": [_node_label(network, v) for v in range(network.n_nodes)],
        "supplies": network.supplies.tolist(),
        "edges": [
            {
                "tail": _node_label(network, e.tail),
                "head": _node_label(network, e.head),
                "capacity": e.capacity,
                "cost": repr(e.cost),
            }
            for e in network.edges
        ],
    }
