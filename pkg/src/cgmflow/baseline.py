"""Approximate solver: Stirling's approximation plus continuous relaxation.

Replacing every log z! by z log z - z makes the objective convex over the
relaxed (real-valued) marginal polytope.  The polytope's vertices are
all-population single-path loadings of the layered network, so conditional
gradient steps need only a shortest-path sweep per iteration.  The output is
fractional; its quality gap versus the exact solver comes from Stirling's
error at small counts, which is also why its tables come out dense.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from .core import (
    CgmInstance,
    FractionalTables,
    Gaussian,
    Poisson,
    log_factorial,
    validate_tables,
)

__all__ = ["ApproxReport", "RelaxedProblem", "approx_objective", "solve_approximate"]

INF = math.inf
EPS = 1e-6  # entry floor inside gradient logs; keeps the search direction finite


def _stirling(z: np.ndarray) -> np.ndarray:
    return xlogy(z, z) - z


class _ObsTerms:
    """Vectorized observation-term evaluation for one instance."""

    def __init__(self, instance: CgmInstance):
        N, R = instance.n_steps, instance.n_states
        gauss = np.zeros((N, R), dtype=bool)
        pois = np.zeros((N, R), dtype=bool)
        var = np.ones((N, R))
        for t in range(N):
            for i in range(R):
                model = instance.noise[t][i]
                if isinstance(model, Gaussian):
                    gauss[t, i] = True
                    var[t, i] = model.var
                elif isinstance(model, Poisson):
                    pois[t, i] = True
        y = np.nan_to_num(instance.observations, nan=0.0)
        self.gauss = gauss
        self.g_y = y[gauss]
        self.g_var = var[gauss]
        self.pois = pois
        self.p_y = y[pois]
        self.p_lf = (
            np.array([log_factorial(int(v)) for v in self.p_y]) if self.p_y.size else None
        )

    def value(self, node: np.ndarray) -> float:
        total = 0.0
        if self.g_y.size:
            d = self.g_y - node[self.gauss]
            total += float((d * d / (2.0 * self.g_var)).sum())
        if self.p_y.size:
            z = node[self.pois]
            if ((z == 0.0) & (self.p_y > 0)).any():
                return INF
            total += float((-xlogy(self.p_y, z) + z + self.p_lf).sum())
        return total

    def add_gradient(self, node: np.ndarray, g_node: np.ndarray) -> None:
        if self.g_y.size:
            g_node[self.gauss] += (node[self.gauss] - self.g_y) / self.g_var
        if self.p_y.size:
            z = np.maximum(node[self.pois], EPS)
            g_node[self.pois] += 1.0 - self.p_y / z


@dataclass(frozen=True)
class RelaxedProblem:
    """The continuous relaxation the approximate solver works on.

    Variables are fractional tables over the instance's marginal polytope
    (nonnegative entries, population and marginal-consistency equalities);
    the objective is the Stirling-approximated posterior cost, convex as an
    extended-real function on that polytope.
    """

    instance: CgmInstance

    def objective(self, tables: FractionalTables) -> float:
        return approx_objective(self.instance, tables)

    def feasible(self, tables: FractionalTables, tol: float = 1e-6) -> bool:
        return not validate_tables(self.instance, tables, tol=tol)


def approx_objective(instance: CgmInstance, tables: FractionalTables) -> float:
    """Objective with every log z! replaced by z log z - z (0 at z = 0).

    Observation terms are evaluated at real-valued counts; a Poisson term
    with a positive observation diverges to +inf as its count reaches 0.
    """
    node = np.asarray(tables.node, dtype=float)
    edge = np.asarray(tables.edge, dtype=float)
    if (node < 0).any() or (edge.size and (edge < 0).any()):
        raise ValueError("table entries must be nonnegative")
    return _approx_value(instance, _ObsTerms(instance), node, edge)


def _approx_value(
    instance: CgmInstance, obs: _ObsTerms, node: np.ndarray, edge: np.ndarray
) -> float:
    total = float(_stirling(edge).sum())
    if edge.size:
        total -= float((edge * instance.log_potentials).sum())
    interior = node[1 : instance.n_steps - 1]
    if interior.size:
        total -= float(_stirling(interior).sum())
    h = obs.value(node)
    return INF if h == INF else total + h


@dataclass
class ApproxReport:
    """Conditional-gradient run record; objectives are Stirling values."""

    objectives: list = field(default_factory=list)
    gap: float = INF
    gap_rel: float = INF
    iterations: int = 0
    converged: bool = False
    tol: float = 0.0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "objectives": list(self.objectives),
            "gap": self.gap,
            "gap_rel": self.gap_rel,
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "wall_time": self.wall_time,
        }


def _cheapest_path(g_node: np.ndarray, g_edge: np.ndarray) -> np.ndarray:
    """States of the minimum-total-gradient source-to-sink path, one per step."""
    N, R = g_node.shape
    dist = g_node[0].copy()
    back = np.zeros((N, R), dtype=np.int64)
    for t in range(N - 1):
        through = dist[:, None] + g_edge[t]
        back[t + 1] = np.argmin(through, axis=0)
        dist = through[back[t + 1], np.arange(R)] + g_node[t + 1]
    states = np.zeros(N, dtype=np.int64)
    states[-1] = int(np.argmin(dist))
    for t in range(N - 2, -1, -1):
        states[t] = back[t + 1][states[t + 1]]
    return states


def solve_approximate(
    instance: CgmInstance, tol: float = 1e-6, max_iters: int = 1000
) -> tuple[FractionalTables, ApproxReport]:
    """Minimize the Stirling-relaxed objective by conditional gradient.

    Starts at the uniform feasible point, moves toward the vertex returned
    by a shortest-path linear minimization each step, with a bounded scalar
    line search, and stops once the relative duality gap drops below tol;
    hitting max_iters first leaves report.converged False.  Iterates stay
    feasible by construction (convex combinations of feasible points), so
    marginal residuals remain at floating-point scale.
    """
    t0 = time.perf_counter()
    N, R, M = instance.n_steps, instance.n_states, instance.population
    node = np.full((N, R), M / R)
    edge = np.full((max(N - 1, 0), R, R), M / (R * R))
    obs = _ObsTerms(instance)
    report = ApproxReport(tol=tol)
    log_phi = instance.log_potentials

    current = _approx_value(instance, obs, node, edge)
    for _ in range(max_iters):
        report.iterations += 1
        g_edge = np.log(np.maximum(edge, EPS)) - log_phi if edge.size else edge
        g_node = np.zeros_like(node)
        if N > 2:
            g_node[1 : N - 1] = -np.log(np.maximum(node[1 : N - 1], EPS))
        obs.add_gradient(node, g_node)

        states = _cheapest_path(g_node, g_edge)
        v_node = np.zeros_like(node)
        v_edge = np.zeros_like(edge)
        v_node[np.arange(N), states] = M
        for t in range(N - 1):
            v_edge[t, states[t], states[t + 1]] = M

        d_node = v_node - node
        d_edge = v_edge - edge
        gap = -float((g_node * d_node).sum())
        if edge.size:
            gap -= float((g_edge * d_edge).sum())
        report.gap = gap
        report.gap_rel = gap / max(1.0, abs(current))
        report.objectives.append(current)
        if report.gap_rel <= tol:
            report.converged = True
            break

        def along(gamma: float) -> float:
            return _approx_value(
                instance, obs, node + gamma * d_node, edge + gamma * d_edge
            )

        hi = 1.0
        if not math.isfinite(along(1.0)):
            hi = 1.0 - 1e-9
        res = minimize_scalar(
            along, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-11}
        )
        gamma = float(res.x)
        stepped = along(gamma)
        if stepped > current:
            # line search failed to improve; direction is exhausted at
            # floating-point scale, stop without claiming convergence
            break
        node = node + gamma * d_node
        edge = edge + gamma * d_edge
        current = stepped

    report.wall_time = time.perf_counter() - t0
    return FractionalTables(node=node, edge=edge), report
