"""Domain types and objective evaluation for MAP inference on path-graph count models.

The decision variable is a pair of count tables (per-step state counts and
per-transition counts) constrained to the integer marginal polytope: every
node table sums to the total population and edge tables reproduce the node
tables as row/column marginals.  The negative log posterior decomposes into
three families of separable terms:

    transition terms   f(z) = log z! - z * log(phi)     (discrete convex)
    interior terms     g(z) = -log z!                   (discrete concave)
    observation terms  h(z) = -log p(y | z)             (discrete convex)

Constant shifts (log M!, the partition function, Gaussian normalization) are
dropped throughout; they do not move the argmin and every solver in this
package reports objectives under the same convention.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

__all__ = [
    "Gaussian",
    "Poisson",
    "MISSING",
    "NoiseModel",
    "CgmInstance",
    "ContingencyTables",
    "FractionalTables",
    "Violation",
    "log_factorial",
    "log_factorial_array",
    "f_cost",
    "g_cost",
    "h_cost",
    "objective",
    "objective_fractional",
    "validate_tables",
    "is_feasible",
]

INF = math.inf


# ---------------------------------------------------------------------------
# noise models


@dataclass(frozen=True)
class Gaussian:
    """Additive Gaussian observation noise with variance ``var``."""

    var: float

    def __post_init__(self) -> None:
        if not self.var > 0:
            raise ValueError(f"Gaussian variance must be positive, got {self.var}")


@dataclass(frozen=True)
class Poisson:
    """Poisson observation noise: y ~ Poisson(z) given true count z."""


#: Sentinel for "no observation at this node"; the observation term is 0.
MISSING = None

NoiseModel = Union[Gaussian, Poisson, None]


# ---------------------------------------------------------------------------
# log-factorial table, grown lazily and shared read-only afterwards


class _LogFactorialTable:
    """Cumulative table of ln(z!), extended geometrically on demand."""

    def __init__(self) -> None:
        self._values = np.zeros(2)  # ln 0! = ln 1! = 0
        self._lock = threading.Lock()

    def ensure(self, z: int) -> np.ndarray:
        values = self._values
        if z < len(values):
            return values
        with self._lock:
            values = self._values
            if z < len(values):
                return values
            new_len = max(z + 1, 2 * len(values))
            out = np.empty(new_len)
            out[: len(values)] = values
            start = len(values)
            out[start:] = values[start - 1] + np.cumsum(
                np.log(np.arange(start, new_len, dtype=float))
            )
            self._values = out
            return out

    def value(self, z: int) -> float:
        if z < 0:
            raise ValueError(f"log_factorial requires z >= 0, got {z}")
        return float(self.ensure(z)[z])

    def values(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        if z.size and z.min() < 0:
            raise ValueError("log_factorial requires nonnegative entries")
        table = self.ensure(int(z.max()) if z.size else 0)
        return table[z]


_LOG_FACTORIAL = _LogFactorialTable()


def log_factorial(z: int) -> float:
    """ln(z!) for integer z >= 0, exact to well below 1e-9 at desk scale."""
    return _LOG_FACTORIAL.value(z)


def log_factorial_array(z: np.ndarray) -> np.ndarray:
    """Vectorized ln(z!) over an integer array."""
    return _LOG_FACTORIAL.values(z)


# ---------------------------------------------------------------------------
# instance


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CgmInstance:
    """A path-graph inference problem.

    potentials has shape (n_steps - 1, n_states, n_states) and must be
    strictly positive.  observations has shape (n_steps, n_states) with NaN
    marking a missing observation; noise carries one model tag per (t, i)
    and must be MISSING exactly where the observation is.
    """

    n_steps: int
    n_states: int
    population: int
    potentials: np.ndarray
    observations: np.ndarray
    noise: tuple[tuple[NoiseModel, ...], ...]

    def __post_init__(self) -> None:
        if self.n_steps < 1 or self.n_states < 1:
            raise ValueError("n_steps and n_states must be positive")
        if self.population < 1:
            raise ValueError("population must be positive")
        pot = _as_readonly(np.asarray(self.potentials, dtype=float))
        obs = _as_readonly(np.asarray(self.observations, dtype=float))
        object.__setattr__(self, "potentials", pot)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "noise", tuple(tuple(row) for row in self.noise))
        N, R = self.n_steps, self.n_states
        if pot.shape != (max(N - 1, 0), R, R):
            raise ValueError(f"potentials must have shape {(N - 1, R, R)}, got {pot.shape}")
        if obs.shape != (N, R):
            raise ValueError(f"observations must have shape {(N, R)}, got {obs.shape}")
        if len(self.noise) != N or any(len(row) != R for row in self.noise):
            raise ValueError("noise must have one entry per (t, i)")
        if pot.size and not (pot > 0).all():
            raise ValueError("all potentials must be strictly positive")
        for t in range(N):
            for i in range(R):
                y = obs[t, i]
                model = self.noise[t][i]
                if model is MISSING:
                    if not math.isnan(y):
                        raise ValueError(f"observation ({t},{i}) set but noise is MISSING")
                    continue
                if math.isnan(y):
                    raise ValueError(f"noise ({t},{i}) set but observation is MISSING")
                if y < 0:
                    raise ValueError(f"observation ({t},{i}) must be nonnegative")
                if isinstance(model, Poisson) and y != int(y):
                    raise ValueError(f"Poisson observation ({t},{i}) must be an integer")

    @property
    def log_potentials(self) -> np.ndarray:
        return np.log(self.potentials)

    def interior_steps(self) -> range:
        """Time indices whose nodes carry the concave -log z! term."""
        return range(1, self.n_steps - 1)


# ---------------------------------------------------------------------------
# tables


def _check_table_shapes(n_steps: int, n_states: int, node: np.ndarray, edge: np.ndarray) -> None:
    if node.shape != (n_steps, n_states):
        raise ValueError(f"node table must have shape {(n_steps, n_states)}, got {node.shape}")
    expected = (max(n_steps - 1, 0), n_states, n_states)
    if edge.shape != expected:
        raise ValueError(f"edge table must have shape {expected}, got {edge.shape}")


@dataclass(frozen=True)
class ContingencyTables:
    """Integer node counts n[t][i] and transition counts n[t][i][j]."""

    node: np.ndarray
    edge: np.ndarray

    def __post_init__(self) -> None:
        node = np.asarray(self.node)
        edge = np.asarray(self.edge)
        if not np.issubdtype(node.dtype, np.integer):
            rounded = np.rint(node)
            if not np.array_equal(rounded, node):
                raise ValueError("node table entries must be integers")
            node = rounded.astype(np.int64)
        if not np.issubdtype(edge.dtype, np.integer):
            rounded = np.rint(edge)
            if not np.array_equal(rounded, edge):
                raise ValueError("edge table entries must be integers")
            edge = rounded.astype(np.int64)
        object.__setattr__(self, "node", _as_readonly(node.astype(np.int64)))
        object.__setattr__(self, "edge", _as_readonly(edge.astype(np.int64)))

    @property
    def n_steps(self) -> int:
        return self.node.shape[0]

    @property
    def n_states(self) -> int:
        return self.node.shape[1]

    def same_values(self, other: "ContingencyTables") -> bool:
        return np.array_equal(self.node, other.node) and np.array_equal(self.edge, other.edge)

    @staticmethod
    def zeros(n_steps: int, n_states: int) -> "ContingencyTables":
        return ContingencyTables(
            node=np.zeros((n_steps, n_states), dtype=np.int64),
            edge=np.zeros((max(n_steps - 1, 0), n_states, n_states), dtype=np.int64),
        )


@dataclass(frozen=True)
class FractionalTables:
    """Real-valued tables produced by continuous relaxations."""

    node: np.ndarray
    edge: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "node", _as_readonly(np.asarray(self.node, dtype=float)))
        object.__setattr__(self, "edge", _as_readonly(np.asarray(self.edge, dtype=float)))

    @property
    def n_steps(self) -> int:
        return self.node.shape[0]

    @property
    def n_states(self) -> int:
        return self.node.shape[1]


Tables = Union[ContingencyTables, FractionalTables]


# ---------------------------------------------------------------------------
# cost terms


def f_cost(instance: CgmInstance, t: int, i: int, j: int, z: int) -> float:
    """Transition cost log z! - z * log(phi[t][i][j])."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    phi = instance.potentials[t, i, j]  # raises IndexError when out of range
    return log_factorial(z) - z * math.log(phi)


def g_cost(z: int) -> float:
    """Interior node cost -log z! (discrete concave)."""
    return -log_factorial(z)


def h_noise_cost(model: NoiseModel, y: float, z: int) -> float:
    """Observation cost -log p(y | z) up to a constant shift, possibly +inf."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    if model is MISSING:
        return 0.0
    if isinstance(model, Gaussian):
        d = y - z
        return d * d / (2.0 * model.var)
    if isinstance(model, Poisson):
        yi = int(y)
        if z == 0:
            return 0.0 if yi == 0 else INF
        return -yi * math.log(z) + z + log_factorial(yi)
    raise TypeError(f"unknown noise model {model!r}")


def h_cost(instance: CgmInstance, t: int, i: int, z: int) -> float:
    """Observation cost at node (t, i)."""
    if not (0 <= t < instance.n_steps and 0 <= i < instance.n_states):
        raise IndexError((t, i))
    model = instance.noise[t][i]
    y = instance.observations[t, i]
    return h_noise_cost(model, y, z)


def _h_sum(instance: CgmInstance, node: np.ndarray) -> float:
    total = 0.0
    obs = instance.observations
    for t in range(instance.n_steps):
        for i in range(instance.n_states):
            model = instance.noise[t][i]
            if model is MISSING:
                continue
            y = obs[t, i]
            z = node[t, i]
            if isinstance(model, Gaussian):
                d = y - z
                total += d * d / (2.0 * model.var)
            else:  # Poisson
                yi = int(y)
                if z == 0:
                    if yi != 0:
                        return INF
                else:
                    total += -yi * math.log(z) + z + log_factorial(yi)
            if total == INF:
                return INF
    return total


def objective(instance: CgmInstance, tables: ContingencyTables) -> float:
    """Negative log posterior (up to dropped constants) of an integer table.

    Returns +inf when a Poisson term forbids the configuration.  Feasibility
    with respect to the marginal polytope is not checked here; use
    validate_tables for that.
    """
    _check_table_shapes(instance.n_steps, instance.n_states, tables.node, tables.edge)
    edge = tables.edge
    node = tables.node
    total = float(log_factorial_array(edge).sum())
    if edge.size:
        total -= float((edge * instance.log_potentials).sum())
    interior = node[1 : instance.n_steps - 1]
    if interior.size:
        total -= float(log_factorial_array(interior).sum())
    h = _h_sum(instance, node)
    return INF if h == INF else total + h


def _interp_log_factorial(z: np.ndarray) -> np.ndarray:
    """Linear interpolation of ln(z!) between consecutive integers."""
    lo = np.floor(z).astype(np.int64)
    w = z - lo
    table = _LOG_FACTORIAL.ensure(int(lo.max()) + 1 if lo.size else 1)
    return (1.0 - w) * table[lo] + w * table[lo + 1]


def objective_fractional(instance: CgmInstance, tables: Tables) -> float:
    """Objective with each ln(z!) replaced by its linear interpolation.

    Coincides exactly with ``objective`` on integer-valued tables.
    """
    node = np.asarray(tables.node, dtype=float)
    edge = np.asarray(tables.edge, dtype=float)
    _check_table_shapes(instance.n_steps, instance.n_states, node, edge)
    if (node < 0).any() or (edge.size and (edge < 0).any()):
        raise ValueError("table entries must be nonnegative")
    total = float(_interp_log_factorial(edge).sum())
    if edge.size:
        total -= float((edge * instance.log_potentials).sum())
    interior = node[1 : instance.n_steps - 1]
    if interior.size:
        total -= float(_interp_log_factorial(interior).sum())

    h = 0.0
    obs = instance.observations
    for t in range(instance.n_steps):
        for i in range(instance.n_states):
            model = instance.noise[t][i]
            if model is MISSING:
                continue
            y = obs[t, i]
            z = node[t, i]
            if isinstance(model, Gaussian):
                d = y - z
                h += d * d / (2.0 * model.var)
            else:  # Poisson at real-valued z
                yi = int(y)
                if z == 0.0:
                    if yi != 0:
                        return INF
                else:
                    h += -yi * math.log(z) + z + log_factorial(yi)
    return total + h


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class Violation:
    """One violated polytope constraint; ``where`` holds the offending indices."""

    kind: str  # population | row-marginal | col-marginal | negative
    where: tuple[int, ...]
    residual: float

    def __str__(self) -> str:
        return f"{self.kind}@{self.where}: residual {self.residual:g}"


def validate_tables(
    instance: CgmInstance,
    tables: Tables,
    tol: float | None = None,
) -> list[Violation]:
    """Check the marginal polytope constraints; empty list means feasible.

    Integer tables are checked exactly, fractional tables to an additive
    tolerance of 1e-6 (override with ``tol``).
    """
    node = np.asarray(tables.node, dtype=float)
    edge = np.asarray(tables.edge, dtype=float)
    _check_table_shapes(instance.n_steps, instance.n_states, node, edge)
    if tol is None:
        tol = 0.0 if isinstance(tables, ContingencyTables) else 1e-6

    out: list[Violation] = []
    for t, i in zip(*np.where(node < -tol)):
        out.append(Violation("negative", (int(t), int(i)), float(node[t, i])))
    if edge.size:
        for t, i, j in zip(*np.where(edge < -tol)):
            out.append(Violation("negative", (int(t), int(i), int(j)), float(edge[t, i, j])))

    pop_residual = node.sum(axis=1) - instance.population
    for t in np.where(np.abs(pop_residual) > tol)[0]:
        out.append(Violation("population", (int(t),), float(pop_residual[t])))

    if edge.size:
        row_residual = edge.sum(axis=2) - node[:-1]
        for t, i in zip(*np.where(np.abs(row_residual) > tol)):
            out.append(Violation("row-marginal", (int(t), int(i)), float(row_residual[t, i])))
        col_residual = edge.sum(axis=1) - node[1:]
        for t, j in zip(*np.where(np.abs(col_residual) > tol)):
            out.append(Violation("col-marginal", (int(t), int(j)), float(col_residual[t, j])))
    return out


def is_feasible(instance: CgmInstance, tables: Tables, tol: float | None = None) -> bool:
    return not validate_tables(instance, tables, tol=tol)
