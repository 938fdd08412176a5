"""Shared instance factories for the test suite."""

from __future__ import annotations

import numpy as np

from cgmflow.core import CgmInstance, Gaussian, MISSING, Poisson


def make_tiny_instance(
    seed: int,
    max_steps: int = 3,
    max_states: int = 3,
    max_population: int = 5,
) -> CgmInstance:
    """Random desk-size instance with mixed potentials and mixed noise.

    Always feasible: a Poisson cell with a positive observation forces a
    node count of at least one, so at most M such cells are allowed per
    layer.
    """
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, max_steps + 1))
    R = int(rng.integers(1, max_states + 1))
    M = int(rng.integers(1, max_population + 1))
    if rng.random() < 0.5:
        phi = rng.integers(1, 11, size=(max(N - 1, 0), R, R)).astype(float)
    else:
        phi = rng.uniform(0.2, 3.0, size=(max(N - 1, 0), R, R))
    observations = np.zeros((N, R))
    noise = []
    for t in range(N):
        row = []
        forced = 0
        for i in range(R):
            pick = int(rng.integers(0, 3))
            if pick == 0:
                y = int(rng.integers(0, 3))
                if y > 0 and forced >= M:
                    y = 0
                forced += y > 0
                row.append(Poisson())
                observations[t, i] = y
            elif pick == 1:
                row.append(Gaussian(float(rng.uniform(0.5, 60.0))))
                observations[t, i] = float(rng.uniform(0.0, M))
            else:
                row.append(MISSING)
                observations[t, i] = np.nan
        noise.append(tuple(row))
    return CgmInstance(
        n_steps=N,
        n_states=R,
        population=M,
        potentials=phi,
        observations=observations,
        noise=tuple(noise),
    )
