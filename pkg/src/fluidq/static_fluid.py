"""Static allocation problem: solve, verify the standing assumptions, generate.

The allocation program picks station fractions so every class's arrival rate
is served exactly while the worst station load is minimized. A solution is
the root object of all later analysis: its positive entries define the basic
activities, its masses define the class head-count targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linprog import INFEASIBLE, LinearProgram, solve_lp, optimal_range
from .model import (
    DEFAULT_TOL,
    NetworkModel,
    effective_rates,
    validate_model,
)


class InfeasibleModel(RuntimeError):
    """No allocation can serve all arrival rates."""


class GenerationFailed(RuntimeError):
    """The randomized instance generator exhausted its retry budget."""


@dataclass(frozen=True)
class FluidSolution:
    """Optimal static allocation and the quantities derived from it.

    ``allocation[i, j]`` is the fraction of station j's capacity devoted to
    class i; ``masses = allocation * capacity`` is fluid mass per pair;
    ``class_masses[i]`` is the total mass of class i in service.
    """

    allocation: np.ndarray          # (I, J) fractions, >= 0
    load: float                     # optimal worst-station load
    masses: np.ndarray              # (I, J) fluid masses
    class_masses: np.ndarray        # (I,)
    basic_edges: frozenset[tuple[int, int]]  # vertex-labeled pairs with allocation > tol

    @property
    def basic_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.basic_edges))


@dataclass(frozen=True)
class AssumptionReport:
    critically_loaded: bool
    unique: bool
    is_tree: bool
    violations: tuple[str, ...]

    @property
    def all_hold(self) -> bool:
        return self.critically_loaded and self.unique and self.is_tree


def _allocation_lp(model: NetworkModel) -> LinearProgram:
    """Variables: allocation fractions flattened row-major, then the load."""
    I, J = model.num_classes, model.num_stations
    n = I * J + 1
    load_idx = I * J
    mubar = effective_rates(model).matrix

    objective = np.zeros(n)
    objective[load_idx] = 1.0

    eq = []
    for i in range(I):
        coef = np.zeros(n)
        coef[i * J:(i + 1) * J] = mubar[i]
        eq.append((coef, float(model.arrival_rates[i])))
    # pairs without service are pinned to zero allocation
    for i in range(I):
        for j in range(J):
            if mubar[i, j] == 0.0:
                coef = np.zeros(n)
                coef[i * J + j] = 1.0
                eq.append((coef, 0.0))

    ub = []
    for j in range(J):
        coef = np.zeros(n)
        coef[np.arange(I) * J + j] = 1.0
        coef[load_idx] = -1.0
        ub.append((coef, 0.0))

    return LinearProgram(n_vars=n, objective=objective, eq=tuple(eq), ub=tuple(ub))


def solve_static_allocation(model: NetworkModel, tol: float = DEFAULT_TOL) -> FluidSolution:
    """Solve the static allocation program for ``model``.

    Raises:
        InfeasibleModel: some class's rate cannot be served at any load
            (typically a class with no activity at all).
    """
    I, J = model.num_classes, model.num_stations
    res = solve_lp(_allocation_lp(model))
    if res.status == INFEASIBLE:
        raise InfeasibleModel("arrival rates cannot be served by any allocation")

    allocation = np.clip(res.x[: I * J].reshape(I, J), 0.0, None)
    load = float(res.value)
    masses = allocation * model.capacities[None, :]
    class_masses = masses.sum(axis=1)
    basic = frozenset(
        (i + 1, model.num_classes + 1 + j)
        for i in range(I)
        for j in range(J)
        if allocation[i, j] > tol
    )
    for arr in (allocation, masses, class_masses):
        arr.setflags(write=False)
    return FluidSolution(
        allocation=allocation,
        load=load,
        masses=masses,
        class_masses=class_masses,
        basic_edges=basic,
    )


def _tree_check(model: NetworkModel, edges: frozenset[tuple[int, int]]) -> tuple[bool, list[str]]:
    n_vertices = model.num_classes + model.num_stations
    violations = []
    expected = n_vertices - 1
    if len(edges) != expected:
        violations.append(
            f"basic graph has {len(edges)} edges, a spanning tree needs {expected}"
        )
    adjacency: dict[int, list[int]] = {v: [] for v in range(1, n_vertices + 1)}
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = {1}
    stack = [1]
    while stack:
        v = stack.pop()
        for w in adjacency[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != n_vertices:
        violations.append("basic graph is disconnected")
    return not violations, violations


def check_assumptions(
    model: NetworkModel, sol: FluidSolution, tol: float = DEFAULT_TOL
) -> AssumptionReport:
    """Test critical load, uniqueness of the optimum, and the tree property.

    Findings are reported, never raised: downstream verdicts decide what a
    violation means for them.
    """
    I, J = model.num_classes, model.num_stations
    violations: list[str] = []

    critically_loaded = True
    if abs(sol.load - 1.0) > tol:
        critically_loaded = False
        violations.append(f"optimal load is {sol.load!r}, not 1")
    col_sums = sol.allocation.sum(axis=0)
    for j in range(J):
        if abs(col_sums[j] - 1.0) > tol:
            critically_loaded = False
            violations.append(
                f"station {model.num_classes + 1 + j} is allocated {col_sums[j]!r}, not fully"
            )

    # probe every allocation variable's range over the optimal face
    lp = _allocation_lp(model)
    unique = True
    for i in range(I):
        for j in range(J):
            lo, hi = optimal_range(lp, i * J + j, sol.load)
            if hi - lo > 2 * tol:
                unique = False
                violations.append(
                    f"allocation ({i + 1},{model.num_classes + 1 + j}) ranges over "
                    f"[{lo:.6g}, {hi:.6g}] at the optimum"
                )

    is_tree, tree_violations = _tree_check(model, sol.basic_edges)
    violations.extend(tree_violations)

    return AssumptionReport(
        critically_loaded=critically_loaded,
        unique=unique,
        is_tree=is_tree,
        violations=tuple(violations),
    )


def _uniform_spanning_tree(rng: np.random.Generator, I: int, J: int) -> list[tuple[int, int]]:
    """Uniform spanning tree of the complete bipartite graph, by random walk.

    First-entry edges of a simple random walk form a uniformly distributed
    spanning tree (Aldous-Broder). Vertices 0..I-1 are classes, I..I+J-1
    stations; returned edges are (class position, station position).
    """
    total = I + J
    current = int(rng.integers(total))
    visited = {current}
    edges: list[tuple[int, int]] = []
    while len(visited) < total:
        if current < I:
            nxt = I + int(rng.integers(J))
        else:
            nxt = int(rng.integers(I))
        if nxt not in visited:
            visited.add(nxt)
            a, b = (current, nxt) if current < I else (nxt, current)
            edges.append((a, b - I))
        current = nxt
    return edges


def generate_critical_instance(
    seed: int, num_classes: int, num_stations: int, max_retries: int = 100
) -> tuple[NetworkModel, FluidSolution]:
    """Draw a random instance that passes every assumption check.

    Construction plants the solution: a uniform spanning tree carries positive
    allocations normalized per station, arrival rates are defined as exactly
    the planted service rates, and optional extra activities are sprinkled on
    non-tree pairs. Deterministic in ``seed``; failed draws retry with
    ``seed + 1``.

    Raises:
        GenerationFailed: no draw within ``max_retries`` passed the checks.
    """
    I, J = num_classes, num_stations
    if I < 1 or J < 1 or I + J < 2:
        raise ValueError("need at least one class and one station")

    for attempt in range(max_retries):
        rng = np.random.default_rng(seed + attempt)
        tree = _uniform_spanning_tree(rng, I, J)
        tree_set = set(tree)

        planted = np.zeros((I, J))
        for j in range(J):
            neighbors = sorted(i for (i, jj) in tree if jj == j)
            weights = rng.uniform(0.1, 1.0, size=len(neighbors))
            planted[neighbors, j] = weights / weights.sum()

        mu = np.zeros((I, J))
        for (i, j) in sorted(tree_set):
            mu[i, j] = rng.uniform(0.5, 10.0)
        for i in range(I):
            for j in range(J):
                if (i, j) not in tree_set and rng.random() < 0.5:
                    mu[i, j] = rng.uniform(0.5, 10.0)

        nu = rng.uniform(0.5, 2.0, size=J)
        lam = (mu * nu[None, :] * planted).sum(axis=1)

        model = validate_model(
            {
                "classes": I,
                "stations": J,
                "lambda": lam.tolist(),
                "nu": nu.tolist(),
                "mu": mu.tolist(),
            }
        )
        try:
            sol = solve_static_allocation(model)
        except InfeasibleModel:
            continue
        report = check_assumptions(model, sol)
        if not report.all_hold:
            continue
        if np.abs(sol.allocation - planted).max() > 1e-6:
            continue
        return model, sol

    raise GenerationFailed(
        f"no assumption-satisfying instance in {max_retries} draws from seed {seed}"
    )
