"""Event-driven simulation of the n-th system under preemptive policies.

Arrivals are Poisson at n times the fluid rates; a customer in service at a
pair completes at that pair's rate, so each activity contributes an aggregate
exponential clock proportional to its in-service count (memorylessness makes
resampling after every event exact). Policies are called after every state
change and may reassign everything, subject only to head counts, server
counts and the activity mask. The tracked output is the time the total head
count spends at or above the total server count, the quantity whose decay
distinguishes drainable systems from undrainable ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NetworkModel
from .paths import NEGATIVE, SimplePath
from .static_fluid import FluidSolution


class ScalingViolation(RuntimeError):
    """Rounded integer parameters broke the second-order closeness bounds."""


class PolicyViolation(RuntimeError):
    """A policy returned an infeasible assignment."""


def _round_half_up(values) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class SystemInstance:
    """Integer-sized system at scale n, tied to its fluid solution."""

    n: int
    arrival_rates: np.ndarray   # (I,) events per unit time, n * fluid rate
    servers: np.ndarray         # (J,) integer server counts
    service_rates: np.ndarray   # (I, J) per-server completion rates
    x0: np.ndarray              # (I,) integer initial head counts
    model: NetworkModel
    solution: FluidSolution


def build_system(model: NetworkModel, sol: FluidSolution, n: int) -> SystemInstance:
    """Scale the fluid model to n servers-per-capacity-unit and round.

    Rounding must respect the square-root closeness bounds (sum-abs distance
    of the normalized parameters within (I+J+1)/sqrt(n), server counts within
    half of 1/sqrt(n)); construction fails loudly otherwise.

    Raises:
        ScalingViolation: the bounds fail, typically capacities near
            half-integers at a tiny n. Use a larger n.
    """
    if n < 1:
        raise ValueError("scale parameter n must be at least 1")
    arrival = n * model.arrival_rates
    servers = _round_half_up(n * model.capacities)
    x0 = _round_half_up(n * sol.class_masses)
    service = np.array(model.service_rates)

    c = model.num_classes + model.num_stations + 1
    first_order = (
        np.abs(arrival / n - model.arrival_rates).sum()
        + np.abs(service - model.service_rates).sum()
        + np.abs(x0 / n - sol.class_masses).sum()
    )
    if first_order > c / math.sqrt(n) + 1e-12:
        raise ScalingViolation(
            f"rates/initial heads drifted {first_order:.6g} > {c}/sqrt({n})"
        )
    server_drift = np.abs(servers / n - model.capacities).sum()
    if server_drift > 0.5 / math.sqrt(n) + 1e-12:
        raise ScalingViolation(
            f"server counts drifted {server_drift:.6g} > 0.5/sqrt({n}); adjust n"
        )
    return SystemInstance(
        n=n,
        arrival_rates=arrival,
        servers=servers,
        service_rates=service,
        x0=x0,
        model=model,
        solution=sol,
    )


class SystemState:
    """Mutable snapshot handed to policies: time, head counts, in-service."""

    __slots__ = ("t", "heads", "in_service", "servers")

    def __init__(self, t: float, heads: np.ndarray, in_service: np.ndarray, servers: np.ndarray):
        self.t = t
        self.heads = heads
        self.in_service = in_service
        self.servers = servers

    @property
    def queued(self) -> np.ndarray:
        return self.heads - self.in_service.sum(axis=1)

    @property
    def idle(self) -> np.ndarray:
        return self.servers - self.in_service.sum(axis=0)


class Policy:
    """Decision rule mapping a state to a full in-service matrix.

    ``prepare`` runs once per simulation before the first assignment and may
    cache scale-dependent data; it must also reset any internal state, since
    policy objects are reused across replications.
    """

    name = "abstract"

    def prepare(self, sys: SystemInstance) -> None:
        pass

    def assign(self, state: SystemState, sys: SystemInstance) -> np.ndarray:
        raise NotImplementedError


class IdlePolicy(Policy):
    """Serves nobody. Exists to exercise the degenerate corner in tests."""

    name = "idle"

    def assign(self, state: SystemState, sys: SystemInstance) -> np.ndarray:
        return np.zeros_like(sys.service_rates, dtype=np.int64)


class GreedyBasic(Policy):
    """Work-conserving fill of basic activities in decreasing-rate order."""

    name = "greedy-basic"

    def __init__(self, model: NetworkModel, sol: FluidSolution):
        self._order = sorted(
            (model.edge_positions(e) for e in sol.basic_pairs),
            key=lambda pos: (-model.service_rates[pos], pos),
        )

    def assign(self, state: SystemState, sys: SystemInstance) -> np.ndarray:
        psi = np.zeros_like(sys.service_rates, dtype=np.int64)
        rem_heads = state.heads.copy()
        rem_servers = sys.servers.copy()
        for i, j in self._order:
            k = min(rem_heads[i], rem_servers[j])
            if k > 0:
                psi[i, j] = k
                rem_heads[i] -= k
                rem_servers[j] -= k
        return psi


class NegativePathPump(Policy):
    """Static split plus a congestion-scaled shift along the most negative path.

    The baseline tracks the rounded fluid masses clipped to the current head
    counts, then fills leftovers work-conservingly across all activities.
    While the total head count is at or above the total server count, the
    assignment is displaced along the most negative simple path in its signed
    direction (decreasing +1 edges, increasing -1 edges, which activates the
    leaf pair on closed paths). Each invocation moves the displacement by at
    most ceil(sqrt(n)) toward the feasibility cap; the applied displacement
    is further limited by what the head-clipped baseline can give up on the
    decreasing edges, so pumping never outruns the donor classes. When the
    congestion clears, the displacement unwinds at the same pace: sustained
    displacement erodes the donor class at fluid rate and must stay
    transient. This is a stand-in heuristic that demonstrates drainability
    at desk scale; without a negative path it is inert and only the baseline
    acts.
    """

    name = "negative-path"

    def __init__(self, model: NetworkModel, sol: FluidSolution, paths: list[SimplePath] = ()):
        negative = [p for p in paths if p.sign_class == NEGATIVE]
        self.path = min(negative, key=lambda p: p.weight) if negative else None
        self._model = model
        self._sol = sol

    def prepare(self, sys: SystemInstance) -> None:
        model, sol = self._model, self._sol
        core = _round_half_up(sys.n * sol.masses)
        _clip_columns(core, sys.servers)
        self._core = core
        self._servers_total = int(sys.servers.sum())
        self._step = math.ceil(math.sqrt(sys.n))
        self._shift = 0
        self._desc_active = sorted(
            (
                (i, j)
                for i in range(model.num_classes)
                for j in range(model.num_stations)
                if model.service_rates[i, j] > 0
            ),
            key=lambda pos: (-model.service_rates[pos], pos),
        )
        # per class: drop work from the slowest pairs first when heads run short
        self._asc_by_class = [
            sorted(range(model.num_stations), key=lambda j: (model.service_rates[i, j], j))
            for i in range(model.num_classes)
        ]
        if self.path is not None:
            self._dec = [
                self._model.edge_positions(e) for e, s in self.path.signed_edges if s > 0
            ]
            self._inc = [
                self._model.edge_positions(e) for e, s in self.path.signed_edges if s < 0
            ]
            self._max_shift = int(min(core[pos] for pos in self._dec))
        else:
            self._max_shift = 0

    def assign(self, state: SystemState, sys: SystemInstance) -> np.ndarray:
        psi = self._core.copy()
        # clip rows to the available heads before sizing the displacement
        for i in range(psi.shape[0]):
            excess = int(psi[i].sum()) - int(state.heads[i])
            for j in self._asc_by_class[i]:
                if excess <= 0:
                    break
                take = min(excess, int(psi[i, j]))
                psi[i, j] -= take
                excess -= take
        if self.path is not None:
            surplus = int(state.heads.sum()) - self._servers_total
            headroom = min(int(psi[pos]) for pos in self._dec)
            target = self._max_shift if surplus >= 0 else 0
            if target > self._shift:
                self._shift = min(self._shift + self._step, target)
            else:
                self._shift = max(self._shift - self._step, target)
            applied = min(self._shift, headroom)
            if applied:
                for pos in self._dec:
                    psi[pos] -= applied
                for pos in self._inc:
                    psi[pos] += applied
        # work-conserving completion, fastest activities first
        rem_heads = state.heads - psi.sum(axis=1)
        rem_servers = sys.servers - psi.sum(axis=0)
        for i, j in self._desc_active:
            k = min(rem_heads[i], rem_servers[j])
            if k > 0:
                psi[i, j] += k
                rem_heads[i] -= k
                rem_servers[j] -= k
        return psi


POLICIES = {
    "idle": lambda model, sol, paths: IdlePolicy(),
    "greedy-basic": lambda model, sol, paths: GreedyBasic(model, sol),
    "negative-path": lambda model, sol, paths: NegativePathPump(model, sol, paths or ()),
}


def make_policy(
    name: str,
    model: NetworkModel,
    sol: FluidSolution,
    paths: list[SimplePath] | None = None,
) -> Policy:
    try:
        factory = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return factory(model, sol, paths)


def _clip_columns(core: np.ndarray, servers: np.ndarray) -> None:
    """Shave rounded masses so no station exceeds its server count."""
    for j in range(core.shape[1]):
        while core[:, j].sum() > servers[j]:
            core[int(np.argmax(core[:, j])), j] -= 1


def _initial_assignment(sys: SystemInstance) -> np.ndarray:
    """Rounded fluid masses, clipped to feasibility; residual heads queue."""
    psi = _round_half_up(sys.n * sys.solution.masses)
    _clip_columns(psi, sys.servers)
    rates = sys.service_rates
    for i in range(psi.shape[0]):
        excess = int(psi[i].sum()) - int(sys.x0[i])
        if excess <= 0:
            continue
        for j in sorted(range(psi.shape[1]), key=lambda jj: (rates[i, jj], jj)):
            take = min(excess, int(psi[i, j]))
            psi[i, j] -= take
            excess -= take
            if excess <= 0:
                break
    return psi


def _infeasibility(psi: np.ndarray, heads: np.ndarray, sys: SystemInstance,
                   act_mask: np.ndarray) -> str | None:
    if psi.shape != sys.service_rates.shape:
        return f"assignment shape {psi.shape} does not match the network"
    if not np.issubdtype(psi.dtype, np.integer):
        return "assignment is not integer-valued"
    if (psi < 0).any():
        return "negative in-service count"
    if psi[~act_mask].any():
        return "in-service count on a pair with zero service rate"
    if (psi.sum(axis=1) > heads).any():
        return "class has more customers in service than in the system"
    if (psi.sum(axis=0) > sys.servers).any():
        return "station has more customers in service than servers"
    return None


@dataclass
class SimResult:
    n: int
    rep: int
    seed: int
    policy: str
    T: float
    warmup: float
    queue_occupancy: float          # time in [warmup, T] with total heads >= total servers
    sample_times: np.ndarray        # (S,)
    sample_heads: np.ndarray        # (S, I)
    sample_in_service: np.ndarray   # (S, I, J)
    sample_occupancy: np.ndarray    # (S,) running occupancy integral
    arrivals: np.ndarray            # (I,) event counts
    completions: np.ndarray         # (I, J) event counts
    x0: np.ndarray
    final_heads: np.ndarray
    events: int
    invariants_checked: bool


@dataclass(frozen=True)
class ScaledTrajectories:
    """Centred and sqrt(n)-scaled trajectories with derived queue/idle parts."""

    times: np.ndarray
    heads: np.ndarray        # (S, I)
    in_service: np.ndarray   # (S, I, J)
    servers: np.ndarray      # (J,)
    queued: np.ndarray       # (S, I)
    idle: np.ndarray         # (S, J)


def simulate(
    sys: SystemInstance,
    policy: Policy,
    T: float,
    seed: int,
    warmup: float = 0.0,
    sample_points: int = 101,
) -> SimResult:
    """Run one replication on [0, T]; deterministic in ``seed``.

    The policy is invoked at time zero on the initial split and again after
    every arrival or completion. Between events the congestion indicator is
    constant, so the occupancy integral accumulates exactly. Conservation
    (head counts vs. in-service counts, the activity mask, and the integrated
    arrival/completion identity) is checked after every event.

    Raises:
        PolicyViolation: the policy returned an infeasible assignment; the
            message identifies the policy and the event index.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if not 0 <= warmup < T:
        raise ValueError("warmup must lie in [0, T)")
    rng = np.random.default_rng(seed)
    model = sys.model
    I, J = model.num_classes, model.num_stations
    act_mask = sys.service_rates > 0

    heads = sys.x0.astype(np.int64).copy()
    state = SystemState(0.0, heads, _initial_assignment(sys), sys.servers)
    policy.prepare(sys)
    psi = np.asarray(policy.assign(state, sys))
    problem = _infeasibility(psi, heads, sys, act_mask)
    if problem is not None:
        raise PolicyViolation(f"policy {policy.name!r} at event 0: {problem}")
    state.in_service = psi

    arrivals = np.zeros(I, dtype=np.int64)
    completions = np.zeros((I, J), dtype=np.int64)
    lam = sys.arrival_rates
    lam_total = float(lam.sum())
    lam_cum = np.cumsum(lam)
    servers_total = int(sys.servers.sum())

    sample_ts = np.linspace(0.0, T, sample_points)
    s_heads = np.empty((sample_points, I), dtype=np.int64)
    s_psi = np.empty((sample_points, I, J), dtype=np.int64)
    s_occ = np.empty(sample_points)
    si = 0

    t = 0.0
    occupancy = 0.0
    events = 0

    def occ_piece(t0: float, t1: float) -> float:
        lo = max(t0, warmup)
        return t1 - lo if t1 > lo else 0.0

    while True:
        busy = int(heads.sum()) >= servers_total
        svc = sys.service_rates * state.in_service
        total_rate = lam_total + float(svc.sum())
        t_next = t + rng.exponential() / total_rate
        final = t_next >= T
        seg_end = T if final else t_next

        while si < sample_points and (sample_ts[si] < seg_end or (final and sample_ts[si] <= seg_end)):
            ts = float(sample_ts[si])
            s_heads[si] = heads
            s_psi[si] = state.in_service
            s_occ[si] = occupancy + (occ_piece(t, ts) if busy else 0.0)
            si += 1
        if busy:
            occupancy += occ_piece(t, seg_end)
        if final:
            break

        t = t_next
        u = rng.random() * total_rate
        if u < lam_total:
            i = int(np.searchsorted(lam_cum, u, side="right"))
            i = min(i, I - 1)
            heads[i] += 1
            arrivals[i] += 1
        else:
            flat = np.cumsum(svc.ravel())
            k = int(np.searchsorted(flat, u - lam_total, side="right"))
            k = min(k, I * J - 1)
            i, j = divmod(k, J)
            heads[i] -= 1
            state.in_service[i, j] -= 1
            completions[i, j] += 1
        events += 1

        state.t = t
        psi = np.asarray(policy.assign(state, sys))
        problem = _infeasibility(psi, heads, sys, act_mask)
        if problem is not None:
            raise PolicyViolation(f"policy {policy.name!r} at event {events}: {problem}")
        state.in_service = psi
        if not np.array_equal(heads, sys.x0 + arrivals - completions.sum(axis=1)):
            raise RuntimeError("event accounting broke the counting identity")

    return SimResult(
        n=sys.n,
        rep=0,
        seed=seed,
        policy=policy.name,
        T=T,
        warmup=warmup,
        queue_occupancy=occupancy,
        sample_times=sample_ts,
        sample_heads=s_heads,
        sample_in_service=s_psi,
        sample_occupancy=s_occ,
        arrivals=arrivals,
        completions=completions,
        x0=sys.x0.copy(),
        final_heads=heads.copy(),
        events=events,
        invariants_checked=True,
    )


def scale_result(res: SimResult, sys: SystemInstance, sol: FluidSolution) -> ScaledTrajectories:
    """Centre the sampled trajectories at the fluid quantities and divide by
    sqrt(n); queue and idle parts follow from the head-count identities."""
    root = math.sqrt(sys.n)
    heads_hat = (res.sample_heads - sys.n * sol.class_masses[None, :]) / root
    psi_hat = (res.sample_in_service - sys.n * sol.masses[None, :, :]) / root
    servers_hat = (sys.servers - sys.n * sys.model.capacities) / root
    queued_hat = heads_hat - psi_hat.sum(axis=2)
    idle_hat = servers_hat[None, :] - psi_hat.sum(axis=1)
    return ScaledTrajectories(
        times=res.sample_times,
        heads=heads_hat,
        in_service=psi_hat,
        servers=servers_hat,
        queued=queued_hat,
        idle=idle_hat,
    )


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(base: int, n: int, rep: int) -> int:
    """Stable per-replication seed: base xor a mix of (n, rep)."""
    return (int(base) ^ _splitmix64((int(n) << 32) | (int(rep) & 0xFFFFFFFF))) & 0x7FFFFFFFFFFFFFFF


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    reps: int
    mean: float
    median: float
    q10: float
    q90: float


@dataclass
class ExperimentResult:
    rows: list[ExperimentRow]
    occupancies: dict[int, np.ndarray]
    results: list[SimResult]

    def summary(self) -> list[dict]:
        return [
            {
                "n": row.n,
                "reps": row.reps,
                "mean": row.mean,
                "median": row.median,
                "q10": row.q10,
                "q90": row.q90,
            }
            for row in self.rows
        ]


def run_nc_experiment(
    model: NetworkModel,
    sol: FluidSolution,
    policy: Policy | str,
    n_list: list[int],
    T: float,
    reps: int,
    seed: int,
    paths: list[SimplePath] | None = None,
    warmup: float = 0.0,
    sample_points: int = 51,
) -> ExperimentResult:
    """Occupancy statistics across scales: ``reps`` replications per n.

    Replication seeds derive from (seed, n, rep), so the aggregate is
    independent of execution order and bitwise reproducible.
    """
    n_list = list(n_list)
    if n_list != sorted(n_list):
        raise ValueError("n_list must be ascending")
    if reps < 1:
        raise ValueError("need at least one replication")
    pol = make_policy(policy, model, sol, paths) if isinstance(policy, str) else policy

    rows: list[ExperimentRow] = []
    occupancies: dict[int, np.ndarray] = {}
    results: list[SimResult] = []
    for n in n_list:
        sys = build_system(model, sol, n)
        values = []
        for rep in range(reps):
            res = simulate(
                sys, pol, T, derive_seed(seed, n, rep),
                warmup=warmup, sample_points=sample_points,
            )
            res.rep = rep
            results.append(res)
            values.append(res.queue_occupancy)
        arr = np.array(values)
        occupancies[n] = arr
        rows.append(
            ExperimentRow(
                n=n,
                reps=reps,
                mean=float(arr.mean()),
                median=float(np.median(arr)),
                q10=float(np.quantile(arr, 0.1)),
                q90=float(np.quantile(arr, 0.9)),
            )
        )
    return ExperimentResult(rows=rows, occupancies=occupancies, results=results)
