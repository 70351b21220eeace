"""Heat-bath Glauber dynamics on a periodic box, with exact reversibility checks.

Single-site updates resample a spin from its exact conditional given the
rest of the configuration.  Sweeps visit sites in a fixed lexicographic
order, and all randomness comes from a counter-based generator keyed by
(seed, replica) with the sweep index in the counter, so every trajectory
is reproducible and replicas are independent no matter how the work is
scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .entropy import relative_entropy_window
from .lattice import (
    SpinAlphabet,
    Window,
    box_window,
    check_cap,
    cube_window,
    label_grid,
    strides,
)
from .measures import Potential, WindowMeasure, empirical_measure, torus_gibbs
from .metric import distance_lp_measures

_INIT_STREAM = 1 << 62
_EXACT_STREAM = (1 << 62) + 1


def worker_count() -> int:
    """Replica-chunk parallelism; override via GIBBSLAB_THREADS (default 1)."""
    raw = os.environ.get("GIBBSLAB_THREADS", "").strip()
    count = int(raw) if raw else 1
    return max(count, 1)


def _uniforms(seed: int, replica: int, stream: int, count: int) -> np.ndarray:
    """Deterministic uniform block for one (seed, replica, stream) triple."""
    bitgen = np.random.Philox(
        key=np.array([seed % 2**64, replica % 2**64], dtype=np.uint64),
        counter=np.array([0, 0, stream % 2**64, 0], dtype=np.uint64),
    )
    return np.random.Generator(bitgen).random(count)


@dataclass(frozen=True, eq=False)
class TorusState:
    """Spin labels on the box [0, side)^d with periodic wrapping."""

    side: int
    spins: np.ndarray
    sweeps: int
    seed: int
    replica: int = 0

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.int64)
        object.__setattr__(self, "spins", spins)

    @property
    def dimension(self) -> int:
        return self.spins.ndim


class _UpdatePlan:
    """Per-site neighborhoods of every potential term, flattened for the torus."""

    def __init__(self, U: Potential, side: int):
        if not U.interaction_range * 2 < side:
            raise ValueError("potential range must be below half the torus side")
        d = U.dimension
        self.q = U.alphabet.size
        self.side = side
        self.n_sites = side**d
        self.log_a_priori = np.log(U.a_priori)
        box = box_window((side,) * d)
        self.box = box
        coords = np.array(box.sites, dtype=np.int64)  # (N, d) in flat order
        self.entries = []
        for term in U.terms:
            grid = term.table.reshape((self.q,) * term.shape.size)
            for own_axis, anchor in enumerate(term.shape.sites):
                rel = np.array(
                    [[c - a for c, a in zip(site, anchor)] for site in term.shape.sites],
                    dtype=np.int64,
                )  # row own_axis is the origin
                nbr_coords = (coords[:, None, :] + rel[None, :, :]) % side
                mult = side ** np.arange(d - 1, -1, -1, dtype=np.int64)
                nbr = nbr_coords @ mult
                for x in range(self.n_sites):
                    if len(set(nbr[x])) != rel.shape[0]:
                        raise ValueError("shape wraps onto itself; torus too small")
                self.entries.append((grid, nbr, own_axis))

    def conditionals(self, states: np.ndarray, site: int) -> np.ndarray:
        """Exact resampling law at one site for a batch of states, shape (R, q)."""
        R = states.shape[0]
        energy = np.zeros((R, self.q))
        for grid, nbr, own_axis in self.entries:
            cols = nbr[site]
            labels = states[:, cols]
            for a in range(self.q):
                idx = tuple(
                    np.full(R, a, dtype=np.int64) if j == own_axis else labels[:, j]
                    for j in range(cols.size)
                )
                energy[:, a] += grid[idx]
        logits = self.log_a_priori[None, :] - energy
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs


def _sweep_inplace(states: np.ndarray, plan: _UpdatePlan, uniforms: np.ndarray) -> None:
    """One sequential heat-bath sweep over all sites, batched over replicas."""
    q = plan.q
    for site in range(plan.n_sites):
        probs = plan.conditionals(states, site)
        cdf = np.cumsum(probs, axis=1)
        u = uniforms[:, site]
        labels = (cdf < u[:, None]).sum(axis=1)
        states[:, site] = np.minimum(labels, q - 1)


def heat_bath_sweep(state: TorusState, U: Potential) -> TorusState:
    """Advance one full deterministic-scan sweep; pure in (state, potential)."""
    if U.dimension != state.dimension:
        raise ValueError("potential dimension does not match the state")
    plan = _UpdatePlan(U, state.side)
    flat = state.spins.reshape(1, -1).copy()
    u = _uniforms(state.seed, state.replica, state.sweeps, plan.n_sites).reshape(1, -1)
    _sweep_inplace(flat, plan, u)
    return TorusState(
        side=state.side,
        spins=flat.reshape(state.spins.shape),
        sweeps=state.sweeps + 1,
        seed=state.seed,
        replica=state.replica,
    )


def initial_state(
    U: Potential, side: int, single_site_law, seed: int, replica: int = 0
) -> TorusState:
    """Independent draw of every spin from a single-site law."""
    law = np.asarray(single_site_law, dtype=float)
    if law.size != U.alphabet.size or np.any(law < 0) or abs(law.sum() - 1.0) > 1e-9:
        raise ValueError("initial law must be a probability vector on the alphabet")
    d = U.dimension
    n = side**d
    u = _uniforms(seed, replica, _INIT_STREAM, n)
    cdf = np.cumsum(law / law.sum())
    labels = np.searchsorted(cdf, u, side="right")
    labels = np.minimum(labels, law.size - 1)
    return TorusState(side=side, spins=labels.reshape((side,) * d), sweeps=0, seed=seed, replica=replica)


def site_conditional(U: Potential, state: TorusState, site) -> np.ndarray:
    """Exact heat-bath resampling law at one site of the current state."""
    plan = _UpdatePlan(U, state.side)
    flat_site = 0
    for c in site:
        flat_site = flat_site * state.side + (c % state.side)
    return plan.conditionals(state.spins.reshape(1, -1), flat_site)[0]


# -- reversibility ----------------------------------------------------------------

@dataclass
class BalanceReport:
    max_violation: float
    passed: bool
    tolerance: float
    witness: tuple | None


def max_balance_violation(pi: WindowMeasure, site_probs: list[np.ndarray], q: int):
    """Worst |pi(x) k(x -> y) - pi(y) k(y -> x)| over single-site transitions.

    ``site_probs[k]`` holds the resampling law at flat site k for every
    configuration (rows in configuration-index order).
    """
    n = pi.window.size
    stride = strides(n, q)
    labels = label_grid(n, q).astype(np.int64)
    base = np.arange(q**n, dtype=np.int64)
    worst = 0.0
    witness = None
    for site in range(n):
        probs = site_probs[site]
        v = labels[:, site]
        for a in range(q):
            target = base + (a - v) * stride[site]
            lhs = pi.weights * probs[base, a]
            rhs = pi.weights[target] * probs[target, v]
            viol = np.abs(lhs - rhs)
            k = int(np.argmax(viol))
            if viol[k] > worst:
                worst = float(viol[k])
                witness = (site, k, a)
    return worst, witness


def detailed_balance_check(U: Potential, side: int, tolerance: float = 1e-12) -> BalanceReport:
    """Exact detailed-balance audit of the heat-bath kernel on a small torus.

    Enumerates every configuration of the torus Gibbs measure and every
    single-site transition; the worst flux imbalance must sit at rounding
    level for the kernel to be reversible.
    """
    pi = torus_gibbs(U, side)
    plan = _UpdatePlan(U, side)
    q = U.alphabet.size
    n = pi.window.size
    check_cap(q, n)
    all_states = label_grid(n, q).astype(np.int64)
    site_probs = [plan.conditionals(all_states, site) for site in range(n)]
    worst, witness = max_balance_violation(pi, site_probs, q)
    return BalanceReport(
        max_violation=worst,
        passed=bool(worst <= tolerance),
        tolerance=tolerance,
        witness=witness,
    )


def sample_torus_gibbs(U: Potential, side: int, n_samples: int, seed: int) -> np.ndarray:
    """Exact i.i.d. samples from the torus Gibbs measure (inversion on the
    full table); returns labels with shape (n_samples, side**d)."""
    pi = torus_gibbs(U, side)
    cdf = np.cumsum(pi.weights)
    rows = label_grid(pi.window.size, U.alphabet.size).astype(np.int64)
    out = np.zeros((n_samples, pi.window.size), dtype=np.int64)
    for k in range(n_samples):
        u = _uniforms(seed, k, _EXACT_STREAM, 1)[0]
        idx = min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)
        out[k] = rows[idx]
    return out


# -- ensemble convergence -----------------------------------------------------------

@dataclass
class ConvergencePoint:
    sweep: int
    distance: float
    distance_se: float
    entropy_per_site: float
    entropy_se: float


@dataclass
class ConvergenceTrace:
    points: list[ConvergencePoint]
    radius: int
    side: int
    sample_count: int
    seed: int
    provenance: str
    undersampled: bool


def _simulate_window_counts(args) -> dict[int, np.ndarray]:
    """Counts of window configurations at each checkpoint for one replica chunk."""
    U, side, law, seed, replica_range, checkpoints, window_cols, n_configs = args
    plan = _UpdatePlan(U, side)
    q = plan.q
    replicas = list(replica_range)
    states = np.stack(
        [initial_state(U, side, law, seed, rep).spins.reshape(-1) for rep in replicas]
    )
    place = q ** np.arange(len(window_cols) - 1, -1, -1, dtype=np.int64)
    counts: dict[int, np.ndarray] = {}
    last = max(checkpoints)
    for sweep in range(last + 1):
        if sweep in checkpoints:
            idx = states[:, window_cols] @ place
            counts[sweep] = np.bincount(idx, minlength=n_configs)
        if sweep == last:
            break
        u = np.stack([_uniforms(seed, rep, sweep, plan.n_sites) for rep in replicas])
        _sweep_inplace(states, plan, u)
    return counts


def convergence_experiment(
    U: Potential,
    side: int,
    initial_law,
    t_max: int,
    radius: int,
    sample_count: int,
    seed: int,
    target_source,
    checkpoints=None,
) -> ConvergenceTrace:
    """Track distance and entropy of window empirics against a target law.

    Runs ``sample_count`` independent replicas of the sequential heat-bath
    chain, and at each checkpoint sweeps compares the empirical law of the
    centered radius-``radius`` window (wrapped onto the torus) against the
    target marginal: the oscillation-budget distance with a delta-method
    standard error from the LP witness, and the per-site relative entropy
    with its own plug-in standard error.
    """
    d = U.dimension
    if 2 * radius + 1 > side:
        raise ValueError("window does not fit on the torus")
    if sample_count < 1:
        raise ValueError("need at least one replica")
    window = cube_window(radius, d)
    check_cap(U.alphabet.size, window.size)
    target = target_source.marginal(window)
    if checkpoints is None:
        checkpoints = list(range(t_max + 1))
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if any(t < 0 or t > t_max for t in checkpoints):
        raise ValueError("checkpoints must lie in [0, t_max]")

    mult = side ** np.arange(d - 1, -1, -1, dtype=np.int64)
    window_cols = np.array(
        [int(np.array([c % side for c in site]) @ mult) for site in window.sites],
        dtype=np.int64,
    )
    if len(set(window_cols.tolist())) != window.size:
        raise ValueError("window wraps onto itself on this torus")
    q = U.alphabet.size
    n_configs = q**window.size

    workers = worker_count()
    chunk_bounds = np.linspace(0, sample_count, min(workers, sample_count) + 1, dtype=int)
    jobs = [
        (U, side, np.asarray(initial_law, dtype=float), seed, range(int(a), int(b)),
         set(checkpoints), window_cols, n_configs)
        for a, b in zip(chunk_bounds[:-1], chunk_bounds[1:])
        if b > a
    ]
    if len(jobs) == 1:
        results = [_simulate_window_counts(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            results = list(pool.map(_simulate_window_counts, jobs))

    points = []
    R = sample_count
    for sweep in checkpoints:
        counts = sum(res[sweep] for res in results)
        empirical = empirical_measure(window, U.alphabet, counts)
        sol = distance_lp_measures(target, empirical, radius=radius)
        f = sol.witness.table
        p_hat = empirical.weights
        mean_f = float(p_hat @ f)
        dist_var = max(float(p_hat @ (f - mean_f) ** 2), 0.0)
        dist_se = float(np.sqrt(dist_var / R))
        s = relative_entropy_window(empirical, target)
        support = p_hat > 0
        g = np.zeros_like(p_hat)
        g[support] = np.log(p_hat[support]) - np.log(target.weights[support]) + 1.0
        mean_g = float(p_hat @ g)
        ent_var = max(float(p_hat @ (g - mean_g) ** 2), 0.0)
        ent_se = float(np.sqrt(ent_var / R)) / window.size
        points.append(
            ConvergencePoint(
                sweep=sweep,
                distance=float(sol.value),
                distance_se=dist_se,
                entropy_per_site=float(s) / window.size,
                entropy_se=ent_se,
            )
        )
    undersampled = bool(float(target.weights.min()) * R < 10.0)
    return ConvergenceTrace(
        points=points,
        radius=radius,
        side=side,
        sample_count=R,
        seed=seed,
        provenance=f"sampled|{target_source.provenance}",
        undersampled=undersampled,
    )


def write_convergence_csv(trace: ConvergenceTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,d_r,d_r_stderr,entropy_per_site,entropy_stderr,samples\n")
        for p in trace.points:
            fh.write(
                f"{p.sweep},{float(p.distance)!r},{float(p.distance_se)!r},"
                f"{float(p.entropy_per_site)!r},{float(p.entropy_se)!r},{trace.sample_count}\n"
            )
