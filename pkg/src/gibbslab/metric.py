"""Oscillation-constrained distance between measures, computed exactly by LP.

The distance at radius r is the largest mean gap a local function on the
centered cube can produce while keeping the 1-norm of its oscillation
vector at most one.  Per radius this is a finite linear program over the
function's table (gauge-fixed at the first configuration) plus one budget
variable per site; the optimizer is recovered as an explicit witness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .funcspace import DiameterRule, LocalFunction, function_to_json
from .lattice import Window, check_cap, cube_window, label_grid, strides
from .measures import WindowMeasure
from .simplex import simplex_max


@dataclass
class MetricLpSolution:
    radius: int | None
    value: float
    witness: LocalFunction
    budgets: dict
    iterations: int


def _pair_rows(n: int, q: int):
    """Rows (a_idx, b_idx, site_axis): f(a) - f(b) - t_axis <= 0 over all
    ordered configuration pairs differing at one site."""
    K = q**n
    stride = strides(n, q)
    rows_a, rows_b, rows_site = [], [], []
    base = np.arange(K, dtype=np.int64)
    labels = label_grid(n, q).astype(np.int64)
    for axis in range(n):
        ctx = base[labels[:, axis] == 0]  # one representative per context
        for a in range(q):
            for b in range(q):
                if a == b:
                    continue
                rows_a.append(ctx + a * stride[axis])
                rows_b.append(ctx + b * stride[axis])
                rows_site.append(np.full(ctx.size, axis, dtype=np.int64))
    if not rows_a:
        return (np.empty(0, np.int64),) * 3
    return np.concatenate(rows_a), np.concatenate(rows_b), np.concatenate(rows_site)


def distance_lp_measures(
    mu: WindowMeasure, nu: WindowMeasure, radius: int | None = None
) -> MetricLpSolution:
    """Exact oscillation-budget distance between two measures on one window."""
    if mu.window != nu.window or mu.alphabet != nu.alphabet:
        raise ValueError("measures must share a window and alphabet")
    window = mu.window
    q = mu.alphabet.size
    n = window.size
    K = check_cap(q, n)
    gap = nu.weights - mu.weights

    if n == 0:
        witness = LocalFunction(window, mu.alphabet, np.zeros(1))
        return MetricLpSolution(radius, 0.0, witness, {}, 0)

    # variables: f+ and f- for every configuration except the gauge (index 0),
    # then one oscillation budget per site
    n_f = K - 1
    n_vars = 2 * n_f + n
    rows_a, rows_b, rows_site = _pair_rows(n, q)
    # drop rows where both endpoints are the gauge configuration (impossible
    # since a != b) and build the dense constraint block
    m_rows = rows_a.size + 1
    A = np.zeros((m_rows, n_vars))
    b = np.zeros(m_rows)
    r_idx = np.arange(rows_a.size)

    def add_coeff(config_idx, sign):
        mask = config_idx > 0
        cols = config_idx[mask] - 1
        A[r_idx[mask], cols] += sign
        A[r_idx[mask], n_f + cols] -= sign

    add_coeff(rows_a, +1.0)
    add_coeff(rows_b, -1.0)
    A[r_idx, 2 * n_f + rows_site] = -1.0
    A[-1, 2 * n_f :] = 1.0  # budget row: sum of t_i <= 1
    b[-1] = 1.0

    c = np.zeros(n_vars)
    c[:n_f] = gap[1:]
    c[n_f : 2 * n_f] = -gap[1:]

    sol = simplex_max(c, A, b)
    table = np.zeros(K)
    table[1:] = sol.x[:n_f] - sol.x[n_f : 2 * n_f]
    witness = LocalFunction(window, mu.alphabet, table)
    budgets = {site: float(sol.x[2 * n_f + k]) for k, site in enumerate(window.sites)}

    # defensive validation of the certificate
    recomputed = float(gap @ table)
    if abs(recomputed - sol.objective) > 1e-9:
        raise RuntimeError("witness objective does not reproduce the LP value")
    osc = DiameterRule().oscillations(witness)
    if sum(budgets.values()) > 1.0 + 1e-9:
        raise RuntimeError("witness budget exceeds one")
    for site in window.sites:
        if osc.at(site) > budgets[site] + 1e-9:
            raise RuntimeError("witness violates its oscillation budget")

    value = max(sol.objective, 0.0)
    return MetricLpSolution(radius, float(value), witness, budgets, sol.iterations)


def distance_lp(mu_source, nu_source, radius: int) -> MetricLpSolution:
    """Distance between two marginal sources at cube radius ``radius``."""
    if mu_source.dimension != nu_source.dimension:
        raise ValueError("sources live in different dimensions")
    window = cube_window(radius, mu_source.dimension)
    mu = mu_source.marginal(window)
    nu = nu_source.marginal(window)
    return distance_lp_measures(mu, nu, radius=radius)


def wasserstein_hamming(mu: WindowMeasure, nu: WindowMeasure, max_states: int = 64) -> float:
    """Hamming-cost optimal transport distance on a shared window.

    Solved through the Kantorovich dual (potentials u, v with
    u(x) + v(y) <= hamming(x, y)), which keeps the right-hand side
    nonnegative.  Window sizes are capped by ``max_states`` configurations.
    """
    if mu.window != nu.window or mu.alphabet != nu.alphabet:
        raise ValueError("measures must share a window and alphabet")
    q = mu.alphabet.size
    n = mu.window.size
    K = q**n
    if K > max_states:
        raise ValueError(f"window has {K} configurations, above the cap {max_states}")
    if n == 0:
        return 0.0
    labels = label_grid(n, q).astype(np.int64)
    cost = (labels[:, None, :] != labels[None, :, :]).sum(axis=2).astype(float)

    # variables: u+ / u- for states 1..K-1 (u(0) gauge-fixed to 0), v+ / v- for all
    n_u = K - 1
    n_vars = 2 * n_u + 2 * K
    A = np.zeros((K * K, n_vars))
    b = cost.reshape(-1)
    xs = np.repeat(np.arange(K), K)
    ys = np.tile(np.arange(K), K)
    rows = np.arange(K * K)
    mask = xs > 0
    A[rows[mask], xs[mask] - 1] = 1.0
    A[rows[mask], n_u + xs[mask] - 1] = -1.0
    A[rows, 2 * n_u + ys] = 1.0
    A[rows, 2 * n_u + K + ys] = -1.0

    c = np.zeros(n_vars)
    c[:n_u] = mu.weights[1:]
    c[n_u : 2 * n_u] = -mu.weights[1:]
    c[2 * n_u : 2 * n_u + K] = nu.weights
    c[2 * n_u + K :] = -nu.weights

    sol = simplex_max(c, A, b)
    return float(max(sol.objective, 0.0))


def solution_to_json(sol: MetricLpSolution) -> dict:
    return {
        "radius": sol.radius,
        "value": float(sol.value),
        "witness_function": function_to_json(sol.witness),
        "budgets": {",".join(str(c) for c in site): value for site, value in sol.budgets.items()},
        "iterations": sol.iterations,
    }


def save_solution(sol: MetricLpSolution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_to_json(sol), fh, indent=2, sort_keys=True)
        fh.write("\n")
