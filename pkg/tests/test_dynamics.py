"""Heat-bath sweeps on tori: reversibility, stationarity, and convergence.

Stochastic checks run at fixed seeds, so they are deterministic regressions;
thresholds are 3-sigma with the relevant multinomial error model.
"""

import numpy as np
import pytest

from gibbslab.dynamics import (
    TorusState,
    _sweep_inplace,
    _uniforms,
    _UpdatePlan,
    convergence_experiment,
    detailed_balance_check,
    heat_bath_sweep,
    initial_state,
    max_balance_violation,
    sample_torus_gibbs,
    site_conditional,
    write_convergence_csv,
)
from gibbslab.lattice import Configuration, SpinAlphabet, Window, label_grid
from gibbslab.measures import (
    IsingChainSource,
    Potential,
    ising_potential,
    finite_volume_gibbs,
    torus_gibbs,
)


def zero_potential():
    return Potential(SpinAlphabet(2), 1, ())


# ---------------------------------------------------------------- single sweeps

def test_sweep_is_deterministic_in_the_seed():
    U = ising_potential(0.5, 0.1)
    a = initial_state(U, 8, [0.5, 0.5], seed=9, replica=3)
    b = initial_state(U, 8, [0.5, 0.5], seed=9, replica=3)
    assert np.array_equal(a.spins, b.spins)
    for _ in range(5):
        a = heat_bath_sweep(a, U)
        b = heat_bath_sweep(b, U)
    assert np.array_equal(a.spins, b.spins)
    assert a.sweeps == 5


def test_different_replicas_decorrelate():
    U = ising_potential(0.5, 0.1)
    a = initial_state(U, 16, [0.5, 0.5], seed=9, replica=0)
    b = initial_state(U, 16, [0.5, 0.5], seed=9, replica=1)
    assert not np.array_equal(a.spins, b.spins)


def test_free_spins_are_uniform_after_one_sweep():
    """With no interaction one sweep produces iid fair labels; joint chi-square."""
    U = zero_potential()
    L, reps = 4, 4000
    counts = np.zeros(16, dtype=int)
    for rep in range(reps):
        state = initial_state(U, L, [0.9, 0.1], seed=101, replica=rep)
        state = heat_bath_sweep(state, U)
        idx = int("".join(str(int(s)) for s in state.spins.reshape(-1)), 2)
        counts[idx] += 1
    expected = reps / 16.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # df = 15: mean 15, sd sqrt(30); stay within 3 sigma
    assert chi2 <= 15.0 + 3.0 * np.sqrt(30.0)


def test_initial_law_must_be_a_probability_vector():
    U = zero_potential()
    with pytest.raises(ValueError):
        initial_state(U, 4, [0.7, 0.7], seed=0)


def test_interaction_range_must_fit_on_the_torus():
    U = ising_potential(0.4, 0.0)
    state = TorusState(side=2, spins=np.zeros(2, dtype=np.int64), sweeps=0, seed=0, replica=0)
    with pytest.raises(ValueError):
        heat_bath_sweep(state, U)


def test_site_conditional_matches_the_gibbs_oracle():
    """Resampling law at a site = one-site finite-volume measure given neighbors."""
    U = ising_potential(0.4, 0.1)
    state = initial_state(U, 5, [0.5, 0.5], seed=4)
    spins = state.spins.reshape(-1)
    for site in range(5):
        got = site_conditional(U, state, (site,))
        lam = Window(1, ((site,),))
        ring = Window(1, ((site - 1,), (site + 1,)))
        xi = Configuration(ring, (int(spins[(site - 1) % 5]), int(spins[(site + 1) % 5])))
        want = finite_volume_gibbs(U, lam, xi).weights
        assert np.allclose(got, want, atol=1e-13)


# ---------------------------------------------------------------- reversibility

def test_zero_potential_balance_is_exact():
    rep = detailed_balance_check(zero_potential(), 3)
    assert rep.max_violation <= 1e-15
    assert rep.passed


def test_ising_chain_balance_at_desk_scale():
    rep = detailed_balance_check(ising_potential(0.5, 0.2), 3)
    assert rep.max_violation <= 1e-12
    assert rep.passed
    assert rep.tolerance == 1e-12


def test_perturbed_kernel_fails_balance_with_witness():
    U = ising_potential(0.5, 0.2)
    side, q = 3, 2
    pi = torus_gibbs(U, side)
    plan = _UpdatePlan(U, side)
    states = label_grid(3, q).astype(np.int64)
    site_probs = [plan.conditionals(states, s) for s in range(3)]
    bad = [p.copy() for p in site_probs]
    bad[1][:, 0] = 0.9  # no longer the heat-bath law at site 1
    bad[1][:, 1] = 0.1
    worst, witness = max_balance_violation(pi, bad, q)
    assert worst > 1e-3
    assert witness is not None and witness[0] == 1


# ---------------------------------------------------------------- stationarity

def test_sweeps_preserve_the_torus_measure():
    """Start exactly stationary, sweep 100 times, compare window counts at 3 sigma."""
    U = ising_potential(0.5, 0.2)
    side, reps, q = 6, 3000, 2
    states = sample_torus_gibbs(U, side, reps, seed=77)
    plan = _UpdatePlan(U, side)
    for sweep in range(100):
        u = np.stack([_uniforms(77, rep, sweep, side) for rep in range(reps)])
        _sweep_inplace(states, plan, u)
    pi = torus_gibbs(U, side)
    window = Window(1, ((0,), (1,), (2,)))
    target = pi.marginal(window).weights
    idx = states[:, 0] * 4 + states[:, 1] * 2 + states[:, 2]
    counts = np.bincount(idx, minlength=8)
    for k in range(8):
        se = np.sqrt(target[k] * (1 - target[k]) / reps)
        assert abs(counts[k] / reps - target[k]) <= 3 * se + 1e-9


def test_magnetization_relaxes_to_the_torus_value():
    """From a biased start, 60 sweeps reach the exact single-site law (3 sigma)."""
    U = ising_potential(0.4, 0.1)
    side, reps = 8, 2000
    states = np.stack(
        [initial_state(U, side, [0.8, 0.2], seed=55, replica=rep).spins for rep in range(reps)]
    )
    plan = _UpdatePlan(U, side)
    for sweep in range(60):
        u = np.stack([_uniforms(55, rep, sweep, side) for rep in range(reps)])
        _sweep_inplace(states, plan, u)
    pi = torus_gibbs(U, side)
    p_up = pi.marginal(Window(1, ((0,),))).weights[1]
    p_hat = states[:, 0].mean()
    se = np.sqrt(p_up * (1 - p_up) / reps)
    assert abs(p_hat - p_up) <= 3 * se


# ---------------------------------------------------------------- convergence traces

def test_stationary_start_reads_as_zero_distance():
    U = zero_potential()
    trace = convergence_experiment(
        U, 16, [0.5, 0.5], t_max=2, radius=1, sample_count=1500, seed=13,
        target_source=IsingChainSource(0.0, 0.0),
    )
    first = trace.points[0]
    assert first.distance <= 3 * first.distance_se
    assert all(p.distance_se >= 0 and p.entropy_se >= 0 for p in trace.points)


def test_biased_start_contracts_toward_the_chain():
    U = ising_potential(0.4, 0.0)
    trace = convergence_experiment(
        U, 32, [0.85, 0.15], t_max=8, radius=1, sample_count=600, seed=19,
        target_source=IsingChainSource(0.4, 0.0), checkpoints=[0, 2, 8],
    )
    first, last = trace.points[0], trace.points[-1]
    assert last.distance < first.distance
    assert last.entropy_per_site < first.entropy_per_site
    sweeps = [p.sweep for p in trace.points]
    assert sweeps == sorted(sweeps)


def test_traces_are_reproducible_across_worker_counts(monkeypatch):
    U = ising_potential(0.3, 0.0)
    kwargs = dict(
        side=16, initial_law=[0.5, 0.5], t_max=2, radius=1,
        sample_count=120, seed=31, target_source=IsingChainSource(0.3, 0.0),
    )
    monkeypatch.setenv("GIBBSLAB_THREADS", "1")
    a = convergence_experiment(U, **kwargs)
    monkeypatch.setenv("GIBBSLAB_THREADS", "3")
    b = convergence_experiment(U, **kwargs)
    for pa, pb in zip(a.points, b.points):
        assert pa.distance == pb.distance
        assert pa.entropy_per_site == pb.entropy_per_site


def test_thin_sampling_sets_the_undersampled_flag():
    U = ising_potential(0.3, 0.0)
    trace = convergence_experiment(
        U, 8, [0.5, 0.5], t_max=1, radius=1, sample_count=20, seed=3,
        target_source=IsingChainSource(0.3, 0.0),
    )
    assert trace.undersampled
    big = convergence_experiment(
        U, 8, [0.5, 0.5], t_max=1, radius=0, sample_count=200, seed=3,
        target_source=IsingChainSource(0.3, 0.0),
    )
    assert not big.undersampled


def test_window_must_fit_on_the_torus():
    U = ising_potential(0.3, 0.0)
    with pytest.raises(ValueError):
        convergence_experiment(
            U, 4, [0.5, 0.5], t_max=1, radius=2, sample_count=10, seed=0,
            target_source=IsingChainSource(0.3, 0.0),
        )


def test_convergence_csv_schema(tmp_path):
    U = ising_potential(0.3, 0.0)
    trace = convergence_experiment(
        U, 8, [0.5, 0.5], t_max=1, radius=0, sample_count=50, seed=5,
        target_source=IsingChainSource(0.3, 0.0),
    )
    path = tmp_path / "trace.csv"
    write_convergence_csv(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,d_r,d_r_stderr,entropy_per_site,entropy_stderr,samples"
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "0"
    assert lines[1].endswith(",50")
