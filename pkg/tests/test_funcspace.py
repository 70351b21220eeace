"""Local functions, oscillation rules, translate sums, and the rule axioms.

The oracle here is deliberately dumb: enumerate every ordered pair of
configurations that differ at exactly one site and take the max of the
(possibly metric-quotiented) differences.  The library computes the same
numbers with reshape tricks, so agreement is meaningful.
"""

import itertools

import numpy as np
import pytest

from gibbslab.funcspace import (
    DiameterRule,
    LocalFunction,
    MetricQuotientRule,
    axiom_check,
    ergodic_sum,
    function_from_json,
    function_to_json,
    load_function,
    local_approximation,
    oscillation_vector,
    random_local_function,
    save_function,
)
from gibbslab.lattice import (
    Configuration,
    SpinAlphabet,
    Window,
    config_index,
    cube_window,
)

rng = np.random.default_rng(20260819)


def brute_oscillation(f, psi=None):
    """Max over single-site-differing pairs, straight from the definition."""
    n, q = f.window.size, f.alphabet.size
    out = {}
    for axis, site in enumerate(f.window.sites):
        best = 0.0
        for vals in itertools.product(range(q), repeat=n):
            va = f.table[config_index(vals, q)]
            for other in range(q):
                if other == vals[axis]:
                    continue
                changed = list(vals)
                changed[axis] = other
                vb = f.table[config_index(tuple(changed), q)]
                gap = abs(va - vb)
                if psi is not None:
                    gap = gap / psi[vals[axis], other]
                best = max(best, gap)
        out[site] = best
    return out


def random_function(n_sites=2, q=2, dim=1):
    return random_local_function(rng, SpinAlphabet(q), dimension=dim, max_sites=n_sites)


# ---------------------------------------------------------------- evaluation

def test_table_lookup_matches_callable():
    w = Window(1, ((0,), (1,)))
    f = LocalFunction.from_callable(SpinAlphabet(2), w, lambda v: 3.0 * v[0] - v[1])
    sigma = Configuration(w, (1, 1))
    assert f(sigma) == 2.0
    assert f.evaluate(Configuration(w, (0, 1))) == -1.0


def test_evaluation_ignores_spectator_sites():
    w = Window(1, ((0,),))
    f = LocalFunction.from_callable(SpinAlphabet(2), w, lambda v: float(v[0]))
    big = Configuration(Window(1, ((-1,), (0,), (1,))), (1, 1, 0))
    assert f(big) == 1.0


def test_constant_function_has_empty_window():
    f = LocalFunction.constant(SpinAlphabet(2), 1, 7.5)
    assert f.window.size == 0
    assert f(Configuration(Window(1, ((3,),)), (0,))) == 7.5


def test_scale_and_offset_act_on_the_table():
    f = random_function()
    g = f.scale(-2.0).offset(1.0)
    assert np.allclose(g.table, -2.0 * f.table + 1.0)


def test_shift_relabels_the_window():
    f = random_function(n_sites=2)
    g = f.shift((5,))
    assert g.window.sites == tuple((s[0] + 5,) for s in f.window.sites)
    assert np.array_equal(g.table, f.table)


# ---------------------------------------------------------------- oscillation

def test_diameter_rule_matches_brute_force_binary():
    for _ in range(25):
        f = random_function(n_sites=3, q=2)
        vec = oscillation_vector(f)
        oracle = brute_oscillation(f)
        for site, val in oracle.items():
            assert vec.at(site) == pytest.approx(val, abs=1e-12)


def test_diameter_rule_matches_brute_force_ternary():
    for _ in range(10):
        f = random_function(n_sites=2, q=3)
        oracle = brute_oscillation(f)
        vec = oscillation_vector(f)
        for site, val in oracle.items():
            assert vec.at(site) == pytest.approx(val, abs=1e-12)


def test_metric_quotient_matches_brute_force():
    psi = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    rule = MetricQuotientRule(psi)
    for _ in range(10):
        f = random_function(n_sites=2, q=3)
        oracle = brute_oscillation(f, psi=psi)
        vec = oscillation_vector(f, rule)
        for site, val in oracle.items():
            assert vec.at(site) == pytest.approx(val, abs=1e-12)


def test_discrete_metric_quotient_equals_diameter():
    alph = SpinAlphabet(3, metric=1.0 - np.eye(3))
    rule = MetricQuotientRule.from_alphabet(alph)
    for _ in range(10):
        f = random_function(n_sites=2, q=3)
        a = oscillation_vector(f)
        b = oscillation_vector(f, rule)
        for site in f.window.sites:
            assert a.at(site) == pytest.approx(b.at(site), abs=1e-12)


def test_oscillation_zero_for_dead_coordinate():
    w = Window(1, ((0,), (1,)))
    f = LocalFunction.from_callable(SpinAlphabet(2), w, lambda v: float(v[0]))
    vec = oscillation_vector(f)
    assert vec.at((0,)) == 1.0
    assert vec.at((1,)) == 0.0


def test_oscillation_norms():
    w = Window(1, ((0,), (1,)))
    f = LocalFunction.from_callable(SpinAlphabet(2), w, lambda v: 3.0 * v[0] + 4.0 * v[1])
    vec = oscillation_vector(f)
    assert vec.norm1 == pytest.approx(7.0)
    assert vec.norm2_sq == pytest.approx(25.0)
    assert vec.norm_inf == pytest.approx(4.0)


def test_oscillation_shift_covariance():
    f = random_function(n_sites=2)
    base = oscillation_vector(f)
    shifted = oscillation_vector(f.shift((4,)))
    for site in f.window.sites:
        assert shifted.at((site[0] + 4,)) == pytest.approx(base.at(site))


def test_quotient_rule_rejects_bad_metric():
    with pytest.raises(ValueError):
        MetricQuotientRule(np.array([[0.0, 0.0], [0.0, 0.0]]))  # zero off-diagonal
    with pytest.raises(ValueError):
        MetricQuotientRule(np.array([[1.0, 1.0], [1.0, 0.0]]))  # nonzero diagonal


# ---------------------------------------------------------------- translate sums

def test_ergodic_sum_matches_shifted_evaluations():
    f = random_function(n_sites=2)
    lam = cube_window(1, 1)
    g = ergodic_sum(f, lam)
    shifted = [f.shift(v) for v in lam.sites]
    q = f.alphabet.size
    from gibbslab.lattice import all_configurations

    for sigma in all_configurations(g.window, q):
        direct = g(sigma)
        oracle = sum(h(sigma) for h in shifted)
        assert direct == pytest.approx(oracle, abs=1e-12)


def test_ergodic_sum_single_translate_is_identity():
    f = random_function(n_sites=2)
    g = ergodic_sum(f, cube_window(0, 1))
    assert g.window == f.window
    assert np.allclose(g.table, f.table)


def test_ergodic_sum_of_single_site_function():
    # sum of sigma_i over i in {-1,0,1} evaluated at (1,0,1) is 2
    w = Window(1, ((0,),))
    f = LocalFunction.from_callable(SpinAlphabet(2), w, lambda v: float(v[0]))
    g = ergodic_sum(f, cube_window(1, 1))
    sigma = Configuration(cube_window(1, 1), (1, 0, 1))
    assert g(sigma) == 2.0


# ---------------------------------------------------------------- approximation

def test_local_approximation_freezes_outside_coordinates():
    f = random_function(n_sites=3)
    lam = Window(1, (f.window.sites[0],))
    xi = Configuration(f.window, tuple(rng.integers(0, 2, f.window.size)))
    g = local_approximation(f, lam, xi)
    assert g.window.issubset(lam)
    # g at sigma equals f at sigma patched with xi off lam
    from gibbslab.lattice import all_configurations, patch

    for sigma in all_configurations(g.window, 2):
        merged = patch(sigma, xi, window=f.window)
        assert g(sigma) == pytest.approx(f(merged), abs=1e-12)


def test_local_approximation_oscillations_never_grow():
    for _ in range(10):
        f = random_function(n_sites=3)
        xi = Configuration(f.window, tuple(rng.integers(0, 2, f.window.size)))
        full = oscillation_vector(f)
        for keep in (1, 2):
            lam = Window(1, f.window.sites[:keep])
            g = local_approximation(f, lam, xi)
            approx = oscillation_vector(g)
            for site in g.window.sites:
                assert approx.at(site) <= full.at(site) + 1e-12


def test_nested_approximations_are_monotone():
    f = random_function(n_sites=3)
    xi = Configuration(f.window, tuple(rng.integers(0, 2, f.window.size)))
    small = local_approximation(f, Window(1, f.window.sites[:1]), xi)
    large = local_approximation(f, Window(1, f.window.sites[:2]), xi)
    vec_small = oscillation_vector(small)
    vec_large = oscillation_vector(large)
    for site in small.window.sites:
        assert vec_small.at(site) <= vec_large.at(site) + 1e-12


# ---------------------------------------------------------------- axioms

def test_both_rules_pass_the_axioms():
    fams = [random_function(n_sites=2, q=2) for _ in range(15)]
    check_rng = np.random.default_rng(7)
    report = axiom_check(DiameterRule(), fams, rng=check_rng)
    assert report.passed, [r for r in report.results if not r.passed]
    report2 = axiom_check(
        MetricQuotientRule(1.0 - np.eye(2)), fams, rng=np.random.default_rng(7)
    )
    assert report2.passed


def test_zero_rule_fails_non_degeneracy():
    class ZeroRule:
        def oscillations(self, f):
            from gibbslab.funcspace import OscillationVector

            return OscillationVector({site: 0.0 for site in f.window.sites})

    fams = [random_function(n_sites=2) for _ in range(5)]
    report = axiom_check(ZeroRule(), fams, rng=np.random.default_rng(3))
    failed = {r.name for r in report.results if not r.passed}
    assert "non-degeneracy" in failed


def test_squared_rule_fails_homogeneity():
    class SquaredRule:
        def oscillations(self, f):
            from gibbslab.funcspace import OscillationVector

            base = oscillation_vector(f)
            return OscillationVector({s: v * v for s, v in base.entries.items()})

    fams = [random_function(n_sites=2) for _ in range(5)]
    report = axiom_check(SquaredRule(), fams, rng=np.random.default_rng(3))
    failed = {r.name for r in report.results if not r.passed}
    assert "degree-one-homogeneity" in failed


# ---------------------------------------------------------------- serialization

def test_json_round_trip(tmp_path):
    f = random_function(n_sites=3, q=3)
    blob = function_to_json(f)
    g = function_from_json(blob)
    assert g.window == f.window
    assert np.array_equal(g.table, f.table)
    path = tmp_path / "f.json"
    save_function(f, path)
    h = load_function(path)
    assert np.array_equal(h.table, f.table)


def test_random_function_respects_bounds():
    # box entries are inclusive per-axis maxima: box=(1,1) is the 2x2 square
    for _ in range(20):
        f = random_local_function(rng, SpinAlphabet(2), dimension=2, max_sites=3, box=(1, 1))
        assert 1 <= f.window.size <= 3
        for site in f.window.sites:
            assert 0 <= site[0] <= 1 and 0 <= site[1] <= 1
