"""Local functions on spin configurations and their oscillation vectors.

A local function is an exact table over the configurations of a finite
dependence window.  Its oscillation vector collects, per site i, the
worst change of the function between two configurations that differ only
at i; the plain ("diameter") rule takes raw differences, the
metric-quotient rule divides each pair difference by a single-spin
distance psi(a, b).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import (
    Configuration,
    SpinAlphabet,
    Window,
    check_cap,
    config_index,
    label_grid,
    minkowski_sum,
    restrict_configuration,
)


@dataclass
class LocalFunction:
    """Real-valued function of finitely many spins, stored as a full table.

    ``window`` is the declared dependence window; ``table`` holds one value
    per configuration of the window in mixed-radix order.  The function may
    be degenerate along some window axes (oscillation zero there), never
    outside the window.
    """

    window: Window
    alphabet: SpinAlphabet
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float).reshape(-1)
        expected = self.alphabet.size**self.window.size
        if table.size != expected:
            raise ValueError(f"table has {table.size} entries, window needs {expected}")
        if not np.all(np.isfinite(table)):
            raise ValueError("table entries must be finite")
        self.table = table

    def grid(self) -> np.ndarray:
        """Table reshaped to one axis per window site (window order)."""
        q = self.alphabet.size
        return self.table.reshape((q,) * self.window.size)

    def evaluate(self, config: Configuration) -> float:
        if not self.window.issubset(config.window):
            raise ValueError("configuration does not cover the dependence window")
        values = restrict_configuration(config, self.window).values
        return float(self.table[config_index(values, self.alphabet.size)])

    __call__ = evaluate

    def scale(self, factor: float) -> "LocalFunction":
        return LocalFunction(self.window, self.alphabet, factor * self.table)

    def offset(self, constant: float) -> "LocalFunction":
        return LocalFunction(self.window, self.alphabet, self.table + constant)

    def shift(self, vector) -> "LocalFunction":
        """Translate the dependence window by ``vector``; the table carries over."""
        return LocalFunction(self.window.shift(vector), self.alphabet, self.table)

    @classmethod
    def constant(cls, alphabet: SpinAlphabet, dimension: int, value: float) -> "LocalFunction":
        return cls(Window(dimension, ()), alphabet, np.array([float(value)]))

    @classmethod
    def from_callable(cls, alphabet: SpinAlphabet, window: Window, fn) -> "LocalFunction":
        check_cap(alphabet.size, window.size)
        rows = label_grid(window.size, alphabet.size)
        table = np.array([fn(tuple(int(v) for v in row)) for row in rows], dtype=float)
        return cls(window, alphabet, table)


@dataclass
class OscillationVector:
    """Per-site oscillations of a local function; finitely many nonzero."""

    entries: dict[tuple[int, ...], float]

    def at(self, site) -> float:
        return self.entries.get(tuple(site), 0.0)

    @property
    def norm1(self) -> float:
        return float(sum(abs(v) for v in self.entries.values()))

    @property
    def norm2_sq(self) -> float:
        return float(sum(v * v for v in self.entries.values()))

    @property
    def norm_inf(self) -> float:
        return float(max((abs(v) for v in self.entries.values()), default=0.0))

    def shifted(self, vector) -> "OscillationVector":
        v = tuple(int(c) for c in vector)
        return OscillationVector(
            {tuple(c + d for c, d in zip(site, v)): val for site, val in self.entries.items()}
        )


def _pair_quotient_entries(f: LocalFunction, quotient: np.ndarray | None) -> dict:
    """Worst pair difference (optionally / quotient) along each window axis."""
    q = f.alphabet.size
    n = f.window.size
    if n == 0:
        return {}
    grid = f.grid()
    if quotient is not None:
        a_idx, b_idx = np.nonzero(~np.eye(q, dtype=bool))
        div = quotient[a_idx, b_idx]
    entries: dict[tuple[int, ...], float] = {}
    for axis, site in enumerate(f.window.sites):
        ctx = np.moveaxis(grid, axis, -1).reshape(-1, q)
        if quotient is None:
            # sup over ordered pairs of f(a-context) - f(b-context) = max - min
            delta = float((ctx.max(axis=1) - ctx.min(axis=1)).max())
        else:
            diffs = ctx[:, a_idx] - ctx[:, b_idx]
            delta = float((diffs / div).max())
        entries[site] = max(delta, 0.0)
    return entries


class DiameterRule:
    """Oscillation as the diameter of value spread per site."""

    kind = "diameter"

    def oscillations(self, f: LocalFunction) -> OscillationVector:
        return OscillationVector(_pair_quotient_entries(f, None))


class MetricQuotientRule:
    """Oscillation as the worst difference quotient against a single-spin metric."""

    kind = "metric-quotient"

    def __init__(self, psi):
        psi = np.asarray(psi, dtype=float)
        if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
            raise ValueError("psi must be a square table")
        if not np.allclose(psi, psi.T, atol=0.0):
            raise ValueError("psi must be symmetric")
        if np.any(np.diag(psi) != 0.0):
            raise ValueError("psi must vanish exactly on the diagonal")
        off = psi[~np.eye(psi.shape[0], dtype=bool)]
        if not np.all(off > 0.0):
            raise ValueError("psi must be positive off the diagonal")
        self.psi = psi

    @classmethod
    def from_alphabet(cls, alphabet: SpinAlphabet) -> "MetricQuotientRule":
        if alphabet.metric is None:
            raise ValueError("alphabet carries no metric")
        return cls(np.array(alphabet.metric))

    def oscillations(self, f: LocalFunction) -> OscillationVector:
        if self.psi.shape[0] != f.alphabet.size:
            raise ValueError("psi size does not match the function's alphabet")
        return OscillationVector(_pair_quotient_entries(f, self.psi))


def oscillation_vector(f: LocalFunction, rule=None) -> OscillationVector:
    """Oscillation vector of ``f`` under ``rule`` (default: diameter rule)."""
    return (rule or DiameterRule()).oscillations(f)


def ergodic_sum(f: LocalFunction, translates: Window) -> LocalFunction:
    """Sum of translates of ``f`` over the given window of shift vectors.

    The result depends on the Minkowski sum ``translates + window(f)`` and
    is tabulated exactly (cap-checked).
    """
    if translates.dimension != f.window.dimension:
        raise ValueError("translate window has wrong dimension")
    out_window = minkowski_sum(translates, f.window)
    q = f.alphabet.size
    check_cap(q, out_window.size)
    big = np.zeros((q,) * out_window.size)
    for vec in translates.sites:
        positions = [out_window.index(tuple(c + d for c, d in zip(site, vec))) for site in f.window.sites]
        shape = [q if k in positions else 1 for k in range(out_window.size)]
        big += f.table.reshape(shape)
    return LocalFunction(out_window, f.alphabet, big.reshape(-1))


def local_approximation(f: LocalFunction, lam: Window, xi: Configuration) -> LocalFunction:
    """Freeze spins outside ``lam`` to the values of ``xi``.

    Returns the function of the spins in ``window(f) ∩ lam`` obtained by
    plugging xi's labels into the remaining coordinates.
    """
    if lam.dimension != f.window.dimension:
        raise ValueError("approximation window has wrong dimension")
    kept = f.window.intersection(lam)
    q = f.alphabet.size
    index = []
    for site in f.window.sites:
        if site in kept:
            index.append(slice(None))
        else:
            if site not in xi.window:
                raise ValueError(f"boundary condition missing site {site}")
            label = xi.value_at(site)
            if not 0 <= label < q:
                raise ValueError(f"label {label} outside alphabet of size {q}")
            index.append(label)
    sub = f.grid()[tuple(index)]
    return LocalFunction(kept, f.alphabet, np.ascontiguousarray(sub).reshape(-1))


def random_local_function(
    rng: np.random.Generator,
    alphabet: SpinAlphabet,
    dimension: int = 1,
    max_sites: int = 3,
    box=None,
    scale: float = 1.0,
    dead_axis_prob: float = 0.0,
) -> LocalFunction:
    """Draw a uniform-table local function on a small random window.

    Sites are sampled without replacement from the box ``[0, box_k]`` per
    axis.  With probability ``dead_axis_prob`` one axis is flattened so the
    function genuinely does not depend on it (dependence-window declared
    larger than the true dependence set).
    """
    if box is None:
        box = (2,) * dimension
    candidates = [s for s in np.ndindex(*(b + 1 for b in box))]
    n_sites = int(rng.integers(1, min(max_sites, len(candidates)) + 1))
    chosen = rng.choice(len(candidates), size=n_sites, replace=False)
    window = Window(dimension, tuple(tuple(int(c) for c in candidates[k]) for k in chosen))
    table = rng.uniform(-scale, scale, size=alphabet.size**window.size)
    f = LocalFunction(window, alphabet, table)
    if window.size > 0 and rng.random() < dead_axis_prob:
        axis = int(rng.integers(window.size))
        grid = f.grid().copy()
        flat = np.take(grid, 0, axis=axis)
        grid = np.broadcast_to(np.expand_dims(flat, axis), grid.shape)
        f = LocalFunction(window, alphabet, np.ascontiguousarray(grid).reshape(-1))
    return f


# -- rule axioms --------------------------------------------------------------

@dataclass
class AxiomResult:
    name: str
    passed: bool
    witness: str | None = None


@dataclass
class AxiomCheckReport:
    results: tuple[AxiomResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def result(self, name: str) -> AxiomResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def _actual_dependence(f: LocalFunction, axis: int) -> bool:
    grid = f.grid()
    first = np.take(grid, 0, axis=axis)
    return bool(np.any(grid != np.expand_dims(first, axis)))


def axiom_check(
    rule,
    sample_functions,
    rng: np.random.Generator | None = None,
    betas=(-2.0, -1.0, 0.5, 3.0),
    tolerance: float = 1e-9,
) -> AxiomCheckReport:
    """Exercise an oscillation rule against the required structure.

    Checks, over the supplied sample functions: translation covariance of
    the oscillation vector, zero-oscillation exactly on coordinates the
    function does not depend on, entrywise monotonicity of oscillations
    under freezing spins outside nested windows, and |beta|-homogeneity
    under scaling.  Any custom rule should pass this before use.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    samples = list(sample_functions)
    if not samples:
        raise ValueError("need at least one sample function")

    translation = AxiomResult("translation-invariance", True)
    for f in samples:
        base = rule.oscillations(f)
        d = f.window.dimension
        for vec in [np.eye(d, dtype=int)[0], rng.integers(-3, 4, size=d)]:
            vec = tuple(int(c) for c in np.atleast_1d(vec))
            shifted = rule.oscillations(f.shift(vec))
            expected = base.shifted(vec)
            sites = set(shifted.entries) | set(expected.entries)
            worst = max((abs(shifted.at(s) - expected.at(s)) for s in sites), default=0.0)
            if worst > tolerance:
                translation = AxiomResult(
                    "translation-invariance", False, f"shift {vec}: mismatch {worst:.3g}"
                )

    nondegeneracy = AxiomResult("non-degeneracy", True)
    for f in samples:
        variants = [f]
        for axis in range(f.window.size):
            grid = f.grid()
            flat = np.broadcast_to(np.expand_dims(np.take(grid, 0, axis=axis), axis), grid.shape)
            variants.append(LocalFunction(f.window, f.alphabet, np.ascontiguousarray(flat).reshape(-1)))
        for g in variants:
            osc = rule.oscillations(g)
            for axis, site in enumerate(g.window.sites):
                depends = _actual_dependence(g, axis)
                delta = osc.at(site)
                if depends and delta <= 0.0:
                    nondegeneracy = AxiomResult(
                        "non-degeneracy", False, f"site {site}: depends but oscillation {delta}"
                    )
                if not depends and delta > tolerance:
                    nondegeneracy = AxiomResult(
                        "non-degeneracy", False, f"site {site}: dead axis but oscillation {delta}"
                    )

    monotone = AxiomResult("local-approximation-monotonicity", True)
    for f in samples:
        if f.window.size == 0:
            continue
        xi = Configuration(f.window, tuple(rng.integers(f.alphabet.size, size=f.window.size)))
        mask = rng.random(f.window.size) < 0.5
        inner = Window(f.window.dimension, tuple(s for s, keep in zip(f.window.sites, mask) if keep))
        grow = rng.random(f.window.size) < 0.5
        outer_sites = {s for s, keep in zip(f.window.sites, mask) if keep}
        outer_sites |= {s for s, keep in zip(f.window.sites, grow) if keep}
        outer = Window(f.window.dimension, tuple(outer_sites))
        fa = local_approximation(f, inner, xi)
        fb = local_approximation(f, outer, xi)
        va, vb, vf = rule.oscillations(fa), rule.oscillations(fb), rule.oscillations(f)
        for site in f.window.sites:
            if not (va.at(site) <= vb.at(site) + tolerance and vb.at(site) <= vf.at(site) + tolerance):
                monotone = AxiomResult(
                    "local-approximation-monotonicity",
                    False,
                    f"site {site}: {va.at(site)} / {vb.at(site)} / {vf.at(site)}",
                )

    homogeneity = AxiomResult("degree-one-homogeneity", True)
    for f in samples:
        base = rule.oscillations(f)
        for beta in betas:
            scaled = rule.oscillations(f.scale(beta))
            for site in f.window.sites:
                want = abs(beta) * base.at(site)
                tol = tolerance * max(1.0, abs(want))
                if abs(scaled.at(site) - want) > tol:
                    homogeneity = AxiomResult(
                        "degree-one-homogeneity",
                        False,
                        f"beta {beta}, site {site}: {scaled.at(site)} vs {want}",
                    )

    return AxiomCheckReport((translation, nondegeneracy, monotone, homogeneity))


# -- serialization -------------------------------------------------------------

def function_to_json(f: LocalFunction) -> dict:
    """JSON-ready dict: dimension, window sites, and the value table."""
    return {
        "dimension": f.window.dimension,
        "sites": [list(s) for s in f.window.sites],
        "values": [float(v) for v in f.table],
    }


def function_from_json(obj: dict, alphabet_size: int | None = None) -> LocalFunction:
    """Rebuild a local function; the alphabet size is inferred from the table
    when the window is nonempty."""
    dimension = int(obj["dimension"])
    sites = tuple(tuple(int(c) for c in s) for s in obj["sites"])
    window = Window(dimension, sites)
    values = np.asarray(obj["values"], dtype=float)
    if window.size == 0:
        q = alphabet_size or 2
    elif alphabet_size is not None:
        q = alphabet_size
    else:
        q = round(values.size ** (1.0 / window.size))
        if q**window.size != values.size:
            raise ValueError("table size is not a perfect power of the window size")
    return LocalFunction(window, SpinAlphabet(q), values)


def save_function(f: LocalFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(function_to_json(f), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_function(path, alphabet_size: int | None = None) -> LocalFunction:
    with open(path, "r", encoding="utf-8") as fh:
        return function_from_json(json.load(fh), alphabet_size)
