"""Probability measures on finite windows and finite-volume Gibbs states.

Covers exact window measures (marginals, conditioning, expectations),
finite-range potentials with fixed/free/periodic boundaries, transfer-matrix
marginals for the nearest-neighbour chain, decimation of the chain, and
marginal sources that hand out exact window marginals of an infinite-volume
or torus target.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .funcspace import LocalFunction
from .lattice import (
    Configuration,
    SpinAlphabet,
    Window,
    box_window,
    check_cap,
    config_index,
    label_grid,
    restrict_configuration,
)

SPIN_VALUES = np.array([-1.0, 1.0])  # label 0 -> spin -1, label 1 -> spin +1


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


@dataclass
class WindowMeasure:
    """Probability weights over all configurations of a finite window."""

    window: Window
    alphabet: SpinAlphabet
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        expected = self.alphabet.size**self.window.size
        if w.size != expected:
            raise ValueError(f"weights have {w.size} entries, window needs {expected}")
        if np.any(w < -1e-12):
            raise ValueError("weights must be nonnegative")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, not 1")
        self.weights = w / total

    def grid(self) -> np.ndarray:
        q = self.alphabet.size
        return self.weights.reshape((q,) * self.window.size)

    def probability(self, config: Configuration) -> float:
        values = restrict_configuration(config, self.window).values
        return float(self.weights[config_index(values, self.alphabet.size)])

    def marginal(self, sub: Window) -> "WindowMeasure":
        if not sub.issubset(self.window):
            raise ValueError("marginal window is not contained in the measure's window")
        keep = {self.window.index(s) for s in sub.sites}
        drop = tuple(k for k in range(self.window.size) if k not in keep)
        w = self.grid().sum(axis=drop) if drop else self.grid()
        return WindowMeasure(sub, self.alphabet, w.reshape(-1))

    def condition(self, fixed: Configuration) -> "WindowMeasure":
        """Condition on the event that the spins of ``fixed`` take its values."""
        if not fixed.window.issubset(self.window):
            raise ValueError("conditioning sites are not in the measure's window")
        q = self.alphabet.size
        index = []
        for site in self.window.sites:
            if site in fixed.window:
                label = fixed.value_at(site)
                if not 0 <= label < q:
                    raise ValueError(f"label {label} outside alphabet of size {q}")
                index.append(label)
            else:
                index.append(slice(None))
        sub = self.grid()[tuple(index)]
        mass = float(np.sum(sub))
        if mass <= 0.0:
            raise ValueError("conditioning event has zero probability")
        remaining = self.window.difference(fixed.window)
        return WindowMeasure(remaining, self.alphabet, np.ascontiguousarray(sub).reshape(-1) / mass)

    def total_variation(self, other: "WindowMeasure") -> float:
        if other.window != self.window or other.alphabet != self.alphabet:
            raise ValueError("total variation needs measures on the same window")
        return 0.5 * float(np.abs(self.weights - other.weights).sum())


def expectation(mu: WindowMeasure, f: LocalFunction) -> float:
    """Exact mean of a local function whose window sits inside the measure's."""
    if f.alphabet != mu.alphabet:
        raise ValueError("alphabet mismatch")
    if not f.window.issubset(mu.window):
        raise ValueError("function window is not contained in the measure's window")
    return float(mu.marginal(f.window).weights @ f.table)


def variance(mu: WindowMeasure, f: LocalFunction) -> float:
    w = mu.marginal(f.window).weights
    mean = float(w @ f.table)
    return float(w @ (f.table - mean) ** 2)


def product_measure(alphabet: SpinAlphabet, window: Window, single_site) -> WindowMeasure:
    """I.i.d. measure with the given single-spin law on every site."""
    p = np.asarray(single_site, dtype=float)
    if p.size != alphabet.size:
        raise ValueError("single-site law has wrong length")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("single-site law must be a probability vector")
    check_cap(alphabet.size, window.size)
    w = np.array(1.0)
    for _ in range(window.size):
        w = np.multiply.outer(w, p)
    return WindowMeasure(window, alphabet, w.reshape(-1))


def bernoulli_product(p: float, window: Window) -> WindowMeasure:
    """Product of Bernoulli(p) spins: label 1 with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return product_measure(SpinAlphabet(2), window, np.array([1.0 - p, p]))


def empirical_measure(window: Window, alphabet: SpinAlphabet, counts) -> WindowMeasure:
    counts = np.asarray(counts, dtype=float).reshape(-1)
    total = counts.sum()
    if total <= 0:
        raise ValueError("empirical measure needs at least one sample")
    return WindowMeasure(window, alphabet, counts / total)


# -- potentials ----------------------------------------------------------------

@dataclass
class PotentialTerm:
    """One interaction: a shape containing the origin plus its value table."""

    shape: Window
    table: np.ndarray

    def __post_init__(self):
        if (0,) * self.shape.dimension not in self.shape:
            raise ValueError("term shape must contain the origin")
        self.table = np.asarray(self.table, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.table)):
            raise ValueError("term table must be finite")


@dataclass
class Potential:
    """Finite-range potential: one term per shape, translated over the lattice."""

    alphabet: SpinAlphabet
    dimension: int
    terms: tuple[PotentialTerm, ...]
    a_priori: np.ndarray | None = None

    def __post_init__(self):
        self.terms = tuple(self.terms)
        shapes = set()
        for term in self.terms:
            if term.shape.dimension != self.dimension:
                raise ValueError("term shape has wrong dimension")
            if term.table.size != self.alphabet.size**term.shape.size:
                raise ValueError("term table size does not match its shape")
            if term.shape.sites in shapes:
                raise ValueError("duplicate term shape")
            shapes.add(term.shape.sites)
        if self.a_priori is None:
            self.a_priori = np.full(self.alphabet.size, 1.0 / self.alphabet.size)
        else:
            lam = np.asarray(self.a_priori, dtype=float)
            if lam.size != self.alphabet.size:
                raise ValueError("a-priori law has wrong length")
            if np.any(lam <= 0) or abs(lam.sum() - 1.0) > 1e-9:
                raise ValueError("a-priori law must be strictly positive and sum to 1")
            self.a_priori = lam / lam.sum()

    @property
    def interaction_range(self) -> int:
        """Largest Chebyshev distance between two sites of one shape."""
        worst = 0
        for term in self.terms:
            for a in term.shape.sites:
                for b in term.shape.sites:
                    worst = max(worst, max(abs(x - y) for x, y in zip(a, b)))
        return worst


def ising_potential(coupling: float, external_field: float) -> Potential:
    """Nearest-neighbour chain with -J s*s' pair energy and -h s field energy."""
    j, h = float(coupling), float(external_field)
    pair = PotentialTerm(
        Window(1, ((0,), (1,))),
        np.array([-j * a * b for a in SPIN_VALUES for b in SPIN_VALUES]),
    )
    site = PotentialTerm(Window(1, ((0,),)), np.array([-h * a for a in SPIN_VALUES]))
    return Potential(SpinAlphabet(2), 1, (pair, site))


def ising2d_potential(coupling: float, external_field: float) -> Potential:
    j, h = float(coupling), float(external_field)
    pair_table = np.array([-j * a * b for a in SPIN_VALUES for b in SPIN_VALUES])
    right = PotentialTerm(Window(2, ((0, 0), (0, 1))), pair_table)
    down = PotentialTerm(Window(2, ((0, 0), (1, 0))), pair_table)
    site = PotentialTerm(Window(2, ((0, 0),)), np.array([-h * a for a in SPIN_VALUES]))
    return Potential(SpinAlphabet(2), 2, (right, down, site))


def _term_offsets(term: PotentialTerm, lam: Window) -> list:
    """Shift vectors v with (shape + v) meeting lam, in deterministic order."""
    offsets = {
        tuple(a - b for a, b in zip(site, anchor))
        for site in lam.sites
        for anchor in term.shape.sites
    }
    return sorted(offsets)


def hamiltonian(
    U: Potential,
    lam: Window,
    sigma: Configuration,
    xi: Configuration | None = None,
    boundary: str = "fixed",
) -> float:
    """Energy of sigma in lam: sum of U over every translated shape meeting lam.

    ``boundary="fixed"`` reads outside spins from xi (error when missing);
    ``boundary="free"`` drops terms that stick out of lam.
    """
    if boundary not in ("fixed", "free"):
        raise ValueError("boundary must be 'fixed' or 'free'")
    if sigma.window != lam:
        raise ValueError("sigma must live exactly on lam")
    q = U.alphabet.size
    if any(not 0 <= v < q for v in sigma.values):
        raise ValueError("sigma labels outside alphabet")
    total = 0.0
    for term in U.terms:
        for vec in _term_offsets(term, lam):
            sites = [tuple(c + d for c, d in zip(site, vec)) for site in term.shape.sites]
            values = []
            skip = False
            for site in sites:
                if site in lam:
                    values.append(sigma.value_at(site))
                elif boundary == "free":
                    skip = True
                    break
                elif xi is not None and site in xi.window:
                    label = xi.value_at(site)
                    if not 0 <= label < q:
                        raise ValueError("boundary labels outside alphabet")
                    values.append(label)
                else:
                    raise ValueError(f"boundary condition missing site {site}")
            if skip:
                continue
            idx = 0
            for v in values:
                idx = idx * q + v
            total += float(term.table[idx])
    return total


def _log_weight_grid(
    U: Potential, lam: Window, xi: Configuration | None, boundary: str
) -> np.ndarray:
    """log(a-priori mass) - H for every configuration of lam, as a grid."""
    if boundary not in ("fixed", "free"):
        raise ValueError("boundary must be 'fixed' or 'free'")
    q = U.alphabet.size
    n = lam.size
    check_cap(q, n)
    log_lam = np.log(U.a_priori)
    logw = np.zeros((q,) * n)
    for axis in range(n):
        shape = [q if k == axis else 1 for k in range(n)]
        logw = logw + log_lam.reshape(shape)
    for term in U.terms:
        grid = term.table.reshape((q,) * term.shape.size)
        for vec in _term_offsets(term, lam):
            sites = [tuple(c + d for c, d in zip(site, vec)) for site in term.shape.sites]
            index = []
            positions = []
            skip = False
            for site in sites:
                if site in lam:
                    index.append(slice(None))
                    positions.append(lam.index(site))
                elif boundary == "free":
                    skip = True
                    break
                elif xi is not None and site in xi.window:
                    label = xi.value_at(site)
                    if not 0 <= label < q:
                        raise ValueError("boundary labels outside alphabet")
                    index.append(label)
                else:
                    raise ValueError(f"boundary condition missing site {site}")
            if skip:
                continue
            sub = np.asarray(grid[tuple(index)])
            shape = [q if k in positions else 1 for k in range(n)]
            logw = logw - sub.reshape(shape)
    return logw


def finite_volume_gibbs(
    U: Potential,
    lam: Window,
    xi: Configuration | None = None,
    boundary: str = "fixed",
) -> WindowMeasure:
    """Exact Gibbs measure exp(-H) * a-priori / Z on the window lam."""
    logw = _log_weight_grid(U, lam, xi, boundary).reshape(-1)
    logw -= logw.max()
    w = np.exp(logw)
    return WindowMeasure(lam, U.alphabet, w / w.sum())


def log_partition(
    U: Potential,
    lam: Window,
    xi: Configuration | None = None,
    boundary: str = "fixed",
) -> float:
    """log of the normalizing constant of the finite-volume Gibbs measure."""
    return _logsumexp(_log_weight_grid(U, lam, xi, boundary).reshape(-1))


# -- periodic boundaries --------------------------------------------------------

def _torus_log_weight_grid(U: Potential, side: int) -> tuple[Window, np.ndarray]:
    if side < 1:
        raise ValueError("side must be positive")
    if not U.interaction_range * 2 < side:
        raise ValueError("potential range must be below half the torus side")
    box = box_window((side,) * U.dimension)
    q = U.alphabet.size
    n = box.size
    check_cap(q, n)
    log_lam = np.log(U.a_priori)
    logw = np.zeros((q,) * n)
    for axis in range(n):
        shape = [q if k == axis else 1 for k in range(n)]
        logw = logw + log_lam.reshape(shape)
    for term in U.terms:
        grid = term.table.reshape((q,) * term.shape.size)
        k = term.shape.size
        for anchor in box.sites:
            wrapped = [
                tuple((c + a) % side for c, a in zip(site, anchor)) for site in term.shape.sites
            ]
            positions = [box.index(s) for s in wrapped]
            if len(set(positions)) != k:
                raise ValueError("shape wraps onto itself; torus too small")
            view = np.moveaxis(logw, positions, range(k))
            view -= grid.reshape((q,) * k + (1,) * (n - k))
    return box, logw


def torus_gibbs(U: Potential, side: int) -> WindowMeasure:
    """Gibbs measure of U on the torus box [0, side)^d with wrapped shapes."""
    box, logw = _torus_log_weight_grid(U, side)
    flat = logw.reshape(-1)
    flat = flat - flat.max()
    w = np.exp(flat)
    return WindowMeasure(box, U.alphabet, w / w.sum())


def torus_log_partition(U: Potential, side: int) -> float:
    _, logw = _torus_log_weight_grid(U, side)
    return _logsumexp(logw.reshape(-1))


# -- transfer matrix -------------------------------------------------------------

@dataclass
class TransferMatrix:
    """Positive matrix with its dominant eigen-data (power iteration)."""

    matrix: np.ndarray
    eigenvalue: float
    left: np.ndarray
    right: np.ndarray

    @classmethod
    def from_matrix(cls, matrix, tol: float = 1e-14, max_iterations: int = 200_000) -> "TransferMatrix":
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transfer matrix must be square")
        if np.any(m <= 0):
            raise ValueError("transfer matrix entries must be positive")

        def dominant(mat):
            v = np.full(mat.shape[0], 1.0 / np.sqrt(mat.shape[0]))
            lam = 0.0
            for _ in range(max_iterations):
                w = mat @ v
                v = w / np.linalg.norm(w)
                lam = float(v @ (mat @ v))
                if np.max(np.abs(mat @ v - lam * v)) <= tol * max(1.0, lam):
                    return lam, v
            raise RuntimeError("power iteration did not converge")

        lam, right = dominant(m)
        _, left = dominant(m.T)
        if right.sum() < 0:
            right = -right
        if left.sum() < 0:
            left = -left
        left = left / float(left @ right)
        return cls(m, lam, left, right)

    @classmethod
    def ising(cls, coupling: float, external_field: float) -> "TransferMatrix":
        """exp(J s s' + h (s + s')/2) over spin values -1, +1."""
        j, h = float(coupling), float(external_field)
        m = np.array(
            [
                [np.exp(j * a * b + h * (a + b) / 2.0) for b in SPIN_VALUES]
                for a in SPIN_VALUES
            ]
        )
        return cls.from_matrix(m)

    @property
    def log_eigenvalue(self) -> float:
        return float(np.log(self.eigenvalue))

    def residual(self) -> float:
        r = np.max(np.abs(self.matrix @ self.right - self.eigenvalue * self.right))
        l = np.max(np.abs(self.left @ self.matrix - self.eigenvalue * self.left))
        return float(max(r, l))


def _contiguous_1d(window: Window) -> None:
    if window.dimension != 1 or window.size == 0:
        raise ValueError("need a nonempty one-dimensional window")
    coords = [s[0] for s in window.sites]
    if coords != list(range(coords[0], coords[0] + len(coords))):
        raise ValueError("window must be a contiguous interval")


def transfer_matrix_marginal(coupling: float, external_field: float, window: Window) -> WindowMeasure:
    """Exact infinite-volume marginal of the nearest-neighbour chain on an interval.

    Weights are l(s_1) * prod_k T(s_k, s_{k+1}) / lambda * r(s_n) with the
    normalized dominant eigen-data of the transfer matrix.
    """
    _contiguous_1d(window)
    tm = TransferMatrix.ising(coupling, external_field)
    n = window.size
    check_cap(2, n)
    rows = label_grid(n, 2).astype(np.int64)
    w = tm.left[rows[:, 0]] * tm.right[rows[:, -1]]
    for k in range(n - 1):
        w = w * tm.matrix[rows[:, k], rows[:, k + 1]] / tm.eigenvalue
    return WindowMeasure(window, SpinAlphabet(2), w)


def ising_pressure(coupling: float, external_field: float) -> float:
    """Log of the dominant transfer-matrix eigenvalue."""
    return TransferMatrix.ising(coupling, external_field).log_eigenvalue


def decimate_ising_1d(coupling: float) -> float:
    """Renormalized coupling of the chain observed on the even sublattice.

    Tabulates the exact three-site marginal at zero field, drops the middle
    site, and converts the surviving pair correlation back to a coupling.
    """
    three = transfer_matrix_marginal(coupling, 0.0, Window(1, ((0,), (1,), (2,))))
    pair = three.marginal(Window(1, ((0,), (2,))))
    rows = label_grid(2, 2).astype(np.int64)
    corr = float(np.sum(pair.weights * SPIN_VALUES[rows[:, 0]] * SPIN_VALUES[rows[:, 1]]))
    return float(np.arctanh(corr))


# -- marginal sources ------------------------------------------------------------

@dataclass
class ProductSource:
    """Exact i.i.d. marginals with a fixed single-spin law."""

    alphabet: SpinAlphabet
    single_site: np.ndarray
    dimension: int = 1
    provenance: str = "exact"

    def marginal(self, window: Window) -> WindowMeasure:
        if window.dimension != self.dimension:
            raise ValueError("window has wrong dimension")
        return product_measure(self.alphabet, window, self.single_site)


@dataclass
class IsingChainSource:
    """Exact transfer-matrix marginals of the nearest-neighbour chain."""

    coupling: float
    external_field: float = 0.0
    provenance: str = "exact"
    dimension: int = 1

    @property
    def alphabet(self) -> SpinAlphabet:
        return SpinAlphabet(2)

    def marginal(self, window: Window) -> WindowMeasure:
        coords = [s[0] for s in window.sites]
        hull = Window(1, tuple((c,) for c in range(coords[0], coords[-1] + 1)))
        full = transfer_matrix_marginal(self.coupling, self.external_field, hull)
        if hull.size == window.size:
            return full
        return full.marginal(window)


@dataclass
class TorusGibbsSource:
    """Marginals of the exact Gibbs measure on a torus (periodic stand-in)."""

    potential: Potential
    side: int
    provenance: str = "exact"
    _measure: WindowMeasure | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.potential.dimension

    @property
    def alphabet(self) -> SpinAlphabet:
        return self.potential.alphabet

    def full_measure(self) -> WindowMeasure:
        if self._measure is None:
            self._measure = torus_gibbs(self.potential, self.side)
        return self._measure

    def marginal(self, window: Window) -> WindowMeasure:
        measure = self.full_measure()
        box = measure.window
        wrapped = [tuple(c % self.side for c in site) for site in window.sites]
        if len(set(wrapped)) != len(wrapped):
            raise ValueError("window wraps onto itself on this torus")
        positions = [box.index(s) for s in wrapped]
        n = box.size
        k = len(positions)
        moved = np.moveaxis(measure.grid(), positions, range(k))
        w = moved.sum(axis=tuple(range(k, n))) if n > k else moved
        return WindowMeasure(window, self.alphabet, np.ascontiguousarray(w).reshape(-1))


@dataclass
class EmpiricalSource:
    """Marginals of an empirical window measure, flagged as sampled."""

    measure: WindowMeasure
    n_samples: int
    provenance: str = "sampled"

    @property
    def dimension(self) -> int:
        return self.measure.window.dimension

    @property
    def alphabet(self) -> SpinAlphabet:
        return self.measure.alphabet

    def marginal(self, window: Window) -> WindowMeasure:
        return self.measure.marginal(window)


# -- serialization ----------------------------------------------------------------

def write_measure_csv(measure: WindowMeasure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("configuration_index,weight\n")
        for idx, w in enumerate(measure.weights):
            fh.write(f"{idx},{float(w)!r}\n")


def potential_from_dict(data: dict) -> Potential:
    try:
        dimension = int(data["dimension"])
        q = int(data["alphabet"]["size"])
        a_priori = data.get("a_priori")
        terms = []
        for raw in data["terms"]:
            sites = tuple(tuple(int(c) for c in site) for site in raw["sites"])
            terms.append(PotentialTerm(Window(dimension, sites), np.asarray(raw["values"], dtype=float)))
    except KeyError as missing:
        raise ValueError(f"potential file is missing field {missing}") from None
    return Potential(SpinAlphabet(q), dimension, tuple(terms), a_priori)


def load_potential(path) -> Potential:
    with open(path, "rb") as fh:
        return potential_from_dict(_toml.load(fh))
