"""Geometry of finite windows on the integer lattice Z^d.

Windows are finite site sets kept in lexicographic order; configurations
assign one alphabet label per site.  Every exact table in the package is
indexed mixed-radix over a window's sites with the *last* site varying
fastest, so ``table.reshape((q,) * n)`` exposes one axis per site in
window order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import product as _cartesian

import numpy as np

Site = tuple[int, ...]

DEFAULT_TABULATION_CAP = 2**20


class TabulationCapError(RuntimeError):
    """An exact tabulation would exceed the configured entry cap."""


def tabulation_cap() -> int:
    """Active cap on exact table sizes (entries); override via GIBBSLAB_CAP."""
    raw = os.environ.get("GIBBSLAB_CAP", "").strip()
    return int(raw) if raw else DEFAULT_TABULATION_CAP


def check_cap(alphabet_size: int, n_sites: int) -> int:
    """Return ``alphabet_size ** n_sites`` or raise :class:`TabulationCapError`."""
    size = alphabet_size**n_sites
    cap = tabulation_cap()
    if size > cap:
        raise TabulationCapError(
            f"{alphabet_size}^{n_sites} = {size} table entries exceed the cap {cap}; "
            "shrink the window or raise GIBBSLAB_CAP"
        )
    return size


@dataclass(frozen=True)
class SpinAlphabet:
    """Finite single-spin space with labels ``0 .. size-1`` and an optional metric.

    The metric, when present, must be symmetric, vanish exactly on the
    diagonal and be positive off it.
    """

    size: int
    metric: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("alphabet needs at least two spin values")
        if self.metric is not None:
            m = tuple(tuple(float(x) for x in row) for row in self.metric)
            if len(m) != self.size or any(len(row) != self.size for row in m):
                raise ValueError("metric table must be size x size")
            for s in range(self.size):
                if m[s][s] != 0.0:
                    raise ValueError("metric must vanish on the diagonal")
                for t in range(self.size):
                    if m[s][t] != m[t][s]:
                        raise ValueError("metric must be symmetric")
                    if s != t and not m[s][t] > 0.0:
                        raise ValueError("metric must be positive off the diagonal")
            object.__setattr__(self, "metric", m)

    def distance(self, s: int, t: int) -> float:
        if self.metric is None:
            raise ValueError("alphabet carries no metric")
        return self.metric[s][t]

    @property
    def diameter(self) -> float:
        if self.metric is None:
            return 1.0
        return max(max(row) for row in self.metric)


@dataclass(frozen=True)
class Window:
    """Finite set of lattice sites, canonicalized to lexicographic order."""

    dimension: int
    sites: tuple[Site, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        sites = tuple(tuple(int(c) for c in s) for s in self.sites)
        for s in sites:
            if len(s) != self.dimension:
                raise ValueError(f"site {s} does not have {self.dimension} coordinates")
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate sites in window")
        object.__setattr__(self, "sites", tuple(sorted(sites)))

    @property
    def size(self) -> int:
        return len(self.sites)

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site) -> bool:
        return tuple(site) in set(self.sites)

    def index(self, site) -> int:
        """Position of ``site`` in lexicographic order."""
        try:
            return self.sites.index(tuple(site))
        except ValueError:
            raise ValueError(f"site {tuple(site)} not in window") from None

    def shift(self, vector) -> "Window":
        v = tuple(int(c) for c in vector)
        if len(v) != self.dimension:
            raise ValueError("shift vector has wrong dimension")
        return Window(self.dimension, tuple(tuple(c + d for c, d in zip(s, v)) for s in self.sites))

    def union(self, other: "Window") -> "Window":
        self._check_dim(other)
        return Window(self.dimension, tuple(set(self.sites) | set(other.sites)))

    def intersection(self, other: "Window") -> "Window":
        self._check_dim(other)
        return Window(self.dimension, tuple(set(self.sites) & set(other.sites)))

    def difference(self, other: "Window") -> "Window":
        self._check_dim(other)
        return Window(self.dimension, tuple(set(self.sites) - set(other.sites)))

    def issubset(self, other: "Window") -> bool:
        self._check_dim(other)
        return set(self.sites) <= set(other.sites)

    def _check_dim(self, other: "Window") -> None:
        if self.dimension != other.dimension:
            raise ValueError("windows live in different dimensions")


def cube_window(n: int, dimension: int) -> Window:
    """Centered cube ``[-n, n]^d``."""
    if n < 0:
        raise ValueError("cube radius must be nonnegative")
    return Window(dimension, tuple(_cartesian(range(-n, n + 1), repeat=dimension)))


def box_window(lengths) -> Window:
    """Box ``[0, L_1) x ... x [0, L_d)``."""
    ls = tuple(int(x) for x in lengths)
    if any(l < 1 for l in ls):
        raise ValueError("box side lengths must be positive")
    return Window(len(ls), tuple(_cartesian(*(range(l) for l in ls))))


def minkowski_sum(a: Window, b: Window) -> Window:
    a._check_dim(b)
    sites = {tuple(x + y for x, y in zip(s, t)) for s in a.sites for t in b.sites}
    return Window(a.dimension, tuple(sites))


@dataclass(frozen=True)
class Configuration:
    """Assignment of one label per site of a window."""

    window: Window
    values: tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        if len(values) != self.window.size:
            raise ValueError("one value per window site required")
        if any(v < 0 for v in values):
            raise ValueError("labels must be nonnegative")
        object.__setattr__(self, "values", values)

    def value_at(self, site) -> int:
        return self.values[self.window.index(site)]


def translate_configuration(config: Configuration, vector) -> Configuration:
    """Shift a configuration so the value at i moves to i + vector."""
    # lexicographic order is translation invariant, so values carry over as-is
    return Configuration(config.window.shift(vector), config.values)


def restrict_configuration(config: Configuration, window: Window) -> Configuration:
    if not window.issubset(config.window):
        raise ValueError("restriction window is not covered by the configuration")
    return Configuration(window, tuple(config.value_at(s) for s in window.sites))


def patch(eta: Configuration, xi: Configuration, window: Window | None = None) -> Configuration:
    """Combine eta on its own window with xi elsewhere.

    The result lives on ``window`` (default: the union of both windows);
    every target site must be covered by eta or xi, with eta winning on
    overlaps.
    """
    eta.window._check_dim(xi.window)
    target = window if window is not None else eta.window.union(xi.window)
    eta_sites = set(eta.window.sites)
    xi_sites = set(xi.window.sites)
    values = []
    for site in target.sites:
        if site in eta_sites:
            values.append(eta.value_at(site))
        elif site in xi_sites:
            values.append(xi.value_at(site))
        else:
            raise ValueError(f"site {site} covered by neither configuration")
    return Configuration(target, tuple(values))


# -- mixed-radix indexing ----------------------------------------------------

def strides(n_sites: int, alphabet_size: int) -> np.ndarray:
    """Place values of each site position: ``[q^(n-1), ..., q, 1]``."""
    return alphabet_size ** np.arange(n_sites - 1, -1, -1, dtype=np.int64)


def config_index(values, alphabet_size: int) -> int:
    idx = 0
    for v in values:
        if not 0 <= v < alphabet_size:
            raise ValueError(f"label {v} outside alphabet of size {alphabet_size}")
        idx = idx * alphabet_size + int(v)
    return idx


def index_values(index: int, n_sites: int, alphabet_size: int) -> tuple[int, ...]:
    if not 0 <= index < alphabet_size**n_sites:
        raise ValueError("configuration index out of range")
    out = []
    for _ in range(n_sites):
        out.append(index % alphabet_size)
        index //= alphabet_size
    return tuple(reversed(out))


def label_grid(n_sites: int, alphabet_size: int) -> np.ndarray:
    """All label rows, shape ``(q^n, n)``, in mixed-radix order (last site fastest)."""
    if n_sites == 0:
        return np.zeros((1, 0), dtype=np.int8)
    check_cap(alphabet_size, n_sites)
    idx = np.arange(alphabet_size**n_sites, dtype=np.int64)
    cols = [
        (idx // alphabet_size ** (n_sites - 1 - k)) % alphabet_size
        for k in range(n_sites)
    ]
    return np.stack(cols, axis=1).astype(np.int8)


def all_configurations(window: Window, alphabet_size: int):
    """Iterate every configuration of the window in index order."""
    for row in label_grid(window.size, alphabet_size):
        yield Configuration(window, tuple(int(v) for v in row))
