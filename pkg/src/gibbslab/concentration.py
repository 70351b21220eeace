"""Gaussian concentration diagnostics for window measures.

A measure satisfies a Gaussian concentration bound with constant C when
the centered exponential moment of every local function f stays below
exp(C/2 * ||delta f||_2^2).  The scan below turns that into an empirical
certificate: the largest ratio 2 * log-moment / (beta^2 ||delta f||_2^2)
over a two-sided beta grid, floored by the beta -> 0 variance ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .funcspace import DiameterRule, LocalFunction, ergodic_sum, oscillation_vector
from .lattice import Window
from .measures import WindowMeasure, expectation, variance


def default_beta_grid() -> np.ndarray:
    """Two-sided grid: 41 log-spaced magnitudes in [1e-3, 8], both signs."""
    mags = np.geomspace(1e-3, 8.0, 41)
    return np.concatenate([-mags[::-1], mags])


def gcb_log_moment(mu: WindowMeasure, f: LocalFunction) -> float:
    """log of the mu-mean of exp(f - mean f); exact and overflow-safe."""
    w = mu.marginal(f.window).weights
    centered = f.table - float(w @ f.table)
    shift = float(centered.max())
    return shift + float(np.log(w @ np.exp(centered - shift)))


@dataclass
class GcbScanResult:
    function_id: str
    norm2_sq: float
    betas: np.ndarray
    log_moments: np.ndarray
    variance_ratio: float
    empirical_constant: float
    reference_constant: float | None = None
    residuals: np.ndarray | None = None
    min_residual: float | None = None


def gcb_scan(
    mu: WindowMeasure,
    f: LocalFunction,
    betas: np.ndarray | None = None,
    rule=None,
    reference_constant: float | None = None,
    function_id: str = "f",
) -> GcbScanResult:
    """Scan exponential moments of beta * f against the quadratic envelope.

    ``empirical_constant`` is a certified lower bound on any constant C for
    which the concentration inequality can hold for this f.  When a
    ``reference_constant`` is supplied, ``residuals`` holds
    (C/2) beta^2 ||delta f||_2^2 - log-moment per grid point (all must be
    nonnegative for the bound to hold on the grid).
    """
    rule = rule or DiameterRule()
    norm2_sq = rule.oscillations(f).norm2_sq
    if norm2_sq <= 0.0:
        raise ValueError("constant functions carry no concentration information")
    grid = default_beta_grid() if betas is None else np.asarray(betas, dtype=float)
    if np.any(grid == 0.0):
        raise ValueError("beta grid must not contain zero")
    log_moments = np.array([gcb_log_moment(mu, f.scale(b)) for b in grid])
    candidates = 2.0 * log_moments / (grid**2 * norm2_sq)
    var_ratio = variance(mu, f) / norm2_sq
    empirical = float(max(candidates.max(), var_ratio))
    residuals = None
    min_residual = None
    if reference_constant is not None:
        residuals = 0.5 * reference_constant * grid**2 * norm2_sq - log_moments
        min_residual = float(residuals.min())
    return GcbScanResult(
        function_id=function_id,
        norm2_sq=float(norm2_sq),
        betas=grid,
        log_moments=log_moments,
        variance_ratio=float(var_ratio),
        empirical_constant=empirical,
        reference_constant=reference_constant,
        residuals=residuals,
        min_residual=min_residual,
    )


def empirical_constant(
    mu: WindowMeasure, f: LocalFunction, betas: np.ndarray | None = None, rule=None
) -> float:
    """Largest observed 2 log-moment / (beta^2 ||delta f||_2^2), floored by
    the variance ratio (the beta -> 0 limit)."""
    return gcb_scan(mu, f, betas=betas, rule=rule).empirical_constant


@dataclass
class YoungReport:
    lhs: float
    rhs: float
    margin: float
    passed: bool
    translate_count: int
    norm1: float
    majorant: dict
    sitewise_ok: bool


def young_check(f: LocalFunction, translates: Window, rule=None, tolerance: float = 1e-9) -> YoungReport:
    """Check ||delta(sum of translates)||_2^2 <= |Lambda| * ||delta f||_1^2.

    Also verifies the stronger sitewise bound: each oscillation of the sum
    is dominated by the convolution of delta f with the translate window's
    indicator.
    """
    rule = rule or DiameterRule()
    base = rule.oscillations(f)
    summed = ergodic_sum(f, translates)
    osc = rule.oscillations(summed)
    lhs = osc.norm2_sq
    rhs = translates.size * base.norm1**2
    majorant = {}
    for site in summed.window.sites:
        majorant[site] = float(
            sum(base.at(tuple(c - v for c, v in zip(site, vec))) for vec in translates.sites)
        )
    sitewise_ok = all(osc.at(site) <= majorant[site] + tolerance for site in summed.window.sites)
    margin = rhs - lhs
    return YoungReport(
        lhs=float(lhs),
        rhs=float(rhs),
        margin=float(margin),
        passed=bool(margin >= -tolerance and sitewise_ok),
        translate_count=translates.size,
        norm1=float(base.norm1),
        majorant=majorant,
        sitewise_ok=bool(sitewise_ok),
    )


@dataclass
class QuantitativeReport:
    s_estimate: float
    d_estimate: float
    constant: float
    rhs: float
    margin: float
    passed: bool
    tolerance: float
    s_provenance: str
    d_provenance: str
    mean_gap: float | None = None
    budget_norm_sq: float | None = None
    beta_star: float | None = None
    proof_lower_bound: float | None = None


def quantitative_bound_check(
    s_estimate: float,
    d_estimate: float,
    constant: float,
    tolerance: float = 1e-9,
    witness: LocalFunction | None = None,
    nu: WindowMeasure | None = None,
    mu: WindowMeasure | None = None,
    rule=None,
    s_provenance: str = "exact",
    d_provenance: str = "exact",
) -> QuantitativeReport:
    """Compare an entropy density against d^2 / (2C).

    With a witness function and the two measures, the report also carries
    the proof-side scalars: the mean gap u, the squared 1-norm budget
    rho of the witness oscillations, the optimal tilt u / (C rho), and the
    resulting lower bound u^2 / (2 C rho).
    """
    if constant <= 0.0:
        raise ValueError("concentration constant must be positive")
    rhs = d_estimate**2 / (2.0 * constant)
    margin = s_estimate - rhs
    report = QuantitativeReport(
        s_estimate=float(s_estimate),
        d_estimate=float(d_estimate),
        constant=float(constant),
        rhs=float(rhs),
        margin=float(margin),
        passed=bool(margin >= -tolerance),
        tolerance=float(tolerance),
        s_provenance=s_provenance,
        d_provenance=d_provenance,
    )
    if witness is not None and nu is not None and mu is not None:
        gap = expectation(nu, witness) - expectation(mu, witness)
        rho = oscillation_vector(witness, rule).norm1 ** 2
        report.mean_gap = float(gap)
        report.budget_norm_sq = float(rho)
        if rho > 0.0:
            report.beta_star = float(gap / (constant * rho))
            report.proof_lower_bound = float(gap**2 / (2.0 * constant * rho))
    return report


def write_scan_csv(results, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("function_id,beta,log_moment,norm2_sq,constant_candidate\n")
        for res in results:
            for beta, lm in zip(res.betas, res.log_moments):
                cand = 2.0 * lm / (beta**2 * res.norm2_sq)
                fh.write(
                    f"{res.function_id},{float(beta)!r},{float(lm)!r},"
                    f"{float(res.norm2_sq)!r},{float(cand)!r}\n"
                )


def write_scan_summary(results, path) -> None:
    import json

    payload = {
        "empirical_constant": max(r.empirical_constant for r in results),
        "functions": [
            {
                "function_id": r.function_id,
                "norm2_sq": r.norm2_sq,
                "empirical_constant": r.empirical_constant,
                "variance_ratio": r.variance_ratio,
                "reference_constant": r.reference_constant,
                "min_residual": r.min_residual,
            }
            for r in results
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
