"""Config-driven experiment runner.

``gibbslab run config.toml`` executes one declarative scenario (oscillation
tables, translate-sum bounds, concentration scans, entropy-density traces,
distance programs, the entropy-vs-distance bound, Glauber convergence,
chain decimation, or rule axioms), writes CSV/JSON artifacts plus a report
and manifest into the configured output directory, and exits nonzero iff a
check failed.  ``validate`` checks a config without running; ``report``
pretty-prints a previously written report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from . import __version__
from .concentration import (
    default_beta_grid,
    gcb_scan,
    quantitative_bound_check,
    write_scan_csv,
    write_scan_summary,
    young_check,
)
from .dynamics import (
    convergence_experiment,
    detailed_balance_check,
    write_convergence_csv,
)
from .entropy import (
    entropy_density_sequence,
    ising_entropy_density_exact,
    write_trace_csv,
)
from .funcspace import (
    DiameterRule,
    LocalFunction,
    MetricQuotientRule,
    axiom_check,
    load_function,
    oscillation_vector,
    random_local_function,
)
from .lattice import SpinAlphabet, TabulationCapError, check_cap, cube_window
from .measures import (
    IsingChainSource,
    ProductSource,
    TorusGibbsSource,
    decimate_ising_1d,
    ising2d_potential,
    ising_potential,
    load_potential,
)
from .metric import distance_lp, save_solution

KINDS = (
    "oscillation",
    "young",
    "gcb-scan",
    "entropy-density",
    "distance",
    "theorem-check",
    "glauber",
    "decimation",
    "axioms",
)

MODEL_NAMES = ("product", "ising1d", "ising2d-torus", "potential")


@dataclass
class CheckRecord:
    name: str
    passed: bool
    lhs: float | None = None
    rhs: float | None = None
    margin: float | None = None
    tolerance: float | None = None
    provenance: str = "exact"
    stderr: float | None = None
    note: str | None = None


@dataclass
class ExperimentReport:
    config: dict
    records: list
    artifacts: list
    passed: bool


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# -- config loading ---------------------------------------------------------------

def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return _toml.load(fh)


def _functions_defaults(cfg: dict, seed: int) -> dict:
    out = {
        "count": int(cfg.get("count", 100)),
        "dimension": int(cfg.get("dimension", 1)),
        "alphabet_size": int(cfg.get("alphabet_size", 2)),
        "max_sites": int(cfg.get("max_sites", 3)),
        "box": [int(x) for x in cfg.get("box", [2] * int(cfg.get("dimension", 1)))],
        "scale": float(cfg.get("scale", 1.0)),
        "dead_axis_prob": float(cfg.get("dead_axis_prob", 0.0)),
        "seed": int(cfg.get("seed", seed)),
    }
    return out


def normalize_config(data: dict) -> dict:
    """Fill defaults so the echoed config re-runs identically."""
    cfg = json.loads(json.dumps(data))  # deep copy, TOML types are JSON-safe
    cfg.setdefault("seed", 0)
    cfg.setdefault("tolerance", 1e-9)
    seed = int(cfg["seed"])
    if "functions" in cfg:
        cfg["functions"] = _functions_defaults(cfg["functions"], seed)
    kind = cfg.get("kind")
    if kind == "young":
        cfg.setdefault("translate_radius", 1)
    if kind == "entropy-density":
        cfg.setdefault("n_max", 6)
        cfg.setdefault("closed_form_tolerance", 1e-3)
    if kind == "theorem-check":
        cfg.setdefault("n_max", 6)
        cfg.setdefault("constant_source", "given" if "constant" in cfg else "scan")
    if kind == "glauber":
        cfg.setdefault("ratio", 0.5)
        cfg.setdefault("balance_side", 3)
    if kind == "decimation":
        cfg.setdefault("pairs", [])
    return cfg


def _validate_model(table, field: str, errors: list, need_potential: bool = False) -> None:
    if not isinstance(table, dict):
        errors.append(f"{field}: expected a table")
        return
    name = table.get("name")
    if name not in MODEL_NAMES:
        errors.append(f"{field}.name: expected one of {MODEL_NAMES}, got {name!r}")
        return
    if name == "product":
        if "p" not in table and "weights" not in table:
            errors.append(f"{field}: product model needs 'p' or 'weights'")
        if "p" in table and not 0.0 <= float(table["p"]) <= 1.0:
            errors.append(f"{field}.p: must lie in [0, 1]")
        if need_potential:
            errors.append(f"{field}: this scenario needs a potential-backed model")
    elif name == "ising1d":
        for key in ("J", "h"):
            if key not in table:
                errors.append(f"{field}.{key}: required for ising1d")
    elif name == "ising2d-torus":
        for key in ("J", "h", "L"):
            if key not in table:
                errors.append(f"{field}.{key}: required for ising2d-torus")
        if "L" in table:
            side = int(table["L"])
            try:
                check_cap(2, side * side)
            except TabulationCapError:
                errors.append(f"{field}.L: torus with {side * side} sites exceeds the table cap")
    elif name == "potential":
        if "file" not in table:
            errors.append(f"{field}.file: required for potential models")
        elif not os.path.exists(table["file"]):
            errors.append(f"{field}.file: no such file {table['file']!r}")
        if "L" not in table:
            errors.append(f"{field}.L: torus side required for potential models")


def validate_config(data: dict) -> list[str]:
    errors: list[str] = []
    kind = data.get("kind")
    if kind not in KINDS:
        errors.append(f"kind: expected one of {KINDS}, got {kind!r}")
        return errors
    if "output_dir" not in data:
        errors.append("output_dir: required")
    if kind == "glauber" and "seed" not in data:
        errors.append("seed: required for the glauber scenario")

    def need(*fields):
        for f in fields:
            if f not in data:
                errors.append(f"{f}: required for kind {kind!r}")

    if kind in ("oscillation", "young", "axioms"):
        if kind == "oscillation" and "function_file" in data:
            if not os.path.exists(data["function_file"]):
                errors.append(f"function_file: no such file {data['function_file']!r}")
        elif "functions" not in data:
            errors.append(f"functions: required for kind {kind!r}")
    if kind == "gcb-scan":
        need("model", "functions")
    if kind in ("entropy-density", "distance", "theorem-check"):
        need("model", "model_prime")
    if kind == "distance":
        need("radii")
    if kind == "theorem-check":
        need("radius")
        if data.get("constant_source", "given" if "constant" in data else "scan") == "given":
            if "constant" not in data:
                errors.append("constant: required when constant_source is 'given'")
            elif float(data["constant"]) <= 0:
                errors.append("constant: must be positive")
        elif "functions" not in data:
            errors.append("functions: required when constant_source is 'scan'")
    if kind == "glauber":
        need("model", "t_max", "radius", "sample_count")
        model = data.get("model", {})
        if isinstance(model, dict) and model.get("name") == "ising1d" and "L" not in data:
            errors.append("L: required for glauber with an ising1d model")
    if kind == "decimation":
        need("couplings")
        for pair in data.get("pairs", []):
            if len(pair) != 2:
                errors.append("pairs: every entry must be [J_nu, J_mu]")
    if kind == "axioms":
        rule = data.get("rule", "diameter")
        if rule not in ("diameter", "metric-quotient"):
            errors.append(f"rule: expected 'diameter' or 'metric-quotient', got {rule!r}")

    for field in ("model", "model_prime"):
        if field in data:
            _validate_model(data[field], field, errors)

    radii = data.get("radii", [])
    if "radius" in data:
        radii = list(radii) + [data["radius"]]
    dim = 1
    for field in ("model", "model_prime"):
        table = data.get(field)
        if isinstance(table, dict):
            if table.get("name") == "ising2d-torus":
                dim = 2
            if table.get("name") == "product":
                dim = int(table.get("dimension", 1))
    for r in radii:
        try:
            check_cap(3, (2 * int(r) + 1) ** dim)
        except TabulationCapError:
            errors.append(f"radii: radius {r} exceeds the table cap in dimension {dim}")
        if int(r) < 0:
            errors.append(f"radii: radius {r} is negative")
    if kind in ("entropy-density", "theorem-check") and "n_max" in data:
        try:
            check_cap(2, (2 * int(data["n_max"]) + 1) ** dim)
        except TabulationCapError:
            errors.append(f"n_max: cube of radius {data['n_max']} exceeds the table cap")
    return errors


# -- model building -----------------------------------------------------------------

@dataclass
class ModelBundle:
    source: object
    potential: object | None
    side: int | None
    label: str


def build_model(table: dict) -> ModelBundle:
    name = table["name"]
    if name == "product":
        dimension = int(table.get("dimension", 1))
        if "weights" in table:
            weights = np.asarray(table["weights"], dtype=float)
        else:
            p = float(table["p"])
            weights = np.array([1.0 - p, p])
        alphabet = SpinAlphabet(len(weights))
        return ModelBundle(
            ProductSource(alphabet, weights, dimension), None, None, f"product({weights.tolist()})"
        )
    if name == "ising1d":
        j, h = float(table["J"]), float(table["h"])
        return ModelBundle(
            IsingChainSource(j, h), ising_potential(j, h), None, f"ising1d(J={j}, h={h})"
        )
    if name == "ising2d-torus":
        j, h, side = float(table["J"]), float(table["h"]), int(table["L"])
        U = ising2d_potential(j, h)
        return ModelBundle(
            TorusGibbsSource(U, side), U, side, f"ising2d-torus(J={j}, h={h}, L={side})"
        )
    if name == "potential":
        U = load_potential(table["file"])
        side = int(table["L"])
        return ModelBundle(TorusGibbsSource(U, side), U, side, f"potential({table['file']})")
    raise ValueError(f"unknown model {name!r}")


def build_family(cfg: dict) -> list[LocalFunction]:
    rng = np.random.default_rng(cfg["seed"])
    alphabet = SpinAlphabet(cfg["alphabet_size"])
    return [
        random_local_function(
            rng,
            alphabet,
            dimension=cfg["dimension"],
            max_sites=cfg["max_sites"],
            box=tuple(cfg["box"]),
            scale=cfg["scale"],
            dead_axis_prob=cfg["dead_axis_prob"],
        )
        for _ in range(cfg["count"])
    ]


# -- scenarios -----------------------------------------------------------------------

def _run_oscillation(cfg, outdir):
    if "function_file" in cfg:
        family = [load_function(cfg["function_file"])]
    else:
        family = build_family(cfg["functions"])
    rows = []
    worst_margin = float("inf")
    for k, f in enumerate(family):
        vec = oscillation_vector(f)
        spread = float(f.table.max() - f.table.min())
        worst_margin = min(worst_margin, vec.norm1 - spread)
        for site, delta in vec.entries.items():
            rows.append((f"f{k}", ",".join(str(c) for c in site), delta))
    path = os.path.join(outdir, "oscillations.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("function_id,site,oscillation\n")
        for fid, site, delta in rows:
            fh.write(f"{fid},\"{site}\",{float(delta)!r}\n")
    records = [
        CheckRecord(
            name="value-spread-within-oscillation-1norm",
            passed=bool(worst_margin >= -1e-9),
            lhs=float(worst_margin),
            rhs=0.0,
            margin=float(worst_margin),
            tolerance=1e-9,
        )
    ]
    return records, [path]


def _run_young(cfg, outdir):
    family = build_family(cfg["functions"])
    dimension = cfg["functions"]["dimension"]
    lam = cube_window(int(cfg["translate_radius"]), dimension)
    rows, worst, sitewise_all = [], float("inf"), True
    for k, f in enumerate(family):
        rep = young_check(f, lam)
        worst = min(worst, rep.margin)
        sitewise_all = sitewise_all and rep.sitewise_ok
        rows.append((f"f{k}", rep.lhs, rep.rhs, rep.margin, rep.passed))
    path = os.path.join(outdir, "young.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("function_id,lhs,rhs,margin,passed\n")
        for fid, lhs, rhs, margin, ok in rows:
            fh.write(f"{fid},{float(lhs)!r},{float(rhs)!r},{float(margin)!r},{ok}\n")
    records = [
        CheckRecord(
            name="translate-sum-2norm-bound",
            passed=bool(worst >= -1e-9),
            lhs=float(worst),
            rhs=0.0,
            margin=float(worst),
            tolerance=1e-9,
            note=f"min margin over {len(family)} functions, translates {lam.size}",
        ),
        CheckRecord(
            name="sitewise-convolution-majorant",
            passed=bool(sitewise_all),
            tolerance=1e-9,
        ),
    ]
    return records, [path]


def _run_gcb_scan(cfg, outdir):
    bundle = build_model(cfg["model"])
    family = build_family(cfg["functions"])
    betas = np.asarray(cfg["betas"], dtype=float) if "betas" in cfg else None
    reference = cfg.get("reference_constant")
    results = []
    for k, f in enumerate(family):
        mu = bundle.source.marginal(f.window)
        results.append(
            gcb_scan(mu, f, betas=betas, reference_constant=reference, function_id=f"f{k}")
        )
    csv_path = os.path.join(outdir, "scan.csv")
    summary_path = os.path.join(outdir, "scan_summary.json")
    write_scan_csv(results, csv_path)
    write_scan_summary(results, summary_path)
    overall = max(r.empirical_constant for r in results)
    records = [
        CheckRecord(
            name="empirical-constant-lower-bound",
            passed=True,
            lhs=float(overall),
            provenance="scan-lower-bound",
            note=f"max over {len(results)} functions on model {bundle.label}",
        )
    ]
    if reference is not None:
        worst = min(r.min_residual for r in results)
        records.append(
            CheckRecord(
                name="reference-envelope-dominates",
                passed=bool(worst >= -1e-9),
                lhs=float(worst),
                rhs=0.0,
                margin=float(worst),
                tolerance=1e-9,
                note=f"reference constant {float(reference)}",
            )
        )
    return records, [csv_path, summary_path]


def _run_entropy_density(cfg, outdir):
    mu = build_model(cfg["model"])
    nu = build_model(cfg["model_prime"])
    trace = entropy_density_sequence(nu.source, mu.source, int(cfg["n_max"]))
    path = os.path.join(outdir, "entropy_trace.csv")
    write_trace_csv(trace, path)
    records = [
        CheckRecord(
            name="entropy-density-liminf-estimate",
            passed=True,
            lhs=float(trace.liminf_estimate),
            provenance=trace.source_flags,
            note=f"nu={nu.label}, mu={mu.label}",
        )
    ]
    if cfg["model"]["name"] == "ising1d" and cfg["model_prime"]["name"] == "ising1d":
        exact = ising_entropy_density_exact(
            (float(cfg["model_prime"]["J"]), float(cfg["model_prime"]["h"])),
            (float(cfg["model"]["J"]), float(cfg["model"]["h"])),
        )
        estimate = trace.increment_estimate
        tol = float(cfg["closed_form_tolerance"])
        records.append(
            CheckRecord(
                name="trace-matches-closed-form",
                passed=bool(abs(estimate - exact) <= tol),
                lhs=float(estimate),
                rhs=float(exact),
                margin=float(tol - abs(estimate - exact)),
                tolerance=tol,
                note=f"per-site tail {trace.entries[-1].per_site:.6f}",
            )
        )
    return records, [path]


def _run_distance(cfg, outdir):
    mu = build_model(cfg["model"])
    nu = build_model(cfg["model_prime"])
    artifacts = []
    values = []
    for r in cfg["radii"]:
        sol = distance_lp(mu.source, nu.source, int(r))
        p = os.path.join(outdir, f"solution_r{int(r)}.json")
        save_solution(sol, p)
        artifacts.append(p)
        values.append((int(r), sol.value, sol.iterations))
    csv_path = os.path.join(outdir, "distances.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("radius,distance,lp_iterations\n")
        for r, v, it in values:
            fh.write(f"{r},{float(v)!r},{it}\n")
    artifacts.append(csv_path)
    monotone = all(values[k + 1][1] >= values[k][1] - 1e-9 for k in range(len(values) - 1))
    records = [
        CheckRecord(
            name="distance-nondecreasing-in-radius",
            passed=bool(monotone),
            tolerance=1e-9,
            note=",".join(f"d_{r}={v:.6f}" for r, v, _ in values),
        )
    ]
    return records, artifacts


def _run_theorem_check(cfg, outdir):
    mu = build_model(cfg["model"])
    nu = build_model(cfg["model_prime"])
    artifacts = []
    records = []
    tolerance = float(cfg["tolerance"])

    if cfg["constant_source"] == "given":
        constant = float(cfg["constant"])
        c_provenance = "given"
    else:
        family = build_family(cfg["functions"])
        results = []
        for k, f in enumerate(family):
            m = mu.source.marginal(f.window)
            results.append(gcb_scan(m, f, function_id=f"f{k}"))
        constant = max(r.empirical_constant for r in results)
        c_provenance = "scan-lower-bound"
        scan_path = os.path.join(outdir, "scan.csv")
        write_scan_csv(results, scan_path)
        artifacts.append(scan_path)

    trace = entropy_density_sequence(nu.source, mu.source, int(cfg["n_max"]))
    trace_path = os.path.join(outdir, "entropy_trace.csv")
    write_trace_csv(trace, trace_path)
    artifacts.append(trace_path)

    radius = int(cfg["radius"])
    sol = distance_lp(mu.source, nu.source, radius)
    sol_path = os.path.join(outdir, f"solution_r{radius}.json")
    save_solution(sol, sol_path)
    artifacts.append(sol_path)

    window = cube_window(radius, mu.source.dimension)
    report = quantitative_bound_check(
        trace.liminf_estimate,
        sol.value,
        constant,
        tolerance=tolerance,
        witness=sol.witness,
        nu=nu.source.marginal(window),
        mu=mu.source.marginal(window),
        s_provenance=trace.source_flags,
        d_provenance="exact",
    )
    note = f"C={constant} ({c_provenance})"
    if report.beta_star is not None:
        note += f", mean gap {report.mean_gap:.6f}, optimal tilt {report.beta_star:.6f}"
    records.append(
        CheckRecord(
            name="entropy-dominates-squared-distance",
            passed=report.passed,
            lhs=report.s_estimate,
            rhs=report.rhs,
            margin=report.margin,
            tolerance=report.tolerance,
            provenance=f"s:{report.s_provenance}, d:{report.d_provenance}, C:{c_provenance}",
            note=note,
        )
    )
    return records, artifacts


def _run_glauber(cfg, outdir):
    bundle = build_model(cfg["model"])
    if bundle.potential is None:
        raise ConfigError(["model: glauber needs a potential-backed model"])
    side = bundle.side if bundle.side is not None else int(cfg["L"])
    trace = convergence_experiment(
        bundle.potential,
        side,
        cfg.get("initial_law", [0.5] * bundle.potential.alphabet.size),
        int(cfg["t_max"]),
        int(cfg["radius"]),
        int(cfg["sample_count"]),
        int(cfg["seed"]),
        bundle.source,
        checkpoints=cfg.get("checkpoints"),
    )
    path = os.path.join(outdir, "convergence.csv")
    write_convergence_csv(trace, path)

    balance = detailed_balance_check(bundle.potential, int(cfg["balance_side"]))
    first, last = trace.points[0], trace.points[-1]
    ratio = float(cfg["ratio"])
    se = float(np.hypot(last.distance_se, ratio * first.distance_se))
    records = [
        CheckRecord(
            name="heat-bath-detailed-balance",
            passed=balance.passed,
            lhs=float(balance.max_violation),
            rhs=0.0,
            tolerance=balance.tolerance,
            note=f"torus side {int(cfg['balance_side'])}",
        ),
        CheckRecord(
            name="distance-contracts-along-sweeps",
            passed=bool(last.distance <= ratio * first.distance + 3.0 * se),
            lhs=float(last.distance),
            rhs=float(ratio * first.distance),
            margin=float(ratio * first.distance + 3.0 * se - last.distance),
            tolerance=3.0 * se,
            provenance=trace.provenance,
            stderr=se,
            note=f"{trace.sample_count} replicas, sweeps 0..{last.sweep}",
        ),
    ]
    if trace.undersampled:
        records.append(
            CheckRecord(
                name="sampling-coverage-warning",
                passed=True,
                provenance="sampled",
                note="some window configurations expect fewer than 10 hits",
            )
        )
    return records, [path]


def _run_decimation(cfg, outdir):
    rows = []
    worst = 0.0
    for j in cfg["couplings"]:
        j = float(j)
        renorm = decimate_ising_1d(j)
        closed = float(np.arctanh(np.tanh(j) ** 2))
        worst = max(worst, abs(renorm - closed))
        rows.append((j, renorm, closed))
    path = os.path.join(outdir, "decimation.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("coupling,renormalized,closed_form\n")
        for j, renorm, closed in rows:
            fh.write(f"{float(j)!r},{float(renorm)!r},{float(closed)!r}\n")
    records = [
        CheckRecord(
            name="decimated-coupling-matches-closed-form",
            passed=bool(worst <= 1e-10),
            lhs=float(worst),
            rhs=0.0,
            tolerance=1e-10,
        )
    ]
    contract_ok = True
    details = []
    for j_nu, j_mu in cfg["pairs"]:
        before = ising_entropy_density_exact((float(j_nu), 0.0), (float(j_mu), 0.0))
        after = ising_entropy_density_exact(
            (decimate_ising_1d(float(j_nu)), 0.0), (decimate_ising_1d(float(j_mu)), 0.0)
        )
        contract_ok = contract_ok and after <= before + 1e-9
        details.append(f"({j_nu},{j_mu}): {after:.6f}<={before:.6f}")
    if cfg["pairs"]:
        records.append(
            CheckRecord(
                name="entropy-density-contracts-under-decimation",
                passed=bool(contract_ok),
                tolerance=1e-9,
                note="; ".join(details),
            )
        )
    return records, [path]


def _run_axioms(cfg, outdir):
    rule_name = cfg.get("rule", "diameter")
    fam_cfg = cfg["functions"]
    if rule_name == "metric-quotient":
        q = fam_cfg["alphabet_size"]
        psi = np.asarray(cfg["psi"], dtype=float) if "psi" in cfg else 1.0 - np.eye(q)
        rule = MetricQuotientRule(psi)
    else:
        rule = DiameterRule()
    family = build_family(fam_cfg)
    rng = np.random.default_rng(fam_cfg["seed"] + 1)
    report = axiom_check(rule, family, rng=rng)
    records = [
        CheckRecord(name=f"axiom-{res.name}", passed=res.passed, note=res.witness)
        for res in report.results
    ]
    return records, []


_RUNNERS = {
    "oscillation": _run_oscillation,
    "young": _run_young,
    "gcb-scan": _run_gcb_scan,
    "entropy-density": _run_entropy_density,
    "distance": _run_distance,
    "theorem-check": _run_theorem_check,
    "glauber": _run_glauber,
    "decimation": _run_decimation,
    "axioms": _run_axioms,
}


# -- reports and manifests -------------------------------------------------------------

def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def run_experiment(data: dict, output_dir: str | None = None) -> ExperimentReport:
    errors = validate_config(data)
    if errors:
        raise ConfigError(errors)
    cfg = normalize_config(data)
    outdir = output_dir or cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    records, artifacts = _RUNNERS[cfg["kind"]](cfg, outdir)
    report = ExperimentReport(
        config=cfg,
        records=records,
        artifacts=[os.path.relpath(p, outdir) for p in artifacts],
        passed=all(r.passed for r in records),
    )
    report_path = os.path.join(outdir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "config": report.config,
                "records": [asdict(r) for r in report.records],
                "artifacts": report.artifacts,
                "passed": report.passed,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    emit_manifest(report, outdir)
    return report


def emit_manifest(report: ExperimentReport, outdir: str) -> str:
    """Write manifest.json: config hash, code version, seeds, artifact checksums."""
    from datetime import datetime, timezone

    manifest = {
        "config_hash": config_hash(report.config),
        "version": __version__,
        "seed": report.config.get("seed"),
        "artifacts": {
            rel: _file_sha256(os.path.join(outdir, rel)) for rel in sorted(report.artifacts)
        },
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _print_records(records) -> None:
    for r in records:
        status = "PASS" if r.passed else "FAIL"
        parts = [f"[{status}] {r.name}"]
        if r.lhs is not None:
            parts.append(f"lhs={r.lhs:.9g}")
        if r.rhs is not None:
            parts.append(f"rhs={r.rhs:.9g}")
        if r.margin is not None:
            parts.append(f"margin={r.margin:.3g}")
        if r.tolerance is not None:
            parts.append(f"tol={r.tolerance:.3g}")
        if r.stderr is not None:
            parts.append(f"se={r.stderr:.3g}")
        parts.append(f"[{r.provenance}]")
        if r.note:
            parts.append(f"({r.note})")
        print("  " + " ".join(parts))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gibbslab", description="spin-system laboratory experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a TOML experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None, help="override the configured output dir")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    p_rep = sub.add_parser("report", help="pretty-print a written report")
    p_rep.add_argument("directory")
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            data = load_config(args.config)
        except Exception as exc:
            print(f"error: cannot parse {args.config}: {exc}", file=sys.stderr)
            return 2
        errors = validate_config(data)
        if errors:
            for e in errors:
                print(f"invalid: {e}", file=sys.stderr)
            return 2
        print("ok")
        return 0

    if args.command == "run":
        try:
            data = load_config(args.config)
        except Exception as exc:
            print(f"error: cannot parse {args.config}: {exc}", file=sys.stderr)
            return 2
        try:
            report = run_experiment(data, output_dir=args.output_dir)
        except ConfigError as exc:
            for e in exc.errors:
                print(f"invalid: {e}", file=sys.stderr)
            return 2
        except TabulationCapError as exc:
            print(f"cap: {exc}", file=sys.stderr)
            return 2
        outdir = args.output_dir or report.config["output_dir"]
        print(f"{report.config['kind']} -> {outdir}")
        _print_records(report.records)
        print(f"report: {os.path.join(outdir, 'report.json')}")
        return 0 if report.passed else 1

    if args.command == "report":
        path = os.path.join(args.directory, "report.json")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except OSError as exc:
            print(f"error: cannot read {path}: {exc}", file=sys.stderr)
            return 2
        print(f"{payload['config'].get('kind')} (passed={payload['passed']})")
        _print_records([CheckRecord(**r) for r in payload["records"]])
        for rel in payload["artifacts"]:
            print(f"  artifact: {rel}")
        manifest_path = os.path.join(args.directory, "manifest.json")
        if os.path.exists(manifest_path):
            with open(manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
            print(f"  manifest: config {manifest['config_hash'][:12]}, version {manifest['version']}")
        return 0 if payload["passed"] else 1

    return 2


def main_entry() -> None:
    sys.exit(main())
