"""End-to-end runner checks: validation, artifacts, manifests, exit codes."""

import hashlib
import json
import os

import pytest

from gibbslab.cli import main


def run_cli(*argv):
    return main(list(argv))


def write_config(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# ---------------------------------------------------------------- validation

def test_validate_accepts_a_complete_config(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "deci.toml",
        f"""
kind = "decimation"
output_dir = "{tmp_path}/out"
couplings = [0.0, 0.5, 1.0]
pairs = [[0.2, 0.5]]
""",
    )
    assert run_cli("validate", cfg) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_rejects_missing_seed_for_glauber(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "glauber.toml",
        f"""
kind = "glauber"
output_dir = "{tmp_path}/out"
t_max = 2
radius = 1
sample_count = 50
L = 8

[model]
name = "ising1d"
J = 0.3
h = 0.0
""",
    )
    assert run_cli("validate", cfg) == 2
    err = capsys.readouterr().err
    assert "seed" in err


def test_validate_rejects_unknown_kind(tmp_path, capsys):
    cfg = write_config(tmp_path, "bad.toml", 'kind = "frobnicate"\noutput_dir = "x"\n')
    assert run_cli("validate", cfg) == 2
    assert "kind" in capsys.readouterr().err


def test_validate_rejects_bad_toml(tmp_path):
    cfg = write_config(tmp_path, "broken.toml", "kind = [unterminated\n")
    assert run_cli("validate", cfg) == 2


def test_run_refuses_invalid_config_without_writing(tmp_path):
    out = tmp_path / "never"
    cfg = write_config(
        tmp_path,
        "glauber.toml",
        f"""
kind = "glauber"
output_dir = "{out}"
t_max = 2
radius = 1
sample_count = 50
L = 8

[model]
name = "ising1d"
J = 0.3
h = 0.0
""",
    )
    assert run_cli("run", cfg) == 2
    assert not out.exists()


def test_validate_flags_cap_violations(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "huge.toml",
        f"""
kind = "distance"
output_dir = "{tmp_path}/out"
radii = [40]

[model]
name = "product"
p = 0.5

[model_prime]
name = "product"
p = 0.25
""",
    )
    assert run_cli("validate", cfg) == 2
    assert "radii" in capsys.readouterr().err


# ---------------------------------------------------------------- theorem pipeline

THEOREM_TOML = """
kind = "theorem-check"
output_dir = "{out}"
radius = 1
n_max = 3
constant = 0.25

[model]
name = "product"
p = 0.25

[model_prime]
name = "product"
p = 0.5
"""


def test_theorem_check_pipeline(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, "thm.toml", THEOREM_TOML.format(out=out))
    assert run_cli("run", cfg) == 0
    stdout = capsys.readouterr().out
    assert "PASS" in stdout
    payload = json.loads((out / "report.json").read_text())
    assert payload["passed"]
    rec = next(r for r in payload["records"] if r["name"] == "entropy-dominates-squared-distance")
    assert rec["lhs"] == pytest.approx(0.143841, abs=1e-6)
    assert rec["rhs"] == pytest.approx(0.125, abs=1e-9)
    assert rec["margin"] == pytest.approx(0.018841, abs=1e-6)
    assert "C:given" in rec["provenance"]


def test_reports_echo_reruns_byte_identically(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg = write_config(tmp_path, "thm.toml", THEOREM_TOML.format(out=out1))
    assert run_cli("run", cfg) == 0
    # re-run the config echoed in the first report into a second directory
    echoed = json.loads((out1 / "report.json").read_text())["config"]
    from gibbslab.cli import run_experiment

    run_experiment(echoed, output_dir=str(out2))
    names = sorted(p.name for p in out1.iterdir())
    assert names == sorted(p.name for p in out2.iterdir())
    for name in names:
        if name == "manifest.json":
            continue  # differs only in the timestamp, checked below
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("created_at"), m2.pop("created_at")
    assert m1 == m2


def test_manifest_checksums_match_artifacts(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, "thm.toml", THEOREM_TOML.format(out=out))
    assert run_cli("run", cfg) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["artifacts"], "expected at least one artifact"
    for rel, digest in manifest["artifacts"].items():
        assert sha256(out / rel) == digest
    assert manifest["seed"] == 0
    assert manifest["version"]


def test_failing_inequality_exits_one(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "fail.toml",
        f"""
kind = "theorem-check"
output_dir = "{out}"
radius = 0
n_max = 2
constant = 0.01

[model]
name = "product"
p = 0.25

[model_prime]
name = "product"
p = 0.5
""",
    )
    assert run_cli("run", cfg) == 1
    payload = json.loads((out / "report.json").read_text())
    assert not payload["passed"]


def test_report_subcommand_round_trip(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, "thm.toml", THEOREM_TOML.format(out=out))
    run_cli("run", cfg)
    capsys.readouterr()
    assert run_cli("report", str(out)) == 0
    stdout = capsys.readouterr().out
    assert "theorem-check" in stdout
    assert "entropy-dominates-squared-distance" in stdout


def test_report_on_missing_directory(tmp_path):
    assert run_cli("report", str(tmp_path / "nope")) == 2


# ---------------------------------------------------------------- other scenarios

def test_distance_scenario_writes_solutions(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "dist.toml",
        f"""
kind = "distance"
output_dir = "{out}"
radii = [0, 1, 2]

[model]
name = "product"
p = 0.5

[model_prime]
name = "product"
p = 0.25
""",
    )
    assert run_cli("run", cfg) == 0
    lines = (out / "distances.csv").read_text().splitlines()
    assert lines[0] == "radius,distance,lp_iterations"
    values = [float(line.split(",")[1]) for line in lines[1:]]
    assert values == pytest.approx([0.25, 0.25, 0.25], abs=1e-8)
    sol = json.loads((out / "solution_r1.json").read_text())
    assert sol["radius"] == 1 and "witness_function" in sol


def test_gcb_scan_scenario(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "scan.toml",
        f"""
kind = "gcb-scan"
output_dir = "{out}"
seed = 12
reference_constant = 0.25

[model]
name = "product"
p = 0.5

[functions]
count = 25
max_sites = 2
""",
    )
    assert run_cli("run", cfg) == 0
    payload = json.loads((out / "report.json").read_text())
    names = {r["name"] for r in payload["records"]}
    assert "reference-envelope-dominates" in names
    assert payload["passed"]
    summary = json.loads((out / "scan_summary.json").read_text())
    assert summary["empirical_constant"] <= 0.25 + 1e-6


def test_entropy_density_scenario_with_closed_form(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "ent.toml",
        f"""
kind = "entropy-density"
output_dir = "{out}"
n_max = 6

[model]
name = "ising1d"
J = 0.3
h = 0.2

[model_prime]
name = "ising1d"
J = 0.2
h = 0.0
""",
    )
    assert run_cli("run", cfg) == 0
    payload = json.loads((out / "report.json").read_text())
    rec = next(r for r in payload["records"] if r["name"] == "trace-matches-closed-form")
    assert rec["passed"]
    header = (out / "entropy_trace.csv").read_text().splitlines()[0]
    assert header == "n,volume,s_window_nats,per_site_nats,source_flags"


def test_glauber_scenario_runs_and_contracts(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "gl.toml",
        f"""
kind = "glauber"
output_dir = "{out}"
seed = 7
t_max = 6
radius = 1
sample_count = 400
L = 32

[model]
name = "ising1d"
J = 0.4
h = 0.0
""",
    )
    assert run_cli("run", cfg) == 0
    payload = json.loads((out / "report.json").read_text())
    names = {r["name"] for r in payload["records"]}
    assert "heat-bath-detailed-balance" in names
    assert "distance-contracts-along-sweeps" in names
    assert payload["passed"]
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "t,d_r,d_r_stderr,entropy_per_site,entropy_stderr,samples"


def test_young_scenario_on_a_seeded_family(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "young.toml",
        f"""
kind = "young"
output_dir = "{out}"
seed = 3
translate_radius = 1

[functions]
count = 40
max_sites = 2
""",
    )
    assert run_cli("run", cfg) == 0
    lines = (out / "young.csv").read_text().splitlines()
    assert len(lines) == 41
    assert all(line.endswith("True") for line in lines[1:])


def test_axioms_scenario_both_rules(tmp_path):
    for rule in ("diameter", "metric-quotient"):
        out = tmp_path / f"out-{rule}"
        cfg = write_config(
            tmp_path,
            f"ax-{rule}.toml",
            f"""
kind = "axioms"
output_dir = "{out}"
seed = 5
rule = "{rule}"

[functions]
count = 20
max_sites = 2
""",
        )
        assert run_cli("run", cfg) == 0
        payload = json.loads((out / "report.json").read_text())
        assert payload["passed"]
        assert len(payload["records"]) == 4


def test_oscillation_scenario_from_a_function_file(tmp_path):
    from gibbslab.funcspace import save_function
    from gibbslab.lattice import SpinAlphabet, Window
    from gibbslab.funcspace import LocalFunction

    w = Window(1, ((0,), (1,)))
    f = LocalFunction.from_callable(SpinAlphabet(2), w, lambda v: float(v[0] + 2 * v[1]))
    fpath = tmp_path / "f.json"
    save_function(f, fpath)
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        "osc.toml",
        f"""
kind = "oscillation"
output_dir = "{out}"
function_file = "{fpath}"
""",
    )
    assert run_cli("run", cfg) == 0
    lines = (out / "oscillations.csv").read_text().splitlines()
    assert lines[0] == "function_id,site,oscillation"
    assert len(lines) == 3
