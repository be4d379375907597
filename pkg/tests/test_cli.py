"""End-to-end command-line contract: exit codes, JSON shapes, determinism."""

import json
import os
import subprocess
import sys

import jsonschema
import pytest

from conftest import fixture_path

SCHEMAS = os.path.join(os.path.dirname(__file__), "..", "src", "probterm", "schemas")


def probterm(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "probterm.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def validate(doc, schema_name):
    with open(os.path.join(SCHEMAS, schema_name)) as f:
        jsonschema.validate(doc, json.load(f))


# -- parse ----------------------------------------------------------------------


def test_parse_ok(tmp_path):
    out = tmp_path / "fig1a.pcfg.json"
    r = probterm("parse", fixture_path("fig1a.prob"), "-o", str(out), "--json")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    validate(doc, "parse-result.json")
    assert doc["ok"] and os.path.exists(out)


def test_parse_syntax_error_exit_2(tmp_path):
    bad = tmp_path / "bad.prob"
    bad.write_text("while x >= 0 do x := od")
    r = probterm("parse", str(bad), "-o", str(tmp_path / "x.json"))
    assert r.returncode == 2
    assert "expected" in r.stdout or "expected" in r.stderr


def test_parse_emit_dot(tmp_path):
    out = tmp_path / "p.json"
    dot = tmp_path / "p.dot"
    r = probterm("parse", fixture_path("fig1b.prob"), "-o", str(out),
                 "--emit-dot", str(dot))
    assert r.returncode == 0
    text = dot.read_text()
    assert text.startswith("digraph") and "l0" in text


# -- synthesize -------------------------------------------------------------------


def test_synthesize_bsp_exit_0(tmp_path):
    out = tmp_path / "cert.json"
    r = probterm("synthesize", fixture_path("fig2right.pcfg.json"),
                 "-i", fixture_path("fig1b.inv.json"),
                 "--mode", "bsp", "-o", str(out), "--json")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    validate(doc, "synthesize-result.json")
    assert doc["outcome"] == "certificate" and doc["dimension"] <= 3
    # auto mode picks the bounded-support path for this program
    r2 = probterm("synthesize", fixture_path("fig2right.pcfg.json"),
                  "-i", fixture_path("fig1b.inv.json"),
                  "--mode", "auto", "-o", str(tmp_path / "cert2.json"), "--json")
    assert json.loads(r2.stdout)["mode"] == "bsp"


def test_synthesize_general_exit_0(tmp_path):
    out = tmp_path / "cert.json"
    r = probterm("synthesize", fixture_path("fig2left.pcfg.json"),
                 "-i", fixture_path("fig1a.inv.json"),
                 "--mode", "general", "-o", str(out), "--json")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    validate(doc, "synthesize-result.json")
    assert doc["outcome"] == "certificate"
    # auto mode routes unbounded sampling to the general path
    r2 = probterm("synthesize", fixture_path("fig2left.pcfg.json"),
                  "-i", fixture_path("fig1a.inv.json"),
                  "--mode", "auto", "-o", str(tmp_path / "c2.json"), "--json")
    assert json.loads(r2.stdout)["mode"] == "general"


def test_synthesize_negative_exit_1(tmp_path):
    src = tmp_path / "div.pcfg.json"
    r0 = probterm("parse", fixture_path("diverge_inc.prob"), "-o", str(src))
    assert r0.returncode == 0
    r = probterm("synthesize", str(src), "--mode", "bsp",
                 "-o", str(tmp_path / "c.json"), "--json")
    assert r.returncode == 1
    doc = json.loads(r.stdout)
    validate(doc, "synthesize-result.json")
    assert "no LinGLexRSM map" in doc["detail"]

    walk = tmp_path / "walk.pcfg.json"
    probterm("parse", fixture_path("zero_drift_walk.prob"), "-o", str(walk))
    r2 = probterm("synthesize", str(walk), "--mode", "general",
                  "-o", str(tmp_path / "c2.json"), "--json")
    assert r2.returncode == 1
    assert "UNKNOWN" in json.loads(r2.stdout)["detail"]


def test_synthesize_mode_mismatch_exit_3(tmp_path):
    r = probterm("synthesize", fixture_path("fig2left.pcfg.json"),
                 "--mode", "bsp", "-o", str(tmp_path / "c.json"))
    assert r.returncode == 3


def test_synthesize_progress_stream(tmp_path):
    r = probterm("synthesize", fixture_path("fig2right.pcfg.json"),
                 "-i", fixture_path("fig1b.inv.json"), "--mode", "bsp",
                 "-o", str(tmp_path / "c.json"), "--progress")
    assert r.returncode == 0
    records = [json.loads(line) for line in r.stderr.splitlines() if line.strip()]
    assert len(records) == 3
    assert [rec["iteration"] for rec in records] == [1, 2, 3]
    assert all("ranked" in rec and rec["lp_unknowns"] > 0 for rec in records)


def test_simulate_trace_outputs(tmp_path):
    jl = tmp_path / "runs.jsonl"
    cs = tmp_path / "runs.csv"
    r = probterm("simulate", fixture_path("fig2right.pcfg.json"),
                 "--init", "x=1, y=1", "--runs", "10", "--cap", "10000",
                 "--seed", "2", "--trace-out", str(jl), "--csv", str(cs))
    assert r.returncode == 0
    lines = jl.read_text().splitlines()
    assert len(lines) == 10
    assert all(json.loads(l)["terminated"] for l in lines)
    rows = cs.read_text().splitlines()
    assert rows[0] == "run,terminated,steps" and len(rows) == 11


def test_synthesize_dump_lp(tmp_path):
    r = probterm("synthesize", fixture_path("fig2right.pcfg.json"),
                 "-i", fixture_path("fig1b.inv.json"), "--mode", "bsp",
                 "-o", str(tmp_path / "c.json"), "--dump-lp", str(tmp_path / "lps"))
    assert r.returncode == 0
    text = (tmp_path / "lps" / "iteration1.lp").read_text()
    assert text.startswith("Maximize") and "Subject To" in text


# -- check ------------------------------------------------------------------------


def test_check_example3_exit_0():
    r = probterm("check", fixture_path("fig2right.pcfg.json"),
                 fixture_path("example3.cert.json"),
                 "-i", fixture_path("fig1b.inv.json"), "--json")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    validate(doc, "check-result.json")
    assert doc["verdict"] == "accepted"


def test_check_example4_exit_0():
    r = probterm("check", fixture_path("fig2left.pcfg.json"),
                 fixture_path("example4.cert.json"),
                 "-i", fixture_path("fig1a.inv.json"), "--json")
    assert r.returncode == 0
    doc = json.loads(r.stdout)
    assert doc["mode"] == "GeneralSound"
    assert any(c["condition"] == "sampling-coeff-zero" for c in doc["conditions"])


def test_check_mutated_certificate_exit_1(tmp_path):
    with open(fixture_path("example3.cert.json")) as f:
        doc = json.load(f)
    doc["components"]["l1"][1]["const"] = "6"  # x+8 -> x+6
    bad = tmp_path / "mutated.json"
    bad.write_text(json.dumps(doc))
    r = probterm("check", fixture_path("fig2right.pcfg.json"), str(bad),
                 "-i", fixture_path("fig1b.inv.json"), "--json")
    assert r.returncode == 1
    out = json.loads(r.stdout)
    validate(out, "check-result.json")
    assert out["verdict"] == "rejected"
    assert any(c["status"] == "violated" and "counterexample" in c
               for c in out["conditions"])


def test_check_dimension_mismatch_exit_3(tmp_path):
    with open(fixture_path("example3.cert.json")) as f:
        doc = json.load(f)
    doc["levels"]["t0"] = 9
    bad = tmp_path / "structural.json"
    bad.write_text(json.dumps(doc))
    r = probterm("check", fixture_path("fig2right.pcfg.json"), str(bad),
                 "-i", fixture_path("fig1b.inv.json"))
    assert r.returncode == 3


# -- simulate ----------------------------------------------------------------------


def test_simulate_exit_0_and_schema():
    r = probterm("simulate", fixture_path("fig2right.pcfg.json"),
                 "--init", "x=3, y=3", "--runs", "200", "--cap", "100000",
                 "--seed", "11", "--json")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    validate(doc, "simulate-result.json")
    assert doc["fraction"] >= 0.99


def test_simulate_seed_repeat_identical():
    args = ("simulate", fixture_path("fig2right.pcfg.json"),
            "--init", "x=3, y=3", "--runs", "50", "--cap", "10000",
            "--seed", "4", "--json")
    assert probterm(*args).stdout == probterm(*args).stdout


def test_simulate_counterexample_builtin():
    r = probterm("simulate", "--counterexample-builtin", "--runs", "100000",
                 "--seed", "8", "--json")
    assert r.returncode == 0
    doc = json.loads(r.stdout)
    validate(doc, "simulate-result.json")
    assert abs(doc["empirical"] - doc["analytic"]) < 0.02


def test_simulate_without_pcfg_is_an_error():
    r = probterm("simulate")
    assert r.returncode == 3


def test_simulate_threads_same_answer():
    base = probterm("simulate", fixture_path("fig2right.pcfg.json"),
                    "--init", "x=2, y=2", "--runs", "40", "--cap", "10000",
                    "--seed", "3", "--json")
    multi = probterm("simulate", fixture_path("fig2right.pcfg.json"),
                     "--init", "x=2, y=2", "--runs", "40", "--cap", "10000",
                     "--seed", "3", "--threads", "2", "--json")
    assert json.loads(base.stdout) == json.loads(multi.stdout)
