"""Run each CLI command once and validate its JSON output against the shipped schemas."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource

fcomb, schema_dir, catalog = sys.argv[1], pathlib.Path(sys.argv[2]), sys.argv[3]

schemas = {p.name: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
registry = Registry().with_resources(
    (name, Resource.from_contents(s)) for name, s in schemas.items())


def check(schema, path):
    doc = json.loads(pathlib.Path(path).read_text())
    jsonschema.Draft7Validator(schemas[schema], registry=registry).validate(doc)
    print(f"ok  {schema:28s} {pathlib.Path(path).name}")


def run(*args):
    subprocess.run([fcomb, *args], check=True)


with tempfile.TemporaryDirectory() as tmp:
    t = pathlib.Path(tmp)
    run("simulate", "--phi1", "0.4", "--phi2", "-0.4", "--unit-variance", "--n", "600",
        "--seed", "1", "--out", str(t / "series.json"))
    check("series.schema.json", t / "series.json")
    run("simulate", "--phi1", "0.4", "--phi2", "-0.4", "--unit-variance", "--n", "600",
        "--seed", "1", "--out", str(t / "y.csv"))
    for method in ("one-step", "two-step", "equal"):
        run("estimate", "--series", str(t / "y.csv"), "--loss", "log", "--method", method,
            "--out", str(t / f"fit-{method}.json"))
        check("fit_result.schema.json", t / f"fit-{method}.json")
    for cv in ("standard", "simulated"):
        run("test", "--series", str(t / "y.csv"), "--loss", "msfe", "--cv", cv, "--draws", "2000",
            "--cv-model-out", str(t / "model.json"), "--out", str(t / f"test-{cv}.json"))
        check("test_outcome.schema.json", t / f"test-{cv}.json")
    check("cv_model.schema.json", t / "model.json")
    run("test", "--series", str(t / "y.csv"), "--loss", "log", "--cv", "ttest",
        "--bench", "fixed:0.5", "--out", str(t / "test-ttest.json"))
    check("test_outcome.schema.json", t / "test-ttest.json")
    run("find-dgp", "--loss", "msfe", "--eta-star", "0.25", "--out", str(t / "dgp.json"))
    check("dgp_solution.schema.json", t / "dgp.json")
    check("dgp_catalog.schema.json", catalog)
    run("mc-curve", "--eta-star", "0.25", "--catalog", catalog, "--loss", "msfe",
        "--sizes", "200,400", "--reps", "20", "--out", str(t / "curve.json"))
    check("rejection_curve.schema.json", t / "curve.json")
    run("mc-table", "--loss", "msfe", "--sizes", "200", "--reps", "10", "--draws", "1000",
        "--out", str(t / "table.json"))
    check("size_power_table.schema.json", t / "table.json")

    bad = subprocess.run([fcomb, "estimate", "--series", str(t / "missing.csv"), "--loss", "msfe"],
                         capture_output=True)
    assert bad.returncode == 2, bad.returncode
    print("ok  invalid input exits with status 2")
