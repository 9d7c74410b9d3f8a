"""Runs simulate -> map -> test in both modes and validates each report against the schema."""

import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def run(cli, *args):
    subprocess.run([cli, *args], check=True, stdout=subprocess.DEVNULL)


def main():
    cli, schema_path, work = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    out = ["--out", str(work)]
    run(cli, "simulate", *out)
    run(cli, "map", *out)

    failures = 0
    for mode in ("pnp", "buqo"):
        run(cli, "test", "--mode", mode, *out)
        report = json.loads((work / "report.json").read_text())
        errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
        for e in errors:
            print(f"{mode}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += len(errors)
        print(f"{mode}: {'valid' if not errors else 'INVALID'}")

    # The schema must reject a report whose decision is not one of the two outcomes.
    report["decision"] = "maybe"
    if validator.is_valid(report):
        print("schema accepted a malformed decision")
        failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
