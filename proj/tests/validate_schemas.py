"""Runs the CLI in every output mode and validates the JSON against docs/schema."""
import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def load(path):
    with open(path) as f:
        return json.load(f)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--schemas", required=True, type=pathlib.Path)
    ap.add_argument("--config", required=True, type=pathlib.Path)
    args = ap.parse_args()
    schema = {name: load(args.schemas / f"{name}.schema.json")
              for name in ("trial", "lower_bound", "weights_sidecar", "locked_config")}
    for s in schema.values():
        jsonschema.Draft202012Validator.check_schema(s)

    checked = 0

    def check(doc, name, where):
        nonlocal checked
        try:
            jsonschema.validate(doc, schema[name], cls=jsonschema.Draft202012Validator)
        except jsonschema.ValidationError as e:
            sys.exit(f"{where}: {e.message}")
        checked += 1

    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp)

        def run(*extra, code=0):
            r = subprocess.run([args.cli, *extra], cwd=tmp, capture_output=True, text=True)
            if r.returncode != code:
                sys.exit(f"{extra}: exit {r.returncode}\n{r.stderr}")

        run("--mode", "topology", "--n", "20", "--min-edge-weight", "0.05", "--model", "noiseless",
            "--c-thr", "0.25", "--trials", "2", "--out", "ok", "--timing")
        # Noisy and far too dense: failure records with traces.
        run("--mode", "topology", "--n", "48", "--min-edge-weight", "0.01", "--trials", "2", "--out", "bad")
        run("--mode", "weights", "--n", "40", "--min-edge-weight", "0.05", "--trials", "2", "--expectation",
            "--out", "w", "--tree-out", "w.nwk")
        run("--mode", "weights", "--n", "40", "--min-edge-weight", "0.05", "--trials", "2",
            "--topology", "reconstruct", "--out", "wr")
        run("--mode", "lower-bound", "--n", "500", "--out", "lb")
        run("--mode", "calibrate", "--n", "10", "--model", "noiseless", "--weight-grid", "0.1",
            "--c-thr-grid", "0.25", "--target", "1", "--out", "cal")

        for name in ("ok", "bad", "w", "wr"):
            for i, line in enumerate((out / f"{name}.jsonl").read_text().splitlines()):
                check(json.loads(line), "trial", f"{name}.jsonl:{i + 1}")
        check(load(out / "w.nwk.json"), "weights_sidecar", "w.nwk.json")
        check(load(out / "lb.json"), "lower_bound", "lb.json")
        check(load(out / "cal.locked.json"), "locked_config", "cal.locked.json")

    for path in sorted(args.config.glob("*.json")):
        check(load(path), "locked_config", str(path))
    print(f"{checked} documents valid")


if __name__ == "__main__":
    main()
