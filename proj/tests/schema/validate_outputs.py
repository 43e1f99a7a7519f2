#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Runs every fcl subcommand on a tiny synthetic setup and validates each
emitted JSON, JSONL and CSV file against the schemas in schemas/."""
import argparse
import csv
import json
import pathlib
import re
import struct
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource
from referencing.jsonschema import DRAFT202012


def load_schemas(root):
    schemas = {p.name: json.loads(p.read_text()) for p in root.glob("*.schema.json")}
    registry = Registry().with_resources(
        (name, Resource(contents=s, specification=DRAFT202012))
        for name, s in schemas.items() if name != "csv.schema.json")
    return schemas, registry


def check_json(doc, schema, registry, where):
    validator = jsonschema.Draft202012Validator(schema, registry=registry)
    errors = sorted(validator.iter_errors(doc), key=lambda e: e.path)
    for e in errors:
        print(f"FAIL {where}: {'/'.join(map(str, e.path))}: {e.message}")
    return not errors


CELL = {
    "integer": lambda s: re.fullmatch(r"-?[0-9]+", s) is not None,
    "number": lambda s: _is_number(s),
    "optional-number": lambda s: s == "" or _is_number(s),
    "bool01": lambda s: s in ("0", "1"),
    "hex64": lambda s: re.fullmatch(r"[0-9a-f]{64}", s) is not None,
    "string": lambda s: True,
}


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def check_csv(path, spec):
    rows = list(csv.reader(path.open()))
    ok = True
    if not rows:
        print(f"FAIL {path}: empty")
        return False
    header, body = rows[0], rows[1:]
    if "columns" in spec:
        names = [c[0] for c in spec["columns"]]
        types = [c[1] for c in spec["columns"]]
        if header != names:
            print(f"FAIL {path}: header {header} != {names}")
            return False
    else:
        dyn = spec["dynamic"]
        if header[0] != dyn["first"][0]:
            print(f"FAIL {path}: first column {header[0]}")
            return False
        for name in header[1:]:
            if not re.fullmatch(dyn["rest_pattern"], name):
                print(f"FAIL {path}: column name {name}")
                ok = False
        types = [dyn["first"][1]] + [dyn["rest"]] * (len(header) - 1)
    for n, row in enumerate(body, start=2):
        if len(row) != len(types):
            print(f"FAIL {path}:{n}: {len(row)} cells, expected {len(types)}")
            ok = False
            continue
        for cell, kind, name in zip(row, types, header):
            if not CELL[kind](cell):
                print(f"FAIL {path}:{n}: column {name} value {cell!r} is not {kind}")
                ok = False
    return ok


def run(cli, *args, expect=0):
    r = subprocess.run([cli, *map(str, args)], capture_output=True, text=True)
    if r.returncode != expect:
        print(f"FAIL fcl {' '.join(map(str, args))}: exit {r.returncode}\n{r.stderr}")
        sys.exit(1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--schemas", required=True, type=pathlib.Path)
    args = ap.parse_args()
    schemas, registry = load_schemas(args.schemas)
    csv_spec = schemas["csv.schema.json"]

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        run(args.cli, "synth", "-o", tmp / "data", "--train", 160, "--val", 60, "--seed", 3)
        cfg = {
            "data": {"train": {"format": "cifar10_bin", "paths": [str(tmp / "data/train.bin")]},
                     "val": {"format": "cifar10_bin", "paths": [str(tmp / "data/val.bin")]}},
            "model": {"widths": [8, 16], "groups": 4},
            "curriculum": "etpp", "budget": 2, "batch": 16, "eval_every": 0.5, "checkpoint_every": 1,
            "replay": {"n_buffer": 1},
            "search": {"algorithm": "sequential", "stages": 3, "candidates": [16, 24, 32], "baseline_epochs": 1.5},
            "probe": {"fractions": [0.25, 1.0], "low_radii": [4, 8], "high_radii": [2, 6],
                      "extra": [{"shape": "square", "mode": "low_pass", "size": 32}]},
        }
        (tmp / "cfg.json").write_text(json.dumps(cfg))
        ok = check_json(cfg, schemas["run_config.schema.json"], registry, "input config")

        run(args.cli, "--deterministic", "train", "-c", tmp / "cfg.json", "-o", tmp / "etpp")
        run(args.cli, "train", "-c", tmp / "cfg.json", "-o", tmp / "base", "--set", "curriculum=baseline")
        run(args.cli, "train", "-c", tmp / "cfg.json", "-o", tmp / "div", "--set", "lr.base_lr=1e30",
            "--set", "lr.lr_cap=1e31", expect=4)
        run(args.cli, "search", "-c", tmp / "cfg.json", "-o", tmp / "seq")
        run(args.cli, "search", "-c", tmp / "cfg.json", "-o", tmp / "greedy", "--set",
            'search={"algorithm":"greedy","stages":3,"candidates":[16,32],"epochs":0.5}')
        run(args.cli, "probe", "-c", tmp / "cfg.json", "-o", tmp / "probe", "--set", "curriculum=baseline")
        run(args.cli, "report", tmp / "base", tmp / "etpp", tmp / "div", tmp / "nothing", "-o", tmp / "report")

        # tiny 1x8x8 f32 RTEN image
        rten = bytearray(b"RTEN" + bytes([1, 0]) + (0).to_bytes(2, "little") + (1).to_bytes(4, "little")
                         + (8).to_bytes(4, "little") + (8).to_bytes(4, "little"))
        rten += struct.pack("<64f", *[(i * 37 % 11) / 11 for i in range(64)])
        (tmp / "img.rten").write_bytes(bytes(rten))
        run(args.cli, "transform", "-i", tmp / "img.rten", "-o", tmp / "crop.rten", "--op", "crop", "-B", 4)
        run(args.cli, "transform", "-i", tmp / "img.rten", "-o", tmp / "spec.rten", "--op", "dft")

        checked = 0
        for path in sorted(tmp.rglob("*")):
            name = path.name
            if name in ("config.json",):
                ok &= check_json(json.loads(path.read_text()), schemas["run_config.schema.json"], registry, path)
            elif name == "summary.json":
                ok &= check_json(json.loads(path.read_text()), schemas["summary.schema.json"], registry, path)
            elif name == "search_report.json":
                ok &= check_json(json.loads(path.read_text()), schemas["search_report.schema.json"], registry, path)
            elif name == "probe.json":
                ok &= check_json(json.loads(path.read_text()), schemas["probe.schema.json"], registry, path)
            elif name.endswith(".rten.json"):
                ok &= check_json(json.loads(path.read_text()), schemas["transform_meta.schema.json"], registry, path)
            elif name in ("steps.jsonl", "eval.jsonl"):
                schema = schemas["step.schema.json" if name == "steps.jsonl" else "eval.schema.json"]
                for n, line in enumerate(path.read_text().splitlines(), start=1):
                    ok &= check_json(json.loads(line), schema, registry, f"{path}:{n}")
            elif name in csv_spec:
                ok &= check_csv(path, csv_spec[name])
            else:
                continue
            checked += 1
        expected = {"config.json", "summary.json", "search_report.json", "probe.json", "steps.jsonl", "eval.jsonl",
                    "search_trials.csv", "probe_matrix.csv", "report_cost.csv", "report_time.csv",
                    "report_summary.csv", "crop.rten.json", "spec.rten.json"}
        seen = {p.name for p in tmp.rglob("*")}
        missing = expected - seen
        if missing:
            print(f"FAIL outputs never produced: {sorted(missing)}")
            ok = False
        print(f"validated {checked} files")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
