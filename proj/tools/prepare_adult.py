#!/usr/bin/env python3
"""Convert the raw UCI Adult files into the numeric CSV consumed by `cfl`.

Rows containing a missing value ('?') are dropped. Categorical attributes are
one-hot encoded in place, using the full vocabulary declared in adult.names so
the column set does not depend on which categories survive cleaning. The label
column `income` is written last.
"""

import argparse
import csv
import pathlib


def read_schema(names_path):
    schema = []
    for line in pathlib.Path(names_path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("|") or ":" not in line:
            continue
        name, values = line.split(":", 1)
        values = values.strip().rstrip(".")
        if values == "continuous":
            schema.append((name, None))
        else:
            schema.append((name, [v.strip() for v in values.split(",")]))
    return schema


def main():
    here = pathlib.Path(__file__).resolve().parent.parent / "data" / "adult"
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", default=str(here / "adult.data"))
    ap.add_argument("--names", default=str(here / "adult.names"))
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)

    schema = read_schema(args.names)
    header = []
    for name, vocab in schema:
        if vocab is None:
            header.append(name)
        else:
            header.extend(f"{name}={v}" for v in vocab)
    header.append("income")

    kept = 0
    with open(args.data) as src, open(args.out, "w", newline="") as dst:
        writer = csv.writer(dst, lineterminator="\n")
        writer.writerow(header)
        for raw in src:
            cells = [c.strip() for c in raw.strip().split(",")]
            if len(cells) != len(schema) + 1 or "?" in cells:
                continue
            row = []
            for (name, vocab), cell in zip(schema, cells):
                if vocab is None:
                    row.append(cell)
                else:
                    if cell not in vocab:
                        raise SystemExit(f"unknown {name} value {cell!r}")
                    row.extend("1" if v == cell else "0" for v in vocab)
            row.append(cells[-1])
            writer.writerow(row)
            kept += 1
    print(f"wrote {kept} rows x {len(header) - 1} features to {args.out}")


if __name__ == "__main__":
    main()
