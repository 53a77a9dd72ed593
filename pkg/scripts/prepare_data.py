"""Assemble the benchmark files under data/ from locally available sources.

banana, Pima diabetes and twonorm come from the ``keel_ds`` wheel (pass its
path, e.g. from ``pip download keel-ds``); WDBC is rebuilt in UCI
``wdbc.data`` layout from the copy bundled with scikit-learn. Semeion is not
bundled anywhere and must be downloaded by hand into data/semeion.data.
"""

import argparse
import zipfile
from pathlib import Path

import numpy as np

KEEL = {"banana": "banana.dat", "diabetes": "pima.dat", "twonorm": "twonorm.dat"}


def from_keel(wheel, out):
    with zipfile.ZipFile(wheel) as z:
        for name, member in KEEL.items():
            raw = z.read(f"keel_ds/data/balanced/raw/{member}").decode()
            rows = [line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("@")]
            (out / f"{name}.csv").write_text("\n".join(r.replace(" ", "") for r in rows) + "\n")


def wdbc_from_sklearn(out):
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    lines = []
    for k, (x, t) in enumerate(zip(bunch.data, bunch.target), start=1):
        # sklearn: 0 = malignant, 1 = benign; ids are not shipped, use row numbers
        diag = "M" if t == 0 else "B"
        lines.append(",".join([str(k), diag] + [repr(float(v)) for v in x]))
    (out / "wdbc.data").write_text("\n".join(lines) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--keel-wheel", type=Path)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    if args.keel_wheel:
        from_keel(args.keel_wheel, args.out)
    wdbc_from_sklearn(args.out)
    for f in sorted(args.out.iterdir()):
        n = sum(1 for _ in open(f))
        print(f"{f.name}: {n} rows")


if __name__ == "__main__":
    main()
