#!/usr/bin/env python3
"""Write the benchmark datasets as CSV files for the sc CLI.

iris, wine, breast_cancer, digits and diabetes ship with scikit-learn and
are written offline. ionosphere, covtype and california_housing are
downloaded on demand (network required); covtype is reduced to a seeded
per-class subsample to stay desk-scale.

Usage: tools/fetch_data.py [--out data] [names ...]
"""

import argparse
import os
import sys

import numpy as np


def write_csv(path, X, y, fmt="%.17g"):
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    header = ",".join(f"f{i}" for i in range(d)) + ",label"
    ycol = np.asarray(y).reshape(-1, 1)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, lab in zip(X, ycol[:, 0]):
            fh.write(",".join(fmt % v for v in row))
            fh.write(f",{lab}\n")
    print(f"wrote {path} ({X.shape[0]} x {d})")


def local_loaders():
    from sklearn import datasets as d

    return {
        "iris": lambda: (lambda b: (b.data, b.target))(d.load_iris()),
        "wine": lambda: (lambda b: (b.data, b.target))(d.load_wine()),
        "breast_cancer": lambda: (lambda b: (b.data, b.target))(d.load_breast_cancer()),
        "digits": lambda: (lambda b: (b.data, b.target))(d.load_digits()),
        "diabetes": lambda: (lambda b: (b.data, b.target))(
            d.load_diabetes(scaled=False)
        ),
    }


def fetch_ionosphere():
    from sklearn.datasets import fetch_openml

    b = fetch_openml("ionosphere", version=1, as_frame=False, parser="liac-arff")
    y = np.array([1 if v in ("g", b"g") else 0 for v in b.target])
    return b.data.astype(float), y


def fetch_covtype(seed=0, per_class=700):
    from sklearn.datasets import fetch_covtype as fc

    b = fc()
    X, y = b.data, b.target - 1  # classes 1..7 -> 0..6
    rng = np.random.default_rng(seed)
    keep = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        keep.append(idx[: min(per_class, len(idx))])
    keep = np.sort(np.concatenate(keep))
    return X[keep], y[keep]


def fetch_california_housing():
    from sklearn.datasets import fetch_california_housing as fch

    b = fch()
    return b.data, b.target


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data")
    ap.add_argument("names", nargs="*", help="default: every local dataset")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    local = local_loaders()
    remote = {
        "ionosphere": fetch_ionosphere,
        "covtype": fetch_covtype,
        "california_housing": fetch_california_housing,
    }
    names = args.names or sorted(local)
    failed = []
    for name in names:
        path = os.path.join(args.out, f"{name}.csv")
        try:
            if name in local:
                X, y = local[name]()
            elif name in remote:
                X, y = remote[name]()
            else:
                print(f"unknown dataset '{name}'", file=sys.stderr)
                failed.append(name)
                continue
            write_csv(path, X, y)
        except Exception as exc:  # noqa: BLE001 - report and continue
            print(f"FAILED {name}: {exc}", file=sys.stderr)
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
