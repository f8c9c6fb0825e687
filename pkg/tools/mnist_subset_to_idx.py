"""Convert a ``pixels...,label`` MNIST CSV (e.g. mlxtend's mnist_5k.csv.gz) to IDX pairs.

The first ``--train-per-class`` samples of every digit go to the train
pair and the rest to the test pair, both in file order.

    python tools/mnist_subset_to_idx.py mnist_5k.csv.gz --out mnist/
"""
import argparse
import gzip
from pathlib import Path

import numpy as np

from dmcca.dataset import write_idx


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    p.add_argument("--train-per-class", type=int, default=250)
    args = p.parse_args()

    opener = gzip.open if args.csv.endswith(".gz") else open
    with opener(args.csv, "rt") as fh:
        data = np.loadtxt(fh, delimiter=",")
    pixels, labels = data[:, :-1].astype(np.uint8), data[:, -1].astype(np.uint8)
    images = pixels.reshape(-1, 28, 28)

    train = np.zeros(labels.size, dtype=bool)
    for c in np.unique(labels):
        train[np.flatnonzero(labels == c)[:args.train_per_class]] = True

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte", out / "train-labels-idx1-ubyte", images[train], labels[train])
    write_idx(out / "t10k-images-idx3-ubyte", out / "t10k-labels-idx1-ubyte", images[~train], labels[~train])
    print(f"train {train.sum()} / test {(~train).sum()} written to {out}")


if __name__ == "__main__":
    main()
