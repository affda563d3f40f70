#!/usr/bin/env python3
"""Convert the bundled per-digit JSON arrays into idx image/label files.

Input: a directory with 0.json .. 9.json, each {"data": [flat floats]} with
784 values per image in [0, 1]. Output: train/test idx pairs with a seeded
stratified 80/20 split.
"""
import json
import pathlib
import struct
import sys

import numpy as np


def write_images(path, imgs):
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 0x803, len(imgs), 28, 28))
        f.write(np.rint(np.asarray(imgs) * 255.0).astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 0x801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def main():
    src = pathlib.Path(sys.argv[1])
    dst = pathlib.Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    rng = np.random.RandomState(0)
    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        arr = np.asarray(data, dtype=np.float64).reshape(-1, 784)
        idx = rng.permutation(len(arr))
        cut = int(round(len(arr) * 0.8))
        for i in idx[:cut]:
            train_x.append(arr[i])
            train_y.append(digit)
        for i in idx[cut:]:
            test_x.append(arr[i])
            test_y.append(digit)
    # Interleave classes deterministically so prefixes are class-balanced.
    for xs, ys, tag in ((train_x, train_y, "train"), (test_x, test_y, "test")):
        order = rng.permutation(len(xs))
        write_images(dst / f"{tag}-images.idx", [xs[i] for i in order])
        write_labels(dst / f"{tag}-labels.idx", [ys[i] for i in order])
        print(f"{tag}: {len(xs)} images")


if __name__ == "__main__":
    main()
