#!/usr/bin/env python3
"""Build the desk-scale MNIST split from the digits bundled in the `mnist` npm package.

The npm package (https://www.npmjs.com/package/mnist, v1.1.0) ships 10,000 MNIST
digits as flat JSON arrays of pixel/255 values rounded to three decimals. The
rounding step (0.001) is finer than the byte step (1/255), so the original bytes
are recovered exactly with round(v * 255).

Output is written in the standard IDX layout (gzip-compressed, mtime 0 so the
archives are byte-stable):

    train-images-idx3-ubyte.gz  train-labels-idx1-ubyte.gz   (8,000 images)
    t10k-images-idx3-ubyte.gz   t10k-labels-idx1-ubyte.gz    (2,000 images)

Usage:
    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/mnist_desk_from_npm.py package data/mnist-desk
"""

import gzip
import json
import random
import struct
import sys
from pathlib import Path

ROWS = COLS = 28
TRAIN_COUNT = 8000
SHUFFLE_SEED = 20200812


def load_digits(package_dir):
    samples = []
    for label in range(10):
        raw = json.loads((package_dir / "src" / "digits" / f"{label}.json").read_text())["data"]
        if len(raw) % (ROWS * COLS):
            raise ValueError(f"digit {label}: payload is not a whole number of images")
        pixels = bytes(round(v * 255) for v in raw)
        for start in range(0, len(pixels), ROWS * COLS):
            samples.append((label, pixels[start:start + ROWS * COLS]))
    return samples


def write_gz(path, payload):
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(payload)


def write_split(out_dir, prefix, samples):
    images = struct.pack(">IIII", 0x00000803, len(samples), ROWS, COLS)
    images += b"".join(pixels for _, pixels in samples)
    labels = struct.pack(">II", 0x00000801, len(samples)) + bytes(label for label, _ in samples)
    write_gz(out_dir / f"{prefix}-images-idx3-ubyte.gz", images)
    write_gz(out_dir / f"{prefix}-labels-idx1-ubyte.gz", labels)


def main(argv):
    if len(argv) != 3:
        print(__doc__, file=sys.stderr)
        return 1
    package_dir, out_dir = Path(argv[1]), Path(argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = load_digits(package_dir)
    random.Random(SHUFFLE_SEED).shuffle(samples)
    write_split(out_dir, "train", samples[:TRAIN_COUNT])
    write_split(out_dir, "t10k", samples[TRAIN_COUNT:])
    print(f"wrote {TRAIN_COUNT} train / {len(samples) - TRAIN_COUNT} test images to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
