#!/usr/bin/env python3
"""Convert the 5000-digit MNIST sample bundled in the `mlxtend` wheel to IDX files.

The wheel ships `mlxtend/data/data/mnist_5k.csv.gz`: 785 comma-separated
integers per row, 784 raw pixel bytes followed by the label (500 per class).

    pip download --no-deps mlxtend==0.24.0 -d /tmp/mlxtend
    python3 scripts/mnist_subset_to_idx.py /tmp/mlxtend/mlxtend-0.24.0-py3-none-any.whl data/mnist-subset
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def main() -> None:
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    rows = [list(map(int, line.split(","))) for line in text.strip().splitlines()]
    n = len(rows)
    images = bytearray(struct.pack(">IIII", 0x00000803, n, 28, 28))
    labels = bytearray(struct.pack(">II", 0x00000801, n))
    for row in rows:
        assert len(row) == 785
        images.extend(bytes(row[:784]))
        labels.append(row[784])
    (out / "train-images-idx3-ubyte").write_bytes(bytes(images))
    (out / "train-labels-idx1-ubyte").write_bytes(bytes(labels))
    print(f"wrote {n} images to {out}")


if __name__ == "__main__":
    main()
