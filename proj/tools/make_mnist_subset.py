#!/usr/bin/env python3
"""Build the bundled 5000-sample MNIST subset as gzipped IDX files.

The source is the ``mnist_5k.csv.gz`` table shipped inside the mlxtend
wheel (500 training images per digit, one row per image, label in the
last column). Rows in that table are grouped by class, so they are
written out in a seeded random order; otherwise the tail validation
split would contain a single digit.

    python3 tools/make_mnist_subset.py --out data/mnist-subset

The wheel is fetched with ``pip download`` unless ``--wheel`` is given.
"""

import argparse
import glob
import gzip
import random
import struct
import subprocess
import tempfile
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_wheel(workdir: Path) -> Path:
    subprocess.run(
        ["python3", "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
         "mlxtend", "-d", str(workdir)],
        check=True,
    )
    return Path(glob.glob(str(workdir / "mlxtend-*.whl"))[0])


def read_rows(wheel: Path):
    with zipfile.ZipFile(wheel) as zf:
        text = gzip.decompress(zf.read(MEMBER)).decode()
    rows = []
    for line in text.splitlines():
        fields = [int(float(v)) for v in line.split(",")]
        rows.append((bytes(fields[:-1]), fields[-1]))
    return rows


def write_idx(out: Path, rows) -> None:
    out.mkdir(parents=True, exist_ok=True)
    n = len(rows)
    images = struct.pack(">IIII", 0x00000803, n, 28, 28) + b"".join(r[0] for r in rows)
    labels = struct.pack(">II", 0x00000801, n) + bytes(r[1] for r in rows)
    # mtime=0 keeps the archives byte-reproducible.
    with gzip.GzipFile(out / "train-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(images)
    with gzip.GzipFile(out / "train-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(labels)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/mnist-subset")
    ap.add_argument("--wheel", help="path to an already downloaded mlxtend wheel")
    ap.add_argument("--seed", type=int, default=20200101)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = Path(args.wheel) if args.wheel else fetch_wheel(Path(tmp))
        rows = read_rows(wheel)
    random.Random(args.seed).shuffle(rows)
    write_idx(Path(args.out), rows)
    print(f"wrote {len(rows)} samples to {args.out}")


if __name__ == "__main__":
    main()
