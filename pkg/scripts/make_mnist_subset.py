"""Build the 2000/1000 MNIST subset used by the scaled training experiment.

The 5000-digit sample shipped with mlxtend (``mlxtend/data/data/mnist_5k.csv.gz``,
784 pixel columns in 0..255 followed by the label) is shuffled with a fixed
seed and split into IDX files::

    python scripts/make_mnist_subset.py                     # uses the installed mlxtend
    python scripts/make_mnist_subset.py --source mlxtend-0.24.0-py3-none-any.whl
"""

from __future__ import annotations

import argparse
import gzip
import importlib.util
import io
import zipfile
from pathlib import Path

import numpy as np

from contractive_inn.data_io import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_source(source: str | None) -> bytes:
    if source is None:
        spec = importlib.util.find_spec("mlxtend")
        if spec is None or spec.origin is None:
            raise SystemExit("mlxtend is not installed; pass --source <wheel or csv.gz>")
        return (Path(spec.origin).parent / "data" / "data" / "mnist_5k.csv.gz").read_bytes()
    path = Path(source)
    if path.suffix in (".whl", ".zip"):
        with zipfile.ZipFile(path) as zf:
            return zf.read(MEMBER)
    return path.read_bytes()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--source", default=None)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "mnist_subset"))
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    raw = gzip.decompress(read_source(args.source))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images, labels = table[:, :784], table[:, 784]
    if images.min() < 0 or images.max() > 255 or labels.min() < 0 or labels.max() > 9:
        raise SystemExit("unexpected value range in source table")
    order = np.random.default_rng(args.seed).permutation(len(labels))
    if args.train + args.test > len(order):
        raise SystemExit(f"source holds only {len(order)} digits")
    splits = {"train": order[: args.train], "test": order[args.train: args.train + args.test]}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, idx in splits.items():
        write_idx(out / f"{name}-images-idx3-ubyte.gz", images[idx].reshape(-1, 28, 28))
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", labels[idx])
        print(f"{name}: {len(idx)} digits, class counts {np.bincount(labels[idx], minlength=10).tolist()}")


if __name__ == "__main__":
    main()
