#!/usr/bin/env python3
"""Fetch the MNIST training files into a local directory.

The files are taken from the ``bob.db.mnist`` source distribution on PyPI,
which bundles the original gzipped IDX files, and are checked against the
published md5 sums. The library never downloads anything itself; run this
once, then point ``--mnist-dir`` or ``$MNIST_DIR`` at the result.

    python scripts/fetch_mnist.py data/mnist
"""

import argparse
import hashlib
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

ARCHIVE = ("https://files.pythonhosted.org/packages/e1/03/"
           "d463caa4606696f3bba11686983ab1e4655eb0695c809d45e8c630c8bc31/"
           "bob.db.mnist-2.1.0.zip")
MEMBER_DIR = "bob.db.mnist-2.1.0/bob/db/mnist/data/"
MD5 = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("target", nargs="?", default="data/mnist")
    p.add_argument("--archive", default=ARCHIVE, help="URL or local path of the zip")
    args = p.parse_args(argv)

    target = Path(args.target)
    target.mkdir(parents=True, exist_ok=True)
    if all((target / name).exists() for name in MD5):
        print(f"already present in {target}")
        return 0
    if Path(args.archive).exists():
        blob = Path(args.archive).read_bytes()
    else:
        print(f"downloading {args.archive}")
        with urllib.request.urlopen(args.archive) as resp:
            blob = resp.read()
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        for name, digest in MD5.items():
            data = zf.read(MEMBER_DIR + name)
            found = hashlib.md5(data).hexdigest()
            if found != digest:
                print(f"md5 mismatch for {name}: {found}", file=sys.stderr)
                return 2
            (target / name).write_bytes(data)
            print(f"wrote {target / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
