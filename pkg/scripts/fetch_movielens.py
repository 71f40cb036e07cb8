"""Download MovieLens 100K and extract u.data into data/ml-100k/."""

import io
import sys
import urllib.request
import zipfile
from pathlib import Path

URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def main(dest="data/ml-100k"):
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(URL, timeout=60) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    (dest / "u.data").write_bytes(archive.read("ml-100k/u.data"))
    print(f"wrote {dest / 'u.data'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
