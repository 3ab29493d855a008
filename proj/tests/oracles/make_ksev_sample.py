#!/usr/bin/env python3
# Writes tests/data/sample.ksev the way the embedding sidecar exports vectors,
# using only the Python standard library.
import hashlib
import struct
import sys
from pathlib import Path

TEXTS = {
    "alpha": [1.0, 0.0, 0.0],
    "beta gamma": [0.6, 0.8, 0.0],
    "café déjà vu": [0.0, 0.0, -1.0],
}


def main(out):
    out = Path(out)
    dim = 3
    blob = b"KSEV" + struct.pack("<I", dim)
    lines = []
    for text, vec in TEXTS.items():
        key = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
        blob += key + struct.pack("<%df" % dim, *vec)
        lines.append(key.hex() + "\t" + text + "\n")
    out.write_bytes(blob)
    Path(str(out) + ".manifest.tsv").write_text("".join(lines), encoding="utf-8")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent.parent / "data" / "sample.ksev")
