"""CSV/JSON helpers with a fixed numeric rendering so outputs diff cleanly."""

import csv
import hashlib
import json
import math
from pathlib import Path

SIG_DIGITS = 9


def fmt_float(x, digits=SIG_DIGITS):
    """Render ``x`` with ``digits`` significant digits; None/NaN become ''."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    s = format(x, f".{digits}g")
    return "0" if s == "-0" else s


def parse_float(s):
    return None if s == "" else float(s)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (fmt_float(v) if isinstance(v, float) else v) for v in row])
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def dump_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_json(obj):
    blob = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def token_slug(token):
    """Filesystem-safe, collision-free name for a token."""
    if token.isascii() and all(c.isalnum() or c in "-_" for c in token):
        return token
    return "U+" + "_".join(f"{ord(c):04X}" for c in token)
