"""Deterministic CSV/JSON writers and 16-bit PGM images."""
import csv
import hashlib
import json
import math
import os

import numpy as np

PGM_MAXVAL = 65535


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    """Rows as dicts of strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def config_hash(cfg_dict):
    return hashlib.sha256(json.dumps(_plain(cfg_dict), sort_keys=True).encode()).hexdigest()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ------------------------------------------------------------------ PGM


def to_counts(values):
    """Normalized [0, 1] values to 16-bit counts (clipped, rounded)."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    return np.rint(v * PGM_MAXVAL).astype(np.uint16)


def write_pgm(path, values, binary=True):
    """16-bit grayscale PGM, row-major from the top-left pixel."""
    counts = to_counts(values)
    h, w = counts.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(counts.astype(">u2").tobytes())
        else:
            for row in counts:
                fh.write((" ".join(str(int(c)) for c in row) + "\n").encode("ascii"))


def _tokens(data, pos, count):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path):
    """Returns values normalized by maxval."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), pos = _tokens(data, 0, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        size = w * h * np.dtype(dtype).itemsize
        raw = data[pos:pos + size]
        if len(raw) != size:
            raise ValueError("truncated PGM raster")
        counts = np.frombuffer(raw, dtype=dtype).reshape(h, w)
    elif magic == b"P2":
        vals, _ = _tokens(data, pos, w * h)
        counts = np.array([int(v) for v in vals]).reshape(h, w)
    else:
        raise ValueError(f"not a PGM file (magic {magic!r})")
    return counts.astype(float) / maxval


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
