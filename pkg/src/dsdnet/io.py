"""On-disk formats: trajectory text, 8-bit PGM, JSON-lines records, weight files."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .dmp import DmpParams, Trajectory
from .errors import ParameterError
from .segmentation import SegmentedRecord

WEIGHTS_MAGIC = b"DSDNET-WEIGHTS 1\n"


# trajectories

def format_trajectory(traj: Trajectory) -> str:
    lines = [f"dt={traj.dt!r} d={traj.d}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in traj.points]
    return "\n".join(lines) + "\n"


def parse_trajectory(text: str) -> Trajectory:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParameterError("empty trajectory file")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        dt, d = float(header["dt"]), int(header["d"])
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"bad trajectory header {lines[0]!r}") from exc
    rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    if any(len(r) != d for r in rows):
        raise ParameterError(f"every trajectory row must have {d} values")
    return Trajectory(dt, np.array(rows, dtype=float).reshape(len(rows), d))


def write_trajectory(path, traj: Trajectory) -> None:
    Path(path).write_text(format_trajectory(traj))


def read_trajectory(path) -> Trajectory:
    return parse_trajectory(Path(path).read_text())


# images

def write_pgm(path, image) -> None:
    """Binary 8-bit PGM; values in [0, 1] map to 0..255."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ParameterError(f"image must be 2-D, got shape {img.shape}")
    data = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode())
    if tokens[0] != "P5":
        raise ParameterError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ParameterError(f"{path}: only 8-bit PGM is supported")
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ParameterError(f"{path}: truncated image data")
    return data.reshape(h, w).astype(float) / maxval


# dataset records

def record_to_dict(record: SegmentedRecord, image_path: str) -> dict:
    return {
        "id": record.provenance.get("id"),
        "image_path": image_path,
        "params": [p.to_dict() for p in record.params],
        "n": record.n,
        "seed": record.provenance.get("seed"),
    }


def record_from_dict(d: dict, root=".") -> SegmentedRecord:
    image = read_pgm(Path(root) / d["image_path"])
    params = tuple(DmpParams.from_dict(p) for p in d["params"])
    return SegmentedRecord(image, params, int(d["n"]), {"id": d.get("id"), "seed": d.get("seed")})


def dumps_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path, rows) -> None:
    Path(path).write_text("".join(dumps_line(r) + "\n" for r in rows))


def read_jsonl(path) -> list:
    with open(path) as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# weights

def spec_hash(spec: dict) -> str:
    return hashlib.sha256(dumps_line(spec).encode()).hexdigest()[:16]


def save_weights(path, header: dict, vector) -> None:
    """Magic line, one JSON header line, then the little-endian float64 vector."""
    vec = np.ascontiguousarray(vector, dtype="<f8")
    head = dict(header, size=int(vec.size))
    Path(path).write_bytes(WEIGHTS_MAGIC + dumps_line(head).encode() + b"\n" + vec.tobytes())


def load_weights(path):
    raw = Path(path).read_bytes()
    if not raw.startswith(WEIGHTS_MAGIC):
        raise ParameterError(f"{path}: not a weights file")
    rest = raw[len(WEIGHTS_MAGIC):]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    vec = np.frombuffer(rest[nl + 1:], dtype="<f8").astype(float)
    if vec.size != header["size"]:
        raise ParameterError(f"{path}: expected {header['size']} values, found {vec.size}")
    return header, vec
