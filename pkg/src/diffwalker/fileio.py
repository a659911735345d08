"""File formats: PGM images, binary weight files, seed CSVs, JSON reports.

* Grayscale images are PGM (P2 or P5), normalized to ``[0, 1]`` on load.
* Label images are 16-bit PGM (raw ids, not normalized) or CSV grids.
* Edge weights are little-endian float64 in canonical edge order behind a
  16-byte header: the 8-byte magic ``DWWF0001`` plus ``uint32`` height and
  width.  Round-trips are bit-exact.
* Seeds are CSV rows ``row,col,label`` under a one-line header.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ._errors import ValidationError
from .lattice import SeedSet, edge_count

__all__ = [
    "read_pgm",
    "write_pgm",
    "read_image",
    "read_label_image",
    "write_label_image",
    "read_weights",
    "write_weights",
    "read_seeds_csv",
    "write_seeds_csv",
]

WEIGHTS_MAGIC = b"DWWF0001"


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a P2/P5 PGM; returns (raw integer array, maxval)."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P2", b"P5"):
        raise ValidationError(f"{path}: not a PGM file (magic {data[:2]!r})")
    binary = data[:2] == b"P5"

    # Tokenize the header, honoring '#' comments.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise ValidationError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            pos = data.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
    width, height, maxval = tokens
    if not 0 < maxval < 65536:
        raise ValidationError(f"{path}: invalid maxval {maxval}")

    if binary:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        count = height * width
        if len(data) - pos < count * dtype.itemsize:
            raise ValidationError(f"{path}: truncated PGM payload")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        values = raw.astype(np.int64).reshape(height, width)
    else:
        values = np.array(data[pos:].split(), dtype=np.int64).reshape(height, width)
    if values.max(initial=0) > maxval:
        raise ValidationError(f"{path}: sample exceeds declared maxval")
    return values, maxval


def write_pgm(path, values: np.ndarray, maxval: int) -> None:
    """Write a binary (P5) PGM; 16-bit samples are big-endian per the format."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValidationError(f"PGM payload must be 2D, got shape {values.shape}")
    if values.min(initial=0) < 0 or values.max(initial=0) > maxval:
        raise ValidationError(f"PGM samples must lie in [0, {maxval}]")
    height, width = values.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode()
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    Path(path).write_bytes(header + values.astype(dtype).tobytes())


def read_image(path) -> np.ndarray:
    """Grayscale image in [0, 1] (PGM values divided by maxval)."""
    values, maxval = read_pgm(path)
    return values / float(maxval)


def read_label_image(path) -> np.ndarray:
    """Label image from a 16-bit PGM (raw ids) or a CSV grid of integers."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        grid = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
        return grid
    values, _ = read_pgm(path)
    return values


def write_label_image(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
        raise ValidationError("label ids must fit 16-bit PGM (0..65535)")
    write_pgm(path, labels, maxval=65535)


def write_weights(path, weights: np.ndarray, height: int, width: int) -> None:
    weights = np.asarray(weights, dtype=np.float64)
    expected = edge_count(height, width)
    if weights.shape != (expected,):
        raise ValidationError(
            f"expected {expected} weights for a {height}x{width} grid, "
            f"got shape {weights.shape}"
        )
    header = WEIGHTS_MAGIC + struct.pack("<II", height, width)
    Path(path).write_bytes(header + weights.astype("<f8").tobytes())


def read_weights(path) -> tuple[np.ndarray, int, int]:
    """Returns (weights, height, width); validates magic and edge count."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != WEIGHTS_MAGIC:
        raise ValidationError(f"{path}: not a weights file")
    height, width = struct.unpack("<II", data[8:16])
    expected = edge_count(height, width)
    weights = np.frombuffer(data, dtype="<f8", offset=16)
    if len(weights) != expected:
        raise ValidationError(
            f"{path}: {len(weights)} weights but {height}x{width} grid needs {expected}"
        )
    return weights.copy(), height, width


def write_seeds_csv(path, seeds: SeedSet, width: int) -> None:
    lines = ["row,col,label"]
    rows, cols = seeds.vertices // width, seeds.vertices % width
    for r, c, lab in zip(rows, cols, seeds.labels):
        lines.append(f"{r},{c},{lab}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_seeds_csv(path, height: int, width: int) -> SeedSet:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != "row,col,label":
        raise ValidationError(f"{path}: expected header 'row,col,label'")
    entries = []
    for line in text[1:]:
        if not line.strip():
            continue
        r, c, lab = (int(part) for part in line.split(","))
        if not (0 <= r < height and 0 <= c < width):
            raise ValidationError(f"{path}: seed ({r}, {c}) outside {height}x{width} grid")
        entries.append((r * width + c, lab))
    if not entries:
        raise ValidationError(f"{path}: no seeds")
    return SeedSet.from_pairs(entries)
