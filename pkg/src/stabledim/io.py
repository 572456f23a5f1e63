"""Deterministic CSV and PGM writers."""
from __future__ import annotations

import csv
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def header_lines(check: str, meta: Mapping[str, object]) -> list[str]:
    lines = [f"# paper-check: {check}", f"# version: {__version__}"]
    lines += [f"# {k}: {_fmt(v)}" for k, v in meta.items()]
    return lines


def write_csv(path, check: str, meta: Mapping[str, object], columns: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines(check, meta):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv_rows(path) -> list[list[str]]:
    """Rows of a CSV file, skipping '#' comment lines and blank lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return [r for r in csv.reader(lines)]


def write_pgm(path, image: np.ndarray):
    """Binary P5 greyscale, first array row at the top."""
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    data = open(path, "rb").read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
