"""Raw float32 arrays with a text sidecar, PGM thumbnails and flat config files.

A raw array ``x.raw`` is little-endian float32 in C order. Its shape lives in
``x.raw.hdr`` as ``key=value`` lines: ``width``/``height`` for images and
``angles``/``cells`` for sinograms.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_KEYS = {"image": ("height", "width"), "sinogram": ("angles", "cells")}


def header_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".hdr")


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Values stay strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_config(path, values: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in values.items():
            fh.write(f"{key}={value}\n")


def write_raw(path, array, kind: str) -> None:
    """Write ``array`` as float32 plus its sidecar header.

    Parameters
    ----------
    path : path-like
        Target ``.raw`` file.
    array : ndarray, 2-D
    kind : {"image", "sinogram"}
    """
    if kind not in _KEYS:
        raise ValueError(f"kind must be one of {sorted(_KEYS)}")
    a = np.asarray(array)
    if a.ndim != 2:
        raise ValueError("only 2-D arrays are supported")
    path = Path(path)
    a.astype("<f4").tofile(path)
    rows, cols = _KEYS[kind]
    write_config(header_path(path), {"kind": kind, rows: a.shape[0], cols: a.shape[1], "dtype": "float32le"})


def read_raw(path) -> tuple[np.ndarray, str]:
    """Inverse of :func:`write_raw`; returns a float64 array and its kind."""
    path = Path(path)
    hdr = read_config(header_path(path))
    kind = hdr.get("kind")
    if kind not in _KEYS:
        raise ValueError(f"{header_path(path)}: unknown kind {kind!r}")
    rows, cols = _KEYS[kind]
    shape = (int(hdr[rows]), int(hdr[cols]))
    data = np.fromfile(path, dtype="<f4")
    if data.size != shape[0] * shape[1]:
        raise ValueError(f"{path}: {data.size} samples, header says {shape}")
    return data.reshape(shape).astype(np.float64), kind


def write_pgm(path, array, vmin=None, vmax=None) -> None:
    """16-bit binary PGM, linearly windowed to ``[vmin, vmax]``."""
    a = np.asarray(array, dtype=np.float64)
    lo = float(np.min(a)) if vmin is None else float(vmin)
    hi = float(np.max(a)) if vmax is None else float(vmax)
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((a - lo) / span, 0.0, 1.0)
    pix = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary 16-bit PGM written by :func:`write_pgm`."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(x) for x in fields[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data[pos + 1 :], dtype=dtype, count=w * h).reshape(h, w)
