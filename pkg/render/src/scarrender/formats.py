"""Readers for the simulator's artifact file formats.

These parse the documented on-disk formats directly (SCARGRID 1,
SCARFIELD 1, the CSV headers, orbit JSON); the renderer has no other
coupling to the simulator.  Every reader validates the declared version
magic and byte counts, refusing silently truncated binaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

GRID_MAGIC = "SCARGRID 1"
FIELD_MAGIC = "SCARFIELD 1"


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class GridHeader:
    nx: int
    ny: int
    h: float
    x0: float
    y0: float

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """Matplotlib imshow extent (x0, x1, y0, y1) with node-centered cells."""
        return (self.x0 - self.h / 2, self.x0 + (self.nx - 0.5) * self.h,
                self.y0 - self.h / 2, self.y0 + (self.ny - 0.5) * self.h)

    def covers(self, x: float, y: float) -> bool:
        return (self.x0 - 1e-9 <= x <= self.x0 + (self.nx - 1) * self.h + 1e-9
                and self.y0 - 1e-9 <= y <= self.y0 + (self.ny - 1) * self.h + 1e-9)


def read_grid(path):
    """Returns (GridHeader, bool mask (ny, nx))."""
    with open(path, "rb") as f:
        magic = f.readline().decode().strip()
        if magic != GRID_MAGIC:
            raise FormatError(f"{path}: expected {GRID_MAGIC!r}, got {magic!r}")
        parts = f.readline().decode().split()
        nx, ny = int(parts[0]), int(parts[1])
        header = GridHeader(nx, ny, float(parts[2]), float(parts[3]), float(parts[4]))
        raw = f.read()
    if len(raw) != nx * ny:
        raise FormatError(f"{path}: mask holds {len(raw)} bytes, expected {nx * ny}")
    mask = np.frombuffer(raw, dtype=np.uint8).reshape(ny, nx).astype(bool)
    return header, mask


def read_field(path):
    """Returns (GridHeader, t, values (ny, nx), real flag)."""
    with open(path, "rb") as f:
        magic = f.readline().decode().strip()
        if magic != FIELD_MAGIC:
            raise FormatError(f"{path}: expected {FIELD_MAGIC!r}, got {magic!r}")
        parts = f.readline().decode().split()
        nx, ny = int(parts[0]), int(parts[1])
        header = GridHeader(nx, ny, float(parts[2]), float(parts[3]), float(parts[4]))
        t = float(parts[5])
        real = len(parts) > 6 and parts[6] == "REAL"
        raw = f.read()
    expect = nx * ny * 8 * (1 if real else 2)
    if len(raw) != expect:
        raise FormatError(f"{path}: payload holds {len(raw)} bytes, expected {expect}")
    data = np.frombuffer(raw, dtype="<f8")
    if real:
        values = data.reshape(ny, nx)
    else:
        pairs = data.reshape(ny, nx, 2)
        values = pairs[:, :, 0] + 1j * pairs[:, :, 1]
    return header, t, values, real


def _read_csv(path, expected_header: str) -> np.ndarray:
    with open(path) as f:
        header = f.readline().strip()
        if header != expected_header:
            raise FormatError(f"{path}: expected header {expected_header!r}, "
                              f"got {header!r}")
        rows = [line.rstrip("\n").split(",") for line in f if line.strip()]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return rows


def read_coeffs(path):
    """coeffs.csv -> (E, abs2) arrays."""
    rows = _read_csv(path, "n,E,re,im,abs2")
    e = np.array([float(r[1]) for r in rows])
    abs2 = np.array([float(r[4]) for r in rows])
    return e, abs2


def read_spectra(path):
    """spectra.csv -> {kind: (E, value, epsilon)}."""
    rows = _read_csv(path, "E,value,kind,epsilon")
    out: dict[str, tuple[np.ndarray, np.ndarray, float]] = {}
    by_kind: dict[str, list[tuple[float, float, float]]] = {}
    for r in rows:
        by_kind.setdefault(r[2], []).append((float(r[0]), float(r[1]), float(r[3])))
    for kind, data in by_kind.items():
        arr = np.asarray(data)
        out[kind] = (arr[:, 0], arr[:, 1], float(arr[0, 2]))
    return out


def read_profile(path):
    """profile.csv -> dict with xi, A_num, A_sc, excluded."""
    rows = _read_csv(path, "xi,A_num,A_sc,excluded")
    return {
        "xi": np.array([float(r[0]) for r in rows]),
        "A_num": np.array([float(r[1]) for r in rows]),
        "A_sc": np.array([float(r[2]) for r in rows]),
        "excluded": np.array([bool(int(r[3])) for r in rows]),
    }


def read_orbit(path) -> dict:
    with open(path) as f:
        data = json.load(f)
    for key in ("vertices", "L"):
        if key not in data:
            raise FormatError(f"{path}: orbit JSON missing {key!r}")
    return data
