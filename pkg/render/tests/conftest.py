import json

import numpy as np
import pytest


def write_field(path, values, real=True, h=0.05, x0=0.0, y0=0.0, t=0.0):
    ny, nx = values.shape
    tag = " REAL" if real else ""
    with open(path, "wb") as f:
        f.write(b"SCARFIELD 1\n")
        f.write(f"{nx} {ny} {h!r} {x0!r} {y0!r} {t!r}{tag}\n".encode())
        if real:
            f.write(np.asarray(values, dtype="<f8").tobytes(order="C"))
        else:
            inter = np.empty((ny, nx, 2))
            inter[:, :, 0] = values.real
            inter[:, :, 1] = values.imag
            f.write(inter.astype("<f8").tobytes(order="C"))


def write_grid(path, mask, h=0.05, x0=0.0, y0=0.0):
    ny, nx = mask.shape
    with open(path, "wb") as f:
        f.write(b"SCARGRID 1\n")
        f.write(f"{nx} {ny} {h!r} {x0!r} {y0!r}\n".encode())
        f.write(np.asarray(mask, dtype=np.uint8).tobytes(order="C"))


def write_coeffs(path, energies, abs2):
    with open(path, "w") as f:
        f.write("n,E,re,im,abs2\n")
        for n, (e, a) in enumerate(zip(energies, abs2)):
            f.write(f"{n},{float(e)!r},{float(np.sqrt(a))!r},0.0,{float(a)!r}\n")


def write_spectra(path, spectra):
    """spectra: dict kind -> (e_grid, values, epsilon)."""
    with open(path, "w") as f:
        f.write("E,value,kind,epsilon\n")
        for kind, (e, v, eps) in spectra.items():
            for ee, vv in zip(e, v):
                f.write(f"{float(ee)!r},{float(vv)!r},{kind},{float(eps)!r}\n")


def write_profile(path, xi, a_num, a_sc, excluded):
    with open(path, "w") as f:
        f.write("xi,A_num,A_sc,excluded\n")
        for row in zip(xi, a_num, a_sc, excluded):
            f.write(f"{float(row[0])!r},{float(row[1])!r},{float(row[2])!r},"
                    f"{int(row[3])}\n")


def write_orbit(path, vertices, length, conjugate_points=()):
    data = {
        "label": "synthetic",
        "start": list(vertices[0]),
        "angle": 0.5,
        "vertices": [list(v) for v in vertices],
        "L": length,
        "N_C": len(vertices),
        "mu1": 3.0,
        "nu": len(conjugate_points),
        "u_geometric": 0.3,
        "xi_origin": list(vertices[0]),
        "conjugate_points": list(conjugate_points),
    }
    path.write_text(json.dumps(data, indent=2) + "\n")


@pytest.fixture()
def synthetic_dir(tmp_path):
    """A complete fake run directory in the documented formats."""
    ny, nx, h = 21, 41, 0.05
    ys, xs = np.mgrid[0:ny, 0:nx]
    x, y = xs * h, ys * h
    inside = (x - 1.0) ** 2 + (y - 0.5) ** 2 < 0.45 ** 2
    dens = np.where(inside, 0.5 + 0.4 * np.exp(-((x - 1.0) ** 2 + (y - 0.5) ** 2)
                                               / 0.05), 0.0)
    write_field(tmp_path / "average.scarfield", dens, h=h)
    write_grid(tmp_path / "grid.scargrid", inside, h=h)

    energies = np.linspace(100.0, 300.0, 60)
    abs2 = np.exp(-((energies - 200.0) / 60.0) ** 2)
    abs2 /= abs2.sum()
    write_coeffs(tmp_path / "coeffs.csv", energies, abs2)

    e_grid = np.linspace(100.0, 300.0, 400)
    window = -0.01 * np.exp(-((e_grid - 200.0) / 60.0) ** 2) \
        * (1.2 + np.cos(2 * np.pi * e_grid / 25.0))
    hist = np.abs(window) * 0.9
    write_spectra(tmp_path / "spectra.csv", {
        "p_eps": (e_grid, np.abs(window) * 50, 3.0),
        "window_model": (e_grid, window, 3.0),
        "smoothed_histogram": (e_grid, hist, 3.0),
    })

    xi = np.linspace(0.0, 3.0, 240)
    a_sc = 0.56 + 0.1 / np.sqrt(np.abs(1.5 - xi) + 0.02)
    a_num = a_sc + 0.03 * np.sin(40 * xi)
    excluded = (np.abs(xi - 1.5) < 0.2) | (xi < 0.1) | (xi > 2.9)
    write_profile(tmp_path / "profile.csv", xi, a_num, a_sc, excluded)

    write_orbit(tmp_path / "orbit.json",
                [(0.7, 0.3), (1.3, 0.3), (1.0, 0.8)], 3.0,
                conjugate_points=[1.5])
    return tmp_path
