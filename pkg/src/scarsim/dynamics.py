"""Gaussian wavepacket construction, propagation, and time averages.

Two independent evolution routes are provided: exact eigenexpansion
(unitary by construction) and Crank-Nicolson stepping on the same
five-point stencil, so the routes discretize space identically and can
cross-check each other.  Natural units hbar = m = 1 throughout; the
packet speed is v = |p0| and E0 = |p0|^2 / 2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Grid
from .spectral import EigenBasis, assemble_hamiltonian

TAIL_MASS_WARN = 1e-4
COMPLETENESS_FLAG = 0.99


@dataclass(frozen=True)
class WavepacketParams:
    """Initial Gaussian: center r0, momentum p0, width sigma0."""

    r0: tuple[float, float]
    p0: tuple[float, float]
    sigma0: float

    @property
    def speed(self) -> float:
        return math.hypot(*self.p0)

    @property
    def e0(self) -> float:
        return 0.5 * self.speed ** 2

    @staticmethod
    def from_polar(r0, p_mag: float, angle: float, sigma0: float) -> "WavepacketParams":
        return WavepacketParams(tuple(r0), (p_mag * math.cos(angle), p_mag * math.sin(angle)),
                                sigma0)


def make_gaussian(params: WavepacketParams, grid: Grid) -> np.ndarray:
    """Normalized packet on interior nodes (compact complex vector).

    The raw profile is (1/(sigma0 sqrt(pi))) exp[i p0.(r-r0) - (r-r0)^2/(2 sigma0^2)];
    sampling and masking then force a renormalization to unit grid norm.
    """
    if params.sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    if grid.domain is not None and not grid.domain.strictly_inside(*params.r0):
        raise ValueError("packet center must be strictly inside the domain")
    x, y = grid.interior_points()
    dx, dy = x - params.r0[0], y - params.r0[1]
    r2 = dx * dx + dy * dy
    phase = params.p0[0] * dx + params.p0[1] * dy
    psi = (1.0 / (params.sigma0 * math.sqrt(math.pi))) * np.exp(
        1j * phase - r2 / (2.0 * params.sigma0 ** 2)
    )
    mass_in = float(np.sum(np.abs(psi) ** 2)) * grid.h ** 2
    if abs(1.0 - mass_in) > TAIL_MASS_WARN:
        warnings.warn(
            f"Gaussian tail mass outside the domain is {abs(1 - mass_in):.2e} "
            f"(> {TAIL_MASS_WARN:.0e}); the packet was renormalized",
            stacklevel=2,
        )
    return psi / (grid.norm(psi) or 1.0)


@dataclass
class ExpansionCoeffs:
    """Eigenbasis coefficients c_n of the initial packet."""

    c: np.ndarray  # complex, one per basis state
    completeness: float
    flagged: bool = False

    @property
    def abs2(self) -> np.ndarray:
        return np.abs(self.c) ** 2


def expand(basis: EigenBasis, psi0: np.ndarray) -> ExpansionCoeffs:
    """c_n = <phi_n, psi0> under grid quadrature."""
    if psi0.shape[0] != basis.states.shape[1]:
        raise ValueError("field and basis live on different grids")
    c = (basis.states @ psi0) * basis.grid.h ** 2
    completeness = float(np.sum(np.abs(c) ** 2))
    flagged = completeness < COMPLETENESS_FLAG
    if flagged:
        warnings.warn(
            f"expansion completeness {completeness:.4f} < {COMPLETENESS_FLAG}; "
            "raise e_max or enlarge the basis",
            stacklevel=2,
        )
    return ExpansionCoeffs(c=c, completeness=completeness, flagged=flagged)


def evolve_spectral(basis: EigenBasis, coeffs: ExpansionCoeffs, t: float) -> np.ndarray:
    """Sum_n c_n phi_n exp(-i E_n t); exactly unitary."""
    phases = coeffs.c * np.exp(-1j * basis.energies * t)
    return basis.states.T @ phases


class CrankNicolson:
    """Cayley-form stepper (1 + i dt H / 2) psi' = (1 - i dt H / 2) psi."""

    def __init__(self, grid: Grid, dt: float, hamiltonian: sp.spmatrix | None = None):
        if dt == 0:
            raise ValueError("dt must be nonzero")
        H = hamiltonian if hamiltonian is not None else assemble_hamiltonian(grid)
        z = 0.5j * dt
        ident = sp.identity(H.shape[0], format="csc", dtype=complex)
        self.grid = grid
        self.dt = dt
        self._minus = (ident - z * H.tocsc()).tocsr()
        try:
            self._solve = spla.splu((ident + z * H.tocsc()).tocsc()).solve
        except RuntimeError as err:  # pragma: no cover - factorization failure
            raise RuntimeError(f"Crank-Nicolson factorization failed: {err}") from err

    def step(self, psi: np.ndarray) -> np.ndarray:
        return self._solve(self._minus @ psi)

    def run(self, psi: np.ndarray, steps: int):
        for _ in range(steps):
            psi = self.step(psi)
        return psi

    def stream(self, psi: np.ndarray, steps: int):
        """Yield psi at t = 0, dt, ..., steps*dt."""
        yield psi
        for _ in range(steps):
            psi = self.step(psi)
            yield psi


def evolve_crank_nicolson(grid: Grid, psi: np.ndarray, dt: float, steps: int) -> np.ndarray:
    return CrankNicolson(grid, dt).run(psi, steps)


@dataclass
class AveragedField:
    """Time-averaged probability density on the grid."""

    values: np.ndarray       # compact, >= 0
    grid: Grid
    T: float
    n_samples: int
    dt: float

    def total_mass(self) -> float:
        return float(np.sum(self.values)) * self.grid.h ** 2


def time_average(stream=None, dt: float | None = None, grid: Grid | None = None,
                 basis: EigenBasis | None = None,
                 coeffs: ExpansionCoeffs | None = None) -> AveragedField:
    """Accumulated mean of |psi|^2.

    With a stream of fields: A(r) = (1/N) sum_j |psi(r, t_j)|^2.
    With basis and coeffs instead: the closed-form infinite-time limit
    A(r) = sum_n |c_n|^2 |phi_n(r)|^2.
    """
    if stream is not None:
        if dt is None or grid is None:
            raise ValueError("stream averaging needs dt and grid")
        acc = None
        count = 0
        for psi in stream:
            a = np.abs(psi) ** 2
            acc = a if acc is None else acc + a
            count += 1
        if count == 0:
            raise ValueError("empty evolution stream")
        return AveragedField(values=acc / count, grid=grid, T=count * dt,
                             n_samples=count, dt=dt)
    if basis is None or coeffs is None:
        raise ValueError("need either a stream or basis + coeffs")
    values = np.zeros(basis.states.shape[1])
    abs2 = coeffs.abs2
    for start in range(0, basis.n_states, 64):  # bounded scratch memory
        chunk = basis.states[start:start + 64]
        values += (chunk * chunk).T @ abs2[start:start + 64]
    return AveragedField(values=values, grid=basis.grid, T=math.inf,
                         n_samples=0, dt=0.0)


def autocorrelation_modes(coeffs: ExpansionCoeffs, energies: np.ndarray,
                          times: np.ndarray) -> np.ndarray:
    """C0(t) = sum_n |c_n|^2 exp(-i E_n t)."""
    return np.exp(-1j * np.outer(times, energies)) @ coeffs.abs2


def autocorrelation_direct(psi0: np.ndarray, stream, grid: Grid) -> np.ndarray:
    """C0(t_j) = <psi0, psi(t_j)> by direct overlap over a field stream."""
    return np.array([grid.inner(psi0, psi) for psi in stream])


def autocorrelation(psi0: np.ndarray, basis: EigenBasis, coeffs: ExpansionCoeffs,
                    times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Both routes: direct overlap of the evolved field, and the mode sum."""
    direct = autocorrelation_direct(
        psi0, (evolve_spectral(basis, coeffs, t) for t in times), basis.grid)
    modes = autocorrelation_modes(coeffs, basis.energies, times)
    return direct, modes


def free_space_oracle(params: WavepacketParams, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form width and autocorrelation of the free-plane Gaussian.

    sigma(t) = sigma0 sqrt(1 + (t / sigma0^2)^2);
    C_f(t) = exp(-v^2 t^2 / (4 sigma0^2) - i E0 t).
    """
    t = np.asarray(t, dtype=float)
    s0 = params.sigma0
    sigma_t = s0 * np.sqrt(1.0 + (t / (s0 * s0)) ** 2)
    cf = np.exp(-params.speed ** 2 * t ** 2 / (4.0 * s0 * s0) - 1j * params.e0 * t)
    return sigma_t, cf


def free_space_autocorrelation_exact(params: WavepacketParams, t) -> np.ndarray:
    """Exact free-plane Gaussian autocorrelation, including the Fresnel
    spreading prefactor the short-form envelope drops:

        C(t) = exp(-v^2 t^2 / (4 a) - i E0 t) * sigma0^2 / a,  a = sigma0^2 + i t/2.

    The envelope form of free_space_oracle is the |t| << 2 sigma0^2 limit
    (relative corrections O(1/(v sigma0)^2)).
    """
    t = np.asarray(t, dtype=float)
    a = params.sigma0 ** 2 + 0.5j * t
    return (params.sigma0 ** 2 / a) * np.exp(
        -params.speed ** 2 * t ** 2 / (4.0 * a) - 1j * params.e0 * t
    )


def packet_width(grid: Grid, psi: np.ndarray) -> float:
    """Gaussian-equivalent width from the second moment of |psi|^2.

    For |psi|^2 ~ exp(-(r - mu)^2 / sigma^2), Var_x = sigma^2 / 2 per axis;
    returns sigma = sqrt(Var_x + Var_y).
    """
    x, y = grid.interior_points()
    w = np.abs(psi) ** 2
    w = w / w.sum()
    mx, my = float(w @ x), float(w @ y)
    var = float(w @ ((x - mx) ** 2)) + float(w @ ((y - my) ** 2))
    return math.sqrt(var)


def mean_momentum(grid: Grid, psi: np.ndarray) -> tuple[float, float]:
    """<p> via central differences of the full field, Re<psi| -i grad |psi>."""
    f = grid.to_field(psi)
    h = grid.h
    gx = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2 * h)
    gy = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * h)
    gx[:, 0] = gx[:, -1] = 0.0
    gy[0, :] = gy[-1, :] = 0.0
    norm = float(np.sum(np.abs(f) ** 2)) * h * h
    px = float(np.sum(np.conj(f) * -1j * gx).real) * h * h / norm
    py = float(np.sum(np.conj(f) * -1j * gy).real) * h * h / norm
    return px, py


def energy_expectation(grid: Grid, psi: np.ndarray,
                       hamiltonian: sp.spmatrix | None = None) -> float:
    H = hamiltonian if hamiltonian is not None else assemble_hamiltonian(grid)
    norm2 = float(np.sum(np.abs(psi) ** 2))
    return float(np.vdot(psi, H @ psi).real / norm2)


# --- SCARFIELD file format ---------------------------------------------------

FIELD_MAGIC = "SCARFIELD 1"


def write_field(path, grid: Grid, values: np.ndarray, t: float = 0.0) -> None:
    """Full-lattice field dump; complex pairs by default, REAL for densities."""
    full = grid.to_field(values)
    real = not np.iscomplexobj(values)
    x0, y0 = grid.origin
    tag = " REAL" if real else ""
    with open(path, "wb") as f:
        f.write(f"{FIELD_MAGIC}\n".encode())
        f.write(f"{grid.nx} {grid.ny} {float(grid.h)!r} {float(x0)!r} "
                f"{float(y0)!r} {float(t)!r}{tag}\n".encode())
        if real:
            f.write(full.astype("<f8").tobytes(order="C"))
        else:
            inter = np.empty((grid.ny, grid.nx, 2))
            inter[:, :, 0] = full.real
            inter[:, :, 1] = full.imag
            f.write(inter.astype("<f8").tobytes(order="C"))


def read_field(path, grid: Grid | None = None):
    """Returns (header dict, full (ny, nx) array, real_flag)."""
    with open(path, "rb") as f:
        magic = f.readline().decode().strip()
        if magic != FIELD_MAGIC:
            raise ValueError(f"bad field file header: {magic!r}")
        parts = f.readline().decode().split()
        nx, ny = int(parts[0]), int(parts[1])
        h, x0, y0, t = (float(p) for p in parts[2:6])
        real = len(parts) > 6 and parts[6] == "REAL"
        count = nx * ny * (1 if real else 2)
        raw = f.read(count * 8)
    if len(raw) != count * 8:
        raise ValueError("truncated field file")
    data = np.frombuffer(raw, dtype="<f8")
    if real:
        full = data.reshape(ny, nx)
    else:
        pairs = data.reshape(ny, nx, 2)
        full = pairs[:, :, 0] + 1j * pairs[:, :, 1]
    header = {"nx": nx, "ny": ny, "h": h, "x0": x0, "y0": y0, "t": t}
    if grid is not None and (nx, ny) != (grid.nx, grid.ny):
        raise ValueError("field file grid does not match the supplied grid")
    return header, full, real


def write_timeseries_csv(path, times: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write("t,re,im\n")
        for t, v in zip(times, values):
            f.write(f"{float(t)!r},{float(np.real(v))!r},{float(np.imag(v))!r}\n")
