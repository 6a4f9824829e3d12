"""Dirichlet Laplacian eigenproblem on the masked grid.

The Hamiltonian is H = -(1/2) Lap_h with the 5-point stencil in natural
units (hbar = m = 1); masked-out nodes are pinned to zero, which enforces
the Dirichlet condition exactly on boundary nodes.  Small problems are
solved densely; large ones by shift-invert Lanczos over a ladder of
spectral slices sized from the Weyl density, with coverage checks so no
interior eigenvalue is skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Domain, Grid

DENSE_LIMIT = 3000


class SolverError(RuntimeError):
    pass


def assemble_hamiltonian(grid: Grid) -> sp.csr_matrix:
    """Sparse -(1/2) five-point Laplacian over interior nodes."""
    h = grid.h
    mask = grid.interior_mask
    idx = grid.index_map
    n = grid.n_interior
    I, J = np.nonzero(mask)
    me = idx[I, J]
    inv = 1.0 / (2.0 * h * h)
    rows = [me]
    cols = [me]
    vals = [np.full(n, 4.0 * inv)]
    for dI, dJ in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        I2, J2 = I + dI, J + dJ
        ok = (I2 >= 0) & (I2 < grid.ny) & (J2 >= 0) & (J2 < grid.nx)
        nb = np.full(n, -1, dtype=np.int64)
        nb[ok] = idx[I2[ok], J2[ok]]
        keep = nb >= 0
        rows.append(me[keep])
        cols.append(nb[keep])
        vals.append(np.full(int(keep.sum()), -inv))
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return H


@dataclass
class EigenBasis:
    """Eigenpairs of H below a cutoff, grid-normalized and sign-fixed.

    states[k] holds the k-th eigenfunction on interior nodes in compact
    order; sum(phi^2) h^2 = 1.
    """

    energies: np.ndarray           # (n_states,) ascending
    states: np.ndarray             # (n_states, n_interior)
    e_cutoff: float
    grid: Grid

    @property
    def n_states(self) -> int:
        return len(self.energies)

    def state_field(self, k: int) -> np.ndarray:
        return self.grid.to_field(self.states[k])

    def gram_defect(self, sample: int | None = None) -> float:
        """max |<phi_m, phi_n> - delta_mn| over (a sample of) pairs."""
        Phi = self.states
        if sample is not None and self.n_states > sample:
            sel = np.linspace(0, self.n_states - 1, sample).astype(int)
            Phi = Phi[sel]
        G = (Phi @ Phi.T) * self.grid.h ** 2
        return float(np.max(np.abs(G - np.eye(len(Phi)))))


def _fix_signs(states: np.ndarray) -> np.ndarray:
    """First component above noise is made positive (grid-lexicographic)."""
    for k in range(states.shape[0]):
        v = states[k]
        big = np.abs(v) > 1e-12 * np.max(np.abs(v))
        first = int(np.argmax(big))
        if v[first] < 0:
            states[k] = -v
    return states


def _weyl_inverse(domain: Domain, count: float) -> float:
    """Energy at which the two-term Weyl count reaches `count`."""
    A, P = domain.area_exact, domain.perimeter
    a = A / (4 * math.pi)
    b = P / (4 * math.pi)
    k = (b + math.sqrt(b * b + 4 * a * count)) / (2 * a)
    return 0.5 * k * k


def solve_eigensystem(grid: Grid, e_max: float, slice_target: int = 150,
                      residual_tol: float = 1e-6) -> EigenBasis:
    """All eigenpairs with E <= e_max, ascending, orthonormal on the grid."""
    if e_max <= 0:
        raise SolverError("e_max must be positive")
    H = assemble_hamiltonian(grid)
    n = H.shape[0]
    if n <= DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(H.toarray())
        keep = vals <= e_max
        energies = vals[keep]
        states = vecs[:, keep].T.copy()
    else:
        energies, states = _solve_sliced(H, grid.domain, e_max, slice_target)

    if len(energies) == 0:
        raise SolverError("no eigenvalues at or below e_max")
    order = np.argsort(energies, kind="stable")
    energies = np.ascontiguousarray(energies[order])
    states = np.ascontiguousarray(states[order])
    states /= grid.h  # unit grid norm
    states = _fix_signs(states)

    # residual contract ||H phi - E phi|| / ||phi||, checked in chunks
    worst = 0.0
    for start in range(0, len(energies), 128):
        V = states[start:start + 128].T
        R = H @ V - V * energies[start:start + 128]
        rel = np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)
        worst = max(worst, float(rel.max()))
    if worst > residual_tol:
        raise SolverError(f"eigensolver residual {worst:.3e} exceeds {residual_tol:.1e}")
    return EigenBasis(energies=energies, states=states, e_cutoff=e_max, grid=grid)


def _solve_sliced(H, domain: Domain | None, e_max: float, slice_target: int):
    if domain is None:
        raise SolverError("sliced solve needs a domain-bearing grid for Weyl slicing")
    n = H.shape[0]
    rng = np.random.default_rng(1234)
    v0 = rng.standard_normal(n)

    total = _weyl_count_value(domain, e_max)
    n_slices = max(1, int(math.ceil(total / slice_target)))
    counts = np.linspace(0.0, total, n_slices + 1)
    edges = [0.0] + [_weyl_inverse(domain, c) for c in counts[1:-1]] + [e_max]

    energies: list[np.ndarray] = []
    states: list[np.ndarray] = []
    prev_top = -np.inf
    for lo, hi in zip(edges[:-1], edges[1:]):
        sigma = 0.5 * (lo + hi)
        expect = _weyl_count_value(domain, hi) - _weyl_count_value(domain, lo)
        k = int(expect * 1.4) + 25
        for attempt in range(4):
            if k >= n:
                raise SolverError("slice size exceeded matrix dimension")
            vals, vecs = spla.eigsh(H, k=k, sigma=sigma, which="LM", v0=v0, tol=0)
            below_ok = (lo == 0.0) or (vals.min() < lo)
            above_ok = vals.max() > hi
            if below_ok and above_ok:
                break
            k = int(k * 1.6) + 10
        else:
            raise SolverError(f"slice [{lo:.1f},{hi:.1f}) not bracketed after retries")
        keep = (vals >= lo) & (vals < hi) & (vals <= e_max)
        vals, vecs = vals[keep], vecs[:, keep]
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # drop duplicates at slice seams (same eigenvalue converged twice)
        if len(vals) and energies and vals[0] - prev_top < 1e-8 * max(1.0, abs(prev_top)):
            last_vec = states[-1][-1]
            if abs(np.dot(last_vec, vecs[:, 0])) > 0.5:
                vals, vecs = vals[1:], vecs[:, 1:]
        if len(vals):
            prev_top = vals[-1]
            energies.append(vals)
            states.append(vecs.T.copy())
    if not energies:
        return np.empty(0), np.empty((0, n))
    return np.concatenate(energies), np.vstack(states)


def _weyl_count_value(domain: Domain, E: float) -> float:
    A, P = domain.area_exact, domain.perimeter
    k = math.sqrt(2.0 * E)
    return (A / (4 * math.pi)) * k * k - (P / (4 * math.pi)) * k


def weyl_count(domain: Domain, E: float) -> float:
    """Two-term Weyl estimate N(E) = (A/4pi) k^2 - (P/4pi) k, k = sqrt(2E)."""
    if E <= 0:
        return 0.0
    return _weyl_count_value(domain, E)


def mean_level_spacing(basis_or_energies, window: tuple[float, float]) -> float:
    """Mean gap over levels inside [window[0], window[1]]."""
    energies = getattr(basis_or_energies, "energies", basis_or_energies)
    energies = np.asarray(energies)
    lo, hi = window
    sel = energies[(energies >= lo) & (energies <= hi)]
    if len(sel) < 10:
        raise SolverError(f"too few levels in window ({len(sel)} < 10)")
    return float((sel[-1] - sel[0]) / (len(sel) - 1))


# --- SCARBASIS file format ---------------------------------------------------

BASIS_MAGIC = "SCARBASIS 1"


def write_basis(path, basis: EigenBasis) -> None:
    grid = basis.grid
    x0, y0 = grid.origin
    with open(path, "wb") as f:
        f.write(f"{BASIS_MAGIC}\n".encode())
        f.write(f"{basis.n_states} {grid.nx} {grid.ny} {float(grid.h)!r} {float(x0)!r} {float(y0)!r}\n".encode())
        for k in range(basis.n_states):
            f.write(f"{k} {float(basis.energies[k])!r}\n".encode())
            f.write(basis.state_field(k).astype("<f8").tobytes(order="C"))


def read_basis(path, grid: Grid) -> EigenBasis:
    with open(path, "rb") as f:
        magic = f.readline().decode().strip()
        if magic != BASIS_MAGIC:
            raise SolverError(f"bad basis file header: {magic!r}")
        parts = f.readline().decode().split()
        n_states, nx, ny = int(parts[0]), int(parts[1]), int(parts[2])
        if (nx, ny) != (grid.nx, grid.ny):
            raise SolverError("basis file grid does not match the supplied grid")
        energies = np.empty(n_states)
        states = np.empty((n_states, grid.n_interior))
        for k in range(n_states):
            head = f.readline().decode().split()
            energies[k] = float(head[1])
            raw = f.read(nx * ny * 8)
            field = np.frombuffer(raw, dtype="<f8").reshape(ny, nx)
            states[k] = field[grid.interior_mask]
    return EigenBasis(energies=energies, states=states,
                      e_cutoff=float(energies[-1]) if n_states else 0.0, grid=grid)


def write_energies_csv(path, energies: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write("n,E\n")
        for k, e in enumerate(energies):
            f.write(f"{k},{float(e)!r}\n")
