"""Explicit semiclassical couplings and their transport costs.

The self-coupling of a state ``rho`` is ``gamma(z) = S T_z P S`` with
``S = sqrt(rho)`` and ``T_z P = h^{-1}|psi_z><psi_z|``.  Each ``gamma(z)`` is
rank one, ``h^{-1}|phi_z><phi_z|`` with ``phi_z = S psi_z``, so its cost
integrand is ``E_z = <phi_z| c(z) |phi_z>`` with
``c(z) = |y - x|^2 + |xi - p|^2``.  For one packet row ``y = x_m`` all momentum
columns ``phi_{(x_m, xi_k)}`` come out of a single FFT, which gives the
whole ``N x N`` lattice of integrands in ``O(N^3 log N)``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .classical_ot import discretize, wasserstein
from .errors import DimensionTooLarge, TailTruncation
from .grid import PhaseDensity, PhaseGrid
from .qop import DensityOperator, Operator, derivative, gradient_norm_sq, momentum
from .transforms import CoherentFamily, husimi, nyquist_tail, toeplitz_matrix

MAX_LIFTED_N = 32


@dataclass
class CostReport:
    """Cost of a coupling; ``total`` is the Riemann sum of ``E_z``."""

    total: float
    i1: float | None = None
    i2: float | None = None
    rhs_identity: float | None = None
    rel_error: float | None = None
    grid: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        keys = ("total", "i1", "i2", "rhs_identity", "rel_error", "grid")
        return json.dumps({k: asdict(self)[k] for k in keys}, sort_keys=True)


def _grid_info(grid: PhaseGrid) -> dict:
    return {"N": grid.n, "L": grid.half_width, "hbar": grid.hbar}


def _cost_rows(grid: PhaseGrid, phi: np.ndarray, ms: np.ndarray) -> np.ndarray:
    """``<phi|c(z)|phi>`` for columns ``phi[m, :, k]`` centered at ``(x_m, xi_k)``."""
    x, xi = grid.x, grid.xi
    p = grid.hbar * grid.spatial.wavenumbers()
    y = x[ms]
    pos = np.einsum("mi,mik->mk", (x[None, :] - y[:, None]) ** 2, np.abs(phi) ** 2)
    ph = np.fft.fft(phi, axis=1, norm="ortho")
    mom = np.einsum("ik,mik->mk", (p[:, None] - xi[None, :]) ** 2, np.abs(ph) ** 2)
    return pos + mom


class SelfCoupling:
    """Lazy self-coupling ``z -> sqrt(rho) T_z P sqrt(rho)`` of a d = 1 state."""

    def __init__(self, rho: DensityOperator, chunk: int = 16):
        if rho.grid.d != 1:
            raise NotImplementedError("self-couplings are evaluated for d = 1")
        self.rho = rho
        self.grid = rho.grid
        self.sqrt = rho.sqrt.matrix
        self.family = CoherentFamily(rho.grid)
        self.chunk = chunk

    def _rows(self, ms):
        return self.family.apply(self.sqrt, ms)

    def vectors(self, m: int) -> np.ndarray:
        """Columns ``phi_z`` for ``z = (x_m, xi_k)``, up to unit phases."""
        return self._rows([m])[0]

    def gamma(self, index) -> np.ndarray:
        m, k = index
        v = self.vectors(m)[:, k]
        return np.outer(v, v.conj()) / self.grid.scale.h

    def scan(self):
        """Husimi values ``h Tr gamma(z)`` and integrands ``E_z`` on the lattice."""
        n = self.grid.n
        hus = np.empty((n, n))
        e = np.empty((n, n))
        for start in range(0, n, self.chunk):
            ms = np.arange(start, min(n, start + self.chunk))
            phi = self._rows(ms)
            hus[ms] = (np.abs(phi) ** 2).sum(axis=1)
            e[ms] = _cost_rows(self.grid, phi, ms)
        return hus, e

    def marginal(self) -> np.ndarray:
        """``sum_z w gamma(z)`` as a matrix, via the Toeplitz form of the family."""
        t = toeplitz_matrix(self.grid, np.ones(self.grid.shape))
        return self.sqrt @ t @ self.sqrt

    def family_arrays(self):
        """Packets and vectors for every lattice point, for the lifted coupling."""
        n = self.grid.n
        ms = np.arange(n)
        packets = self.family.apply(np.eye(n), ms)     # (m, i, k)
        phis = self.family.apply(self.sqrt, ms)
        packets = packets.transpose(0, 2, 1).reshape(n * n, n)
        phis = phis.transpose(0, 2, 1).reshape(n * n, n)
        return packets, phis


def _classical_term(grid: PhaseGrid, rho_m: np.ndarray, chunk: int = 16) -> complex:
    """``I_1 = sum_z w <psi_z| rho c(z) |psi_z>``."""
    fam = CoherentFamily(grid)
    n = grid.n
    x, xi = grid.x, grid.xi
    p = grid.hbar * grid.spatial.wavenumbers()
    total = 0.0 + 0.0j
    eye = np.eye(n)
    for start in range(0, n, chunk):
        ms = np.arange(start, min(n, start + chunk))
        v = fam.apply(eye, ms)
        rv = fam.apply(rho_m, ms)
        cv = (x[None, :, None] - x[ms][:, None, None]) ** 2 * v
        vh = np.fft.fft(v, axis=1)
        cv = cv + np.fft.ifft((p[None, :, None] - xi[None, None, :]) ** 2 * vh, axis=1)
        total += np.sum(rv.conj() * cv)
    return total * grid.cell_weight


def self_coupling_cost(rho: DensityOperator, tail_tol: float = 1e-6, check_tail: bool = True) -> CostReport:
    """Cost of the self-coupling, with the identity ``dhbar + hbar^2 ||grad sqrt(rho)||^2``.

    ``i1`` is the classical term and ``i2`` the gradient term evaluated as
    ``-hbar^2 h Tr(S Lap S)`` with double commutators; ``extras`` holds the
    integration-by-parts form of ``i2``, the coarse-grid total and the
    minimum integrand.
    """
    grid = rho.grid
    if check_tail:
        tail = nyquist_tail(rho)
        if tail > tail_tol:
            raise TailTruncation(f"state weight {tail:.2e} outside the alias-free window")
    sc = SelfCoupling(rho)
    hus, e = sc.scan()
    w = grid.cell_weight
    total = float(e.sum() * w)
    coarse = float(e[::2, ::2].sum() * 4 * w)
    hbar, h = grid.hbar, grid.scale.h
    i1 = _classical_term(grid, rho.matrix)
    s = sc.sqrt
    dm = derivative(grid).matrix
    x = grid.x
    cx = dm @ s - s @ dm
    cxx = dm @ cx - cx @ dm
    mult = (x[:, None] - x[None, :]) / (1j * hbar)
    cvv = mult * (mult * s)
    lap = cxx + cvv
    i2 = float((-hbar ** 2 * h * np.trace(s @ lap)).real)
    grad_sq = gradient_norm_sq(Operator(grid, s, True))
    i2_ibp = hbar ** 2 * grad_sq
    rhs = grid.d * hbar * float(rho.trace().real) + i2_ibp
    return CostReport(
        total=total, i1=float(i1.real), i2=i2, rhs_identity=rhs,
        rel_error=abs(total - rhs) / total, grid=_grid_info(grid),
        extras={"i2_ibp": i2_ibp, "i1_imag": float(i1.imag), "coarse_total": coarse,
                "grid_tol": abs(total - coarse) / total, "min_integrand": float(e.min()),
                "husimi_mass": float(hus.sum() * w)})


def packet_cost(grid: PhaseGrid) -> np.ndarray:
    """``<psi_z| c(z) |psi_z>`` for every lattice packet."""
    fam = CoherentFamily(grid)
    n = grid.n
    out = np.empty((n, n))
    eye = np.eye(n)
    for start in range(0, n, 32):
        ms = np.arange(start, min(n, start + 32))
        out[ms] = _cost_rows(grid, fam.apply(eye, ms), ms)
    return out


def toeplitz_coupling_cost(f: PhaseDensity) -> CostReport:
    """Cost of ``gamma(z) = h^{-1} f(z) |psi_z><psi_z|`` coupling ``f`` and its Toeplitz state."""
    grid = f.grid
    e0 = packet_cost(grid)
    total = float(np.sum(f.values * e0) * grid.cell_weight)
    target = grid.d * grid.hbar * f.integral()
    return CostReport(total=total, i1=total, i2=0.0, rhs_identity=target,
                      rel_error=abs(total - target) / total, grid=_grid_info(grid))


# -- lifted coupling -------------------------------------------------------

@dataclass
class RankOneFamily:
    """Coupling family ``gamma(z) = h^{-1}|phi_z><phi_z|`` with packets ``psi_z``.

    ``weight`` is the quadrature weight of each ``z``.
    """

    grid: PhaseGrid
    centers: np.ndarray
    packets: np.ndarray
    phis: np.ndarray
    weight: float

    @classmethod
    def from_self_coupling(cls, rho: DensityOperator) -> "RankOneFamily":
        sc = SelfCoupling(rho)
        packets, phis = sc.family_arrays()
        grid = rho.grid
        xx, pp = grid.mesh()
        centers = np.column_stack([xx.ravel(), pp.ravel()])
        return cls(grid, centers, packets, phis, grid.cell_weight)

    @classmethod
    def from_toeplitz(cls, f: PhaseDensity) -> "RankOneFamily":
        grid = f.grid
        n = grid.n
        fam = CoherentFamily(grid)
        packets = fam.apply(np.eye(n), np.arange(n)).transpose(0, 2, 1).reshape(n * n, n)
        vals = f.values.ravel()
        keep = vals > 0
        xx, pp = grid.mesh()
        centers = np.column_stack([xx.ravel(), pp.ravel()])[keep]
        return cls(grid, centers, packets[keep], packets[keep] * np.sqrt(vals[keep])[:, None],
                   grid.cell_weight)

    def first_symbol(self) -> np.ndarray:
        """``h Tr gamma(z) = |phi_z|^2``."""
        return (np.abs(self.phis) ** 2).sum(axis=1)

    def cost(self) -> float:
        """``sum_z w <phi_z| c(z) |phi_z>``."""
        grid = self.grid
        x = grid.x
        p = grid.hbar * grid.spatial.wavenumbers()
        y, xi = self.centers[:, 0], self.centers[:, 1]
        pos = ((x[None, :] - y[:, None]) ** 2 * np.abs(self.phis) ** 2).sum(axis=1)
        ph = np.fft.fft(self.phis, axis=1, norm="ortho")
        mom = ((p[None, :] - xi[:, None]) ** 2 * np.abs(ph) ** 2).sum(axis=1)
        return float(np.sum(pos + mom) * self.weight)


@dataclass
class LiftedCoupling:
    gamma2: np.ndarray
    report: CostReport
    marginal_errors: dict


def lifted_coupling(family: RankOneFamily, rho: np.ndarray, toeplitz: np.ndarray | None = None) -> LiftedCoupling:
    """Materialize ``gamma_2 = sum_z w T_z P (x) gamma(z)`` on the doubled grid.

    Parameters
    ----------
    family : RankOneFamily
        The semiclassical coupling ``gamma``.
    rho : ndarray
        Expected marginal ``h tr_1 gamma_2`` (the quantum state coupled by ``gamma``).
    toeplitz : ndarray, optional
        Expected ``h tr_2 gamma_2``; defaults to the Toeplitz quantization of
        the first symbol of ``family`` computed independently by FFT.
    """
    grid = family.grid
    n = grid.n
    if n > MAX_LIFTED_N:
        raise DimensionTooLarge(f"N = {n} exceeds {MAX_LIFTED_N} for the doubled space")
    h = grid.scale.h
    u = np.einsum("zi,zj->zij", family.packets, family.phis).reshape(len(family.phis), n * n)
    u = u * np.sqrt(family.weight) / h
    gamma2 = u.T @ u.conj()
    gamma2 = 0.5 * (gamma2 + gamma2.conj().T)
    g4 = gamma2.reshape(n, n, n, n)
    tr1 = h * np.einsum("aiaj->ij", g4)
    tr2 = h * np.einsum("iaja->ij", g4)
    if toeplitz is None:
        sym = np.zeros(grid.shape)
        idx = [grid.index_of(c) for c in family.centers]
        for (a, b), val in zip(idx, family.first_symbol()):
            sym[a, b] += val
        toeplitz = toeplitz_matrix(grid, sym)
    x = grid.x.astype(complex)
    pm = momentum(grid).matrix
    eye = np.eye(n)
    dx_ = np.kron(np.diag(x), eye) - np.kron(eye, np.diag(x))
    dp = np.kron(pm, eye) - np.kron(eye, pm)
    c12 = dx_ @ dx_ + dp @ dp
    cost2 = float((h ** 2 * np.trace(c12 @ gamma2)).real)
    cost1 = family.cost()
    eig_min = float(np.linalg.eigvalsh(gamma2)[0])

    def rel(a, b):
        return float(np.linalg.norm(a - b) / np.linalg.norm(b))

    errors = {"tr1_vs_rho": rel(tr1, rho), "tr2_vs_toeplitz": rel(tr2, toeplitz),
              "min_eigenvalue": eig_min, "max_eigenvalue": float(np.linalg.eigvalsh(gamma2)[-1])}
    dh = grid.d * grid.hbar
    diff = cost2 - cost1
    report = CostReport(total=cost2, i1=cost1, i2=diff, rhs_identity=cost1 + dh,
                        rel_error=abs(diff - dh) / dh, grid=_grid_info(grid))
    return LiftedCoupling(gamma2, report, errors)


# -- bounds through the triangle inequality --------------------------------

def pseudometric_upper_bound(f: PhaseDensity, rho: DensityOperator, cost: CostReport | None = None,
                             max_atoms: int = 2000) -> dict:
    """``W2(f, f~_rho) + sqrt(self cost)``, an upper bound on ``W_hbar(f, rho)``."""
    cost = cost or self_coupling_cost(rho)
    hus = husimi(rho)
    m1, m2 = discretize(f, max_atoms), discretize(hus, max_atoms)
    w2 = wasserstein(m1, m2, 2).value
    return {"upper": w2 + np.sqrt(cost.total), "W2": w2, "sqrt_cost": float(np.sqrt(cost.total)),
            "disc_error": m1.error_bound + m2.error_bound}


def sandwich_report(f: PhaseDensity, rho: DensityOperator, cost: CostReport | None = None) -> dict:
    """Check ``W2(f, f~_rho)^2 <= upper^2 + d hbar`` and the induced lower bound on ``W_hbar``."""
    ub = pseudometric_upper_bound(f, rho, cost)
    dh = f.grid.d * f.grid.hbar
    lower = ub["W2"]
    upper = float(np.sqrt(ub["upper"] ** 2 + dh))
    wh_lower = max(0.0, ub["W2"] - np.sqrt(dh))
    return {"lower": lower, "upper": upper, "wh_lower": wh_lower, "wh_upper": ub["upper"],
            "pass": bool(lower <= upper and wh_lower <= ub["upper"]), **ub}
