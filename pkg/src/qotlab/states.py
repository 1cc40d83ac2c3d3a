"""Reference states: thermal states, spectral projections, Toeplitz powers, coherent mixtures."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from .errors import NoBoundStates, ResolutionError, ZeroSymbol
from .grid import PhaseDensity, PhaseGrid, convolve_with_kernel, periodic_kernel
from .qop import (DensityOperator, Operator, abs_momentum_power, fourier_multiplier,
                  gradient_norm_sq, momentum, schatten_norm, density_from_matrix)
from .transforms import coherent_vector, toeplitz_quantize


@dataclass(frozen=True)
class PotentialSpec:
    """Potential ``V``.

    ``kind="power"``: ``kappa |x|^a``; ``"shifted_power"``: ``kappa |x|^a + offset``;
    ``"tabulated"``: explicit nodal values.  For power kinds the gradient
    bound ``|V'| <= kappa2 |x|^b`` holds with ``kappa2 = kappa*a``, ``b = a-1``.
    """

    kind: str = "power"
    kappa: float = 1.0
    a: float = 2.0
    offset: float = 0.0
    values: tuple | None = None

    @property
    def kappa2(self) -> float:
        return self.kappa * self.a

    @property
    def b(self) -> float:
        return self.a - 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.kind == "tabulated":
            return np.asarray(self.values, float)
        v = self.kappa * np.abs(x) ** self.a
        if self.kind == "shifted_power":
            v = v + self.offset
        return v

    def check_hypotheses(self, x) -> dict:
        """Nodal check of ``V >= kappa|x|^a`` and ``|V'| <= kappa2 |x|^b``."""
        if self.kind != "power":
            return {}
        v = self(x)
        coercive = bool(np.all(v >= self.kappa * np.abs(x) ** self.a - 1e-12))
        grad = self.kappa * self.a * np.sign(x) * np.abs(x) ** (self.a - 1)
        regular = bool(np.all(np.abs(grad) <= self.kappa2 * np.abs(x) ** self.b + 1e-12))
        return {"coercivity": coercive, "regularity": regular}


HARMONIC = PotentialSpec("power", 1.0, 2.0)


def hamiltonian(potential: PotentialSpec, grid: PhaseGrid, energy_scale: float | None = None) -> Operator:
    """``H = -hbar^2 Delta + V`` with the kinetic part exact in the Fourier basis.

    Raises
    ------
    ResolutionError
        If ``energy_scale`` is given and exceeds either the kinetic cutoff
        ``(pi hbar/dx)^2`` or the potential at the box edge.
    """
    if grid.d != 1:
        raise NotImplementedError
    if energy_scale is not None:
        p_max2 = grid.momentum_cutoff ** 2
        v_edge = float(potential(np.array([grid.half_width]))[0]) if potential.kind != "tabulated" else np.inf
        if energy_scale > p_max2 or energy_scale > v_edge:
            raise ResolutionError(
                f"energy scale {energy_scale:.3g} exceeds cutoffs (kinetic {p_max2:.3g}, potential {v_edge:.3g})")
    hbar = grid.hbar
    kin = fourier_multiplier(grid, lambda k: (hbar * k) ** 2).matrix
    h = kin + np.diag(potential(grid.x)).astype(complex)
    return Operator(grid, 0.5 * (h + h.conj().T), True)


@lru_cache(maxsize=32)
def _eigensystem(potential: PotentialSpec, grid: PhaseGrid):
    h = hamiltonian(potential, grid).matrix
    w, v = np.linalg.eigh(h)
    return w, v


def eigensystem(potential: PotentialSpec, grid: PhaseGrid):
    """Cached dense eigendecomposition of the Hamiltonian (read-only arrays)."""
    w, v = _eigensystem(potential, grid)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def _edge_weight(grid: PhaseGrid, vecs: np.ndarray, weights: np.ndarray) -> float:
    """Weighted probability of the eigenvectors near the box edge or momentum cutoff."""
    edge = np.abs(grid.x) > 0.9 * grid.half_width
    pos = (np.abs(vecs[edge]) ** 2).sum(axis=0)
    vf = np.fft.fft(vecs, axis=0, norm="ortho")
    k = np.abs(np.fft.fftfreq(grid.n) * grid.n) > 0.45 * grid.n
    mom = (np.abs(vf[k]) ** 2).sum(axis=0)
    return float(np.sum(weights * (pos + mom)) / np.sum(weights))


@dataclass(frozen=True)
class ThermalSpec:
    potential: PotentialSpec
    beta: float
    grid: PhaseGrid

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def boltzmann_operator(spec: ThermalSpec, beta: float | None = None) -> np.ndarray:
    """Unnormalized ``exp(-beta H)`` matrix."""
    beta = spec.beta if beta is None else beta
    w, v = eigensystem(spec.potential, spec.grid)
    m = (v * np.exp(-beta * w)) @ v.conj().T
    return 0.5 * (m + m.conj().T)


def thermal_state(spec: ThermalSpec, tol_edge: float = 1e-4) -> tuple[DensityOperator, float]:
    """Normalized thermal state ``Z^{-1} exp(-beta H)`` and ``Z = h^d Tr exp(-beta H)``."""
    grid = spec.grid
    w, v = eigensystem(spec.potential, grid)
    boltz = np.exp(-spec.beta * (w - w[0]))
    if _edge_weight(grid, v, boltz) > tol_edge:
        raise ResolutionError("thermal state reaches the grid edge; enlarge L or N")
    z = float(grid.scale.h * np.sum(np.exp(-spec.beta * w)))
    m = (v * (boltz / boltz.sum())) @ v.conj().T / grid.scale.h
    rho = DensityOperator(grid, 0.5 * (m + m.conj().T))
    return rho, z


def harmonic_partition_function(beta: float, hbar: float) -> float:
    return float(np.pi * hbar / np.sinh(beta * hbar))


def c_a(d: int, a: float) -> float:
    return float(2 * gamma(d / a) * np.pi ** d / (a * gamma(d / 2)))


def c_da(d: int, a: float) -> float:
    return float(2 ** (2 * d * (1 / a + 0.5) + 1) * gamma(d / a) * np.pi ** d / (a * gamma(d / 2)))


def thermal_bounds_report(spec: ThermalSpec, n: float) -> dict:
    """Both sides of the thermal moment, Golden-Thompson and gradient bounds.

    Every entry is a ``(lhs, rhs)`` pair for the unnormalized ``exp(-beta H)``
    with a power potential ``kappa |x|^a``.
    """
    pot, beta, grid = spec.potential, spec.beta, spec.grid
    if pot.kind != "power":
        raise ValueError("thermal bounds need a power potential")
    d, hbar, h = grid.d, grid.hbar, grid.scale.h
    kappa, a, kappa2, b = pot.kappa, pot.a, pot.kappa2, pot.b
    gexp = d * (1 / a + 0.5)
    ca = c_a(d, a)
    w, v = eigensystem(pot, grid)

    rho_b = boltzmann_operator(spec)
    rho_half = boltzmann_operator(spec, beta / 2)
    pn = fourier_multiplier(grid, lambda k: np.abs(hbar * k) ** n).matrix
    xn = np.abs(grid.x) ** n

    def op_norm(m):
        return float(np.linalg.norm(m, 2))

    def l2sq(m):
        return float(h ** d * np.vdot(m, m).real)

    out = {}
    out["velocity_Linfty"] = (op_norm(pn @ rho_b), (n / (2 * beta)) ** (n / 2))
    out["contraction_n0"] = (op_norm(rho_b), 1.0)
    out["velocity_L2"] = (l2sq(pn @ rho_b), ca * n ** n / (kappa ** (d / a) * beta ** (n + gexp)))
    pos_rhs = ca * max((2 * n * kappa * hbar) ** (2 * n / (1 + a)),
                       (2 * n / (kappa * a * beta)) ** (n / a)) / (kappa ** (d / a) * beta ** gexp)
    out["position_L2"] = (l2sq(xn[:, None] * rho_b), pos_rhs)
    gt_lhs = float(h ** d * np.sum(np.exp(-2 * beta * w)))
    out["golden_thompson"] = (gt_lhs, ca * (2 * beta) ** (-gexp) * kappa ** (-d / a))
    sq = Operator(grid, rho_half, True)
    grad = gradient_norm_sq(sq)
    grad_rhs = c_da(d, a) / (kappa ** (d / a) * beta ** (gexp - 1)) * (
        16 + kappa2 * beta * max((2 * b * kappa * hbar) ** (2 * b / (1 + a)),
                                 (8 * b / (kappa * a * beta)) ** (b / a)))
    out["thermal_gradient"] = (grad, grad_rhs)
    return out


# -- spectral projections --------------------------------------------------

@dataclass(frozen=True)
class ProjectionSpec:
    potential: PotentialSpec
    grid: PhaseGrid


def spectral_projection(spec: ProjectionSpec, tol_edge: float = 1e-6):
    """``Z_0^{-1} 1_{(-inf, 0]}(H)`` and ``Z_0 = h^d * #{E_k <= 0}``.

    Returns ``(rho, Z0, P)`` with ``P`` the unnormalized projector matrix.
    """
    grid = spec.grid
    x = grid.x
    if np.all(spec.potential(x) >= 0):
        raise NoBoundStates("potential has no negative region on the grid")
    w, v = eigensystem(spec.potential, grid)
    sel = w <= 1e-12
    count = int(sel.sum())
    if count == 0:
        raise NoBoundStates("no eigenvalue <= 0")
    vs = v[:, sel]
    if _edge_weight(grid, vs, np.ones(count)) > tol_edge:
        raise ResolutionError("bound states reach the grid edge; enlarge L or N")
    p = vs @ vs.conj().T
    p = 0.5 * (p + p.conj().T)
    z0 = grid.scale.h ** grid.d * count
    rho = DensityOperator(grid, p / z0)
    return rho, float(z0), p


def projection_gradient_scaling(potential: PotentialSpec, grids) -> list[dict]:
    """Rows ``(hbar, Z0, sqrt(hbar) ||grad P||_{L^2}, ||p P||_op)`` for a list of grids."""
    rows = []
    for grid in grids:
        rho, z0, p = spectral_projection(ProjectionSpec(potential, grid))
        pop = Operator(grid, p, True)
        g = np.sqrt(gradient_norm_sq(pop))
        pm = momentum(grid).matrix
        rows.append({"hbar": grid.hbar, "N": grid.n, "L": grid.half_width, "Z0": z0,
                     "sqrt_hbar_grad": float(np.sqrt(grid.hbar) * g),
                     "pP_op": float(np.linalg.norm(pm @ p, 2)),
                     "Vminus_sup_sqrt": float(np.sqrt(max(0.0, -potential(grid.x).min())))})
    return rows


# -- powers of Toeplitz operators -----------------------------------------

def gaussian_g1(grid: PhaseGrid) -> np.ndarray:
    """Centered (wrapped) samples of ``g_1(z) = 2^d exp(-2 pi |z|^2)``."""
    var = 1.0 / (4 * np.pi)
    return periodic_kernel(grid, var)


def toeplitz_power_state(f: PhaseDensity, n: int) -> dict:
    """``rho = C_f T_f^n`` with the bounds attached.

    Returns a dict with ``rho``, ``C_f``, ``Cf_bound`` (right side of the
    ``C_f`` estimate) and ``cost_rhs`` (the self-cost bound).
    """
    if n < 2 or n % 2:
        raise ValueError("n must be an even integer >= 2")
    grid = f.grid
    if np.abs(f.values).max() == 0:
        raise ZeroSymbol("symbol vanishes identically")
    t = toeplitz_quantize(PhaseDensity(grid, f.values, "signed")).matrix
    w, v = np.linalg.eigh(0.5 * (t + t.conj().T))
    w = np.clip(w, 0, None)
    tn = (v * w ** n) @ v.conj().T
    trace_n = grid.scale.h * np.sum(w ** n)
    cf = 1.0 / trace_n
    rho = DensityOperator(grid, 0.5 * (tn + tn.conj().T) * cf)
    wgt = grid.cell_weight
    l1 = float(np.abs(f.values).sum() * wgt)
    l2 = float(np.sqrt((f.values ** 2).sum() * wgt))
    linf = float(np.abs(f.values).max())
    g1f = convolve_with_kernel(f.values, gaussian_g1(grid), wgt)
    g1f_l2 = float(np.sqrt((g1f ** 2).sum() * wgt))
    d = grid.d
    cf_bound = l1 ** (n - 2) * g1f_l2 ** (2 * (1 - n))
    cost_rhs = (d + n ** 2 / (2 * np.e) * cf * linf ** (n - 2) * l2 ** 2) * grid.hbar
    return {"rho": rho, "C_f": float(cf), "Cf_bound": float(cf_bound), "cost_rhs": float(cost_rhs),
            "f_L1": l1, "f_L2": l2, "f_Linf": linf}


# -- symbols and coherent mixtures ----------------------------------------

def symbol(grid: PhaseGrid, name: str, width: float = 1.0, center=(0.0, 0.0)) -> PhaseDensity:
    """Probability symbols used by the suites.

    ``gaussian``: isotropic Gaussian of standard deviation ``width``;
    ``two_bump``: two Gaussians at ``(+-width, 0)`` of deviation ``width/2``;
    ``uniform``: indicator of the square of half-side ``width`` (cell-averaged edges).
    """
    xx, pp = grid.mesh()
    x0, p0 = center
    if name == "gaussian":
        vals = np.exp(-((xx - x0) ** 2 + (pp - p0) ** 2) / (2 * width ** 2))
    elif name == "two_bump":
        s = width / 2
        vals = (np.exp(-((xx - x0 - width) ** 2 + (pp - p0) ** 2) / (2 * s ** 2))
                + np.exp(-((xx - x0 + width) ** 2 + (pp - p0) ** 2) / (2 * s ** 2)))
    elif name == "uniform":
        def frac(c, step):
            return np.clip((width - np.abs(c) + step / 2) / step, 0, 1)
        vals = frac(xx - x0, grid.dx) * frac(pp - p0, grid.dxi)
    else:
        raise ValueError(f"unknown symbol {name!r}")
    vals = vals / (vals.sum() * grid.cell_weight)
    return PhaseDensity(grid, vals, "probability")


def coherent_mixture(grid: PhaseGrid, centers, weights=None) -> DensityOperator:
    """Convex combination of coherent states ``h^{-1}|psi_z><psi_z|``."""
    centers = np.atleast_2d(centers)
    weights = np.ones(len(centers)) if weights is None else np.asarray(weights, float)
    weights = weights / weights.sum()
    m = np.zeros((grid.n, grid.n), complex)
    for wgt, z in zip(weights, centers):
        v = coherent_vector(grid, z)
        m += wgt * np.outer(v, v.conj())
    return DensityOperator(grid, m / grid.scale.h)


def random_mixed_state(grid: PhaseGrid, rng, rank: int = 4, spread: float = 1.0) -> DensityOperator:
    """Random mixture of ``rank`` coherent states with centers in ``[-spread, spread]^2``."""
    centers = rng.uniform(-spread, spread, size=(rank, 2))
    weights = rng.uniform(0.2, 1.0, size=rank)
    return coherent_mixture(grid, centers, weights)


def harmonic_eigenstate(grid: PhaseGrid, k: int) -> DensityOperator:
    w, v = eigensystem(HARMONIC, grid)
    return density_from_matrix(grid, np.outer(v[:, k], v[:, k].conj()))
