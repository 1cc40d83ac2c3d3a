"""Phase-space discretization, quadrature and FFT conventions.

Conventions used throughout the package
---------------------------------------
* Position nodes ``x_j = -L + j*dx`` with ``dx = 2L/N`` and ``N`` even.
* Momentum lattice ``xi_k = (k - N/2) * dxi`` with ``dxi = pi*hbar/L``.
  It is the Fourier-conjugate lattice of the position grid, so
  ``N * dx * dxi = h``: one phase cell of the lattice carries ``1/N`` of a
  Planck cell.
* Phase arrays are indexed ``values[x_1, .., x_d, xi_1, .., xi_d]``.
* Quadrature is the plain Riemann sum ``sum(values) * cell_weight``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .errors import GridMismatch, NegativeSymbol, TailTruncation

TOL_NEG = 1e-9
TOL_MASS = 1e-7


@dataclass(frozen=True)
class PlanckScale:
    """Semiclassical scale: ``hbar``, ``h = 2*pi*hbar`` and dimension ``d``."""

    hbar: float
    d: int = 1

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")

    @property
    def h(self) -> float:
        return 2.0 * np.pi * self.hbar


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid of ``n_points`` nodes on ``[-L, L)``."""

    n_points: int
    half_width: float

    def __post_init__(self):
        if self.n_points <= 0 or self.n_points % 2:
            raise ValueError("n_points must be a positive even integer")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    dx = spacing

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n_points)

    def dual_spacing(self, hbar: float) -> float:
        return np.pi * hbar / self.half_width

    def dual_nodes(self, hbar: float) -> np.ndarray:
        n = self.n_points
        return (np.arange(n) - n // 2) * self.dual_spacing(hbar)

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order; momentum is ``hbar * k``."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, self.spacing)


def balanced_half_width(hbar: float, n_points: int) -> float:
    """Half-width for which the position and momentum ranges coincide."""
    return float(np.sqrt(np.pi * hbar * n_points / 2.0))


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor phase-space grid built from a spatial grid and a Planck scale."""

    spatial: SpatialGrid
    scale: PlanckScale

    @classmethod
    def make(cls, hbar: float, n_points: int, half_width: float | None = None, d: int = 1):
        """Build a grid; ``half_width=None`` selects the balanced width."""
        if half_width is None:
            half_width = balanced_half_width(hbar, n_points)
        return cls(SpatialGrid(n_points, half_width), PlanckScale(hbar, d))

    @property
    def d(self) -> int:
        return self.scale.d

    @property
    def hbar(self) -> float:
        return self.scale.hbar

    @property
    def n(self) -> int:
        return self.spatial.n_points

    @property
    def half_width(self) -> float:
        return self.spatial.half_width

    @property
    def dx(self) -> float:
        return self.spatial.spacing

    @property
    def dxi(self) -> float:
        return self.spatial.dual_spacing(self.scale.hbar)

    @property
    def x(self) -> np.ndarray:
        return self.spatial.nodes

    @property
    def xi(self) -> np.ndarray:
        return self.spatial.dual_nodes(self.scale.hbar)

    @property
    def momentum_cutoff(self) -> float:
        """Largest representable momentum magnitude ``pi*hbar/dx``."""
        return np.pi * self.hbar / self.dx

    @property
    def cell_weight(self) -> float:
        return (self.dx * self.dxi) ** self.d

    @property
    def shape(self) -> tuple:
        return (self.n,) * (2 * self.d)

    def axes(self) -> list[np.ndarray]:
        return [self.x] * self.d + [self.xi] * self.d

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def radius_squared(self, center: Sequence[float] | None = None) -> np.ndarray:
        c = np.zeros(2 * self.d) if center is None else np.asarray(center, float)
        return sum((m - ci) ** 2 for m, ci in zip(self.mesh(), c))

    def index_of(self, point: Sequence[float]) -> tuple:
        """Nearest lattice index of a phase point."""
        point = np.asarray(point, float)
        idx = []
        for k, v in enumerate(point):
            if k < self.d:
                i = np.rint((v + self.half_width) / self.dx)
            else:
                i = np.rint(v / self.dxi) + self.n // 2
            idx.append(int(i) % self.n)
        return tuple(idx)

    def is_on_lattice(self, point: Sequence[float], tol: float = 1e-9) -> bool:
        point = np.asarray(point, float)
        steps = [self.dx] * self.d + [self.dxi] * self.d
        return all(abs(v / s - np.rint(v / s)) < tol for v, s in zip(point, steps))

    def total_volume(self) -> float:
        return self.cell_weight * self.n ** (2 * self.d)

    def check_same(self, other: "PhaseGrid"):
        if self != other:
            raise GridMismatch(f"grids differ: {self} vs {other}")


@dataclass(frozen=True)
class PhaseDensity:
    """Real function sampled on a phase grid.

    ``kind`` is ``"probability"`` (nonnegative, unit mass) or ``"signed"``.
    """

    grid: PhaseGrid
    values: np.ndarray
    kind: str = "signed"
    tol_neg: float = field(default=TOL_NEG, compare=False)
    tol_mass: float = field(default=TOL_MASS, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise GridMismatch(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", vals)
        if self.kind not in ("probability", "signed"):
            raise ValueError("kind must be 'probability' or 'signed'")
        if self.kind == "probability":
            if vals.min() < -self.tol_neg:
                raise NegativeSymbol(f"min value {vals.min():.3e} below -{self.tol_neg}")
            mass = self.integral()
            if abs(mass - 1.0) > self.tol_mass:
                raise ValueError(f"probability density has mass {mass:.12g}")

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_weight)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def lp_norm(self, p: float) -> float:
        if np.isinf(p):
            return self.sup_norm()
        return float((np.sum(np.abs(self.values) ** p) * self.grid.cell_weight) ** (1.0 / p))

    def with_values(self, values, kind: str | None = None) -> "PhaseDensity":
        return PhaseDensity(self.grid, values, kind or self.kind)

    def __sub__(self, other: "PhaseDensity") -> "PhaseDensity":
        self.grid.check_same(other.grid)
        return PhaseDensity(self.grid, self.values - other.values, "signed")

    def __add__(self, other: "PhaseDensity") -> "PhaseDensity":
        self.grid.check_same(other.grid)
        return PhaseDensity(self.grid, self.values + other.values, "signed")

    def mean(self) -> np.ndarray:
        return np.array([np.sum(m * self.values) for m in self.grid.mesh()]) * self.grid.cell_weight

    # -- serialization -------------------------------------------------
    def to_csv(self, path_or_buf=None) -> str | None:
        """Write ``x,xi,value`` rows (row-major); d=2 uses ``x1,x2,xi1,xi2,value``."""
        cols = [m.ravel() for m in self.grid.mesh()] + [self.values.ravel()]
        if self.grid.d == 1:
            header = "x,xi,value"
        else:
            header = "x1,x2,xi1,xi2,value"
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt="%.17g")
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_buf, kind: str = "signed") -> "PhaseDensity":
        data = np.loadtxt(path_or_buf, delimiter=",", skiprows=1, ndmin=2)
        d = (data.shape[1] - 1) // 2
        n = int(round(len(data) ** (1.0 / (2 * d))))
        x = np.unique(data[:, 0])
        xi = np.unique(data[:, d])
        half_width = -float(x[0])
        dxi = float(xi[1] - xi[0])
        hbar = dxi * half_width / np.pi
        grid = PhaseGrid(SpatialGrid(n, half_width), PlanckScale(hbar, d))
        return cls(grid, data[:, -1].reshape(grid.shape), kind)


def gaussian_tail_mass(grid: PhaseGrid, center=None, variance: float | None = None) -> float:
    """Mass of an isotropic Gaussian lying outside the computational box."""
    var = grid.hbar / 2 if variance is None else variance
    c = np.zeros(2 * grid.d) if center is None else np.asarray(center, float)
    s = np.sqrt(2 * var)
    inside = 1.0
    for k, ck in enumerate(c):
        if k < grid.d:
            lo, hi = -grid.half_width, grid.half_width
        else:
            lo, hi = grid.xi[0], -grid.xi[0]
        out = 0.5 * (erfc((hi - ck) / s) + erfc((ck - lo) / s))
        inside *= 1.0 - out
    return float(1.0 - inside)


def gaussian_gh(grid: PhaseGrid, center=None, variance: float | None = None,
                check_tail: bool = True) -> PhaseDensity:
    """Sample the semiclassical Gaussian ``g_h(z - center) = (2/h)^d exp(-|z-center|^2/hbar)``.

    ``variance`` (per coordinate) defaults to ``hbar/2``; other values give
    the isotropic Gaussian of that variance, e.g. ``hbar`` for ``g_h*g_h``.
    """
    var = grid.hbar / 2 if variance is None else variance
    if check_tail:
        tail = gaussian_tail_mass(grid, center, var)
        if tail > 1e-8:
            raise TailTruncation(f"Gaussian tail mass {tail:.2e} outside grid")
    r2 = grid.radius_squared(center)
    vals = (2 * np.pi * var) ** (-grid.d) * np.exp(-r2 / (2 * var))
    vals = vals / (vals.sum() * grid.cell_weight)
    return PhaseDensity(grid, vals, "probability")


def periodic_kernel(grid: PhaseGrid, variance: float | None = None) -> np.ndarray:
    """Gaussian centered at the origin with minimal-image (wrapped) coordinates.

    Used as a convolution kernel; unlike :func:`gaussian_gh` it is not
    renormalized, so the discretization error stays visible.
    """
    var = grid.hbar / 2 if variance is None else variance
    n = grid.n
    m = np.arange(n) - n // 2
    ax = [m * grid.dx] * grid.d + [m * grid.dxi] * grid.d
    r2 = sum(a ** 2 for a in np.meshgrid(*ax, indexing="ij"))
    return (2 * np.pi * var) ** (-grid.d) * np.exp(-r2 / (2 * var))


def delta_cell(grid: PhaseGrid, point) -> PhaseDensity:
    """Probability mass concentrated in the single cell nearest to ``point``."""
    vals = np.zeros(grid.shape)
    vals[grid.index_of(point)] = 1.0 / grid.cell_weight
    return PhaseDensity(grid, vals, "probability")


def quadrature(f: PhaseDensity) -> float:
    return f.integral()


def moment(f: PhaseDensity, n: float) -> float:
    """Return ``Z_n(f) = (int |z|^n f)^(1/n)``; ``n = 0`` returns 1."""
    if n == 0:
        return 1.0
    r = np.sqrt(f.grid.radius_squared())
    return float((np.sum(r ** n * f.values) * f.grid.cell_weight) ** (1.0 / n))


def convolve(f: PhaseDensity, g: PhaseDensity) -> PhaseDensity:
    """Periodic convolution ``(f*g)(z) = sum_z' f(z') g(z - z') w`` via FFT.

    The lattice node with coordinate zero sits at index ``N/2`` on every
    axis, hence the ``ifftshift`` on the second factor.
    """
    f.grid.check_same(g.grid)
    out = convolve_arrays(f.values, g.values, f.grid.cell_weight)
    kind = "probability" if (f.kind == g.kind == "probability") else "signed"
    if kind == "probability":
        out = np.maximum(out, 0.0) if out.min() > -TOL_NEG else out
    return PhaseDensity(f.grid, out, kind)


def convolve_arrays(a: np.ndarray, b: np.ndarray, weight: float) -> np.ndarray:
    fa = np.fft.rfftn(a)
    fb = np.fft.rfftn(np.fft.ifftshift(b))
    return np.fft.irfftn(fa * fb, s=a.shape, axes=range(a.ndim)) * weight


def convolve_with_kernel(values: np.ndarray, kernel_centered: np.ndarray, weight: float) -> np.ndarray:
    """Convolve with a kernel already centered at index ``N/2`` on each axis."""
    return convolve_arrays(values, kernel_centered, weight)
