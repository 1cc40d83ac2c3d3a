"""Wigner and Husimi transforms, Weyl and Toeplitz quantization, coherent states.

The discrete Wigner map works through the chord (characteristic) function.
For a matrix ``A`` in the orthonormal basis and integer chord indices
``a, b`` in ``[-N/2, N/2)``::

    chi[a, b] = sum_j A[(j + a) % N, j] * exp(-i b dxi (x_j + a dx/2) / hbar)

and the Wigner function is the symplectic Fourier transform of ``chi``.
The map is a scaled unitary between ``N x N`` matrices and ``N x N`` phase
arrays, so the Plancherel identity and the Weyl inverse are exact.  It
represents the continuum transform faithfully for states supported in
``[-L/2, L/2]`` with momenta below half the lattice cutoff; content beyond
that aliases (the induced Nyquist bound, see :func:`nyquist_tail`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NegativeSymbol
from .grid import PhaseDensity, PhaseGrid, convolve_with_kernel, periodic_kernel
from .qop import DensityOperator, Operator, density_from_matrix


# -- chord-method Wigner map -----------------------------------------------

def _chord_indices(n: int):
    a = (np.fft.fftfreq(n) * n).astype(int)
    j = np.arange(n)
    rows = (j[None, :] + a[:, None]) % n
    cols = np.broadcast_to(j, (n, n))
    phase = np.exp(-1j * np.pi * np.outer(a, a) / n)
    return rows, cols, phase


def _wigner_1d(m: np.ndarray) -> np.ndarray:
    """Map ``(..., N, N)`` matrices to ``(..., N_x, N_xi)`` phase arrays."""
    n = m.shape[-1]
    rows, cols, phase = _chord_indices(n)
    d = m[..., rows, cols]
    b = np.fft.fft(d, axis=-1) * phase
    g = np.fft.ifft(b, axis=-1) * n
    hk = np.fft.fftshift(np.fft.fft(g, axis=-2), axes=-2)
    return np.swapaxes(hk, -1, -2) / n


def _weyl_1d(f: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`_wigner_1d`."""
    n = f.shape[-1]
    rows, cols, phase = _chord_indices(n)
    hk = np.fft.ifftshift(np.swapaxes(f, -1, -2) * n, axes=-2)
    g = np.fft.ifft(hk, axis=-2)
    b = np.fft.fft(g, axis=-1) / n
    d = np.fft.ifft(b / phase, axis=-1)
    m = np.zeros(f.shape, dtype=complex)
    m[..., rows, cols] = d
    return m


def _wigner_array(matrix: np.ndarray, n: int, dim: int) -> np.ndarray:
    if dim == 1:
        return _wigner_1d(matrix)
    a = matrix.reshape(n, n, n, n)          # (i1, i2, k1, k2)
    a = a.transpose(1, 3, 0, 2)             # (i2, k2, i1, k1)
    a = _wigner_1d(a)                       # (i2, k2, x1, p1)
    a = a.transpose(2, 3, 0, 1)             # (x1, p1, i2, k2)
    a = _wigner_1d(a)                       # (x1, p1, x2, p2)
    return a.transpose(0, 2, 1, 3)


def _weyl_array(values: np.ndarray, n: int, dim: int) -> np.ndarray:
    if dim == 1:
        return _weyl_1d(values)
    a = values.transpose(0, 2, 1, 3)        # (x1, p1, x2, p2)
    a = _weyl_1d(a)                         # (x1, p1, i2, k2)
    a = a.transpose(2, 3, 0, 1)             # (i2, k2, x1, p1)
    a = _weyl_1d(a)                         # (i2, k2, i1, k1)
    a = a.transpose(2, 0, 3, 1)             # (i1, i2, k1, k2)
    return a.reshape(n * n, n * n)


def wigner_complex(op) -> np.ndarray:
    """Complex-valued Wigner array; real up to Nyquist-line residue for Hermitian input."""
    grid = op.grid
    return _wigner_array(op.matrix, grid.n, grid.d)


def wigner(op) -> PhaseDensity:
    """Wigner transform ``f_rho`` as a signed phase density (real part)."""
    return PhaseDensity(op.grid, wigner_complex(op).real, "signed")


def wigner_imag_residue(op) -> float:
    """Max imaginary part of the discrete Wigner array (a diagnostic)."""
    return float(np.abs(wigner_complex(op).imag).max())


def weyl_quantize(f: PhaseDensity) -> Operator:
    """Weyl quantization, the exact inverse of :func:`wigner` on the grid."""
    grid = f.grid
    m = _weyl_array(np.asarray(f.values, dtype=complex), grid.n, grid.d)
    return Operator(grid, m, self_adjoint=np.isrealobj(f.values))


def nyquist_tail(op) -> float:
    """Relative weight of an operator outside the alias-free window.

    Measures the Frobenius weight of matrix entries whose position or
    momentum index falls outside the central half of the grid.  States with
    a value above ~1e-6 are not faithfully represented by the discrete
    Wigner map.
    """
    grid = op.grid
    if grid.d != 1:
        raise NotImplementedError
    n = grid.n
    m = op.matrix
    total = np.vdot(m, m).real
    if total == 0:
        return 0.0
    outer = np.abs(grid.x) > grid.half_width / 2
    pos = (np.abs(m[outer, :]) ** 2).sum() + (np.abs(m[:, outer]) ** 2).sum()
    mf = np.fft.ifft(np.fft.fft(m, axis=0, norm="ortho"), axis=1, norm="ortho")
    k = np.abs(np.fft.fftfreq(n) * n) >= n // 4
    mom = (np.abs(mf[k, :]) ** 2).sum() + (np.abs(mf[:, k]) ** 2).sum()
    return float((pos + mom) / total)


# -- coherent states -------------------------------------------------------

@dataclass
class CoherentState:
    """Gaussian wave packet ``psi_z`` sampled on the grid (d = 1).

    ``vector`` holds orthonormal-basis coordinates (``psi(x_j) sqrt(dx)``)
    normalized to unit length.  The Gaussian envelope uses the wrapped
    distance to the center so that packets near the box edge stay smooth.
    """

    grid: PhaseGrid
    center: tuple
    vector: np.ndarray

    def density(self) -> DensityOperator:
        v = self.vector
        return DensityOperator(self.grid, np.outer(v, v.conj()) / self.grid.scale.h)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def _wrapped(grid: PhaseGrid, y: float) -> np.ndarray:
    period = 2 * grid.half_width
    return (grid.x - y + grid.half_width) % period - grid.half_width


def coherent_vector(grid: PhaseGrid, z, normalize: bool = True) -> np.ndarray:
    y, xi = map(float, z)
    hbar = grid.hbar
    s = _wrapped(grid, y)
    env = (np.pi * hbar) ** -0.25 * np.exp(-s ** 2 / (2 * hbar)) * np.sqrt(grid.dx)
    v = env * np.exp(1j * xi * (grid.x - y / 2) / hbar)
    if normalize:
        v = v / np.linalg.norm(v)
    return v


def coherent_state(grid: PhaseGrid, z=(0.0, 0.0), normalize: bool = True) -> CoherentState:
    if grid.d != 1:
        raise NotImplementedError("use tensor products for d = 2")
    return CoherentState(grid, tuple(map(float, z)), coherent_vector(grid, z, normalize))


class CoherentFamily:
    """The lattice family ``{psi_z}`` in FFT-friendly form (d = 1).

    For the center ``z = (x_m, xi_k)`` the vector equals, up to a unit phase,
    ``u_m * exp(2 pi i j k / N)`` with ``u_m[j] = G[(j - m) % N] (-1)^j`` and
    ``G`` the normalized wrapped Gaussian profile.  Because every lattice
    packet has the same norm, the family resolves the identity exactly:
    ``sum_z w h^{-1} |psi_z><psi_z| = Id``.
    """

    def __init__(self, grid: PhaseGrid):
        if grid.d != 1:
            raise NotImplementedError
        self.grid = grid
        n = grid.n
        s = (np.arange(n) + n // 2) % n - n // 2
        prof = np.exp(-(s * grid.dx) ** 2 / (2 * grid.hbar))
        self.profile = prof / np.linalg.norm(prof)
        self.sign = (-1.0) ** np.arange(n)

    def envelope(self, m: int) -> np.ndarray:
        """Signed envelope ``u_m`` (real)."""
        return np.roll(self.profile, m) * self.sign

    def envelopes(self, ms) -> np.ndarray:
        n = self.grid.n
        j = np.arange(n)
        idx = (j[None, :] - np.asarray(ms)[:, None]) % n
        return self.profile[idx] * self.sign[None, :]

    def columns(self, m: int) -> np.ndarray:
        """Matrix whose column ``k`` is the packet at ``(x_m, xi_k)`` (up to phase)."""
        n = self.grid.n
        return np.fft.ifft(np.diag(self.envelope(m)), axis=1) * n

    def apply(self, a: np.ndarray, ms) -> np.ndarray:
        """Return ``a @ columns(m)`` for each ``m`` in ``ms``, shape ``(len(ms), N, N)``."""
        u = self.envelopes(ms)
        return np.fft.ifft(a[None, :, :] * u[:, None, :], axis=2) * self.grid.n

    def expectations(self, a: np.ndarray, chunk: int = 32) -> np.ndarray:
        """``<psi_z| A |psi_z>`` on the whole lattice, shape ``(N_x, N_xi)``."""
        n = self.grid.n
        out = np.empty((n, n), dtype=complex)
        j = np.arange(n)
        phase = np.exp(-2j * np.pi * np.outer(j, j) / n)
        for start in range(0, n, chunk):
            ms = np.arange(start, min(n, start + chunk))
            av = self.apply(a, ms)
            u = self.envelopes(ms)
            out[ms] = np.einsum("mi,ik,mik->mk", u, phase, av)
        return out


def partition_defect(grid: PhaseGrid) -> float:
    """Operator-norm defect ``|| sum_z w h^{-1} |psi_z><psi_z| - Id ||``."""
    one = np.ones(grid.shape)
    t = toeplitz_matrix(grid, one)
    return float(np.linalg.norm(t - np.eye(grid.n), 2))


# -- Husimi transform ------------------------------------------------------

def husimi(op, method: str = "convolution") -> PhaseDensity:
    """Husimi transform of an operator.

    ``method="convolution"`` computes ``g_h * f_rho`` by periodic FFT;
    ``method="coherent"`` evaluates ``<psi_z| rho psi_z>`` on the lattice,
    which is nonnegative by construction even on grids too small for the
    alias-free window (d = 1 only).
    """
    grid = op.grid
    if method == "coherent":
        vals = CoherentFamily(grid).expectations(op.matrix).real
    else:
        f = wigner(op)
        vals = convolve_with_kernel(f.values, periodic_kernel(grid), grid.cell_weight)
    kind = "signed"
    if isinstance(op, DensityOperator) and op.normalized:
        vals = np.where((vals < 0) & (vals > -1e-12), 0.0, vals)
        kind = "probability"
    return PhaseDensity(grid, vals, kind)


def husimi_dual(op) -> PhaseDensity:
    """Husimi values from coherent-state expectations ``<psi_z| A psi_z>`` (d = 1)."""
    fam = CoherentFamily(op.grid)
    vals = fam.expectations(op.matrix).real
    return PhaseDensity(op.grid, vals, "signed")


# -- Toeplitz (Wick) quantization -----------------------------------------

def toeplitz_matrix(grid: PhaseGrid, symbol: np.ndarray) -> np.ndarray:
    """Matrix of ``h^{-1} sum_z w f(z) |psi_z><psi_z|`` via FFTs, O(N^2 log N).

    Entry ``A[i, i-r]`` is a cyclic convolution over the packet position of
    ``G[s] G[s-r]`` with the momentum-DFT of the symbol.
    """
    n = grid.n
    fam = CoherentFamily(grid)
    g = fam.profile
    c = np.fft.ifft(symbol, axis=1) * n                      # (m, r)
    s = np.arange(n)
    q = g[:, None] * g[(s[:, None] - s[None, :]) % n]       # (s, r)
    r_ = np.fft.ifft(np.fft.fft(q, axis=0) * np.fft.fft(c, axis=0), axis=0)
    r_ *= ((-1.0) ** s)[None, :] * grid.cell_weight / grid.scale.h
    a = np.empty((n, n), dtype=complex)
    i = np.arange(n)
    a[i[:, None], (i[:, None] - s[None, :]) % n] = r_
    return a


def toeplitz_quantize(f: PhaseDensity, normalize: bool = False):
    """Wick quantization of a symbol.

    A probability symbol gives a :class:`DensityOperator`; signed symbols
    give a Hermitian :class:`Operator`.

    Raises
    ------
    NegativeSymbol
        If ``f`` is flagged as a probability but takes negative values.
    """
    grid = f.grid
    if grid.d != 1:
        raise NotImplementedError
    if f.kind == "probability" and f.values.min() < -f.tol_neg:
        raise NegativeSymbol("probability symbol with negative values")
    a = toeplitz_matrix(grid, f.values)
    a = 0.5 * (a + a.conj().T)
    if f.kind == "probability":
        if normalize:
            return density_from_matrix(grid, a)
        return DensityOperator(grid, a, normalized=True, tol_mass=1e-6)
    return Operator(grid, a, True)


def check_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch("objects live on different grids")
