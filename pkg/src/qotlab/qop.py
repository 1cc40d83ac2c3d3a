"""Operators on the discretized configuration space.

Representation
--------------
An operator with integral kernel ``K(x, y)`` is stored as the matrix
``A = K * dx**d`` acting on coordinates in the orthonormal basis
``delta_j / sqrt(dx)``.  Then

* ``h^d Tr(rho)`` is ``h**d * trace(A)``;
* ``||A||_{L^p} = h**(d/p) * ||A||_{S_p}`` (Schatten-p of the matrix), with
  the operator norm for ``p = inf``;
* a pure state ``h^{-d} |psi><psi|`` has ``A = h**-d * v v^*`` where
  ``v_j = psi(x_j) sqrt(dx)``.

For ``d = 2`` the basis is the tensor product ordered as ``kron(A1, A2)``.
"""
from __future__ import annotations

import io
import warnings
from functools import cached_property

import numpy as np

from .errors import GridMismatch, NotPSD, OffGridWarning
from .grid import TOL_MASS, PhaseGrid, PlanckScale, SpatialGrid


class Operator:
    """Bounded operator on the grid, stored in the orthonormal basis.

    Parameters
    ----------
    grid : PhaseGrid
    matrix : ndarray, shape (N**d, N**d)
    self_adjoint : bool
        Whether the operator is flagged Hermitian.
    tag : {"dense", "multiplication", "fourier"}
        Hint for fast paths; the dense matrix is always available.
    """

    def __init__(self, grid: PhaseGrid, matrix, self_adjoint: bool = False, tag: str = "dense"):
        matrix = np.asarray(matrix, dtype=complex)
        dim = grid.n ** grid.d
        if matrix.shape != (dim, dim):
            raise GridMismatch(f"matrix shape {matrix.shape} incompatible with grid ({dim})")
        self.grid = grid
        self.matrix = matrix
        self.self_adjoint = self_adjoint
        self.tag = tag

    @property
    def scale(self) -> PlanckScale:
        return self.grid.scale

    @property
    def spatial(self) -> SpatialGrid:
        return self.grid.spatial

    @property
    def kernel(self) -> np.ndarray:
        return self.matrix / self.grid.dx ** self.grid.d

    @classmethod
    def from_kernel(cls, grid: PhaseGrid, kernel, **kw):
        return cls(grid, np.asarray(kernel) * grid.dx ** grid.d, **kw)

    def trace(self) -> complex:
        """``h^d Tr``."""
        return self.scale.h ** self.grid.d * np.trace(self.matrix)

    def dagger(self) -> "Operator":
        return Operator(self.grid, self.matrix.conj().T, self.self_adjoint, self.tag)

    def _wrap(self, m, sa=False):
        return Operator(self.grid, m, sa)

    def __matmul__(self, other):
        return self._wrap(self.matrix @ _mat(other))

    def __add__(self, other):
        return self._wrap(self.matrix + _mat(other), self.self_adjoint and getattr(other, "self_adjoint", False))

    def __sub__(self, other):
        return self._wrap(self.matrix - _mat(other), self.self_adjoint and getattr(other, "self_adjoint", False))

    def __mul__(self, c):
        return Operator(self.grid, self.matrix * c, self.self_adjoint and np.isreal(c), self.tag)

    __rmul__ = __mul__

    def __repr__(self):
        return f"{type(self).__name__}(N={self.grid.n}, d={self.grid.d}, hbar={self.grid.hbar})"


def _mat(a):
    return a.matrix if isinstance(a, Operator) else np.asarray(a)


class DensityOperator(Operator):
    """Hermitian positive operator with ``h^d Tr = 1`` when ``normalized``."""

    def __init__(self, grid: PhaseGrid, matrix, normalized: bool = True, validate: bool = True,
                 tol_mass: float = TOL_MASS):
        super().__init__(grid, matrix, self_adjoint=True)
        self.normalized = normalized
        if validate:
            self.validate(tol_mass)

    def validate(self, tol_mass: float = TOL_MASS):
        k = self.kernel
        scale = max(1.0, np.abs(k).max())
        herm = np.abs(k - k.conj().T).max()
        if herm > 1e-10 * scale:
            raise ValueError(f"kernel not Hermitian (defect {herm:.2e})")
        w = self.eigenvalues
        if w[0] < -1e-9 * max(abs(w[-1]), abs(w[0])):
            raise NotPSD(f"min eigenvalue {w[0]:.3e}")
        if self.normalized:
            tr = self.trace().real
            if abs(tr - 1.0) > tol_mass:
                raise ValueError(f"h^d Tr = {tr:.12g}, expected 1")

    @cached_property
    def eigh(self):
        m = 0.5 * (self.matrix + self.matrix.conj().T)
        return np.linalg.eigh(m)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    @cached_property
    def sqrt(self) -> Operator:
        return sqrt_psd(self)

    def __repr__(self):
        return f"DensityOperator(N={self.grid.n}, d={self.grid.d}, hbar={self.grid.hbar})"


def density_from_matrix(grid: PhaseGrid, matrix, normalize: bool = True, **kw) -> DensityOperator:
    m = 0.5 * (np.asarray(matrix) + np.asarray(matrix).conj().T)
    if normalize:
        m = m / (grid.scale.h ** grid.d * np.trace(m).real)
    return DensityOperator(grid, m, **kw)


def pure_state(grid: PhaseGrid, vector) -> DensityOperator:
    """``h^{-d} |psi><psi|`` for an orthonormal-basis vector (normalized here)."""
    v = np.asarray(vector, complex)
    v = v / np.linalg.norm(v)
    return DensityOperator(grid, np.outer(v, v.conj()) / grid.scale.h ** grid.d)


# -- elementary observables ------------------------------------------------

def _axis_values(grid: PhaseGrid, values_1d) -> np.ndarray:
    """Tensor-expand per-axis arrays to a list of d flattened coordinate vectors."""
    mesh = np.meshgrid(*([values_1d] * grid.d), indexing="ij")
    return [m.ravel() for m in mesh]


def position(grid: PhaseGrid, axis: int = 0) -> Operator:
    x = _axis_values(grid, grid.x)[axis]
    return Operator(grid, np.diag(x.astype(complex)), True, "multiplication")


def multiplication(grid: PhaseGrid, values) -> Operator:
    return Operator(grid, np.diag(np.asarray(values, complex).ravel()), True, "multiplication")


def fourier_multiplier(grid: PhaseGrid, symbol) -> Operator:
    """Operator ``F^{-1} diag(symbol(k)) F`` where ``symbol`` takes the list of wavenumber arrays."""
    n, d = grid.n, grid.d
    ks = np.meshgrid(*([grid.spatial.wavenumbers()] * d), indexing="ij")
    m = np.asarray(symbol(*ks), dtype=complex)
    eye = np.eye(n ** d).reshape((n,) * d + (n ** d,))
    axes = tuple(range(d))
    out = np.fft.ifftn(m[..., None] * np.fft.fftn(eye, axes=axes), axes=axes)
    return Operator(grid, out.reshape(n ** d, n ** d), True, "fourier")


def momentum(grid: PhaseGrid, axis: int = 0) -> Operator:
    hbar = grid.hbar
    return fourier_multiplier(grid, lambda *k: hbar * k[axis])


def derivative(grid: PhaseGrid) -> Operator:
    """Spectral derivative ``d/dx`` (d = 1)."""
    op = fourier_multiplier(grid, lambda k: 1j * k)
    op.self_adjoint = False
    return op


def abs_position_power(grid: PhaseGrid, n: float) -> np.ndarray:
    r2 = sum(c ** 2 for c in _axis_values(grid, grid.x))
    return r2 ** (n / 2)


def abs_momentum_power(grid: PhaseGrid, n: float) -> np.ndarray:
    """``|p|^n`` on the momentum grid in FFT order, shape ``(N,)*d``."""
    ks = np.meshgrid(*([grid.spatial.wavenumbers()] * grid.d), indexing="ij")
    return (grid.hbar ** 2 * sum(k ** 2 for k in ks)) ** (n / 2)


def momentum_diagonal(op: Operator) -> np.ndarray:
    """Diagonal of ``F A F^*`` (FFT order), i.e. the momentum distribution of ``A``."""
    grid = op.grid
    n, d = grid.n, grid.d
    a = op.matrix.reshape((n,) * (2 * d))
    rows = tuple(range(d))
    cols = tuple(range(d, 2 * d))
    a = np.fft.fftn(a, axes=rows, norm="ortho")
    a = np.fft.ifftn(a, axes=cols, norm="ortho")
    a = a.reshape(n ** d, n ** d)
    return np.diag(a).reshape((n,) * d)


# -- norms and functional calculus -----------------------------------------

def schatten_norm(a, p: float) -> float:
    """Semiclassical Schatten norm ``h^{d/p} ||A||_{S_p}``; ``p = inf`` is the operator norm."""
    op = a
    m = op.matrix
    if op.self_adjoint:
        s = np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))
    else:
        s = np.linalg.svd(m, compute_uv=False)
    if np.isinf(p):
        return float(s.max())
    if p == 2:
        return float(np.sqrt(op.scale.h ** op.grid.d) * np.linalg.norm(m))
    return float(op.scale.h ** (op.grid.d / p) * np.sum(s ** p) ** (1.0 / p))


def l2_norm_sq(a) -> float:
    """``||A||_{L^2}^2 = h^d ||A||_F^2``."""
    m = _mat(a)
    grid = a.grid
    return float(grid.scale.h ** grid.d * np.vdot(m, m).real)


def sqrt_psd(rho: DensityOperator | Operator) -> Operator:
    """Hermitian square root; eigenvalues below ``N eps ||rho||`` are set to zero.

    Raises
    ------
    NotPSD
        If the smallest eigenvalue is below ``-1e-6`` times the operator norm.
    """
    if isinstance(rho, DensityOperator):
        w, v = rho.eigh
    else:
        w, v = np.linalg.eigh(0.5 * (rho.matrix + rho.matrix.conj().T))
    top = max(abs(w[0]), abs(w[-1]))
    if w[0] < -1e-6 * top:
        raise NotPSD(f"min eigenvalue {w[0]:.3e} relative {w[0] / top:.3e}")
    # eigenvalues below the eigensolver's accuracy are zero; their square roots would be noise
    floor = w.size * np.finfo(float).eps * top
    s = (v * np.sqrt(np.where(w > floor, w, 0.0))) @ v.conj().T
    return Operator(rho.grid, 0.5 * (s + s.conj().T), True)


def matrix_function(rho: DensityOperator, fun) -> Operator:
    w, v = rho.eigh
    m = (v * fun(w)) @ v.conj().T
    return Operator(rho.grid, 0.5 * (m + m.conj().T), True)


def commutator(a, b) -> Operator:
    am, bm = _mat(a), _mat(b)
    return Operator(a.grid, am @ bm - bm @ am)


def quantum_gradient(a) -> tuple[Operator, Operator]:
    """Return ``([d/dx, A], [x/(i hbar), A])`` (d = 1).

    With these signs the Wigner transform satisfies
    ``f_{grad_x A} = d/dx f_A`` and ``f_{grad_v A} = d/dxi f_A``.
    """
    grid = a.grid
    if grid.d != 1:
        raise NotImplementedError("quantum gradients are implemented for d = 1")
    m = _mat(a)
    dmat = derivative(grid).matrix
    gx = dmat @ m - m @ dmat
    x = grid.x
    gv = (x[:, None] - x[None, :]) / (1j * grid.hbar) * m
    return Operator(grid, gx), Operator(grid, gv)


def gradient_norm_sq(a) -> float:
    """``||grad_hbar A||_{L^2}^2``, summing both components."""
    gx, gv = quantum_gradient(a)
    return l2_norm_sq(gx) + l2_norm_sq(gv)


def expectation(rho: DensityOperator, k) -> float:
    """``<K>_rho = h^d Tr(sqrt(rho) K sqrt(rho))``."""
    s = rho.sqrt.matrix
    val = rho.scale.h ** rho.grid.d * np.trace(s @ _mat(k) @ s)
    return float(val.real)


def variance(rho: DensityOperator, k) -> float:
    km = _mat(k)
    op2 = Operator(rho.grid, km @ km)
    return expectation(rho, op2) - expectation(rho, k) ** 2


def skew_information(rho: DensityOperator, k) -> float:
    """Wigner-Yanase skew information ``(1/2) ||[K, sqrt(rho)]||_{L^2}^2``."""
    c = commutator(k, rho.sqrt)
    return 0.5 * l2_norm_sq(c)


def skew_information_alt(rho: DensityOperator, k) -> float:
    """Same quantity from the expanded form ``<K^2> - h^d Tr(S K S K)``."""
    s = rho.sqrt.matrix
    km = _mat(k)
    h = rho.scale.h ** rho.grid.d
    return float((h * np.trace(rho.matrix @ km @ km) - h * np.trace(s @ km @ s @ km)).real)


# -- phase-space translations ----------------------------------------------

def translation_unitary(grid: PhaseGrid, z) -> np.ndarray:
    """Matrix of ``tau_z phi(x) = exp(i xi0 (x - x0/2)/hbar) phi(x - x0)`` (d = 1).

    The position shift is a Fourier multiplier, which reduces to an exact
    cyclic roll for lattice shifts.  Off-lattice shifts emit
    :class:`OffGridWarning`.
    """
    if grid.d != 1:
        raise NotImplementedError("translations are implemented for d = 1")
    x0, xi0 = map(float, z)
    if not grid.is_on_lattice((x0, xi0)):
        warnings.warn(f"shift {z} is not a lattice vector", OffGridWarning, stacklevel=3)
    n = grid.n
    m = x0 / grid.dx
    if abs(m - round(m)) < 1e-9:
        shift = np.roll(np.eye(n), int(round(m)), axis=0).astype(complex)
    else:
        k = grid.spatial.wavenumbers()
        shift = np.fft.ifft(np.exp(-1j * k * x0)[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    phase = np.exp(1j * xi0 * (grid.x - x0 / 2) / grid.hbar)
    return phase[:, None] * shift


def translate(rho: Operator, z) -> Operator:
    """``T_z rho = tau_z rho tau_z^*``."""
    u = translation_unitary(rho.grid, z)
    m = u @ rho.matrix @ u.conj().T
    if isinstance(rho, DensityOperator):
        return DensityOperator(rho.grid, 0.5 * (m + m.conj().T), rho.normalized, validate=False)
    return Operator(rho.grid, m, rho.self_adjoint)


# -- moments ---------------------------------------------------------------

def moments_op(rho: DensityOperator, n: float) -> dict:
    """Moment functionals used by the upper-bound chain.

    Returns ``N_n = h^d Tr(S |x|^n S)``, ``M_n = h^d Tr(S |p|^n S)``, the
    heat-flow corrected quantum moment
    ``Z_n^2 = N_n^{2/n} + M_n^{2/n} + (d+n-2) hbar m_0^{2/n}`` and
    ``P^n = 3^{n-2} h^d Tr(S (|x|^n + |p|^n + ((d+n-2) hbar)^{n/2}) S)``.
    """
    grid = rho.grid
    d, hbar = grid.d, grid.hbar
    hd = grid.scale.h ** d
    diag = np.diag(rho.matrix).real
    nn = float(hd * np.sum(abs_position_power(grid, n) * diag))
    pdiag = momentum_diagonal(rho).real
    mm = float(hd * np.sum(abs_momentum_power(grid, n) * pdiag))
    m0 = float(rho.trace().real)
    zq = np.sqrt(nn ** (2 / n) + mm ** (2 / n) + (d + n - 2) * hbar * m0 ** (2 / n))
    pn = 3 ** (n - 2) * (nn + mm + ((d + n - 2) * hbar) ** (n / 2) * m0)
    return {"N_n": nn, "M_n": mm, "Z_n_quantum": float(zq), "P": float(pn ** (1 / n)), "m0": m0}


def trace_convolution_check(rho: Operator, mu: Operator) -> tuple[float, float]:
    """Both sides of ``int h^d Tr(rho T_z mu) dz = h^d Tr(rho) h^d Tr(mu)`` (d = 1).

    The integrand is evaluated at every lattice point ``z`` directly from the
    operator kernels: for each position shift ``a`` the traces over all
    momentum shifts are one FFT of the diagonal sums of ``rho^T * roll(mu)``.
    """
    grid = rho.grid
    if grid != mu.grid:
        raise GridMismatch("operators live on different grids")
    n, h, w = grid.n, grid.scale.h, grid.cell_weight
    r = rho.matrix.T
    i, j = np.indices((n, n))
    diff = (i - j) % n
    sign = (-1.0) ** np.arange(n)
    total = 0.0
    for a in range(n):
        prod = r * np.roll(mu.matrix, (a, a), axis=(0, 1))
        s = np.bincount(diff.ravel(), weights=prod.real.ravel(), minlength=n) \
            + 1j * np.bincount(diff.ravel(), weights=prod.imag.ravel(), minlength=n)
        traces = n * np.fft.ifft(sign * s)
        total += traces.real.sum()
    lhs = w * h * total
    rhs = (rho.trace() * mu.trace()).real
    return float(lhs), float(rhs)


# -- serialization ---------------------------------------------------------

def operator_to_csv(op: Operator, path_or_buf=None):
    """Write the kernel as ``row,col,re,im`` rows after a ``# N=..,L=..,hbar=..`` header."""
    k = op.kernel
    rows, cols = np.indices(k.shape)
    buf = io.StringIO()
    g = op.grid
    buf.write(f"# N={g.n},L={g.half_width!r},hbar={g.hbar!r},d={g.d}\n")
    np.savetxt(buf, np.column_stack([rows.ravel(), cols.ravel(), k.real.ravel(), k.imag.ravel()]),
               delimiter=",", header="row,col,re,im", comments="", fmt=["%d", "%d", "%.17g", "%.17g"])
    text = buf.getvalue()
    if path_or_buf is None:
        return text
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def operator_from_csv(path_or_buf, density: bool = False):
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf) as fh:
            text = fh.read()
    first, rest = text.split("\n", 1)
    meta = dict(item.split("=") for item in first.lstrip("# ").split(","))
    grid = PhaseGrid(SpatialGrid(int(meta["N"]), float(meta["L"])),
                     PlanckScale(float(meta["hbar"]), int(meta.get("d", 1))))
    data = np.loadtxt(io.StringIO(rest), delimiter=",", skiprows=1, ndmin=2)
    dim = grid.n ** grid.d
    k = np.zeros((dim, dim), complex)
    k[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    m = k * grid.dx ** grid.d
    if density:
        return DensityOperator(grid, m)
    return Operator(grid, m)
