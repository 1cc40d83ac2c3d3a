"""Classical optimal transport between discrete phase-space measures.

Exact values come from the network simplex solver of POT (``ot.emd``); a
dense HiGHS linear program serves as an independent oracle for small
instances, and log-domain Sinkhorn gives certified upper bounds.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, vstack
from scipy.special import logsumexp

from .errors import Infeasible, NonConvergence
from .grid import PhaseDensity

for _backend in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")

MAX_EXACT_ATOMS = 2000
MAX_DENSE_ATOMS = 64


def _ot():
    import ot
    return ot


@dataclass
class DiscreteMeasure:
    """Weighted atoms in phase space.

    ``error_bound`` is an upper bound on the W2 distance to the density the
    measure was built from (zero for measures given directly).
    """

    support: np.ndarray
    weights: np.ndarray
    error_bound: float = 0.0

    def __post_init__(self):
        self.support = np.atleast_2d(np.asarray(self.support, float))
        self.weights = np.asarray(self.weights, float).ravel()
        if len(self.weights) != len(self.support):
            raise ValueError("support and weights have different lengths")
        if self.weights.min() < 0:
            raise ValueError("negative weight")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {self.weights.sum():.15g}")

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(point), [1.0])

    @classmethod
    def normalized(cls, support, weights, error_bound: float = 0.0) -> "DiscreteMeasure":
        w = np.asarray(weights, float)
        return cls(support, w / w.sum(), error_bound)

    def __len__(self):
        return len(self.weights)

    def moment(self, n: float) -> float:
        """``Z_n = (sum w |z|^n)^(1/n)``."""
        if n == 0:
            return 1.0
        r = np.linalg.norm(self.support, axis=1)
        return float(np.sum(self.weights * r ** n) ** (1 / n))

    def shifted(self, z) -> "DiscreteMeasure":
        return DiscreteMeasure(self.support + np.asarray(z, float), self.weights, self.error_bound)

    def to_csv(self, path_or_buf=None):
        if self.support.shape[1] != 2:
            raise ValueError("CSV format is defined for d = 1 measures")
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([self.support, self.weights]), delimiter=",",
                   header="x,xi,weight", comments="", fmt="%.17g")
        return _emit(buf.getvalue(), path_or_buf)

    @classmethod
    def from_csv(cls, path_or_buf) -> "DiscreteMeasure":
        data = np.loadtxt(path_or_buf, delimiter=",", skiprows=1, ndmin=2)
        return cls.normalized(data[:, :2], data[:, 2])


def _emit(text, path_or_buf):
    if path_or_buf is None:
        return text
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)
    return None


@dataclass
class TransportPlan:
    matrix: np.ndarray
    source: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)

    def marginal_error(self) -> float:
        return float(max(np.abs(self.matrix.sum(1) - self.source).max(),
                         np.abs(self.matrix.sum(0) - self.target).max()))

    def to_csv(self, path_or_buf=None, threshold: float = 0.0):
        i, j = np.nonzero(self.matrix > threshold)
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([i, j, self.matrix[i, j]]), delimiter=",",
                   header="i,j,mass", comments="", fmt=["%d", "%d", "%.17g"])
        return _emit(buf.getvalue(), path_or_buf)


@dataclass
class OTResult:
    value: float
    plan: TransportPlan
    method: str
    gap: float = 0.0
    lower: float | None = None

    def __iter__(self):
        yield self.value
        yield self.plan


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int) -> np.ndarray:
    diff = mu.support[:, None, :] - nu.support[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return sq if p == 2 else np.sqrt(sq)


def _dense_lp(a, b, m):
    ns, nt = m.shape
    rows = np.repeat(np.arange(ns), nt)
    cols = np.arange(ns * nt)
    a_src = coo_matrix((np.ones(ns * nt), (rows, cols)), shape=(ns, ns * nt))
    rows_t = np.tile(np.arange(nt), ns)
    a_tgt = coo_matrix((np.ones(ns * nt), (rows_t, cols)), shape=(nt, ns * nt))
    res = linprog(m.ravel(), A_eq=vstack([a_src, a_tgt]).tocsr(), b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise Infeasible(res.message)
    return res.x.reshape(ns, nt)


def _round_to_marginals(plan, a, b):
    """Project a near-feasible plan onto the transport polytope (Altschuler et al.)."""
    x = np.minimum(a / np.maximum(plan.sum(1), 1e-300), 1.0)
    plan = plan * x[:, None]
    y = np.minimum(b / np.maximum(plan.sum(0), 1e-300), 1.0)
    plan = plan * y[None, :]
    ea = a - plan.sum(1)
    eb = b - plan.sum(0)
    if ea.sum() > 0:
        plan = plan + np.outer(ea, eb) / ea.sum()
    return plan


def sinkhorn_log(a, b, m, reg, max_iter=20000, tol=1e-9):
    """Log-domain Sinkhorn; returns the plan and dual potentials ``(f, g)``."""
    la, lb = np.log(a), np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    err = np.inf
    for it in range(max_iter):
        f = reg * (la - logsumexp((g[None, :] - m) / reg, axis=1))
        g = reg * (lb - logsumexp((f[:, None] - m) / reg, axis=0))
        if it % 10 == 0:
            plan = np.exp((f[:, None] + g[None, :] - m) / reg)
            err = np.abs(plan.sum(1) - a).sum()
            if err < tol:
                break
    plan = np.exp((f[:, None] + g[None, :] - m) / reg)
    return plan, f, g, err


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2, method: str = "exact_lp",
                reg: float | None = None, max_iter: int = 20000, tol: float = 1e-9) -> OTResult:
    """Wasserstein distance ``W_p`` for ``p in {1, 2}``.

    Methods
    -------
    exact_lp
        Network simplex (``ot.emd``), up to 2000 atoms per side.
    dense_lp
        HiGHS on the dense LP, up to 64 atoms per side (oracle).
    sinkhorn
        Entropic plan rounded to exact feasibility, so ``value`` is an upper
        bound; ``lower`` is the c-transform dual bound and ``gap`` their
        difference (in cost units, before the ``1/p`` power).
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    a, b = mu.weights, nu.weights
    m = cost_matrix(mu, nu, p)
    if method == "exact_lp":
        if max(len(a), len(b)) > MAX_EXACT_ATOMS:
            raise ValueError(f"exact_lp supports at most {MAX_EXACT_ATOMS} atoms")
        plan, log = _ot().emd(a, b, m, numItermax=50_000_000, log=True)
        if log.get("warning"):
            raise NonConvergence(log["warning"])
        cost = float(np.sum(plan * m))
        res = OTResult(max(cost, 0.0) ** (1 / p), TransportPlan(plan, a, b), method)
    elif method == "dense_lp":
        if max(len(a), len(b)) > MAX_DENSE_ATOMS:
            raise ValueError(f"dense_lp supports at most {MAX_DENSE_ATOMS} atoms")
        plan = _dense_lp(a, b, m)
        cost = float(np.sum(plan * m))
        res = OTResult(max(cost, 0.0) ** (1 / p), TransportPlan(plan, a, b), method)
    elif method == "sinkhorn":
        if reg is None or reg <= 0:
            raise ValueError("sinkhorn needs a positive regularization reg")
        keep_a, keep_b = a > 0, b > 0
        plan_r, f, g, err = sinkhorn_log(a[keep_a], b[keep_b], m[np.ix_(keep_a, keep_b)], reg,
                                         max_iter, tol)
        if not np.isfinite(err) or err > max(tol * 1e3, 1e-6):
            raise NonConvergence(f"Sinkhorn marginal error {err:.2e}")
        plan_r = _round_to_marginals(plan_r, a[keep_a], b[keep_b])
        plan = np.zeros_like(m)
        plan[np.ix_(keep_a, keep_b)] = plan_r
        primal = float(np.sum(plan * m))
        mk = m[np.ix_(keep_a, keep_b)]
        g_c = (mk - f[:, None]).min(axis=0)
        dual = float(a[keep_a] @ f + b[keep_b] @ g_c)
        res = OTResult(primal ** (1 / p), TransportPlan(plan, a, b), method,
                       gap=primal - dual, lower=max(dual, 0.0) ** (1 / p))
    else:
        raise ValueError(f"unknown method {method!r}")
    return res


def interpolation_constants(n: float) -> tuple[float, float]:
    """``C_n = (n-1)(n-2)^((2-n)/(n-1))`` and ``theta = n/(2(n-1))``."""
    cn = (n - 1) * (n - 2) ** ((2 - n) / (n - 1))
    theta = n / (2 * (n - 1))
    return float(cn), float(theta)


def interpolation_lemma_check(mu: DiscreteMeasure, nu: DiscreteMeasure, n: float,
                              w1: float | None = None, w2: float | None = None) -> dict:
    """Check ``W2 <= C_n (Z_n(mu) + Z_n(nu))^theta W1^(1-theta)`` with exact LP values."""
    if n <= 2:
        raise ValueError("n must exceed 2")
    cn, theta = interpolation_constants(n)
    if w1 is None:
        w1 = wasserstein(mu, nu, 1).value
    if w2 is None:
        w2 = wasserstein(mu, nu, 2).value
    rhs = cn * (mu.moment(n) + nu.moment(n)) ** theta * w1 ** (1 - theta)
    return {"lhs_W2": w2, "rhs": rhs, "W1": w1, "Cn": cn, "theta": theta,
            "margin": rhs - w2, "pass": bool(w2 <= rhs * (1 + 1e-9) + 1e-12)}


def discretize(f: PhaseDensity, max_atoms: int = MAX_EXACT_ATOMS, prune: float = 1e-12) -> DiscreteMeasure:
    """Turn a probability density into cell-centered atoms.

    Cells with weight below ``prune`` are dropped.  If more than
    ``max_atoms`` remain, cells are merged in blocks of ``b^{2d}`` with the
    atom at the block barycenter; ``b`` is the smallest power of two that
    fits.  ``error_bound`` adds the within-block W2 spread to half a cell
    diagonal.
    """
    grid = f.grid
    vals = np.clip(f.values, 0, None) * grid.cell_weight
    vals = np.where(vals >= prune, vals, 0.0)
    total = vals.sum()
    if total <= 0:
        raise ValueError("density has no mass above the pruning threshold")
    vals = vals / total
    coords = grid.mesh()
    steps = [grid.dx] * grid.d + [grid.dxi] * grid.d
    half_diag = 0.5 * float(np.sqrt(sum(s ** 2 for s in steps)))
    block = 1
    while True:
        if block == 1:
            mass = vals
            bary = coords
            spread = 0.0
        else:
            nb = grid.n // block
            shp = []
            for _ in range(2 * grid.d):
                shp += [nb, block]
            axes = tuple(range(1, 4 * grid.d, 2))
            mass = vals.reshape(shp).sum(axis=axes)
            safe = np.where(mass > 0, mass, 1.0)
            bary = [(c * vals).reshape(shp).sum(axis=axes) / safe for c in coords]
            second = sum((c ** 2 * vals).reshape(shp).sum(axis=axes) for c in coords)
            var = second - mass * sum(b_ ** 2 for b_ in bary)
            spread = float(np.sqrt(max(var.sum(), 0.0)))
        keep = mass > 0
        if keep.sum() <= max_atoms or block >= grid.n:
            break
        block *= 2
    support = np.column_stack([b_[keep] for b_ in bary])
    return DiscreteMeasure.normalized(support, mass[keep], spread + half_diag)


def w2_between_densities(f1: PhaseDensity, f2: PhaseDensity, p: int = 2, max_atoms: int = MAX_EXACT_ATOMS):
    """Exact LP value between discretizations plus the combined error bound."""
    m1, m2 = discretize(f1, max_atoms), discretize(f2, max_atoms)
    res = wasserstein(m1, m2, p)
    return res.value, m1.error_bound + m2.error_bound
