"""Steady states of time-independent and periodically driven Lindblad generators.

Normalization is imposed by overwriting one row of the singular system with
the trace functional. For the plain steady state that is row 0 of ``L``; for
the Fourier system it is row 0 of the ``n = 0`` block row.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import Kind, Qobj
from .errors import KindMismatch, SteadyStateFailure
from .evolve import build_generator
from .factories import destroy
from .superop import trace_functional

__all__ = [
    "SteadyStateMethod",
    "steadystate",
    "FourierSteadyState",
    "steadystate_fourier",
    "fourier_residuals",
    "steadystate_detuning_gradient",
]

DENSE_LIMIT = 400
COND_LIMIT = 1e14


class SteadyStateMethod(enum.Enum):
    DIRECT = "Direct"
    EIGEN = "Eigen"


def _solve(A, b):
    """Solve ``A x = b`` with sparse LU, or dense LU for small systems.

    Returns ``(x, condition_estimate)``.
    """
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        cond = np.linalg.cond(Ad, 1)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SteadyStateFailure(f"singular system (condition ~ {cond:.3g})", condition=cond)
        return np.linalg.solve(Ad, b), cond
    A = sp.csc_array(A)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SteadyStateFailure(f"sparse LU failed: {exc}", condition=math.inf) from exc
    inv = spla.LinearOperator(A.shape, matvec=lu.solve,
                              rmatvec=lambda y: lu.solve(y, trans="H"), dtype=A.dtype)
    cond = spla.onenormest(A) * spla.onenormest(inv)
    x = lu.solve(b)
    if not np.all(np.isfinite(x)) or cond > COND_LIMIT:
        raise SteadyStateFailure(f"ill-conditioned system (condition ~ {cond:.3g})", condition=cond)
    return x, cond


def _with_trace_row(L, d, row):
    """Copy of ``L`` whose row ``row`` is the trace functional on ``d x d`` states."""
    L = sp.lil_array(L)
    L[[row], :] = 0
    L[[row], row - row % (d * d) + np.arange(d) * (d + 1)] = 1.0
    return sp.csc_array(L)


def _as_density(v, d, dims) -> Qobj:
    rho = v.reshape(d, d, order="F")
    rho = 0.5 * (rho + rho.conj().T)
    return Qobj(rho / np.trace(rho).real, Kind.OPERATOR, dims)


def steadystate(H, c_ops=None, method=SteadyStateMethod.DIRECT) -> Qobj:
    """Density matrix ``rho`` with ``L rho = 0`` and ``tr rho = 1``.

    ``H`` is a Hamiltonian (with ``c_ops``) or a ready Liouvillian.
    ``method`` is ``"Direct"`` (sparse LU) or ``"Eigen"`` (eigenvector of
    the eigenvalue of smallest modulus).
    """
    method = SteadyStateMethod(method)
    L = build_generator(H, c_ops)
    if not isinstance(L, Qobj):
        raise KindMismatch("steadystate needs a time-independent generator")
    d = math.prod(L.dims)
    if method is SteadyStateMethod.DIRECT:
        A = _with_trace_row(L.data, d, 0)
        b = np.zeros(d * d, dtype=np.complex128)
        b[0] = 1.0
        v, _ = _solve(A, b)
    else:
        v = _null_vector(L.data, d)
    return _as_density(v, d, L.dims)


def _null_vector(L, d):
    n = d * d
    if n <= 4096:
        vals, vecs = sla.eig(L.toarray() if sp.issparse(L) else L)
        order = np.argsort(np.abs(vals))
    else:
        vals, vecs = spla.eigs(sp.csc_array(L), k=2, sigma=0)
        order = np.argsort(np.abs(vals))
    if len(vals) > 1 and abs(vals[order[1]]) < 1e-10 * max(1.0, np.abs(vals).max()):
        warnings.warn("Liouvillian null space is degenerate; returning one element",
                      stacklevel=3)
    v = vecs[:, order[0]]
    t = trace_functional(d) @ v
    if abs(t) < 1e-14:
        raise SteadyStateFailure("null vector has zero trace", condition=math.inf)
    return v / t


@dataclass
class FourierSteadyState:
    """Periodic steady state ``rho(t) = sum_n rho_n exp(i n w_d t)``.

    ``components[k]`` holds ``rho_n`` with ``n = k - n_max``.
    """

    components: list
    drive_frequency: float
    n_max: int

    def component(self, n: int) -> Qobj:
        if abs(n) > self.n_max:
            raise IndexError(f"|n| must be <= {self.n_max}")
        return self.components[n + self.n_max]

    @property
    def rho0(self) -> Qobj:
        return self.component(0)

    def at(self, t: float) -> Qobj:
        """Reconstruct the density matrix at time ``t``."""
        w = self.drive_frequency
        out = sum(np.exp(1j * n * w * t) * self.component(n).full()
                  for n in range(-self.n_max, self.n_max + 1))
        return Qobj(out, Kind.OPERATOR, self.rho0.dims)


def _superop_data(L):
    if not isinstance(L, Qobj) or L.kind is not Kind.SUPEROPERATOR:
        raise KindMismatch("Fourier blocks must be SuperOperators")
    return sp.csc_array(L.data)


def fourier_matrix(L0, L1, Lm1, wd, n_max):
    """Block-tridiagonal matrix acting on stacked ``vec(rho_n)``, ``n = -n_max..n_max``."""
    A0, A1, Am1 = (_superop_data(x) for x in (L0, L1, Lm1))
    n2 = A0.shape[0]
    eye = sp.identity(n2, dtype=np.complex128, format="csc")
    size = 2 * n_max + 1
    blocks = [[None] * size for _ in range(size)]
    for k in range(size):
        n = k - n_max
        blocks[k][k] = A0 - 1j * n * wd * eye
        if k > 0:
            blocks[k][k - 1] = A1
        if k < size - 1:
            blocks[k][k + 1] = Am1
    return sp.csc_array(sp.bmat(blocks, format="csc"))


def steadystate_fourier(L0, L1, Lm1, wd, n_max) -> FourierSteadyState:
    """Fourier components of the periodic steady state.

    Solves ``(L0 - i n wd) rho_n + L1 rho_{n-1} + Lm1 rho_{n+1} = 0`` for
    ``|n| <= n_max`` with ``rho_{+-(n_max+1)} = 0``. ``L1`` multiplies
    ``exp(+i wd t)`` in the generator and ``Lm1`` multiplies ``exp(-i wd t)``.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    dims = L0.dims
    d = math.prod(dims)
    n2 = d * d
    A = fourier_matrix(L0, L1, Lm1, wd, n_max)
    row = n_max * n2
    A = _with_trace_row(A, d, row)
    b = np.zeros(A.shape[0], dtype=np.complex128)
    b[row] = 1.0
    x, _ = _solve(A, b)
    comps = [Qobj(x[k * n2:(k + 1) * n2].reshape(d, d, order="F"), Kind.OPERATOR, dims)
             for k in range(2 * n_max + 1)]
    return FourierSteadyState(comps, float(wd), int(n_max))


def fourier_residuals(fss: FourierSteadyState, L0, L1, Lm1) -> np.ndarray:
    """Norm of the recursion residual for every ``n`` in ``-n_max..n_max``."""
    A0, A1, Am1 = (_superop_data(x) for x in (L0, L1, Lm1))
    d = fss.rho0.shape[0]
    vecs = [c.full().reshape(-1, order="F") for c in fss.components]
    zero = np.zeros(d * d, dtype=np.complex128)
    out = []
    for k, v in enumerate(vecs):
        n = k - fss.n_max
        r = A0 @ v - 1j * n * fss.drive_frequency * v
        r = r + A1 @ (vecs[k - 1] if k > 0 else zero)
        r = r + Am1 @ (vecs[k + 1] if k + 1 < len(vecs) else zero)
        out.append(np.linalg.norm(r))
    return np.array(out)


def _driven_cavity_photons(delta, F, gamma, N):
    a = destroy(N)
    H = delta * a.dag() @ a + F * (a + a.dag())
    rho = steadystate(H, [math.sqrt(gamma) * a])
    return float(np.real(np.trace((a.dag() @ a).full() @ rho.full())))


def steadystate_detuning_gradient(delta, F, gamma, N, h=1e-4) -> float:
    """Central difference ``d<n>_ss / d delta`` for a driven damped cavity.

    The model is ``H = delta a^dag a + F (a + a^dag)`` with loss ``sqrt(gamma) a``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    up = _driven_cavity_photons(delta + h, F, gamma, N)
    down = _driven_cavity_photons(delta - h, F, gamma, N)
    return (up - down) / (2 * h)
