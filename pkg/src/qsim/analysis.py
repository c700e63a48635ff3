"""Phase-space, information-theoretic and spectral post-processing.

Wigner convention: ``x`` and ``p`` satisfy ``[x, p] = i``, the complex grid
point is ``alpha = (x + i p) / sqrt(2)`` and ``W`` integrates to one over
``dx dp``. The vacuum is ``W = exp(-x^2 - p^2) / pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Kind, Qobj, ket2dm
from .errors import InvalidGrid, InvalidSubsystem, KindMismatch
from .evolve import SolveOptions, mesolve
from .steadystate import steadystate

__all__ = [
    "PhaseSpaceGrid",
    "wigner",
    "entropy_vn",
    "fidelity",
    "correlation_2op_1t",
    "spectrum_correlation_fft",
    "correlation_fourier_transform",
]


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Samples ``values[j, i] = W(xvec[i], yvec[j])``."""

    xvec: np.ndarray
    yvec: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        """Trapezoidal estimate of the integral over the grid."""
        return float(np.trapezoid(np.trapezoid(self.values, self.xvec, axis=1), self.yvec))


def _grid_axis(v, name):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
        raise InvalidGrid(f"{name} must be a finite 1-D array")
    if v.size > 1 and np.any(np.diff(v) <= 0):
        raise InvalidGrid(f"{name} must be strictly increasing")
    return v


def _laguerre_sum(coeffs, L, x):
    """``sum_k c_k g_k(x)`` with ``g_k = sqrt(L! k!/(k+L)!) L_k^(L)(x)`` by Clenshaw.

    ``g_0 = 1`` and ``g_{k+1} = a_k g_k + b_k g_{k-1}``.
    """
    n = len(coeffs)

    def a(k):
        return (2 * k + 1 + L - x) / math.sqrt((k + 1) * (k + L + 1))

    def b(k):
        return -math.sqrt(k * (k + L) / ((k + 1) * (k + L + 1)))

    if n == 1:
        return coeffs[0] * np.ones_like(x)
    y1 = np.zeros_like(x, dtype=np.complex128)  # b_{k+1}
    y2 = np.zeros_like(x, dtype=np.complex128)  # b_{k+2}
    for k in range(n - 1, 0, -1):
        yk = coeffs[k] + a(k) * y1 + (b(k + 1) * y2 if k + 2 <= n else 0)
        y2, y1 = y1, yk
    g1 = (1 + L - x) / math.sqrt(1 + L)
    return coeffs[0] + g1 * y1 + b(1) * y2


def wigner(state: Qobj, xvec, yvec) -> PhaseSpaceGrid:
    """Wigner function of a single-mode Ket or density matrix on a grid.

    Each diagonal ``rho[m, m+L]`` contributes through associated Laguerre
    functions summed with a Clenshaw recurrence; the sum over ``L`` is a
    Horner scheme in ``2 alpha / sqrt(L+1)``. No factorials are formed.
    """
    if state.kind is Kind.KET:
        state = ket2dm(state)
    if state.kind is not Kind.OPERATOR:
        raise KindMismatch(f"wigner needs a Ket or Operator, got {state.kind.value}")
    if len(state.dims) != 1:
        raise InvalidSubsystem("wigner needs a single-mode state; take a partial trace first")
    xvec = _grid_axis(xvec, "xvec")
    yvec = _grid_axis(yvec, "yvec")
    rho = state.full()
    M = rho.shape[0]
    X, P = np.meshgrid(xvec, yvec)
    A = math.sqrt(2) * (X + 1j * P)  # 2 alpha
    B = np.abs(A) ** 2
    sign = (-1.0) ** np.arange(M)
    total = np.zeros_like(A)
    for L in range(M - 1, -1, -1):
        c = np.diagonal(rho, L) * sign[: M - L]
        s = _laguerre_sum(c, L, B) * (2.0 if L else 1.0)
        total = s + total * A / math.sqrt(L + 1)
    values = np.real(total) * np.exp(-B / 2) / math.pi
    return PhaseSpaceGrid(xvec, yvec, values)


def _density(x: Qobj) -> np.ndarray:
    if x.kind is Kind.KET:
        return ket2dm(x).full()
    if x.kind is not Kind.OPERATOR or x.shape[0] != x.shape[1]:
        raise KindMismatch(f"expected a Ket or square Operator, got {x.kind.value}")
    return x.full()


def entropy_vn(rho: Qobj, base=math.e) -> float:
    """Von Neumann entropy ``-sum lambda log(lambda)`` over eigenvalues above 1e-15."""
    m = _density(rho)
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log(lam)) / math.log(base))


def _sqrtm_psd(m):
    lam, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(lam, 0, None))) @ v.conj().T


def fidelity(a: Qobj, b: Qobj) -> float:
    """Uhlmann fidelity ``tr sqrt(sqrt(a) b sqrt(a))`` (not squared)."""
    if a.dims != b.dims:
        raise KindMismatch(f"states have dims {a.dims} and {b.dims}")
    if a.kind is Kind.KET and b.kind is Kind.KET:
        return float(abs(np.vdot(a.full(), b.full())))
    if a.kind is Kind.KET or b.kind is Kind.KET:
        ket, dm = (a, b) if a.kind is Kind.KET else (b, a)
        v = ket.full()[:, 0]
        return float(math.sqrt(max(np.real(np.vdot(v, _density(dm) @ v)), 0.0)))
    sa = _sqrtm_psd(_density(a))
    m = sa @ _density(b) @ sa
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return float(np.sum(np.sqrt(np.clip(lam, 0, None))))


def correlation_2op_1t(H, state0, taulist, c_ops, A: Qobj, B: Qobj, options=None,
                       params=None) -> np.ndarray:
    """``<A(tau) B(0)>`` by the quantum regression theorem.

    ``B rho`` is propagated with the Lindblad generator (without the
    Hermitian projection used for ordinary states) and ``tr(A sigma(tau))``
    is recorded. ``state0=None`` uses the steady state.
    """
    if state0 is None:
        rho = steadystate(H, c_ops)
    else:
        rho = ket2dm(state0) if state0.kind is Kind.KET else state0
    sigma = B @ rho
    res = mesolve(H, sigma, taulist, c_ops, [A], params=params,
                  options=options or SolveOptions(), hermitize=False)
    return res.expect[0]


def _uniform_step(taulist) -> float:
    tau = np.asarray(taulist, dtype=float)
    if tau.ndim != 1 or tau.size < 2:
        raise InvalidGrid("need at least two delay points")
    steps = np.diff(tau)
    dt = steps.mean()
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(abs(dt), 1e-300) + 1e-12 * np.abs(tau).max():
        raise InvalidGrid("delay grid must be uniform and increasing")
    return float(dt)


def correlation_fourier_transform(taulist, corr):
    """Discrete ``int corr(tau) exp(-i w tau) dtau`` on the FFT frequency grid.

    Returns ``(omega, transform)`` sorted by increasing ``omega``.
    """
    dt = _uniform_step(taulist)
    corr = np.asarray(corr, dtype=np.complex128)
    if corr.shape != np.shape(taulist):
        raise InvalidGrid("corr and taulist have different lengths")
    n = corr.size
    omega = 2 * math.pi * np.fft.fftfreq(n, d=dt)
    ft = dt * np.fft.fft(corr) * np.exp(-1j * omega * float(np.asarray(taulist)[0]))
    order = np.argsort(omega, kind="stable")
    return omega[order], ft[order]


def spectrum_correlation_fft(taulist, corr):
    """One-sided power spectrum ``S(w) = 2 Re int_0 corr(tau) exp(-i w tau) dtau``.

    Returns ``(omega, S)`` with ``omega`` ascending.
    """
    omega, ft = correlation_fourier_transform(taulist, corr)
    return omega, 2 * np.real(ft)
