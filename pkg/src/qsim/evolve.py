"""Deterministic time evolution: Schrödinger and Lindblad master equations.

Default tolerances (``abstol=1e-8``, ``reltol=1e-6``) are this package's
own choice.
"""

from __future__ import annotations

import enum
import math
import numbers
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import Kind, Qobj, ket2dm
from .errors import DimsMismatch, KindMismatch
from .ode import LinearRHS, integrate, make_stepper
from .superop import liouvillian

__all__ = [
    "TimeDependentOperator",
    "qobjevo",
    "evaluate_td",
    "Method",
    "SolveOptions",
    "SolveResult",
    "sesolve",
    "mesolve",
]


class TimeDependentOperator:
    """``constant + sum_j coeff_j(params, t) * op_j``.

    Parameters
    ----------
    constant : Qobj or None
        Time-independent part. ``None`` means zero.
    terms : iterable of (Qobj, callable)
        Operators with scalar coefficient functions ``f(params, t)``.
    """

    def __init__(self, constant=None, terms=()):
        self.constant = constant
        self.terms = [(op, f) for op, f in terms]
        parts = ([constant] if constant is not None else []) + [op for op, _ in self.terms]
        if not parts:
            raise KindMismatch("a time-dependent operator needs at least one part")
        ref = parts[0]
        for p in parts[1:]:
            if p.kind is not ref.kind:
                raise KindMismatch("all parts must have the same kind")
            if p.dims != ref.dims:
                raise DimsMismatch("all parts must have the same dims")
        self.kind = ref.kind
        self.dims = ref.dims

    def __call__(self, params=None, t=0.0) -> Qobj:
        return evaluate_td(self, params, t)

    def __add__(self, other):
        if isinstance(other, TimeDependentOperator):
            const = _add_optional(self.constant, other.constant)
            return TimeDependentOperator(const, self.terms + other.terms)
        if isinstance(other, Qobj):
            return TimeDependentOperator(_add_optional(self.constant, other), self.terms)
        return NotImplemented

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            const = None if self.constant is None else other * self.constant
            return TimeDependentOperator(const, [(other * op, f) for op, f in self.terms])
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"TimeDependentOperator(kind={self.kind.value}, dims={self.dims}, terms={len(self.terms)})"


def _add_optional(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def qobjevo(*parts) -> TimeDependentOperator:
    """Build a time-dependent operator from ``Qobj`` and ``(Qobj, coeff)`` parts.

    ``qobjevo(H0, (op1, f1), (op2, f2))`` or ``qobjevo(op, f)``.
    """
    if len(parts) == 2 and isinstance(parts[0], Qobj) and callable(parts[1]) \
            and not isinstance(parts[1], Qobj):
        return TimeDependentOperator(None, [(parts[0], parts[1])])
    const, terms = None, []
    for p in parts:
        if isinstance(p, Qobj):
            const = _add_optional(const, p)
        else:
            op, f = p
            terms.append((op, f))
    return TimeDependentOperator(const, terms)


def evaluate_td(op, params, t) -> Qobj:
    """Materialize a (possibly) time-dependent operator at time ``t``."""
    if isinstance(op, Qobj):
        return op
    out = op.constant
    for o, f in op.terms:
        term = complex(f(params, t)) * o
        out = term if out is None else out + term
    return out


def _as_td(H):
    if isinstance(H, (list, tuple)):
        return qobjevo(*H)
    return H


class Method(enum.Enum):
    ADAPTIVE_RK45 = "AdaptiveRK45"
    FIXED_RK4 = "FixedRK4"


@dataclass
class SolveOptions:
    """Integration controls.

    ``store_states`` keeps the state at every output time; ``saveat`` keeps
    states only at the listed times. Without ``e_ops`` states are always
    stored at ``tlist``.
    """

    method: Method = Method.ADAPTIVE_RK45
    abstol: float = 1e-8
    reltol: float = 1e-6
    dt_fixed: float | None = None
    store_states: bool = False
    saveat: list | None = None
    max_step: float = math.inf

    def __post_init__(self):
        if isinstance(self.method, str):
            self.method = Method(self.method)
        if self.abstol <= 0 or self.reltol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method is Method.FIXED_RK4 and not self.dt_fixed:
            raise ValueError("FixedRK4 needs dt_fixed")


@dataclass
class SolveResult:
    times: np.ndarray
    expect: np.ndarray
    states: list | None = None
    state_times: np.ndarray | None = None
    stats: dict = field(default_factory=dict)


def _check_tlist(tlist) -> np.ndarray:
    tlist = np.asarray(tlist, dtype=float)
    if tlist.ndim != 1 or len(tlist) < 2:
        raise ValueError("tlist needs at least two points")
    if np.any(np.diff(tlist) <= 0):
        raise ValueError("tlist must be strictly increasing")
    return tlist


def _save_plan(tlist, e_ops, options):
    """Indices of ``tlist`` (or extra times) where full states are kept."""
    if options.saveat is not None:
        saveat = np.asarray(options.saveat, dtype=float)
        if saveat.size and (saveat.min() < tlist[0] or saveat.max() > tlist[-1]):
            raise ValueError("saveat times must lie within [t0, tf]")
        return saveat
    if options.store_states or not e_ops:
        return tlist
    return np.array([])


def _merged_grid(tlist, save_times):
    grid = np.union1d(tlist, save_times)
    in_t = np.isin(grid, tlist)
    in_s = np.isin(grid, save_times)
    return grid, np.searchsorted(tlist, grid), in_t, in_s


def _run(stepper, tlist, save_times, observe_expect, make_state):
    """Integrate over ``tlist`` plus ``save_times``; returns states list."""
    states = []
    if len(save_times) == 0 or save_times is tlist:
        # no merged grid needed, so bookkeeping stays O(1) in len(tlist)
        keep = len(save_times) > 0

        def observe_plain(k, t, y):
            observe_expect(k, y)
            if keep:
                states.append(make_state(y))

        integrate(stepper, tlist, observe_plain)
        return states
    grid, t_index, in_t, in_s = _merged_grid(tlist, save_times)

    def observe(k, t, y):
        if in_t[k]:
            observe_expect(t_index[k], y)
        if in_s[k]:
            states.append(make_state(y))

    integrate(stepper, grid, observe)
    return states


def sesolve(H, psi0, tlist, e_ops=None, params=None, options=None) -> SolveResult:
    """Integrate ``d psi/dt = -i H(t) psi``.

    ``H`` is an Operator, a :class:`TimeDependentOperator` or the tuple form
    ``(H0, (op, coeff), ...)``.
    """
    options = options or SolveOptions()
    H = _as_td(H)
    tlist = _check_tlist(tlist)
    if psi0.kind is not Kind.KET:
        raise KindMismatch(f"sesolve needs a Ket, got {psi0.kind.value}")
    if H.dims != psi0.dims:
        raise DimsMismatch(f"Hamiltonian dims {H.dims} differ from state dims {psi0.dims}")
    if abs(np.linalg.norm(psi0.full()) - 1) > 1e-10:
        warnings.warn("initial state is not normalized", stacklevel=2)
    e_ops = list(e_ops or [])
    rhs = _schrodinger_rhs(H, params)
    y0 = psi0.full()[:, 0]
    stepper = make_stepper(options, rhs, tlist[0], y0)

    e_mats = [_matvec_op(e.data) for e in e_ops]
    expect = np.zeros((len(e_ops), len(tlist)), dtype=np.complex128)

    def observe_expect(k, y):
        for j, m in enumerate(e_mats):
            expect[j, k] = np.vdot(y, m @ y)

    dims = psi0.dims
    states = _run(stepper, tlist, _save_plan(tlist, e_ops, options), observe_expect,
                  lambda y: Qobj(y.reshape(-1, 1), Kind.KET, dims))
    return _result(tlist, expect, states, options, e_ops, stepper)


def _result(tlist, expect, states, options, e_ops, stepper):
    save = _save_plan(tlist, e_ops, options)
    return SolveResult(
        times=tlist,
        expect=expect,
        states=states if len(save) else None,
        state_times=save if len(save) else None,
        stats=dict(stepper.stats),
    )


def _matvec_op(m):
    return sp.csr_array(m) if sp.issparse(m) else np.asarray(m)


def _schrodinger_rhs(H, params):
    if isinstance(H, Qobj):
        if H.kind is not Kind.OPERATOR:
            raise KindMismatch("sesolve needs an Operator Hamiltonian")
        return LinearRHS(-1j * H.data, (), params)
    const = None if H.constant is None else -1j * H.constant.data
    return LinearRHS(const, [(-1j * op.data, f) for op, f in H.terms], params)


def liouvillian_rhs(L, params=None) -> LinearRHS:
    """Right-hand side for a (time-dependent) superoperator generator."""
    if isinstance(L, Qobj):
        return LinearRHS(L.data, (), params)
    const = None if L.constant is None else L.constant.data
    return LinearRHS(const, [(op.data, f) for op, f in L.terms], params)


def build_generator(H, c_ops):
    """Liouvillian (constant or time-dependent) from the ``mesolve`` inputs."""
    H = _as_td(H)
    c_ops = list(c_ops or [])
    if isinstance(H, Qobj) and H.kind is Kind.SUPEROPERATOR:
        return liouvillian(H, c_ops) if c_ops else H
    if isinstance(H, TimeDependentOperator) and H.kind is Kind.SUPEROPERATOR:
        if c_ops:
            return H + liouvillian(None, c_ops)
        return H
    return liouvillian(H, c_ops)


def mesolve(H, rho0, tlist, c_ops=None, e_ops=None, params=None, options=None,
            hermitize=True) -> SolveResult:
    """Integrate the Lindblad master equation ``d vec(rho)/dt = L(t) vec(rho)``.

    ``H`` may be a Hamiltonian (constant, tuple form or time-dependent) or
    an already assembled (time-dependent) Liouvillian. Kets are promoted to
    projectors. Observations use ``(rho + rho^dag) / 2``; the integrated
    state itself is never modified.
    """
    options = options or SolveOptions()
    tlist = _check_tlist(tlist)
    L = build_generator(H, c_ops)
    if rho0.kind is Kind.KET:
        rho0 = ket2dm(rho0)
    if rho0.kind is not Kind.OPERATOR:
        raise KindMismatch(f"mesolve needs a Ket or Operator, got {rho0.kind.value}")
    if L.dims != rho0.dims:
        raise DimsMismatch(f"generator dims {L.dims} differ from state dims {rho0.dims}")
    d = rho0.shape[0]
    e_ops = list(e_ops or [])
    stepper = make_stepper(options, liouvillian_rhs(L, params), tlist[0],
                           rho0.full().reshape(-1, order="F"))
    # tr(O rho) = vec(O^T) . vec(rho)
    e_rows = [np.asarray(e.full().T.reshape(-1, order="F")) for e in e_ops]
    expect = np.zeros((len(e_ops), len(tlist)), dtype=np.complex128)

    def as_matrix(y):
        rho = y.reshape(d, d, order="F")
        return (rho + rho.conj().T) / 2 if hermitize else rho

    def observe_expect(k, y):
        if not e_rows:
            return
        v = as_matrix(y).reshape(-1, order="F") if hermitize else y
        for j, row in enumerate(e_rows):
            expect[j, k] = row @ v

    dims = rho0.dims
    states = _run(stepper, tlist, _save_plan(tlist, e_ops, options), observe_expect,
                  lambda y: Qobj(np.array(as_matrix(y)), Kind.OPERATOR, dims))
    return _result(tlist, expect, states, options, e_ops, stepper)
