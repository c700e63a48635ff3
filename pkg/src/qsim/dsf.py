"""Adaptive-basis solvers.

Dynamical shifted Fock (DSF)
    The state is stored in a frame displaced by ``alpha_ref`` for each tracked
    mode. Whenever the local coherence ``<a>`` in that frame exceeds the
    threshold, the state is displaced back to the origin and the frame
    absorbs the shift. Models are supplied as builder functions of the
    shifted operators ``a + alpha_ref``, so rebuilding the generator after a
    shift is exact for polynomial Hamiltonians.

Dynamical Fock dimension (DFD)
    The truncation of each monitored mode grows or shrinks depending on the
    population near the top of its Fock space.

Both check their conditions at the output times only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Kind, expm_array, ket2dm
from .errors import DfdOverflow, DsfAccuracyWarning, KindMismatch
from .evolve import SolveOptions, SolveResult, _check_tlist, build_generator, liouvillian_rhs
from .ode import integrate, make_stepper
from .trajectories import (JumpTrajectory, TrajectoryEnsembleResult, _collect,
                           effective_rhs)
from .rng import run_ensemble

__all__ = [
    "DsfState",
    "DsfResult",
    "DsfEnsembleResult",
    "DimPolicy",
    "DfdResult",
    "dsf_mesolve",
    "dsf_mcsolve",
    "dfd_mesolve",
]

TOP_LEVEL_LIMIT = 0.05


@dataclass
class DsfState:
    """Frame bookkeeping for the tracked modes."""

    alphas: list
    threshold: float
    local_ops: list
    shift_log: list = field(default_factory=list)

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if len(self.alphas) != len(self.local_ops):
            raise ValueError("one initial coherence per tracked mode is required")
        self.alphas = [complex(x) for x in self.alphas]
        self._levels = [np.real(np.diag((a.dag() @ a).full())) for a in self.local_ops]
        self._gen = [(a.dag().full(), a.full()) for a in self.local_ops]

    def shifted_ops(self):
        """Operators ``a_i + alpha_i`` that express the model in the lab frame."""
        return [a + alpha for a, alpha in zip(self.local_ops, self.alphas)]

    def displacement(self, i, beta) -> np.ndarray:
        """Dense ``D(beta)`` for tracked mode ``i`` in the reduced space."""
        ad, a = self._gen[i]
        return expm_array(beta * ad - np.conj(beta) * a)

    def top_population(self, i, probs) -> float:
        """Population of the two highest Fock levels of mode ``i``."""
        lv = self._levels[i]
        top = np.rint(lv.max())
        return float(probs[lv >= top - 1.5].sum())


@dataclass
class DsfResult(SolveResult):
    shift_log: list = field(default_factory=list)
    alphas: list = field(default_factory=list)


@dataclass
class DsfEnsembleResult(TrajectoryEnsembleResult):
    shift_logs: list = field(default_factory=list)


def _dense(ops):
    return [o.full() for o in ops]


def _build(H_fn, c_ops_fn, e_ops_fn, ops, params):
    H = H_fn(ops, params)
    c_ops = list(c_ops_fn(ops, params)) if c_ops_fn is not None else []
    e_ops = list(e_ops_fn(ops, params)) if e_ops_fn is not None else []
    return H, c_ops, e_ops


def _warn_top(state, stats, t, i, pop):
    if pop > TOP_LEVEL_LIMIT:
        msg = f"mode {i}: top Fock levels hold {pop:.3g} of the population at t = {t:.6g}"
        stats.setdefault("warnings", []).append(msg)
        warnings.warn(msg, DsfAccuracyWarning, stacklevel=3)


def dsf_mesolve(H_fn, psi0, tlist, c_ops_fn, op_list, alpha0_list, e_ops_fn=None,
                dalpha_max=0.1, params=None, options=None) -> DsfResult:
    """Master equation in a dynamically displaced Fock basis.

    Parameters
    ----------
    H_fn, c_ops_fn, e_ops_fn : callable
        ``f(ops, params)`` building the Hamiltonian, collapse operators and
        observables from the lab-frame annihilation operators ``ops``.
    psi0 : Qobj
        Ket or density matrix of the fluctuations around ``alpha0_list``.
    op_list : list of Qobj
        Annihilation operators of the tracked modes in the reduced space.
    dalpha_max : float
        Shift threshold on ``|<a_i>|`` in the current frame.
    """
    options = options or SolveOptions()
    tlist = _check_tlist(tlist)
    rho0 = ket2dm(psi0) if psi0.kind is Kind.KET else psi0
    if rho0.kind is not Kind.OPERATOR:
        raise KindMismatch("dsf_mesolve needs a Ket or density Operator")
    state = DsfState(list(alpha0_list), dalpha_max, list(op_list))
    d = rho0.shape[0]
    H, c_ops, e_ops = _build(H_fn, c_ops_fn, e_ops_fn, state.shifted_ops(), params)
    L = build_generator(H, c_ops)
    stepper = make_stepper(options, liouvillian_rhs(L, params), tlist[0],
                           rho0.full().reshape(-1, order="F"))
    local = _dense(op_list)
    cur = {"e": _dense(e_ops)}
    expect = np.zeros((len(e_ops), len(tlist)), dtype=np.complex128)
    stats = {"shifts": 0}

    def observe(k, t, y):
        rho = y.reshape(d, d, order="F")
        rho = 0.5 * (rho + rho.conj().T)
        for j, e in enumerate(cur["e"]):
            expect[j, k] = np.sum(e.T * rho)
        shifted = False
        for i, a in enumerate(local):
            da = np.sum(a.T * rho)
            if abs(da) > state.threshold:
                D = state.displacement(i, -da)
                rho = D @ rho @ D.conj().T
                state.alphas[i] += da
                state.shift_log.append((float(t), i, complex(da)))
                _warn_top(state, stats, t, i, state.top_population(i, np.real(np.diag(rho))))
                shifted = True
        if not shifted:
            return None
        stats["shifts"] += 1
        H, c_ops, e_ops = _build(H_fn, c_ops_fn, e_ops_fn, state.shifted_ops(), params)
        cur["e"] = _dense(e_ops)
        return rho.reshape(-1, order="F"), liouvillian_rhs(build_generator(H, c_ops), params)

    integrate(stepper, tlist, observe)
    stats.update(stepper.stats)
    return DsfResult(times=tlist, expect=expect, stats=stats,
                     shift_log=list(state.shift_log), alphas=list(state.alphas))


def dsf_mcsolve(H_fn, psi0, tlist, c_ops_fn, op_list, alpha0_list, e_ops_fn=None,
                dalpha_max=0.1, ntraj=100, seed=0, params=None, options=None,
                n_threads=None, keep_per_traj=True) -> DsfEnsembleResult:
    """Quantum-jump ensemble where every trajectory carries its own displaced frame.

    Jumps use the collapse operators of the trajectory's current frame.
    """
    options = options or SolveOptions()
    tlist = _check_tlist(tlist)
    if psi0.kind is not Kind.KET:
        raise KindMismatch("dsf_mcsolve needs a Ket initial state")
    y0 = psi0.full()[:, 0]
    alpha0 = list(alpha0_list)
    op_list = list(op_list)

    def one(idx, rng):
        state = DsfState(list(alpha0), dalpha_max, op_list)
        H, c_ops, e_ops = _build(H_fn, c_ops_fn, e_ops_fn, state.shifted_ops(), params)
        traj = JumpTrajectory(effective_rhs(H, c_ops, params), [c.data for c in c_ops],
                              [e.data for e in e_ops], options)
        local = _dense(op_list)
        stats = {}

        def hook(k, t, psi):
            psi = psi / np.linalg.norm(psi)
            shifted = False
            for i, a in enumerate(local):
                da = np.vdot(psi, a @ psi)
                if abs(da) > state.threshold:
                    psi = state.displacement(i, -da) @ psi
                    state.alphas[i] += da
                    state.shift_log.append((float(t), i, complex(da)))
                    _warn_top(state, stats, t, i, state.top_population(i, np.abs(psi) ** 2))
                    shifted = True
            if not shifted:
                return None
            H, c_ops, e_ops = _build(H_fn, c_ops_fn, e_ops_fn, state.shifted_ops(), params)
            return (psi, effective_rhs(H, c_ops, params), [c.data for c in c_ops],
                    [e.data for e in e_ops])

        out = traj.run(y0, tlist, rng, hook=_keep_norm(hook))
        out["shift_log"] = list(state.shift_log)
        return out

    results = run_ensemble(one, ntraj, seed, n_threads)
    base = _collect(results, tlist, seed, ntraj, keep_per_traj, {"solver": "dsf_mcsolve"})
    logs = [r["shift_log"] for r in results if not isinstance(r, Exception)]
    return DsfEnsembleResult(**base.__dict__, shift_logs=logs)


def _keep_norm(hook):
    """Return the restart state with the norm it had before the hook.

    The jump threshold compares against the squared norm, so the displaced
    state must keep the decay accumulated since the last jump.
    """

    def wrapped(k, t, psi):
        update = hook(k, t, psi)
        if update is None:
            return None
        new_psi, *rest = update
        return (new_psi * np.linalg.norm(psi), *rest)

    return wrapped


# -- dynamical Fock dimension ---------------------------------------------------


@dataclass
class DimPolicy:
    """Resize rules for :func:`dfd_mesolve`.

    ``modes`` lists the subsystem indices that may be resized (``None``
    means all of them).
    """

    m: int = 2
    tau_up: float = 1e-4
    tau_down: float = 1e-6
    grow: int = 4
    shrink: int = 4
    dim_min: int = 4
    dim_max: int = 256
    modes: list | None = None


@dataclass
class DfdResult(SolveResult):
    dim_log: list = field(default_factory=list)
    max_dims: list = field(default_factory=list)


def _marginals(rho, dims):
    p = np.real(np.diag(rho)).reshape(dims)
    n = len(dims)
    return [p.sum(axis=tuple(j for j in range(n) if j != i)) for i in range(n)]


def _resize(rho, dims, mode, new):
    n = len(dims)
    t = rho.reshape(tuple(dims) * 2)
    old = dims[mode]
    if new > old:
        pad = [(0, 0)] * (2 * n)
        pad[mode] = pad[mode + n] = (0, new - old)
        t = np.pad(t, pad)
    else:
        sl = [slice(None)] * (2 * n)
        sl[mode] = sl[mode + n] = slice(0, new)
        t = t[tuple(sl)]
    dims = list(dims)
    dims[mode] = new
    dtot = math.prod(dims)
    return t.reshape(dtot, dtot), dims


def dfd_mesolve(H_fn, psi0, tlist, c_ops_fn, e_ops_fn=None, params=None, options=None,
                dim_policy=None) -> DfdResult:
    """Master equation whose Fock cutoffs follow the state.

    ``H_fn(dims, params)``, ``c_ops_fn(dims, params)`` and
    ``e_ops_fn(dims, params)`` build the model for a list of subsystem
    dimensions. At each output time a monitored mode grows by
    ``policy.grow`` when its top ``m`` levels hold more than ``tau_up``, and
    shrinks by ``policy.shrink`` (never below ``dim_min``) when the levels
    that would be removed, together with the new top ``m`` levels, hold
    less than ``tau_down``. Truncated states are renormalized.
    """
    policy = dim_policy or DimPolicy()
    options = options or SolveOptions()
    tlist = _check_tlist(tlist)
    rho0 = ket2dm(psi0) if psi0.kind is Kind.KET else psi0
    dims = list(rho0.dims)
    modes = list(range(len(dims))) if policy.modes is None else list(policy.modes)
    if any(dims[i] > policy.dim_max for i in modes):
        raise DfdOverflow(f"initial dims {dims} exceed dim_max = {policy.dim_max}")

    def build(dims):
        H, c_ops, e_ops = _build(H_fn, c_ops_fn, e_ops_fn, dims, params)
        return liouvillian_rhs(build_generator(H, c_ops), params), _dense(e_ops)

    rhs, e_cur = build(dims)
    n_e = len(e_cur)
    expect = np.zeros((n_e, len(tlist)), dtype=np.complex128)
    stepper = make_stepper(options, rhs, tlist[0], rho0.full().reshape(-1, order="F"))
    cur = {"dims": dims, "e": e_cur}
    dim_log = [(float(tlist[0]), list(dims))]
    peak = list(dims)
    stats = {"resizes": 0, "truncated": []}

    def observe(k, t, y):
        dims = cur["dims"]
        d = math.prod(dims)
        rho = y.reshape(d, d, order="F")
        rho = 0.5 * (rho + rho.conj().T)
        for j, e in enumerate(cur["e"]):
            expect[j, k] = np.sum(e.T * rho)
        new_dims = list(dims)
        changed = False
        for i in modes:
            p = _marginals(rho, new_dims)[i]
            n_i = new_dims[i]
            if p[n_i - policy.m:].sum() > policy.tau_up:
                target = n_i + policy.grow
                if target > policy.dim_max:
                    raise DfdOverflow(f"mode {i} needs dimension {target} > {policy.dim_max}")
                rho, new_dims = _resize(rho, new_dims, i, target)
                changed = True
            elif n_i - policy.shrink >= policy.dim_min and \
                    p[n_i - policy.m - policy.shrink:].sum() < policy.tau_down:
                before = np.trace(rho).real
                rho, new_dims = _resize(rho, new_dims, i, n_i - policy.shrink)
                kept = np.trace(rho).real
                stats["truncated"].append(before - kept)
                rho = rho / kept
                changed = True
        if not changed:
            return None
        stats["resizes"] += 1
        cur["dims"] = new_dims
        for i, n_i in enumerate(new_dims):
            peak[i] = max(peak[i], n_i)
        dim_log.append((float(t), list(new_dims)))
        rhs, cur["e"] = build(new_dims)
        return rho.reshape(-1, order="F"), rhs

    integrate(stepper, tlist, observe)
    stats.update(stepper.stats)
    return DfdResult(times=tlist, expect=expect, stats=stats, dim_log=dim_log, max_dims=peak)
