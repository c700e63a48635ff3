"""Stochastic unravelings: quantum jumps, homodyne SSE and SME.

Every trajectory owns a random stream derived from ``(seed, index)`` (see
:mod:`qsim.rng`) and ensemble means are reduced in a fixed pairwise order,
so results are bitwise identical for any thread count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import Kind, Qobj, ket2dm
from .errors import DimsMismatch, EnsembleFailure, IntegrationFailure, KindMismatch
from .evolve import SolveOptions, _as_td, _check_tlist, _schrodinger_rhs, sesolve
from .ode import LinearRHS, as_generator, make_stepper
from .rng import pairwise_mean, run_batched, run_ensemble
from .superop import liouvillian, spost, spre

__all__ = [
    "WienerRecord",
    "TrajectoryEnsembleResult",
    "mcsolve",
    "ssesolve",
    "smesolve",
    "homodyne_superop",
]

JUMP_TOL = 1e-10


@dataclass
class WienerRecord:
    """Noise and homodyne current of one trajectory.

    ``current[n, k] == expect_term[n, k] + increments[n, k] / dt`` where the
    expectation term is ``<S_n + S_n^dag>`` at the start of step ``k``.
    """

    dt: float
    increments: np.ndarray
    current: np.ndarray
    step_times: np.ndarray

    def binned(self, tlist) -> np.ndarray:
        """Current averaged over each interval ``(t_{k-1}, t_k]``; NaN at ``t_0``."""
        tlist = np.asarray(tlist)
        out = np.full((self.current.shape[0], len(tlist)), np.nan)
        idx = np.searchsorted(tlist, self.step_times + 0.5 * self.dt)
        for k in range(1, len(tlist)):
            sel = idx == k
            if np.any(sel):
                out[:, k] = self.current[:, sel].mean(axis=1)
        return out


@dataclass
class TrajectoryEnsembleResult:
    times: np.ndarray
    mean_expect: np.ndarray
    per_traj_expect: np.ndarray | None
    jump_records: list
    measurement: list | None
    ntraj: int
    master_seed: int
    stats: dict = field(default_factory=dict)

    @property
    def std_expect(self) -> np.ndarray:
        """Per-time ensemble standard deviation (real and imaginary parts combined)."""
        if self.per_traj_expect is None:
            raise ValueError("per-trajectory data was not stored")
        x = self.per_traj_expect
        return np.sqrt(np.mean(np.abs(x - self.mean_expect) ** 2, axis=0))

    @property
    def expect(self):
        return self.mean_expect


def _collect(results, tlist, seed, ntraj, keep_per_traj, stats):
    good = [r for r in results if not isinstance(r, Exception)]
    failed = len(results) - len(good)
    if not good:
        raise EnsembleFailure(f"all {ntraj} trajectories failed: {results[0]}")
    records = [r["expect"] for r in good]
    mean = pairwise_mean(records)
    per = np.stack(records) if keep_per_traj else None
    stats = dict(stats)
    stats["failed"] = failed
    if failed:
        warnings.warn(f"{failed} of {ntraj} trajectories failed and were excluded",
                      RuntimeWarning, stacklevel=3)
    stats["failures"] = [str(r) for r in results if isinstance(r, Exception)]
    stats["steps"] = int(sum(r.get("steps", 0) for r in good))
    meas = [r["measurement"] for r in good] if "measurement" in good[0] else None
    return TrajectoryEnsembleResult(
        times=tlist,
        mean_expect=mean,
        per_traj_expect=per,
        jump_records=[r.get("jumps", []) for r in good],
        measurement=meas if meas and meas[0] is not None else None,
        ntraj=len(good),
        master_seed=seed,
        stats=stats,
    )


# -- Monte-Carlo wave function ---------------------------------------------


class JumpTrajectory:
    """One quantum-jump trajectory integrated with the adaptive stepper.

    A jump fires when the squared norm of the unnormalized state crosses a
    uniform random threshold; the crossing time is found by bisection on the
    dense output.
    """

    def __init__(self, rhs, c_ops, e_ops, options):
        self.rhs = rhs
        self.c = [as_generator(c) for c in c_ops]
        self.e = [as_generator(e) for e in e_ops]
        self.options = options

    def _expect_row(self, psi):
        nrm2 = np.vdot(psi, psi).real
        return [np.vdot(psi, e @ psi) / nrm2 for e in self.e]

    def _locate(self, stepper, r):
        lo, hi = stepper.t_old, stepper.t
        y = stepper.y
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            y = stepper.interpolate(mid)
            n2 = np.vdot(y, y).real
            if abs(n2 - r) < JUMP_TOL or hi - lo < 1e-15 * max(1.0, abs(hi)):
                return mid, y
            if n2 > r:
                lo = mid
            else:
                hi = mid
        return mid, y

    def _jump(self, psi, rng):
        """Apply a randomly chosen collapse operator.

        Returns ``(None, psi / |psi|)`` when every channel is dark, which
        happens only when integration error alone drained the norm.
        """
        cpsi = [c @ psi for c in self.c]
        w = np.array([np.vdot(v, v).real for v in cpsi])
        total = w.sum()
        if not total > 1e-14 * np.vdot(psi, psi).real:
            return None, psi / np.linalg.norm(psi)
        cum = np.cumsum(w)
        k = int(np.searchsorted(cum, rng.random() * total, side="right"))
        k = min(k, len(w) - 1)
        while w[k] <= 0:
            k -= 1
        return k, cpsi[k] / math.sqrt(w[k])

    def run(self, psi0, tlist, rng, hook=None):
        """Integrate one trajectory over ``tlist``.

        ``hook(k, t, psi)`` is called at every output point; it may return
        ``(psi, rhs, c_ops, e_ops)`` to restart the integration from a
        transformed state with new generators (used by the shifted-Fock
        solver). ``e_ops`` may be ``None`` to keep the current observables.
        """
        expect = np.zeros((len(self.e), len(tlist)), dtype=np.complex128)
        jumps = []
        stepper = make_stepper(self.options, self.rhs, tlist[0], psi0)
        r = rng.random()
        k, n = 0, len(tlist)
        while True:
            # record output points reached so far (k == 0 on entry)
            t_jump = None
            if k == 0:
                end = 1
            else:
                stepper.advance(tlist[-1])
                if self.c and np.vdot(stepper.y, stepper.y).real < r:
                    t_jump, y_jump = self._locate(stepper, r)
                t_limit = t_jump if t_jump is not None else stepper.t
                end = int(np.searchsorted(tlist, t_limit, side="right"))
            restarted = False
            for kk in range(k, end):
                psi = stepper.y if kk == 0 else stepper.interpolate(tlist[kk])
                expect[:, kk] = self._expect_row(psi)
                k = kk + 1
                if hook is not None:
                    update = hook(kk, tlist[kk], psi)
                    if update is not None:
                        new_psi, rhs, c_ops, e_ops = update
                        self.rhs = rhs
                        self.c = [as_generator(c) for c in c_ops]
                        if e_ops is not None:
                            self.e = [as_generator(e) for e in e_ops]
                        stepper.reset(tlist[kk], new_psi, rhs)
                        restarted = True
                        break
            if k >= n:
                break
            if restarted:
                continue
            if t_jump is not None:
                ch, new_psi = self._jump(y_jump, rng)
                if ch is not None:
                    jumps.append((t_jump, ch))
                stepper.reset(t_jump, new_psi, self.rhs)
                r = rng.random()
        return {"expect": expect, "jumps": jumps, "steps": stepper.stats["steps"]}


def mcsolve(H, psi0, tlist, c_ops=None, e_ops=None, ntraj=100, seed=0, options=None,
            params=None, n_threads=None, keep_per_traj=True) -> TrajectoryEnsembleResult:
    """Monte-Carlo wave-function ensemble.

    Each trajectory evolves under ``H_eff = H - i/2 sum_k C_k^dag C_k``;
    jump channels are drawn with probabilities proportional to
    ``<C_k^dag C_k>``. Expectations use the normalized state.
    """
    options = options or SolveOptions()
    tlist = _check_tlist(tlist)
    H = _as_td(H)
    if psi0.kind is not Kind.KET:
        raise KindMismatch("mcsolve needs a Ket initial state")
    if H.dims != psi0.dims:
        raise DimsMismatch(f"Hamiltonian dims {H.dims} differ from state dims {psi0.dims}")
    c_ops = list(c_ops or [])
    e_ops = list(e_ops or [])
    if not c_ops:
        res = sesolve(H, psi0, tlist, e_ops, params=params, options=options)
        per = np.repeat(res.expect[None], ntraj, axis=0)
        return TrajectoryEnsembleResult(tlist, res.expect, per if keep_per_traj else None,
                                        [[] for _ in range(ntraj)], None, ntraj, seed,
                                        {"failed": 0, **res.stats})
    rhs = effective_rhs(H, c_ops, params)
    traj = JumpTrajectory(rhs, [c.data for c in c_ops], [e.data for e in e_ops], options)
    y0 = psi0.full()[:, 0]

    def one(i, rng):
        return traj.run(y0, tlist, rng)

    results = run_ensemble(one, ntraj, seed, n_threads)
    return _collect(results, tlist, seed, ntraj, keep_per_traj, {"solver": "mcsolve"})


def effective_rhs(H, c_ops, params=None) -> LinearRHS:
    """``-i H_eff`` with ``H_eff = H - i/2 sum C^dag C``."""
    decay = sum((c.dag() @ c for c in c_ops), start=0 * c_ops[0]) if c_ops else None
    rhs = _schrodinger_rhs(H, params)
    if decay is not None:
        extra = -0.5 * decay.data
        extra = extra.toarray() if sp.issparse(extra) and not sp.issparse(rhs.constant) else extra
        rhs.constant = extra if rhs.constant is None else as_generator(rhs.constant + extra)
    return rhs


# -- homodyne SSE / SME ----------------------------------------------------------


def _sc_list(sc_ops):
    if sc_ops is None:
        return [], False
    if isinstance(sc_ops, Qobj):
        return [sc_ops], True
    return list(sc_ops), False


def _substeps(tlist, dt_max):
    """Number of equal Euler sub-steps in each ``tlist`` interval."""
    if dt_max is None:
        dt_max = (tlist[-1] - tlist[0]) / 1e4
    return [max(1, math.ceil((tlist[k + 1] - tlist[k]) / dt_max - 1e-9)) for k in range(len(tlist) - 1)]


def _step_schedule(tlist, dt_max):
    subs = _substeps(tlist, dt_max)
    dts, starts = [], []
    for k, m in enumerate(subs):
        h = (tlist[k + 1] - tlist[k]) / m
        for j in range(m):
            dts.append(h)
            starts.append(tlist[k] + j * h)
    return np.array(dts), np.array(starts), np.cumsum(subs)


def _rk4_linear(apply, y, h):
    k1 = apply(y)
    k2 = apply(y + (h / 2) * k1)
    k3 = apply(y + (h / 2) * k2)
    k4 = apply(y + h * k3)
    return (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _draw_noise(rngs, n_steps, n_ch, dts):
    """Wiener increments with shape (n_steps, n_ch, batch)."""
    sq = np.sqrt(dts)[:, None]
    return np.stack([rng.standard_normal((n_steps, n_ch)) * sq for rng in rngs], axis=-1)


# a valid density matrix has Frobenius norm <= 1
DIVERGENCE_NORM = 1.5


def _flag_diverged(Y, norms, alive, t_fail, t, reset):
    """Freeze columns that left the state space; returns the updated ``alive`` mask."""
    bad = alive & ~(np.isfinite(norms) & (norms <= DIVERGENCE_NORM))
    if np.any(bad):
        t_fail[bad] = t
        Y[:, bad] = reset[:, None]
        alive = alive & ~bad
    return alive


def _batch_results(exp, meas, failed_at):
    out = []
    for j in range(exp.shape[0]):
        if np.isfinite(failed_at[j]):
            out.append(IntegrationFailure(
                f"stochastic trajectory diverged at t = {failed_at[j]:.6g}",
                t_last=float(failed_at[j])))
        else:
            out.append({"expect": exp[j], "measurement": meas[j] if meas else None})
    return out


class _HomodyneSSE:
    def __init__(self, H, sc_ops, e_ops, single, drift):
        self.G = as_generator(-1j * H.data - 0.5 * sum(s.dag().data @ s.data for s in sc_ops)) \
            if sc_ops else as_generator(-1j * H.data)
        self.S = [as_generator(s.data) for s in sc_ops]
        self.e = [as_generator(e.data) for e in e_ops]
        self.single = single
        self.drift = drift

    def simulate(self, psi0, tlist, dt_max, rngs, store_measurement):
        m = len(rngs)
        dts, starts, ends = _step_schedule(tlist, dt_max)
        n_steps, n_ch = len(dts), len(self.S)
        dW = _draw_noise(rngs, n_steps, max(n_ch, 1), dts)
        psi = np.repeat(psi0[:, None], m, axis=1)
        expect = np.zeros((m, len(self.e), len(tlist)), dtype=np.complex128)
        self._observe(psi, expect, 0)
        if store_measurement and n_ch:
            cur = np.zeros((m, n_ch, n_steps))
        k_out = 0
        alive = np.ones(m, dtype=bool)
        t_fail = np.full(m, np.inf)
        for step in range(n_steps):
            h = dts[step]
            Spsi = [S @ psi for S in self.S]
            e = [2 * np.einsum("ij,ij->j", psi.conj(), sp_).real for sp_ in Spsi]
            if self.single and n_ch:
                psi = self._step_single(psi, Spsi[0], e[0], dW[step, 0], h)
            else:
                psi = self._step_general(psi, Spsi, e, dW[step, :n_ch], h)
            with np.errstate(all="ignore"):
                nrm = np.linalg.norm(psi, axis=0)
                psi = psi / nrm
            if not np.all(np.isfinite(nrm) & (nrm > 0)):
                alive = _flag_diverged(psi, np.where(nrm > 0, 1.0, np.inf), alive, t_fail,
                                       starts[step], psi0)
            if store_measurement and n_ch:
                for n in range(n_ch):
                    cur[:, n, step] = e[n] + dW[step, n] / h
            if step + 1 == ends[k_out]:
                k_out += 1
                self._observe(psi, expect, k_out)
        meas = None
        if store_measurement and n_ch:
            meas = [WienerRecord(float(dts.max()), dW[:, :n_ch, j].T.copy(), cur[j], starts)
                    for j in range(m)]
        return expect, meas, t_fail

    def _observe(self, psi, expect, k):
        for j, E in enumerate(self.e):
            expect[:, j, k] = np.einsum("ij,ij->j", psi.conj(), E @ psi)

    def _drift_apply(self, e_list):
        S = self.S

        def apply(y):
            out = self.G @ y
            for Sn, en in zip(S, e_list):
                out = out + (en / 2) * (Sn @ y) - (en**2 / 8) * y
            return out

        return apply

    def _drift(self, psi, e_list, h):
        apply = self._drift_apply(e_list)
        if self.drift == "euler":
            return h * apply(psi)
        return _rk4_linear(apply, psi, h)

    def _step_general(self, psi, Spsi, e, dW, h):
        # drift first, then the noise evaluated on the drifted state
        mid = psi + self._drift(psi, e, h)
        mid = mid / np.linalg.norm(mid, axis=0)
        out = mid
        for S, dw in zip(self.S, dW):
            Sm = S @ mid
            em = 2 * np.einsum("ij,ij->j", mid.conj(), Sm).real
            out = out + (Sm - (em / 2) * mid) * dw
        return out

    def _step_single(self, psi, Spsi, e, dw, h):
        # scalar-noise path: one Wiener process, no channel loop
        S = self.S[0]
        G = self.G

        def apply(y):
            return G @ y + (e / 2) * (S @ y) - (e**2 / 8) * y

        drift = h * apply(psi) if self.drift == "euler" else _rk4_linear(apply, psi, h)
        mid = psi + drift
        mid = mid / np.linalg.norm(mid, axis=0)
        Sm = S @ mid
        em = 2 * np.einsum("ij,ij->j", mid.conj(), Sm).real
        return mid + (Sm - (em / 2) * mid) * dw


def ssesolve(H, psi0, tlist, sc_ops=None, e_ops=None, ntraj=100, seed=0,
             store_measurement=False, dt_max=None, n_threads=None, drift="rk4",
             batch_size=32, keep_per_traj=True) -> TrajectoryEnsembleResult:
    """Homodyne stochastic Schrödinger equation in Itô form.

    Steps have a fixed size (``tlist`` intervals cut so ``dt <= dt_max``,
    default ``(tf - t0) / 1e4``). Each step freezes ``e_n = <S_n + S_n^dag>``
    on the normalized state and integrates the deterministic part with RK4
    (``drift="euler"`` gives plain Euler). The Euler-Maruyama noise term
    ``(S_n - e_n/2) psi dW_n`` is then evaluated on the renormalized drifted
    state, after which the state is renormalized again. Evaluating the noise
    after the drift keeps coherent states coherent, which removes most of
    the first-order bias of the plain scheme for fast oscillators.

    A single ``Qobj`` for ``sc_ops`` selects the scalar-noise path.
    """
    tlist = _check_tlist(tlist)
    if psi0.kind is not Kind.KET:
        raise KindMismatch("ssesolve needs a Ket initial state")
    if H.dims != psi0.dims:
        raise DimsMismatch(f"Hamiltonian dims {H.dims} differ from state dims {psi0.dims}")
    sc_list, single = _sc_list(sc_ops)
    e_ops = list(e_ops or [])
    model = _HomodyneSSE(H, sc_list, e_ops, single, drift)
    y0 = psi0.full()[:, 0]

    def batch(idx, rngs):
        return _batch_results(*model.simulate(y0, tlist, dt_max, rngs, store_measurement))

    results = [r for b in run_batched(batch, ntraj, seed, n_threads, batch_size) for r in b]
    dts, _, _ = _step_schedule(tlist, dt_max)
    return _collect(results, tlist, seed, ntraj, keep_per_traj,
                    {"solver": "ssesolve", "dt": float(dts.max()), "n_steps": len(dts)})


def homodyne_superop(S: Qobj) -> Qobj:
    """Superoperator of ``S rho + rho S^dag`` (the linear part of H[S])."""
    return spre(S) + spost(S.dag())


class _HomodyneSME:
    """Batched SME stepper: linear drift, then a measurement Kraus map.

    The drift ``L' = -i[H, .] + sum_c D[C_c] - 1/2 {S^dag S, .}`` is taken
    with RK4 and the result is normalized. The measurement step applies
    ``K = I + sum_k S_k dY_k + 1/2 sum_kl S_k S_l (dY_k dY_l - delta_kl dt)``
    with ``dY_k = <S_k + S_k^dag> dt + dW_k`` evaluated on the drifted state:
    ``rho -> K rho K^dag / tr``. The map is completely positive, so states
    cannot leave the state space through large noise increments, and
    coherent states of a measured mode stay coherent.
    """

    def __init__(self, H, c_ops, sc_ops, e_ops, drift):
        self.d = H.shape[0]
        L = liouvillian(H, list(c_ops))
        for s in sc_ops:
            sds = s.dag() @ s
            L = L - 0.5 * (spre(sds) + spost(sds))
        self.L = as_generator(L.data)
        self.S = [s.full() for s in sc_ops]
        n = len(self.S)
        # K = I + sum_j coef_j M_j with M = [S_k..., S_k S_l...]
        mats = self.S + [a @ b for a in self.S for b in self.S]
        d = self.d
        self.left = np.concatenate(mats, axis=0) if mats else np.zeros((0, d))
        self.right = (np.concatenate([x.conj().T for x in mats], axis=1)
                      if mats else np.zeros((d, 0)))
        self.n_mats = len(mats)
        self.diag = [n + k * n + k for k in range(n)]
        self.e_rows = [e.full().T.reshape(-1, order="F") for e in e_ops]
        self.drift = drift

    def _kraus(self, X, dY, h):
        """``K X K^dag`` for every trajectory in the batch ``X[m, d, d]``."""
        m, d, _ = X.shape
        n = len(self.S)
        coef = np.empty((m, self.n_mats))
        for k in range(n):
            coef[:, k] = dY[k]
            for l in range(n):
                coef[:, n + k * n + l] = 0.5 * dY[k] * dY[l]
        coef[:, self.diag] -= 0.5 * h
        # left products as one GEMM over the whole batch
        P = self.left @ X.transpose(1, 0, 2).reshape(d, m * d)
        KX = X + np.einsum("mj,jamb->mab", coef, P.reshape(self.n_mats, d, m, d))
        Q = KX.reshape(m * d, d) @ self.right
        return KX + np.einsum("mj,majb->mab", coef, Q.reshape(m, d, self.n_mats, d))

    def simulate(self, rho0_vec, tlist, dt_max, rngs, store_measurement):
        d, m = self.d, len(rngs)
        dts, starts, ends = _step_schedule(tlist, dt_max)
        n_steps, n_ch = len(dts), len(self.S)
        dW = _draw_noise(rngs, n_steps, max(n_ch, 1), dts)
        Y = np.repeat(rho0_vec[:, None], m, axis=1)
        expect = np.zeros((m, len(self.e_rows), len(tlist)), dtype=np.complex128)
        self._observe(Y, expect, 0)
        cur = np.zeros((m, n_ch, n_steps)) if store_measurement and n_ch else None
        alive = np.ones(m, dtype=bool)
        t_fail = np.full(m, np.inf)
        L = self.L

        def apply(y):
            return L @ y

        k_out = 0
        for step in range(n_steps):
            h = dts[step]
            Y = Y + (h * apply(Y) if self.drift == "euler" else _rk4_linear(apply, Y, h))
            # (d*d, m) column-stacked -> (m, d, d)
            X = Y.reshape(d, d, m, order="F").transpose(2, 0, 1)
            with np.errstate(all="ignore"):
                X = X / np.trace(X, axis1=1, axis2=2).real[:, None, None]
                e = [2 * np.einsum("ij,mji->m", S, X).real for S in self.S]
                dY = [e[k] * h + dW[step, k] for k in range(n_ch)]
                out = self._kraus(X, dY, h) if n_ch else X
                out = 0.5 * (out + out.conj().transpose(0, 2, 1))
                out = out / np.trace(out, axis1=1, axis2=2).real[:, None, None]
                Y = out.transpose(1, 2, 0).reshape(d * d, m, order="F")
                norms = np.linalg.norm(Y, axis=0)
            if not np.all(norms <= DIVERGENCE_NORM):
                alive = _flag_diverged(Y, norms, alive, t_fail, starts[step], rho0_vec)
            if cur is not None:
                for n in range(n_ch):
                    cur[:, n, step] = e[n] + dW[step, n] / h
            if step + 1 == ends[k_out]:
                k_out += 1
                self._observe(Y, expect, k_out)
        meas = None
        if cur is not None:
            meas = [WienerRecord(float(dts.max()), dW[:, :n_ch, j].T.copy(), cur[j], starts)
                    for j in range(m)]
        return expect, meas, t_fail

    def _observe(self, Y, expect, k):
        for j, row in enumerate(self.e_rows):
            expect[:, j, k] = row @ Y


def smesolve(H, rho0, tlist, c_ops=None, sc_ops=None, e_ops=None, ntraj=100, seed=0,
             store_measurement=False, dt_max=None, n_threads=None, drift="rk4",
             batch_size=32, keep_per_traj=True) -> TrajectoryEnsembleResult:
    """Homodyne stochastic master equation in Itô form.

    Solves ``d rho = L rho dt + sum_n H[S_n] rho dW_n`` with ``L`` built
    from ``c_ops`` and ``sc_ops`` and
    ``H[O] rho = O rho + rho O^dag - tr(O rho + rho O^dag) rho``. Each step
    is split into a deterministic RK4 drift and a positivity-preserving
    measurement update (see ``_HomodyneSME``); the scheme has weak order one
    and reproduces the equation above to first order in ``dt``.
    ``drift="euler"`` replaces RK4 by a single Euler step.

    A trajectory whose state becomes non-finite is excluded and reported in
    ``stats["failed"]``.
    """
    tlist = _check_tlist(tlist)
    if rho0.kind is Kind.KET:
        rho0 = ket2dm(rho0)
    if rho0.kind is not Kind.OPERATOR:
        raise KindMismatch("smesolve needs a Ket or density Operator")
    if H.dims != rho0.dims:
        raise DimsMismatch(f"Hamiltonian dims {H.dims} differ from state dims {rho0.dims}")
    sc_list, single = _sc_list(sc_ops)
    model = _HomodyneSME(H, c_ops or [], sc_list, list(e_ops or []), drift)
    y0 = rho0.full().reshape(-1, order="F")

    def batch(idx, rngs):
        return _batch_results(*model.simulate(y0, tlist, dt_max, rngs, store_measurement))

    results = [r for b in run_batched(batch, ntraj, seed, n_threads, batch_size) for r in b]
    dts, _, _ = _step_schedule(tlist, dt_max)
    return _collect(results, tlist, seed, ntraj, keep_per_traj,
                    {"solver": "smesolve", "dt": float(dts.max()), "n_steps": len(dts)})
