"""Explicit Runge-Kutta integrators for linear quantum generators.

:class:`DormandPrince` is the adaptive 5(4) pair with a PI step-size
controller and the 4th-order continuous extension, so states at arbitrary
output times come from interpolation rather than from shortening steps.
:class:`FixedRK4` takes equal classical RK4 steps that land exactly on the
requested output times.

Both expose the same stepping protocol used by every solver:

``advance()``
    take one accepted step, return ``(t_old, t_new)``.
``interpolate(t)``
    state at ``t`` inside the last accepted step.
``reset(t, y, rhs=None)``
    restart from a new state (after a quantum jump or a basis shift).
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .errors import IntegrationFailure

# Dormand-Prince tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# difference between the 5th and embedded 4th order weights
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension (Shampine), y(t + th) = y + h * K^T (P @ [th, th^2, th^3, th^4])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_ALPHA = 0.17  # PI exponents, Hairer & Wanner beta = 0.04
_BETA = 0.04


def as_generator(m):
    """Pick the storage that makes ``m @ y`` fastest.

    Small or fairly dense matrices are multiplied dense; large sparse ones
    stay in CSR.
    """
    if sp.issparse(m):
        n = m.shape[0]
        if n <= 128 or m.nnz > 0.15 * n * n:
            return m.toarray()
        return sp.csr_array(m)
    return np.asarray(m)


class LinearRHS:
    """Right-hand side ``y' = (G0 + sum_j c_j(params, t) G_j) y``."""

    def __init__(self, constant, terms=(), params=None):
        self.constant = None if constant is None else as_generator(constant)
        self.terms = [(as_generator(g), f) for g, f in terms]
        self.params = params
        self.nfev = 0

    @property
    def time_dependent(self) -> bool:
        return bool(self.terms)

    def __call__(self, t, y):
        self.nfev += 1
        out = self.constant @ y if self.constant is not None else np.zeros_like(y)
        for g, f in self.terms:
            c = f(self.params, t)
            if c != 0:
                out = out + c * (g @ y)
        return out


def _rms(x):
    return math.sqrt(float(np.mean(np.abs(x) ** 2))) if x.size else 0.0


class DormandPrince:
    """Adaptive Dormand-Prince 5(4) stepper with dense output.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> dy/dt``.
    t0, y0 : float, ndarray
        Initial condition. ``y0`` is copied.
    atol, rtol : float
        Mixed absolute/relative local error tolerance, RMS norm.
    max_step : float
        Upper bound on the step size.
    """

    def __init__(self, rhs, t0, y0, atol=1e-8, rtol=1e-6, max_step=math.inf,
                 first_step=None, min_step=1e-14):
        self.atol = atol
        self.rtol = rtol
        self.max_step = max_step
        self.min_step = min_step
        self.n_steps = 0
        self.n_rejected = 0
        self.nfev = 0
        self._first_step = first_step
        self.reset(t0, y0, rhs)

    def _f(self, t, y):
        self.nfev += 1
        return self.rhs(t, y)

    def reset(self, t, y, rhs=None):
        if rhs is not None:
            self.rhs = rhs
        self.t = float(t)
        self.y = np.array(y, dtype=np.complex128)
        self.f = self._f(self.t, self.y)
        self.t_old = self.t
        self.y_old = self.y
        self._K = None
        self._err_old = 1e-4
        self.h = self._first_step or self._initial_step()

    def _initial_step(self):
        scale = self.atol + self.rtol * np.abs(self.y)
        d0 = _rms(self.y / scale)
        d1 = _rms(self.f / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, self.max_step)
        y1 = self.y + h0 * self.f
        f1 = self._f(self.t + h0, y1)
        d2 = _rms((f1 - self.f) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, self.max_step)

    def advance(self, t_bound=math.inf):
        """Take one accepted step, not going past ``t_bound``."""
        t, y, f = self.t, self.y, self.f
        h = min(self.h, self.max_step)
        facmax = _FAC_MAX
        while True:
            if h < self.min_step * max(1.0, abs(t)):
                raise IntegrationFailure(f"step size underflow at t = {t}", t_last=t)
            clipped = t + h >= t_bound
            if clipped:
                h = t_bound - t
            K = [f]
            for s in range(1, 7):
                ys = y + h * sum(a * k for a, k in zip(_A[s], K) if a != 0)
                if s == 6:
                    y_new = ys
                K.append(self._f(t + _C[s] * h, ys))
            err_vec = h * sum(e * k for e, k in zip(_E, K) if e != 0)
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(err_vec / scale)
            if not math.isfinite(err):
                raise IntegrationFailure(f"non-finite state at t = {t}", t_last=t)
            if err <= 1.0:
                fac = _SAFETY * max(err, 1e-10) ** -_ALPHA * self._err_old ** _BETA
                fac = min(facmax, max(_FAC_MIN, fac))
                self._err_old = max(err, 1e-4)
                if clipped:
                    # a clipped step says nothing about the natural step size
                    fac = max(fac, self.h / h)
                self.t_old, self.y_old = t, y
                self.t = t_bound if clipped else t + h
                self.y = y_new
                self.f = K[6]
                self._K = K
                self._h_last = h
                self.h = h * fac
                self.n_steps += 1
                return self.t_old, self.t
            self.n_rejected += 1
            h = h * max(_FAC_MIN, _SAFETY * err ** -0.2)
            facmax = 1.0

    def interpolate(self, t):
        """State at time ``t`` within the last accepted step."""
        if t == self.t:
            return self.y
        if t == self.t_old:
            return self.y_old
        h = self._h_last
        th = (t - self.t_old) / h
        powers = np.array([th, th * th, th**3, th**4])
        w = _P @ powers
        return self.y_old + h * sum(wi * k for wi, k in zip(w, self._K) if wi != 0)

    @property
    def stats(self):
        return {"steps": self.n_steps, "rejected": self.n_rejected, "rhs_evals": self.nfev}


class FixedRK4:
    """Classical RK4 with a step no larger than ``dt``.

    The caller passes the next output time as ``t_bound`` to ``advance``;
    each interval between output times is cut into equal sub-steps so the
    output times are hit exactly and ``interpolate`` is only ever asked for
    step end points (cubic Hermite is used otherwise).
    """

    def __init__(self, rhs, t0, y0, dt):
        if dt is None or dt <= 0:
            raise ValueError("FixedRK4 needs a positive dt_fixed")
        self.dt = dt
        self.n_steps = 0
        self.n_rejected = 0
        self.nfev = 0
        self.reset(t0, y0, rhs)

    def _f(self, t, y):
        self.nfev += 1
        return self.rhs(t, y)

    def reset(self, t, y, rhs=None):
        if rhs is not None:
            self.rhs = rhs
        self.t = float(t)
        self.y = np.array(y, dtype=np.complex128)
        self.f = self._f(self.t, self.y)
        self.t_old, self.y_old, self.f_old = self.t, self.y, self.f

    def advance(self, t_bound=math.inf):
        t, y = self.t, self.y
        if math.isfinite(t_bound):
            span = t_bound - t
            h = span / max(1, math.ceil(span / self.dt - 1e-9))
        else:
            h = self.dt
        k1 = self.f
        k2 = self._f(t + h / 2, y + (h / 2) * k1)
        k3 = self._f(t + h / 2, y + (h / 2) * k2)
        k4 = self._f(t + h, y + h * k3)
        y_new = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y_new)):
            raise IntegrationFailure(f"non-finite state at t = {t}", t_last=t)
        self.t_old, self.y_old, self.f_old = t, y, k1
        t_new = t + h
        if math.isfinite(t_bound) and abs(t_new - t_bound) < 1e-9 * h:
            t_new = t_bound
        self.t = t_new
        self.y = y_new
        self.f = self._f(self.t, y_new)
        self.n_steps += 1
        return self.t_old, self.t

    def interpolate(self, t):
        if t == self.t:
            return self.y
        if t == self.t_old:
            return self.y_old
        h = self.t - self.t_old
        s = (t - self.t_old) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * self.y_old + h10 * h * self.f_old + h01 * self.y + h11 * h * self.f

    @property
    def stats(self):
        return {"steps": self.n_steps, "rejected": 0, "rhs_evals": self.nfev}


def make_stepper(options, rhs, t0, y0):
    from .evolve import Method

    if options.method is Method.FIXED_RK4:
        return FixedRK4(rhs, t0, y0, options.dt_fixed)
    return DormandPrince(rhs, t0, y0, atol=options.abstol, rtol=options.reltol,
                         max_step=options.max_step)


def integrate(stepper, tlist, observe):
    """Drive ``stepper`` across ``tlist`` calling ``observe(k, t, y)`` at each point.

    The stepper must already sit at ``tlist[0]``. Steps are clipped at the
    final time only; intermediate output comes from dense interpolation.
    ``observe`` may return ``(y_new, rhs_new)`` to restart the integration at
    that output time from a transformed state (``rhs_new`` may be ``None``).
    """
    tlist = np.asarray(tlist, dtype=float)
    n = len(tlist)
    update = observe(0, tlist[0], stepper.y)
    if update is not None:
        stepper.reset(tlist[0], *update)
    k = 1
    fixed = isinstance(stepper, FixedRK4)
    while k < n:
        bound = tlist[k] if fixed else tlist[-1]
        stepper.advance(bound)
        while k < n and tlist[k] <= stepper.t:
            update = observe(k, tlist[k], stepper.interpolate(tlist[k]))
            k += 1
            if update is not None:
                stepper.reset(tlist[k - 1], *update)
                break
