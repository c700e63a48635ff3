import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsim import (DfdOverflow, DimPolicy, DsfAccuracyWarning, DsfState, SolveOptions, coherent,
                  destroy, dfd_mesolve, dsf_mcsolve, dsf_mesolve, fock, mesolve, rand_dm)

DELTA, F, GAMMA = 0.4, 2.0, 1.0


def classical_alpha(t, alpha0=0.0):
    # d alpha/dt = -(i delta + gamma/2) alpha - i F
    z = 1j * DELTA + GAMMA / 2
    a_inf = -1j * F / z
    return a_inf + (alpha0 - a_inf) * np.exp(-z * t)


def linear_H(ops, params):
    a = ops[0]
    return DELTA * a.dag() @ a + F * (a + a.dag())


def linear_c(ops, params):
    return [math.sqrt(GAMMA) * ops[0]]


def linear_e(ops, params):
    a = ops[0]
    return [a, a.dag() @ a]


def test_linear_model_tracks_classical_field():
    N = 4
    t = np.linspace(0, 8, 161)
    opts = SolveOptions(abstol=1e-10, reltol=1e-10)
    r = dsf_mesolve(linear_H, fock(N, 0), t, linear_c, [destroy(N)], [0.0], linear_e,
                    dalpha_max=0.1, options=opts)
    alpha = classical_alpha(t)
    assert r.stats["shifts"] > 10
    assert np.max(np.abs(r.expect[0] - alpha)) < 1e-5
    assert np.max(np.abs(r.expect[1] - np.abs(alpha) ** 2)) < 1e-5
    # every shift is below threshold after being applied, and the log sums to the frame
    total = sum(da for _, _, da in r.shift_log)
    assert abs(r.alphas[0] - total) < 1e-12
    assert all(abs(da) > 0.1 for _, _, da in r.shift_log)


def test_frame_is_a_change_of_description():
    # same physics as a full-space run that is itself converged
    N, n_ref = 10, 45
    t = np.linspace(0, 3, 31)
    ops = [destroy(n_ref)]
    ref = mesolve(linear_H(ops, None), fock(n_ref, 0), t, linear_c(ops, None),
                  linear_e(ops, None))
    r = dsf_mesolve(linear_H, fock(N, 0), t, linear_c, [destroy(N)], [0.0], linear_e,
                    dalpha_max=0.05)
    assert np.max(np.abs(r.expect - ref.expect)) < 1e-5


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(max_magnitude=0.3), st.integers(0, 1000))
def test_displacement_unitary(beta, seed):
    N = 12
    state = DsfState([0.0], 0.1, [destroy(N)])
    D = state.displacement(0, beta)
    assert np.allclose(D @ D.conj().T, np.eye(N), atol=1e-12)
    rho = rand_dm(N, seed).full()
    assert abs(np.trace(D @ rho @ D.conj().T) - np.trace(rho)) < 1e-10
    psi = coherent(N, 0.2).full()[:, 0]
    assert abs(np.linalg.norm(D @ psi) - 1) < 1e-10


def test_shift_moves_local_coherence():
    N = 30
    state = DsfState([0.0], 0.1, [destroy(N)])
    psi = coherent(N, 0.4).full()[:, 0]
    moved = state.displacement(0, -0.4) @ psi
    assert abs(np.vdot(moved, destroy(N).full() @ moved)) < 1e-10


def test_top_level_warning():
    N = 4
    t = np.linspace(0, 4, 9)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        r = dsf_mesolve(lambda o, p: 3.0 * (o[0] @ o[0]).dag() @ (o[0] @ o[0]) + linear_H(o, p),
                        fock(N, 0), t, linear_c, [destroy(N)], [0.0], linear_e, dalpha_max=5.0)
    # with a huge threshold no shift happens, so no warning either
    assert r.stats["shifts"] == 0 and not any(issubclass(x.category, DsfAccuracyWarning)
                                              for x in w)
    with pytest.warns(DsfAccuracyWarning):
        r = dsf_mesolve(lambda o, p: 8.0 * (o[0] @ o[0]).dag() @ (o[0] @ o[0]) + linear_H(o, p),
                        fock(2, 0), t, linear_c, [destroy(2)], [0.0], linear_e, dalpha_max=0.01)
    assert r.stats["warnings"]


def test_dsf_mcsolve_linear_model():
    N = 6
    t = np.linspace(0, 5, 51)
    r = dsf_mcsolve(linear_H, fock(N, 0), t, linear_c, [destroy(N)], [0.0], linear_e,
                    ntraj=4, seed=2, options=SolveOptions(abstol=1e-10, reltol=1e-10))
    # coherent states are unaffected by jumps of a: every trajectory is classical
    assert np.max(np.abs(r.per_traj_expect[:, 0] - classical_alpha(t))) < 1e-5
    assert len(r.shift_logs) == 4 and all(r.shift_logs)


def test_dsf_mcsolve_thread_invariance():
    N = 5
    t = np.linspace(0, 3, 21)

    def H(o, p):
        return linear_H(o, p) + 0.3 * (o[0] @ o[0]).dag() @ (o[0] @ o[0])

    runs = [dsf_mcsolve(H, fock(N, 0), t, linear_c, [destroy(N)], [0.0], linear_e, ntraj=8,
                        seed=5, n_threads=n) for n in (1, 3)]
    assert runs[0].per_traj_expect.tobytes() == runs[1].per_traj_expect.tobytes()


# -- dynamical Fock dimension ---------------------------------------------------


def dfd_H(dims, params):
    a = destroy(dims[0])
    return DELTA * a.dag() @ a + F * (a + a.dag())


def dfd_c(dims, params):
    return [math.sqrt(GAMMA) * destroy(dims[0])]


def dfd_e(dims, params):
    a = destroy(dims[0])
    return [a, a.dag() @ a]


def test_dfd_grows_and_matches_full_space():
    t = np.linspace(0, 6, 61)
    r = dfd_mesolve(dfd_H, fock(4, 0), t, dfd_c, dfd_e,
                    options=SolveOptions(abstol=1e-10, reltol=1e-10))
    assert r.max_dims[0] > 4
    assert [d for _, d in r.dim_log][0] == [4]
    N = 40
    ref = mesolve(dfd_H([N], None), fock(N, 0), t, dfd_c([N], None), dfd_e([N], None),
                  options=SolveOptions(abstol=1e-10, reltol=1e-10))
    # tau_up bounds the population allowed near the cutoff
    assert np.max(np.abs(r.expect - ref.expect) / np.maximum(1, np.abs(ref.expect))) < 1e-3


def test_dfd_shrinks_with_bounded_loss():
    # a decaying coherent state needs fewer and fewer levels
    N = 40
    t = np.linspace(0, 12, 121)

    def H(dims, p):
        return 0 * destroy(dims[0])

    r = dfd_mesolve(H, coherent(N, 3.0), t, dfd_c, dfd_e)
    dims = [d[0] for _, d in r.dim_log]
    assert dims[-1] < N and all(b < a for a, b in zip(dims, dims[1:]))
    policy = DimPolicy()
    assert r.stats["truncated"] and max(r.stats["truncated"]) < policy.tau_down
    assert dims[-1] >= policy.dim_min
    n_exact = 9.0 * np.exp(-GAMMA * t)
    assert np.max(np.abs(r.expect[1].real - n_exact)) < 1e-4


def test_dfd_overflow():
    t = np.linspace(0, 6, 13)
    with pytest.raises(DfdOverflow):
        dfd_mesolve(dfd_H, fock(4, 0), t, dfd_c, dfd_e, dim_policy=DimPolicy(dim_max=8))
