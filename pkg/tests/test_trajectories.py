import math

import numpy as np
import pytest

from qsim import (KindMismatch, SolveOptions, basis, destroy, fock, fock_dm,
                  mcsolve, mesolve, num, sesolve, sigmam, sigmax, sigmaz, smesolve, ssesolve)
from qsim.rng import pairwise_sum, stream
from qsim.trajectories import JumpTrajectory, effective_rhs

S = sigmam()
H_DRIVE = 0.8 * sigmax()
X = S + S.dag()


def test_stream_derivation():
    firsts = {stream(s, i).integers(2**63) for s in range(6) for i in range(6)}
    assert len(firsts) == 36
    a = stream(7, 3).random(5)
    assert np.array_equal(a, stream(7, 3).random(5))
    child = np.random.SeedSequence(7).spawn(4)[3]
    assert np.array_equal(np.random.Generator(np.random.PCG64(child)).random(5), a)


def test_pairwise_sum_order_is_fixed():
    xs = [np.array([1e16]), np.array([1.0]), np.array([-1e16]), np.array([1.0])]
    # ((1e16 + 1) + (-1e16 + 1)) evaluates the same every time
    assert pairwise_sum(xs)[0] == (xs[0] + xs[1] + (xs[2] + xs[3]))[0]


def test_mcsolve_without_collapse_is_sesolve():
    t = np.linspace(0, 3, 7)
    r = mcsolve(H_DRIVE, basis(2, 0), t, [], [sigmaz()], ntraj=3)
    ref = sesolve(H_DRIVE, basis(2, 0), t, [sigmaz()])
    assert np.array_equal(r.expect, ref.expect)


def test_norm_decreases_between_jumps():
    a = destroy(5)
    H = num(5) + 0.3 * (a + a.dag())
    c_ops = [0.5 * a]
    rhs = effective_rhs(H, c_ops)
    traj = JumpTrajectory(rhs, [c.data for c in c_ops], [], SolveOptions())
    tlist = np.linspace(0, 20, 400)
    seen = []
    out = traj.run(fock(5, 3).full()[:, 0], tlist, stream(0, 0),
                   hook=lambda k, t, psi: seen.append((t, np.vdot(psi, psi).real)))
    jump_times = [tj for tj, _ in out["jumps"]]
    assert jump_times
    segments = np.searchsorted(jump_times, [t for t, _ in seen])
    norms = np.array([n for _, n in seen])
    for s in np.unique(segments):
        seg = norms[segments == s]
        assert np.all(np.diff(seg) <= 1e-12)


def test_channel_frequencies():
    # two channels on the same transition with rates 1 and 3
    c_ops = [S, math.sqrt(3) * 1j * S]
    r = mcsolve(0 * sigmaz(), basis(2, 0), [0, 40], c_ops, [], ntraj=2000, seed=11)
    chans = np.array([ch for rec in r.jump_records for _, ch in rec])
    assert len(chans) == 2000
    p, n = 0.25, len(chans)
    assert abs(np.mean(chans == 0) - p) < 4 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("solver", ["mcsolve", "ssesolve", "smesolve"])
def test_thread_count_does_not_change_results(solver):
    t = np.linspace(0, 2, 11)
    kw = dict(ntraj=40, seed=9)
    if solver == "mcsolve":
        runs = [mcsolve(H_DRIVE, basis(2, 0), t, [S], [X], n_threads=n, **kw) for n in (1, 4)]
    elif solver == "ssesolve":
        runs = [ssesolve(H_DRIVE, basis(2, 0), t, [S], [X], n_threads=n, dt_max=0.01,
                         store_measurement=True, **kw) for n in (1, 4)]
    else:
        runs = [smesolve(H_DRIVE, basis(2, 0), t, [], [S], [X], n_threads=n, dt_max=0.01, **kw)
                for n in (1, 4)]
    assert runs[0].expect.tobytes() == runs[1].expect.tobytes()
    assert runs[0].per_traj_expect.tobytes() == runs[1].per_traj_expect.tobytes()


def test_seed_changes_results():
    t = np.linspace(0, 2, 5)
    a = ssesolve(H_DRIVE, basis(2, 0), t, [S], [X], ntraj=8, seed=1, dt_max=0.01)
    b = ssesolve(H_DRIVE, basis(2, 0), t, [S], [X], ntraj=8, seed=2, dt_max=0.01)
    assert not np.array_equal(a.expect, b.expect)


def test_measurement_record_consistency():
    t = np.linspace(0, 1, 11)
    r = ssesolve(H_DRIVE, basis(2, 0), t, [S], [X], ntraj=2, seed=4, dt_max=0.01,
                 store_measurement=True)
    rec = r.measurement[0]
    assert rec.increments.shape == rec.current.shape == (1, 100)
    binned = rec.binned(t)
    assert np.isnan(binned[0, 0]) and np.all(np.isfinite(binned[0, 1:]))
    assert np.allclose(binned[0, 1], rec.current[0, :10].mean())


def test_stochastic_means_converge():
    # error ~ c1 / sqrt(ntraj) + c2 dt: quadrupling ntraj and halving dt roughly halves it
    t = np.linspace(0, 4, 41)
    ref = mesolve(H_DRIVE, basis(2, 0), t, [S], [X]).expect[0].real
    rms = {}
    for ntraj, dt in ((200, 0.02), (800, 0.01)):
        for name in ("sse", "sme"):
            vals = []
            for seed in (3, 4, 5):
                if name == "sse":
                    r = ssesolve(H_DRIVE, basis(2, 0), t, [S], [X], ntraj=ntraj, seed=seed,
                                 dt_max=dt)
                else:
                    r = smesolve(H_DRIVE, basis(2, 0), t, [], [S], [X], ntraj=ntraj, seed=seed,
                                 dt_max=dt)
                err = np.abs(r.expect[0].real - ref)
                se = r.std_expect[0][1:] / math.sqrt(ntraj)
                assert np.max(err[1:] / se) < 5
                vals.append(np.sqrt(np.mean(err**2)))
            rms[name, ntraj] = np.mean(vals)
    for name in ("sse", "sme"):
        assert rms[name, 800] < 0.75 * rms[name, 200], rms


def test_smesolve_keeps_valid_density():
    t = np.linspace(0, 2, 5)
    r = smesolve(H_DRIVE, basis(2, 0), t, [0.2 * sigmaz()], [S], [sigmaz(), num(2), S.dag() @ S],
                 ntraj=5, seed=0, dt_max=0.01)
    tr = r.per_traj_expect[:, 1] + r.per_traj_expect[:, 2]  # n + (1 - n) = trace
    assert np.allclose(tr, 1, atol=1e-12)


def test_kind_errors():
    with pytest.raises(KindMismatch):
        mcsolve(H_DRIVE, fock_dm(2, 0), [0, 1], [S])
    with pytest.raises(KindMismatch):
        ssesolve(H_DRIVE, fock_dm(2, 0), [0, 1], [S])
