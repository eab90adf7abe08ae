import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from nestode.fields import helmholtz_split
from nestode.odesim import (
    drift_generator,
    exp_drift,
    integrate_drift,
    integrate_nesterov_t,
    integrate_pullback,
    integrate_scaled_y,
    rescale_timescale,
    variation_of_constants_check,
)
from nestode.averaging import period

DEMO_Q = np.array([[100.0, 5.0], [-5.0, 100.0]])
Y0 = np.array([0.1, -0.1, 0.0, 0.0])


# ---------------------------------------------------------------- original time


def test_conservative_run_keeps_quadratic_rate_envelope():
    f = helmholtz_split(100.0 * np.eye(2))  # conservative: no rotation part
    traj = integrate_nesterov_t(f, x0=[1.0, -1.0], v0=[0.0, 0.0],
                                T0=0.1, eta=1.0, t_end=10.0, h=1e-3)
    assert not traj.blown_up
    x = traj.states[:, :2]
    gaps = 0.5 * np.einsum("mi,ij,mj->m", x, f.Qs, x)
    t = traj.times
    sel = t >= 1.0
    envelope = t[sel] ** 2 * gaps[sel]
    assert envelope.max() <= 10.0 * envelope[0]
    assert gaps[-1] < gaps[0]


def test_equilibrium_is_invariant():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_nesterov_t(f, x0=[0.0, 0.0], v0=[0.0, 0.0],
                                T0=0.1, eta=0.5, t_end=2.0, h=1e-3)
    assert np.max(np.abs(traj.states[:, :4])) <= 1e-10


def test_tau_column_is_the_exact_affine_clock():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_nesterov_t(f, x0=[0.1, 0.0], v0=[0.0, 0.0],
                                T0=0.3, eta=0.5, t_end=1.0, h=1e-3)
    assert np.array_equal(traj.states[:, -1], 0.3 + 0.5 * traj.times)


def test_nonconservative_run_grows_and_eventually_blows_up():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_nesterov_t(f, x0=[0.1, -0.1], v0=[0.0, 0.0],
                                T0=0.1, eta=1.0, t_end=80.0, h=2e-3)
    start = np.linalg.norm(traj.states[0, :4])
    final = np.linalg.norm(traj.states[-1, :4])
    assert traj.blown_up or final > 1e3 * start


# ---------------------------------------------------------------- scaled system


def test_scaled_y_demo_field_oscillation_grows():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_scaled_y(f, Y0, T0=0.1, s_end=400.0, h=0.01)
    assert traj.meta["epsilon"] == pytest.approx(0.1)
    norms = np.linalg.norm(traj.states, axis=1)
    dec = len(norms) // 10
    assert norms[-dec:].max() > 1.5 * norms[:dec].max()


def test_scaled_y_conservative_envelope_never_grows():
    # isotropic conservative field: the drift is norm-preserving, so the
    # damping makes |y| monotonically non-increasing
    f = helmholtz_split(100.0 * np.eye(2))
    traj = integrate_scaled_y(f, Y0, T0=0.1, s_end=50.0, h=1e-3)
    norms = np.linalg.norm(traj.states, axis=1)
    assert np.all(np.diff(norms) <= 1e-12)


def test_scaled_y_gamma_scales_the_drift_block():
    # with no rotation part and the damping pushed out to an enormous
    # clock offset, the system is the pure drift generated by gamma*Qhat_s
    f = helmholtz_split(100.0 * np.eye(2))
    gamma = 0.25
    traj = integrate_scaled_y(f, Y0, T0=1e12, gamma=gamma, s_end=5.0, h=1e-3)
    gen = drift_generator(gamma * np.eye(2))
    exact = exp_drift(gen, 5.0) @ Y0
    assert np.max(np.abs(traj.states[-1] - exact)) < 1e-10


def test_nesterov_t_matches_adaptive_reference_solver():
    f = helmholtz_split(DEMO_Q)
    x0 = np.array([0.1, -0.1])
    v0 = np.array([0.3, 0.2])

    def rhs(t, u):
        tau = 0.1 + 0.5 * t
        return np.concatenate([u[2:], -(3.0 / tau) * u[2:] - f(u[:2])])

    ref = scipy.integrate.solve_ivp(rhs, (0.0, 3.0), np.concatenate([x0, v0]),
                                    rtol=1e-12, atol=1e-14, dense_output=True)
    traj = integrate_nesterov_t(f, x0, v0, T0=0.1, eta=0.5, t_end=3.0, h=1e-3)
    gap = np.max(np.abs(traj.states[:, :4] - ref.sol(traj.times).T))
    assert gap < 1e-8


def test_scaled_y_zero_start_stays_zero():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_scaled_y(f, np.zeros(4), T0=0.1, s_end=5.0, h=1e-3)
    assert np.max(np.abs(traj.states)) == 0.0


def test_blowup_truncates_and_flags():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_scaled_y(f, Y0, T0=0.1, s_end=400.0, h=0.01, cap=0.3)
    assert traj.blown_up
    assert traj.times[-1] < 400.0
    assert np.all(np.isfinite(traj.states))


# ---------------------------------------------------------------- drift block


def test_drift_generator_demo_field():
    gen = drift_generator(helmholtz_split(DEMO_Q))
    assert np.allclose(gen.freqs, [1.0, 1.0])
    eigs = np.linalg.eigvals(gen.A)
    assert np.allclose(np.sort(eigs.imag), [-1, -1, 1, 1], atol=1e-12)
    assert np.allclose(eigs.real, 0.0, atol=1e-12)


def test_drift_generator_raw_matrix_frequencies():
    gen = drift_generator(np.diag([1.0, 4.0]))
    assert np.allclose(gen.freqs, [1.0, 2.0])
    eigs = np.sort(np.linalg.eigvals(gen.A).imag)
    assert np.allclose(eigs, [-2, -1, 1, 2], atol=1e-12)


def test_drift_generator_scalar_case():
    gen = drift_generator(np.array([[1.0]]))
    assert np.array_equal(gen.A, np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_exp_drift_at_zero_is_identity():
    gen = drift_generator(helmholtz_split(DEMO_Q))
    assert np.allclose(exp_drift(gen, 0.0), np.eye(4), atol=1e-14)


def test_exp_drift_isotropic_period():
    gen = drift_generator(helmholtz_split(DEMO_Q))
    assert np.allclose(exp_drift(gen, 2.0 * np.pi), np.eye(4), atol=1e-12)


@pytest.mark.parametrize("seed", [0, 4])
def test_exp_drift_group_inverse_and_semigroup(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((3, 3))
    gen = drift_generator(M @ M.T + 3.0 * np.eye(3))
    s1, s2 = rng.uniform(-5, 5, size=2)
    E = exp_drift(gen, s1)
    assert np.max(np.abs(E @ exp_drift(gen, -s1) - np.eye(6))) < 1e-10
    assert np.max(np.abs(exp_drift(gen, s1 + s2) - E @ exp_drift(gen, s2))) < 1e-10


@pytest.mark.parametrize("seed", [1, 8])
def test_exp_drift_matches_dense_expm(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 4))
    gen = drift_generator(M @ M.T + 4.0 * np.eye(4))
    for s in (0.3, 2.0, -7.1):
        dense = scipy.linalg.expm(gen.A * s)
        assert np.max(np.abs(exp_drift(gen, s) - dense)) < 1e-10


def test_integrate_drift_is_periodic_and_bounded():
    f = helmholtz_split(DEMO_Q)
    gen = drift_generator(f)
    T = period(gen).period
    traj = integrate_drift(gen, Y0, s_end=T, h=1e-3)  # grid lands on T exactly
    norms = np.linalg.norm(traj.states, axis=1)
    assert norms.max() <= np.linalg.norm(Y0) + 1e-9
    assert traj.times[-1] == pytest.approx(T, abs=1e-12)
    assert np.linalg.norm(traj.states[-1] - Y0) < 1e-9


def test_integrate_drift_rk4_order_against_closed_form():
    gen = drift_generator(np.diag([0.25, 1.0]))
    psi0 = np.array([1.0, 0.0, 0.0, 1.0])
    errors = []
    for h in (4e-2, 2e-2, 1e-2):
        traj = integrate_drift(gen, psi0, s_end=5.0, h=h)
        exact = exp_drift(gen, 5.0) @ psi0
        errors.append(np.linalg.norm(traj.states[-1] - exact))
    assert 12.0 < errors[0] / errors[1] < 20.0
    assert 12.0 < errors[1] / errors[2] < 20.0


# ---------------------------------------------------------------- pullback


def test_pullback_without_perturbation_is_constant():
    f = helmholtz_split(100.0 * np.eye(2))  # no rotation part
    traj = integrate_pullback(f, Y0, T0=np.inf, s_end=5.0, h=1e-3)
    assert np.max(np.abs(traj.states - Y0[None, :])) < 1e-14


def test_pullback_demo_field_grows_slowly():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_pullback(f, Y0, T0=0.1, s_end=10.0, h=1e-3)
    norms = np.linalg.norm(traj.states, axis=1)
    # slow system: per-step relative motion is O(eps * coefficient)
    assert np.max(np.abs(np.diff(norms))) < 0.05 * norms.max()


def test_variation_of_constants_identity_tight_at_default_step():
    f = helmholtz_split(DEMO_Q)
    chk = variation_of_constants_check(f, Y0, T0=0.1, s_end=10.0, h=1e-3)
    assert chk.max_gap <= 1e-10 * chk.y_norm_max


def test_variation_of_constants_gap_shrinks_at_fourth_order():
    f = helmholtz_split(DEMO_Q)
    gaps = [variation_of_constants_check(f, Y0, T0=0.1, s_end=10.0, h=h).max_gap
            for h in (8e-3, 4e-3, 2e-3)]
    orders = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert np.all(orders >= 3.5)


def test_rescale_timescale_maps_fast_time_to_slow_clock():
    f = helmholtz_split(DEMO_Q)
    traj = integrate_scaled_y(f, Y0, T0=0.1, s_end=2.0, h=1e-2)
    eps = traj.meta["epsilon"]
    slow = rescale_timescale(traj, eps, 0.1, "tau")
    assert slow.timescale == "tau"
    assert slow.times[0] == pytest.approx(0.1)
    assert slow.times[-1] == pytest.approx(0.1 + eps * 2.0)
    assert np.array_equal(slow.states, traj.states)
