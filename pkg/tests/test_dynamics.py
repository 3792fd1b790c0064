import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import fsolve

from dlim.dynamics import (
    TWO_PI,
    MachineParams,
    OscillatorState,
    drive_term,
    rhs,
    steady_power_ratio,
)
from dlim.integrator import InitialHistory, IntegratorConfig, integrate
from dlim.ising import IsingProblem, named_graph
from dlim.readout import estimate_frequency


def ferro2():
    return IsingProblem(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_defaults_match_published_values():
    p = MachineParams(n=1)
    assert p.omega0 / TWO_PI == pytest.approx(1.0)
    assert p.omega_e / TWO_PI == pytest.approx(2 * 1.0015)
    assert p.tau == 10
    assert p.gamma0 / TWO_PI == pytest.approx(0.05)
    assert p.K / TWO_PI == pytest.approx(0.06)
    assert p.kappa / TWO_PI == pytest.approx(0.003)
    assert p.Ke / TWO_PI == pytest.approx(0.01)
    assert p.p0 == 1


@pytest.mark.parametrize("field", ["gamma0", "K", "p0", "tau"])
def test_positive_parameters(field):
    with pytest.raises(ValueError):
        MachineParams(n=2, **{field: 0.0})


def test_below_threshold_warns():
    with pytest.warns(UserWarning, match="threshold"):
        MachineParams(n=1, K=0.1)


def test_offsets_length():
    with pytest.raises(ValueError):
        MachineParams(n=3, omega_offsets=[0.0, 0.1])


class TestDriveTerm:
    def test_no_drive(self):
        p = MachineParams(n=2, Ke=0.0, kappa=0.0)
        s = OscillatorState([1 + 1j, -0.3j], t=4.2)
        assert drive_term(p, s, ferro2(), 0) == 0

    def test_injection_on_real_amplitude(self):
        p = MachineParams(n=2, kappa=0.0)
        s = OscillatorState([math.sqrt(p.p0), 1.0], t=0.0)
        assert drive_term(p, s, ferro2(), 0) == pytest.approx(p.Ke * math.sqrt(p.p0))

    def test_phase_only_coupling(self):
        p = MachineParams(n=2, Ke=0.0, p0=2.0)
        c2 = math.sqrt(p.p0) * np.exp(1j * math.pi / 3)
        s = OscillatorState([1.0, c2])
        assert drive_term(p, s, ferro2(), 0) == pytest.approx(p.kappa * np.exp(1j * math.pi / 3))

    def test_dead_channel_dropped(self):
        p = MachineParams(n=2, Ke=0.0)
        s = OscillatorState([1.0, 0.0])
        assert drive_term(p, s, ferro2(), 0) == 0

    def test_matches_compiled_rhs(self):
        # rhs - (linear and delayed parts) must equal drive_term
        p = MachineParams(n=8, beta_r=0.3, beta_i=0.4)
        prob = named_graph("fig1d")
        rng = np.random.default_rng(1)
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        cd = rng.normal(size=8) + 1j * rng.normal(size=8)
        s = OscillatorState(c, t=3.7)
        out = rhs(p, s, cd, prob)
        u = (np.abs(cd) ** 2 - p.p0) / p.p0
        base = (1j * p.omega0 - p.gamma0) * c + p.K * (1 - p.beta_r * u) * np.exp(1j * p.beta_i * u) * cd
        xi = np.array([drive_term(p, s, prob, j) for j in range(8)])
        np.testing.assert_allclose(out, base + xi, rtol=1e-13, atol=1e-13)


class TestRhs:
    def test_operating_point(self):
        p = MachineParams(n=3, Ke=0.0, kappa=0.0)
        c = np.full(3, math.sqrt(p.p0), dtype=complex)
        out = rhs(p, OscillatorState(c), c, None)
        np.testing.assert_allclose(out, (1j * p.omega0 - p.gamma0 + p.K) * math.sqrt(p.p0))

    def test_shape_mismatch(self):
        p = MachineParams(n=2)
        with pytest.raises(ValueError):
            rhs(p, OscillatorState([1, 1]), [1, 1, 1], ferro2())

    def test_non_finite(self):
        p = MachineParams(n=2)
        with pytest.raises(FloatingPointError):
            rhs(p, OscillatorState([1, 1]), [np.nan, 1], ferro2())

    def test_problem_size_mismatch(self):
        with pytest.raises(ValueError):
            rhs(MachineParams(n=3), OscillatorState([1, 1, 1]), [1, 1, 1], ferro2())

    def test_linear_when_nonlinearities_off(self):
        p = MachineParams(n=2, beta_r=0.0, beta_i=0.0, Ke=0.0, kappa=0.0)
        rng = np.random.default_rng(5)
        a, b = (rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(2))
        f = lambda c: rhs(p, OscillatorState(c), c, ferro2())
        np.testing.assert_allclose(f(2.0 * a - 3.0 * b), 2.0 * f(a) - 3.0 * f(b), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * math.pi), st.integers(0, 2**31))
def test_global_phase_covariance_without_injection(alpha, seed):
    p = MachineParams(n=8, beta_r=0.3, beta_i=0.5, Ke=0.0)
    prob = named_graph("fig1b")
    rng = np.random.default_rng(seed)
    c = rng.normal(size=8) + 1j * rng.normal(size=8)
    cd = rng.normal(size=8) + 1j * rng.normal(size=8)
    rot = np.exp(1j * alpha)
    lhs = rhs(p, OscillatorState(rot * c, 1.3), rot * cd, prob)
    np.testing.assert_allclose(lhs, rot * rhs(p, OscillatorState(c, 1.3), cd, prob), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 7), st.floats(0.01, 100.0), st.integers(0, 2**31))
def test_coupling_ignores_amplitudes(i, scale, seed):
    p = MachineParams(n=8, Ke=0.0)
    prob = named_graph("fig1d")
    rng = np.random.default_rng(seed)
    c = rng.normal(size=8) + 1j * rng.normal(size=8)
    c2 = c.copy()
    c2[i] *= scale
    for j in range(8):
        if j != i:
            assert drive_term(p, OscillatorState(c2), prob, j) == pytest.approx(
                drive_term(p, OscillatorState(c), prob, j), abs=1e-12)


def test_steady_power_formula():
    p = MachineParams(n=1, beta_r=0.3)
    assert steady_power_ratio(p) == pytest.approx(1.5556, abs=1e-4)


@pytest.mark.parametrize("beta_r", [0.1, 0.2, 0.3, 0.5])
def test_free_running_power(beta_r):
    p = MachineParams(n=1, beta_r=beta_r, beta_i=0.0, Ke=0.0, kappa=0.0)
    traj = integrate(p, None, IntegratorConfig(t_end=1000, record_from=900), InitialHistory(0.5, rng_seed=3))
    ratio = np.abs(traj.c[-1, 0]) ** 2 / p.p0
    assert ratio == pytest.approx(steady_power_ratio(p), rel=0.01)


def test_nonlinear_frequency_shift():
    # steady state c = A exp(i(w0 + d)t): i d = -g0 + K(1 - br u) exp(i(bi u - d tau))
    p = MachineParams(n=1, beta_r=0.3, beta_i=0.5, Ke=0.0, kappa=0.0)

    def balance(x):
        u, d = x
        g = p.K * (1 - p.beta_r * u)
        ph = p.beta_i * u - d * p.tau
        return [g * math.cos(ph) - p.gamma0, g * math.sin(ph) - d]

    u, d = fsolve(balance, [0.5, 0.0], xtol=1e-14)
    traj = integrate(p, None, IntegratorConfig(t_end=1500, record_from=1400), InitialHistory(0.5, rng_seed=0))
    w = estimate_frequency(traj.t, traj.c[:, 0], frame_freq=traj.frame_freq)
    assert w - p.omega0 == pytest.approx(d, abs=1e-8)
    assert np.abs(traj.c[-1, 0]) ** 2 / p.p0 - 1 == pytest.approx(u, abs=1e-8)
