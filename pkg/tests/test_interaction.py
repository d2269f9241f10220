import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltashock.errors import StepNotConverged
from deltashock.interaction import B1_of_tau, default_rho_table, rho_at, solve_rho

# rho, I1 = int(1 - 2 B1) and I2 = int B1 from scipy solve_ivp (rtol 1e-11)
# driven by quad-evaluated B1; independent of the tables under test
IVP = {
    1.0: (0.86622513, 0.06688743),
    2.0: (0.99481854, 0.50259073),
    5.0: (0.99999972, 2.00000014),
}


@pytest.fixture(scope="module")
def rt():
    return default_rho_table()


def test_identity_before_interaction(rt):
    tau = np.array([-10.0, -7.0, -3.0, -0.5, 0.0])
    np.testing.assert_array_equal(rt.rho_at(tau), tau)
    assert rho_at(rt, -7.0) == -7.0
    assert B1_of_tau(rt, -3.0) == 0.0
    assert B1_of_tau(rt, 0.0) == 0.0


@pytest.mark.parametrize("tau", sorted(IVP))
def test_against_independent_ivp(rt, tau):
    rho, i2 = IVP[tau]
    assert rt.rho_at(tau) == pytest.approx(rho, abs=1e-6)
    assert rt.I2_at(tau) == pytest.approx(i2, abs=1e-6)


def test_settles_at_rho0(rt):
    assert abs(1.0 - 2.0 * rt.B1_of_tau(50.0)) <= 1e-6
    assert abs(rt.rho_at(50.0) - rt.rho0) <= 1e-6
    assert rt.rho0 == pytest.approx(1.0, abs=1e-9)


def test_b1_at_tau_ten(rt):
    assert 0.49 < rt.B1_of_tau(10.0) <= 0.5


def test_rho_increasing_below_rho0(rt):
    r = rt.rho_values
    assert np.all(np.diff(r) >= 0)
    assert np.all(np.diff(r[rt.tau_grid < 8.0]) > 0)
    assert np.all(r <= rt.rho0 + 1e-12)


def test_running_integrals_identities(rt):
    # I1 is rho itself and I2 = (tau - rho) / 2, both exact for rho(0) = 0
    tau = np.linspace(0.0, 40.0, 301)
    np.testing.assert_allclose(rt.I1_at(tau), rt.rho_at(tau), atol=1e-12)
    np.testing.assert_allclose(rt.I2_at(tau), 0.5 * (tau - rt.rho_at(tau)), atol=1e-10)


def test_I2_slope_tends_to_half(rt):
    slope = (rt.I2_at(50.0) - rt.I2_at(40.0)) / 10.0
    assert slope == pytest.approx(0.5, abs=1e-9)


def test_extrapolation_beyond_table(rt):
    assert rt.rho_at(80.0) == rt.rho0
    assert rt.I1_at(80.0) == rt.I1_inf
    assert rt.I2_at(80.0) - rt.I2_at(60.0) == pytest.approx(10.0, abs=1e-12)


def test_tail_is_negligible(rt):
    assert np.isfinite(rt.I1_inf)
    assert abs(rt.tail) < 1e-8
    assert rt.I1_inf == pytest.approx(rt.rho0, abs=1e-9)


def test_decay_exponential_early_window(rt):
    # past tau ~ 11 the decay hits double precision, so probe [1, 8]
    tau = np.linspace(1.0, 8.0, 71)
    y = np.log(np.abs(1.0 - 2.0 * rt.B1_of_tau(tau)))
    assert np.all(np.diff(y) < 0)
    assert np.polyfit(tau, y, 1)[0] < 0


def test_derivative_matches_ode(rt):
    sw = rt.switch
    probes = np.array([0.0123, 0.4567, 1.2345, 2.71, 6.02])
    h = 1e-5
    fd = (rt.rho_at(probes + h) - rt.rho_at(probes - h)) / (2 * h)
    np.testing.assert_allclose(fd, 1.0 - 2.0 * sw.B1(rt.rho_at(probes)), atol=1e-6)


def test_step_bound():
    with pytest.raises(ValueError):
        solve_rho(step=0.02)


def test_unconverged_step_detected(monkeypatch):
    import deltashock.interaction as mod

    monkeypatch.setattr(mod, "STEP_TOL", 0.0)
    with pytest.raises(StepNotConverged):
        mod.solve_rho(tau_max=5.0, step=0.01)


@settings(max_examples=40, deadline=None)
@given(st.floats(-20, 100))
def test_switch_value_bounded(tau):
    b = default_rho_table().B1_of_tau(tau)
    assert 0.0 <= b <= 0.5
