import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kflow.forward import InflowProfile, WindkesselParams, inflow_value
from kflow.forward.windkessel import (
    windkessel_coefficients,
    windkessel_update,
    windkessel_update_flux,
)


class TestInflowPulse:
    def test_aortic_peak_at_half_systole(self):
        prof = InflowProfile(kind="AorticPulse", T=0.36)
        assert inflow_value(prof, 0.18) == pytest.approx(1.0)

    def test_aortic_branch_continuity_at_T(self):
        prof = InflowProfile(kind="AorticPulse", T=0.36, kappa=70.0)
        left = inflow_value(prof, 0.36)
        right = inflow_value(prof, 0.36 + 1e-12)
        assert left == pytest.approx(0.0, abs=1e-9)
        assert right == pytest.approx(0.0, abs=1e-9)

    def test_aortic_tail_value(self):
        prof = InflowProfile(kind="AorticPulse", T=0.36, kappa=70.0)
        expected = (np.pi / 0.36) * 0.05 * np.exp(-3.5)
        assert inflow_value(prof, 0.41) == pytest.approx(expected, rel=1e-12)

    def test_phantom_pulse_branches(self):
        prof = InflowProfile(kind="PhantomPulse", T=0.64, beta=5.0)
        t_s = 0.48
        assert inflow_value(prof, 0.2) == pytest.approx(np.sin(np.pi * 0.2 / 0.64))
        expected = np.sin(0.75 * np.pi) * (1.0 - 0.6 + t_s) * np.exp(-(0.6 - t_s) * 5.0)
        assert inflow_value(prof, 0.6) == pytest.approx(expected, rel=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            inflow_value(InflowProfile(), -0.1)

    def test_invalid_systole_rejected(self):
        with pytest.raises(ValueError):
            InflowProfile(kind="AorticPulse", T=0.9, T_c=0.8)


class TestWindkesselUpdate:
    params = WindkesselParams(Rp=480.0, Rd=7200.0, C=4e-4)

    def test_exponential_decay_oracle(self):
        # with Q = 0 the ODE gives pi(t) = pi0 * exp(-t / (Rd*C))
        Rd, C = 7200.0, 4e-4
        tau = Rd * C / 100.0
        pi = 1000.0
        for _ in range(100):
            pi = windkessel_update_flux(pi, 0.0, self.params, tau)
        assert pi / 1000.0 == pytest.approx(np.exp(-1.0), rel=0.02)

    def test_steady_state_is_Q_Rd(self):
        Q = 12.0
        tau = 2e-3
        pi = 0.0
        for _ in range(200000):
            pi = windkessel_update_flux(pi, Q, self.params, tau)
        assert pi == pytest.approx(Q * 7200.0, rel=0.01)

    def test_pressure_and_flux_forms_agree(self):
        # P = gamma*Q + alpha*pi closes the loop between the two updates
        alpha, beta, gamma = windkessel_coefficients(self.params, 1e-3)
        pi, Q = 350.0, 5.0
        P = gamma * Q + alpha * pi
        assert windkessel_update(pi, P, self.params, 1e-3) == pytest.approx(
            windkessel_update_flux(pi, Q, self.params, 1e-3), rel=1e-12
        )

    def test_first_order_convergence(self):
        # halving tau roughly halves the decay error
        Rd, C = 7200.0, 4e-4
        t_final = Rd * C

        def decay_error(tau):
            n = int(round(t_final / tau))
            pi = 1.0
            for _ in range(n):
                pi = windkessel_update_flux(pi, 0.0, self.params, tau)
            return abs(pi - np.exp(-1.0))

        e1 = decay_error(Rd * C / 100.0)
        e2 = decay_error(Rd * C / 200.0)
        assert 1.6 < e1 / e2 < 2.4

    def test_pure_resistance_identity(self):
        res = WindkesselParams(Rp=200.0)
        assert windkessel_update(5.0, 1234.0, res, 1e-3) == 0.0
        alpha, beta, gamma = windkessel_coefficients(res, 1e-3)
        assert (alpha, beta, gamma) == (0.0, 0.0, 200.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            WindkesselParams(Rp=100.0, Rd=500.0)  # C missing
        with pytest.raises(ValueError):
            WindkesselParams(Rp=100.0, Rd=-1.0, C=1e-4)

    @settings(max_examples=25, deadline=None)
    @given(
        Rd=st.floats(100.0, 2e4),
        C=st.floats(1e-5, 1e-3),
        Q=st.floats(0.1, 100.0),
        Rp=st.floats(0.0, 1e3),
    )
    def test_steady_state_property(self, Rd, C, Q, Rp):
        params = WindkesselParams(Rp=Rp, Rd=Rd, C=C)
        tau = Rd * C / 50.0
        pi = Q * Rd  # analytic fixed point must be preserved exactly
        assert windkessel_update_flux(pi, Q, params, tau) == pytest.approx(pi, rel=1e-12)
