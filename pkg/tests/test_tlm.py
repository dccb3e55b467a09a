"""Two-level reduction: detunings, resonance roots, and closed-form bounds."""

import math

import numpy as np
import pytest

from qbattery.errors import ConfigError
from qbattery.integrals import (fermionic_overlap, overlap_I00, overlap_I01,
                                overlap_In, overlap_In0)
from qbattery.tlm import (delta_poly, ergotropy_tlm, power_tlm,
                          qsl_fermionic, qsl_tlm, resonance_solve,
                          tlm_params, wb_tlm)

# frozen values computed from the closed-form overlaps at build time
DELTA_CASES = [
    ((1, 2, 0.1, 1.0), -0.019947114020071766),
    ((3, 2, 0.1, 3.0), +0.013360224934845455),
]

ROOT_CASES = {
    (1, 2): 1.0194634877,
    (3, 2): 2.9867473295,
    (5, 2): 4.9743614800,
    (7, 2): 6.9677755181,
    (9, 2): 8.9636697108,
    (3, 1): 2.9745665451,
    (5, 1): 4.9657672099,
    (9, 1): 8.9583043724,
    (9, 3): 8.9690296060,
}


def test_detuning_frozen_values():
    for (n, nb, g, wc), ref in DELTA_CASES:
        assert tlm_params(n, nb, g, wc).delta == pytest.approx(ref,
                                                               abs=1e-12)


def test_detuning_matches_overlap_combination():
    for n, nb, g, wc in [(1, 2, 0.1, 1.0), (3, 1, 0.07, 3.1),
                         (5, 3, 0.12, 4.9)]:
        params = tlm_params(n, nb, g, wc)
        want = (wc - n * 1.0
                + g * (nb * overlap_I01(1.0, wc)
                       - (nb - 1) * overlap_I00(1.0, wc)
                       - overlap_In0(n, 1.0, wc)))
        assert params.delta == pytest.approx(want, abs=1e-13)
        assert params.delta == pytest.approx(
            params.diag_initial - params.diag_charged, abs=1e-13)


def test_coupling_is_sqrtn_enhanced_overlap():
    for n, nb, g, wc in [(1, 2, 0.1, 1.0), (3, 2, 0.1, 2.9867),
                         (5, 1, 0.05, 5.0)]:
        params = tlm_params(n, nb, g, wc)
        want = g * math.sqrt(nb) * overlap_In(n, 1.0, wc)
        assert params.off_diag == pytest.approx(want, abs=1e-15)
        assert params.coupling == pytest.approx(abs(want), abs=1e-15)


def test_resonance_roots_frozen():
    for (n, nb), root in ROOT_CASES.items():
        val = resonance_solve(n, nb, 0.1)
        assert val == pytest.approx(root, abs=2e-9)
        # the detuning actually vanishes there
        assert abs(tlm_params(n, nb, 0.1, val).delta) < 1e-9


def test_resonance_root_near_bare_frequency():
    for n in (1, 3, 5):
        root = resonance_solve(n, 2, 0.01)
        assert abs(root - n) < 0.05


def test_resonance_solve_rejects_even_or_bad_n():
    with pytest.raises(ConfigError):
        resonance_solve(2, 1, 0.1)
    with pytest.raises(ConfigError):
        resonance_solve(0, 1, 0.1)
    with pytest.raises(ConfigError):
        resonance_solve(-3, 1, 0.1)


def test_rabi_frequency_and_transfer_amplitude():
    params = tlm_params(3, 2, 0.1, 2.9)
    assert params.rabi_frequency == pytest.approx(
        math.hypot(2.0 * params.coupling, params.delta), rel=1e-14)
    # exactly on resonance the amplitude saturates at one
    root = resonance_solve(3, 2, 0.1)
    on_res = tlm_params(3, 2, 0.1, root)
    assert on_res.transfer_amplitude == pytest.approx(1.0, abs=1e-12)
    assert params.transfer_amplitude < 1.0


def test_wb_tlm_sine_profile():
    root = resonance_solve(1, 1, 0.1)
    params = tlm_params(1, 1, 0.1, root)
    tau = qsl_tlm(params)
    assert tau == pytest.approx(78.7480497286121, abs=1e-8)
    assert wb_tlm(params, 0.0) == 0.0
    # at the quarter period the full quantum n omega_B has moved
    assert wb_tlm(params, tau) == pytest.approx(1.0, abs=1e-10)
    # vectorized call matches scalars
    ts = np.linspace(0.0, tau, 7)
    np.testing.assert_allclose(wb_tlm(params, ts),
                               [wb_tlm(params, float(t)) for t in ts],
                               atol=1e-14)


def test_ergotropy_tlm_branches():
    root = resonance_solve(3, 2, 0.1)
    params = tlm_params(3, 2, 0.1, root)
    tau = qsl_tlm(params)
    ts = np.linspace(0.0, tau, 50)
    wb = wb_tlm(params, ts)
    erg = ergotropy_tlm(params, ts)
    assert np.all(erg <= wb + 1e-12)
    # full transfer leaves a pure state: everything is extractable
    assert ergotropy_tlm(params, tau) == pytest.approx(
        wb_tlm(params, tau), abs=1e-10)
    # early times: population too low to beat the trapped quantum
    assert ergotropy_tlm(params, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_power_tlm_is_initial_energy_over_tau():
    root = resonance_solve(5, 2, 0.1)
    params = tlm_params(5, 2, 0.1, root)
    assert power_tlm(params) == pytest.approx(root / qsl_tlm(params),
                                              rel=1e-14)


def test_qsl_fermionic_value_and_structure():
    val = qsl_fermionic(2, 3, 0.1, 2.9867)
    assert val == pytest.approx(636.364, abs=0.001)
    want = math.pi / (2.0 * 0.1 * abs(fermionic_overlap(2, 3, 1.0, 2.9867)))
    assert val == pytest.approx(want, rel=1e-14)
    # bosonic transfer at the same point is much faster
    assert qsl_tlm(tlm_params(3, 2, 0.1, 2.9867)) < val


def test_delta_poly_matches_general_form_spotwise():
    for n in (1, 3, 5, 7, 9):
        for wc in (0.7, float(n), n + 0.41):
            assert delta_poly(n, 2, 0.1, wc) == pytest.approx(
                tlm_params(n, 2, 0.1, wc).delta, abs=1e-12)


def test_tlm_params_validation():
    with pytest.raises(ConfigError):
        tlm_params(0, 1, 0.1, 1.0)
    with pytest.raises(ConfigError):
        tlm_params(1, 0, 0.1, 1.0)
