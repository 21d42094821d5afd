import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from mbcool.fock import PhysicalParams
from mbcool.jc import (
    block_hamiltonian,
    cooling_coeffs,
    cooling_weights,
    full_propagator,
    hamiltonian,
    propagator_block,
    rabi_frequency,
)
from mbcool.maps import reserved_interval

P = PhysicalParams.from_ratios()
W = P.omega_b


def test_rabi_examples():
    assert rabi_frequency(P, 0) == pytest.approx(0.5 * P.detuning, rel=1e-15)
    assert rabi_frequency(P, 6) == pytest.approx(math.sqrt(0.0097) * W, rel=1e-14)
    assert rabi_frequency(P, 6) / W == pytest.approx(0.098489, abs=1e-6)
    res = PhysicalParams.from_ratios(detuning_ratio=0.0)
    assert rabi_frequency(res, 1) == pytest.approx(res.g, rel=1e-15)


def test_rabi_increasing():
    om = rabi_frequency(P, np.arange(50))
    assert np.all(np.diff(om) > 0)
    assert np.all(om >= abs(P.detuning) / 2)


def test_identity_at_zero_time():
    c = cooling_coeffs(P, 7, 0.0)
    assert c.alpha == 1 and c.beta == 0


def test_ground_block_decoupled():
    assert cooling_coeffs(P, 0, 3e-9).beta == 0


def test_resonant_zero_frequency_limit():
    res = PhysicalParams.from_ratios(detuning_ratio=0.0)
    c = cooling_coeffs(res, 0, 1e-9)
    assert c.alpha == 1 and c.beta == 0


@given(st.integers(0, 400), st.floats(0, 5e-7), st.floats(-0.1, 0.1))
def test_coefficient_unitarity(n, tau, det):
    params = PhysicalParams.from_ratios(detuning_ratio=det)
    c = cooling_coeffs(params, n, tau)
    assert abs(c.retention + c.transfer - 1.0) <= 1e-12


def test_coefficient_unitarity_bulk():
    rng = np.random.default_rng(0)
    n = rng.integers(0, 500, 10_000)
    tau = rng.uniform(0, 50, 10_000) / W
    worst = 0.0
    for k, t in zip(n, tau):
        c = cooling_coeffs(P, int(k), float(t))
        worst = max(worst, abs(c.retention + c.transfer - 1))
    assert worst <= 1e-12


def test_reserved_retention_is_one():
    tau_r = reserved_interval(P, 5)
    assert cooling_coeffs(P, 6, tau_r).retention == pytest.approx(1.0, abs=1e-12)


def test_ground_retention_factor():
    tau_r = reserved_interval(P, 5)
    assert cooling_coeffs(P, 1, tau_r).retention == pytest.approx(0.12, abs=0.005)


@pytest.mark.parametrize("n", [1, 2, 10, 37])
@pytest.mark.parametrize("tau", [0.0, 1.3e-9, 4.7e-8])
def test_block_matches_expm(n, tau):
    U = propagator_block(P, n, tau)
    ref = expm(-1j * block_hamiltonian(P, n) * tau)
    assert np.max(np.abs(U - ref)) <= 1e-12
    assert np.max(np.abs(U @ U.conj().T - np.eye(2))) <= 1e-12


def test_full_propagator_matches_expm():
    params = P.with_cutoff(15)
    tau = 2.3 * reserved_interval(params, 4)
    ref = expm(-1j * hamiltonian(params) * tau)
    assert np.max(np.abs(full_propagator(params, tau) - ref)) <= 1e-12


@given(st.integers(1, 200), st.floats(0, 1e-6))
def test_weights_match_coefficients(n_max, tau):
    ret, tr = cooling_weights(P, n_max, tau)
    assert np.max(np.abs(ret + tr - 1)) <= 1e-12
    k = n_max // 2
    c = cooling_coeffs(P, k, tau)
    assert ret[k] == pytest.approx(c.retention, abs=1e-12)
    assert tr[k] == pytest.approx(c.transfer, abs=1e-12)


def test_hamiltonian_is_symmetric():
    H = hamiltonian(P.with_cutoff(8))
    assert np.array_equal(H, H.T)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        rabi_frequency(P, -1)
    with pytest.raises(ValueError):
        cooling_coeffs(P, 1, -1.0)
    with pytest.raises(ValueError):
        propagator_block(P, 0, 1.0)
