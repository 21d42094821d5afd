"""Exact Jaynes-Cummings propagation in the rotating frame.

H = detuning |e><e| + g (b^dag sigma_- + b sigma_+) conserves the excitation
number, so the propagator splits into 2x2 blocks on {|g,n>, |e,n-1>}:

    U_n = exp(-i detuning tau / 2) [[alpha_n, beta_n], [beta_n, conj(alpha_n)]]

with basis order (|g,n>, |e,n-1>). |g,0> is a 1x1 identity block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import PhysicalParams


@dataclass(frozen=True)
class CoolingCoefficients:
    alpha: complex
    beta: complex
    n: int
    tau: float

    @property
    def retention(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def transfer(self) -> float:
        return abs(self.beta) ** 2


def rabi_frequency(params: PhysicalParams, n):
    """Omega_n = sqrt(g^2 n + detuning^2 / 4); accepts scalars or arrays."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("excitation index must be non-negative")
    om = np.sqrt(params.g**2 * n + params.detuning**2 / 4.0)
    return float(om) if om.ndim == 0 else om


def _amplitudes(params: PhysicalParams, n, tau):
    n = np.asarray(n, dtype=float)
    om = np.sqrt(params.g**2 * n + params.detuning**2 / 4.0)
    s = np.sin(om * tau)
    c = np.cos(om * tau)
    # Omega_0 = 0 only on resonance, where sin(Omega tau)/Omega -> tau
    safe = np.where(om > 0, om, 1.0)
    sinc = np.where(om > 0, s / safe, tau)
    alpha = c + 0.5j * params.detuning * sinc
    beta = -1j * params.g * np.sqrt(n) * sinc
    return alpha, beta


def cooling_coeffs(params: PhysicalParams, n: int, tau: float) -> CoolingCoefficients:
    if n < 0 or tau < 0:
        raise ValueError("need n >= 0 and tau >= 0")
    alpha, beta = _amplitudes(params, n, tau)
    return CoolingCoefficients(complex(alpha), complex(beta), int(n), float(tau))


def cooling_weights(params: PhysicalParams, n_max: int, tau: float):
    """|alpha_n|^2 and |beta_n|^2 for n = 0..n_max as arrays.

    Computed as cos^2 + (detuning/2)^2 sinc^2 and g^2 n sinc^2 so that the
    pair sums to one up to rounding.
    """
    n = np.arange(n_max + 1, dtype=float)
    om = np.sqrt(params.g**2 * n + params.detuning**2 / 4.0)
    s = np.sin(om * tau)
    safe = np.where(om > 0, om, 1.0)
    sinc2 = np.where(om > 0, (s / safe) ** 2, tau**2)
    c2 = np.cos(om * tau) ** 2
    transfer = params.g**2 * n * sinc2
    retention = c2 + 0.25 * params.detuning**2 * sinc2
    return retention, transfer


def propagator_block(params: PhysicalParams, n: int, tau: float) -> np.ndarray:
    """2x2 propagator on (|g,n>, |e,n-1>) for n >= 1."""
    if n < 1:
        raise ValueError("blocks start at n = 1; |g,0> is decoupled")
    c = cooling_coeffs(params, n, tau)
    phase = np.exp(-0.5j * params.detuning * tau)
    return phase * np.array([[c.alpha, c.beta], [c.beta, np.conj(c.alpha)]])


def block_hamiltonian(params: PhysicalParams, n: int) -> np.ndarray:
    """Hamiltonian restricted to (|g,n>, |e,n-1>)."""
    x = params.g * np.sqrt(n)
    return np.array([[0.0, x], [x, params.detuning]])


def hamiltonian(params: PhysicalParams) -> np.ndarray:
    """Dense rotating-frame JC Hamiltonian on the truncated composite space."""
    d = params.n_c + 1
    H = np.zeros((2 * d, 2 * d))
    H[d:, d:] = params.detuning * np.eye(d)
    for n in range(1, d):
        x = params.g * np.sqrt(n)
        H[n, d + n - 1] = x
        H[d + n - 1, n] = x
    return H


def full_propagator(params: PhysicalParams, tau: float) -> np.ndarray:
    """Dense U(tau) on the truncated space, assembled block by block.

    |e,n_c> has no partner inside the cutoff and only picks up the phase
    exp(-i detuning tau), matching the truncated Hamiltonian.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    d = params.n_c + 1
    U = np.zeros((2 * d, 2 * d), dtype=complex)
    U[0, 0] = 1.0
    n = np.arange(1, d)
    alpha, beta = _amplitudes(params, n, tau)
    phase = np.exp(-0.5j * params.detuning * tau)
    g_idx = n
    e_idx = d + n - 1
    U[g_idx, g_idx] = phase * alpha
    U[g_idx, e_idx] = phase * beta
    U[e_idx, g_idx] = phase * beta
    U[e_idx, e_idx] = phase * np.conj(alpha)
    U[2 * d - 1, 2 * d - 1] = np.exp(-1j * params.detuning * tau)
    return U


def evolve_unitary(rho: np.ndarray, params: PhysicalParams, tau: float) -> np.ndarray:
    U = full_propagator(params, tau)
    return U @ rho @ U.conj().T
