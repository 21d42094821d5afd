"""Master-equation evolution of the qubit-resonator pair between measurements.

    drho/dt = -i[H, rho] + gamma (n_th + 1) D[b] rho + gamma n_th D[b^dag] rho

with D[A] rho = A rho A^dag - {A^dag A, rho} / 2 acting on the resonator
only; the qubit is taken as decoherence free. Integration is classical
fixed-step RK4.

Both the Hamiltonian and the dissipators keep the excitation-number
difference of a matrix element fixed. States reached by the protocol live
in the zero-difference sector, where one RK4 step is a small dense matrix;
``evolve`` raises that matrix to the number of steps instead of looping.
The result is the same RK4 solution up to rounding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fock import (
    PhysicalParams,
    ResonatorPopulations,
    embed_matrix,
    qubit_block,
    trace_out_qubit,
)
from .jc import hamiltonian, rabi_frequency
from .maps import FAILURE_TOL, MeasurementFailedError

log = logging.getLogger(__name__)

GAMMA_0_RATIO = 1e-5  # reference damping rate gamma_0 / omega_b
TRACE_DRIFT_TOL = 1e-6
CLIP_TOL = 1e-10
SECTOR_TOL = 1e-14


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LindbladConfig:
    gamma: float
    n_bar_th: float
    dt: float
    method: str = "rk4"

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.n_bar_th < 0:
            raise ValueError("n_bar_th must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.method != "rk4":
            raise ValueError(f"unsupported integrator {self.method!r}")


@dataclass
class Diagnostics:
    """Counters filled in by ``evolve``; pass one in to collect them."""

    clipped: int = 0
    steps: int = 0
    min_eigenvalue: float = 0.0


def max_eigenfrequency(params: PhysicalParams) -> float:
    """Spectral radius of the truncated JC Hamiltonian."""
    om = rabi_frequency(params, np.arange(1, params.n_c + 1))
    half = 0.5 * params.detuning
    return float(max(np.max(np.abs(half + om)), np.max(np.abs(half - om)), abs(params.detuning)))


def check_step(params: PhysicalParams, dt: float) -> None:
    if dt * max_eigenfrequency(params) >= 0.1:
        raise ValueError(
            f"dt={dt:.3e} s too large: dt * max eigenfrequency = "
            f"{dt * max_eigenfrequency(params):.3f} (need < 0.1)"
        )


# --- operators -----------------------------------------------------------------


def _lowering(params: PhysicalParams) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, params.n_c + 1)), k=1)
    return np.kron(np.eye(2), a)


@dataclass(frozen=True)
class _Operators:
    K: np.ndarray  # -iH - (1/2) sum_k c_k A_k^dag A_k
    b: np.ndarray
    c_down: float
    c_up: float


@lru_cache(maxsize=32)
def _operators(params: PhysicalParams, gamma: float, n_bar_th: float) -> _Operators:
    H = hamiltonian(params)
    b = _lowering(params)
    c_down = gamma * (n_bar_th + 1.0)
    c_up = gamma * n_bar_th
    G = c_down * (b.T @ b) + c_up * (b @ b.T)
    return _Operators(-1j * H - 0.5 * G, b, c_down, c_up)


def lindblad_rhs(rho: np.ndarray, params: PhysicalParams, config: LindbladConfig) -> np.ndarray:
    ops = _operators(params, config.gamma, config.n_bar_th)
    out = ops.K @ rho + rho @ ops.K.conj().T
    if ops.c_down:
        b = ops.b
        out += ops.c_down * (b @ rho @ b.T) + ops.c_up * (b.T @ rho @ b)
    return out


def dissipator(rho: np.ndarray, params: PhysicalParams, config: LindbladConfig) -> np.ndarray:
    """Damping part of the generator alone."""
    H = hamiltonian(params)
    return lindblad_rhs(rho, params, config) + 1j * (H @ rho - rho @ H)


def _rk4_step(rho, h, params, config):
    k1 = lindblad_rhs(rho, params, config)
    k2 = lindblad_rhs(rho + 0.5 * h * k1, params, config)
    k3 = lindblad_rhs(rho + 0.5 * h * k2, params, config)
    k4 = lindblad_rhs(rho + h * k3, params, config)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# --- excitation-conserving sector ------------------------------------------------


def _excitations(n_c: int) -> np.ndarray:
    n = np.arange(n_c + 1)
    return np.concatenate([n, n + 1])


@lru_cache(maxsize=8)
def sector_mask(n_c: int) -> np.ndarray:
    ex = _excitations(n_c)
    mask = ex[:, None] == ex[None, :]
    mask.setflags(write=False)
    return mask


def in_sector(rho: np.ndarray) -> bool:
    n_c = rho.shape[0] // 2 - 1
    off = rho[~sector_mask(n_c)]
    return off.size == 0 or float(np.max(np.abs(off))) <= SECTOR_TOL


@lru_cache(maxsize=8)
def _real_basis(n_c: int):
    """Maps between sector entries of a Hermitian matrix and real coordinates.

    Diagonal entries map to themselves; each pair (i, j), (j, i) with i < j
    maps to (Re, Im) of the upper entry. Returns (S, S_inv) with c = S r.
    """
    mask = sector_mask(n_c)
    rows, cols = np.nonzero(mask)
    pos = {(i, j): k for k, (i, j) in enumerate(zip(rows, cols))}
    n = len(rows)
    S = np.zeros((n, n), dtype=complex)
    S_inv = np.zeros((n, n), dtype=complex)
    coord = 0
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            S[k, coord] = 1.0
            S_inv[coord, k] = 1.0
            coord += 1
        elif i < j:
            kt = pos[(j, i)]
            S[k, coord], S[k, coord + 1] = 1.0, 1.0j
            S[kt, coord], S[kt, coord + 1] = 1.0, -1.0j
            S_inv[coord, k], S_inv[coord, kt] = 0.5, 0.5
            S_inv[coord + 1, k], S_inv[coord + 1, kt] = -0.5j, 0.5j
            coord += 2
    return S, S_inv


@lru_cache(maxsize=32)
def _sector_generator(params: PhysicalParams, gamma: float, n_bar_th: float) -> np.ndarray:
    """Generator on the real coordinates of the zero-difference sector.

    Built from the row-major vectorization vec(A X B) = (A kron B^T) vec(X);
    the generator preserves Hermiticity, so it is real in these coordinates.
    """
    ops = _operators(params, gamma, n_bar_th)
    D = params.dim
    K = sp.csr_matrix(ops.K)
    b = sp.csr_matrix(ops.b)
    eye = sp.identity(D, format="csr")
    L = sp.kron(K, eye) + sp.kron(eye, K.conj())
    if ops.c_down:
        L = L + ops.c_down * sp.kron(b, b) + ops.c_up * sp.kron(b.T, b.T)
    idx = np.flatnonzero(sector_mask(params.n_c).ravel())
    L = L.tocsr()[idx][:, idx].toarray()
    S, S_inv = _real_basis(params.n_c)
    Lr = S_inv @ L @ S
    return np.ascontiguousarray(Lr.real)


@lru_cache(maxsize=64)
def _sector_propagator(params: PhysicalParams, gamma: float, n_bar_th: float, h: float, steps: int):
    """``steps`` RK4 steps of size h as one real matrix."""
    A = h * _sector_generator(params, gamma, n_bar_th)
    A2 = A @ A
    A3 = A2 @ A
    step = np.eye(A.shape[0]) + A + A2 / 2.0 + A3 / 6.0 + (A3 @ A) / 24.0
    return np.linalg.matrix_power(step, steps)


def _step_count(tau: float, dt: float) -> int:
    return max(1, math.ceil(tau / dt - 1e-9))


def evolve(
    rho: np.ndarray,
    params: PhysicalParams,
    config: LindbladConfig,
    tau: float,
    diagnostics: Diagnostics | None = None,
) -> np.ndarray:
    """Integrate the master equation over ``tau`` with fixed RK4 steps <= dt."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        return rho.copy()
    check_step(params, config.dt)
    steps = _step_count(tau, config.dt)
    h = tau / steps
    tr0 = np.trace(rho).real
    if in_sector(rho):
        mask = sector_mask(params.n_c)
        T = _sector_propagator(params, config.gamma, config.n_bar_th, h, steps)
        S, S_inv = _real_basis(params.n_c)
        herm = 0.5 * (rho + rho.conj().T)
        out = np.zeros_like(rho, dtype=complex)
        out[mask] = S @ (T @ (S_inv @ herm[mask]).real)
    else:
        out = rho.astype(complex)
        for _ in range(steps):
            out = _rk4_step(out, h, params, config)
    out = 0.5 * (out + out.conj().T)
    drift = abs(np.trace(out).real - tr0)
    if drift > TRACE_DRIFT_TOL:
        raise IntegrationError(
            f"trace drifted by {drift:.2e} over {steps} steps; reduce dt"
        )
    out = _clip_negative(out, diagnostics)
    if diagnostics is not None:
        diagnostics.steps += steps
    return out


def _clip_negative(rho: np.ndarray, diagnostics: Diagnostics | None) -> np.ndarray:
    """Zero eigenvalues below -CLIP_TOL, counting and logging each repair.

    Smaller negative eigenvalues are integrator rounding and are left alone.
    """
    lam, vec = np.linalg.eigh(rho)
    lo = float(lam.min())
    if diagnostics is not None:
        diagnostics.min_eigenvalue = min(diagnostics.min_eigenvalue, lo)
    if lo >= -CLIP_TOL:
        return rho
    log.warning("clipping negative eigenvalue %.2e after integration", lo)
    if diagnostics is not None:
        diagnostics.clipped += 1
    lam = np.where(lam < -CLIP_TOL, 0.0, lam)
    out = (vec * lam) @ vec.conj().T
    out = 0.5 * (out + out.conj().T)
    if in_sector(rho):
        out[~sector_mask(rho.shape[0] // 2 - 1)] = 0.0
    return out


# --- measurements ------------------------------------------------------------------


@dataclass(frozen=True)
class OpenMeasurementOutcome:
    """Composite state after a measurement round and qubit re-preparation.

    ``rho`` keeps the cumulative weight as its trace.
    """

    rho: np.ndarray = field(repr=False)
    populations: ResonatorPopulations
    success_prob: float
    conditional: bool


def measured_evolution(
    rho: np.ndarray,
    params: PhysicalParams,
    config: LindbladConfig,
    tau: float,
    kind: str,
    qubit_prep: str,
    diagnostics: Diagnostics | None = None,
) -> OpenMeasurementOutcome:
    """Evolve for ``tau``, measure the qubit, then re-prepare it in ``qubit_prep``.

    kind="unconditional" discards the outcome (dephase and trace out the
    qubit); kind="conditional" keeps the |e> outcome only.
    """
    if kind not in ("conditional", "unconditional"):
        raise ValueError(f"unknown measurement kind {kind!r}")
    w_in = float(np.trace(rho).real)
    out = evolve(rho, params, config, tau, diagnostics)
    if kind == "conditional":
        rho_b = qubit_block(out, "e")
        prob = float(np.trace(rho_b).real) / w_in if w_in > 0 else 0.0
        if prob < FAILURE_TOL:
            raise MeasurementFailedError(
                f"conditional measurement almost surely fails (probability {prob:.2e})"
            )
    else:
        rho_b = trace_out_qubit(out)
        prob = 1.0
    rho_b = 0.5 * (rho_b + rho_b.conj().T)
    pops = np.clip(np.real(np.diag(rho_b)), 0.0, None)
    return OpenMeasurementOutcome(
        embed_matrix(rho_b, qubit_prep),
        ResonatorPopulations(pops),
        prob,
        kind == "conditional",
    )
