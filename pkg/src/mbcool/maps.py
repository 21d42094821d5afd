"""Measurement superoperators on the resonator populations.

Step 1 prepares the qubit in |e>, lets the pair evolve for ``tau`` and
measures the qubit without recording the outcome:

    p_n -> p_n |alpha_{n+1}|^2 + p_{n-1} |beta_n|^2

Step 2 prepares the qubit in |g> and keeps only the |e> outcome, which
lowers every Fock component by one quantum:

    p_{n-1} <- |beta_n|^2 p_n
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import PhysicalParams, ResonatorPopulations, ThermalSpec
from .jc import cooling_weights, rabi_frequency

LEAKAGE_TOL = 1e-9
FAILURE_TOL = 1e-12


class CutoffLeakageError(ValueError):
    """Population would be pushed past the Fock cutoff."""


class MeasurementFailedError(RuntimeError):
    """The conditional outcome has (numerically) zero probability."""


@dataclass(frozen=True)
class ReservedStateTable:
    n_r1: int
    tau_r: float
    exact: dict  # order k -> real-valued reserved index
    rounded: dict  # order k -> nearest integer

    def __getitem__(self, k: int) -> int:
        if k == 1:
            return self.n_r1
        return self.rounded[k]


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result of one measurement round.

    ``state`` is left unnormalized: its weight is the input weight times
    ``success_prob``.
    """

    state: ResonatorPopulations
    success_prob: float
    conditional: bool

    @property
    def normalized_state(self) -> ResonatorPopulations:
        return self.state.normalized()


def reserved_interval(params: PhysicalParams, n_r1: int) -> float:
    """tau_r = pi / Omega_{n_r1 + 1}, the interval protecting |n_r1>."""
    if n_r1 < 0:
        raise ValueError("reserved index must be non-negative")
    om = rabi_frequency(params, n_r1 + 1)
    if om == 0:
        raise ValueError("no reserved interval without coupling or detuning")
    return math.pi / om


def reserved_index_exact(params: PhysicalParams, n_r1: int, k) -> float:
    """Real-valued k-th order reserved index for the interval tau_r(n_r1)."""
    if params.g == 0:
        raise ValueError("reserved states need a non-zero coupling")
    k2 = np.asarray(k, dtype=float) ** 2
    shift = params.detuning**2 / (4.0 * params.g**2)
    return k2 * (n_r1 + 1) + (k2 - 1.0) * shift - 1.0


def higher_reserved_states(params: PhysicalParams, n_r1: int, k_max: int) -> ReservedStateTable:
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    exact = {k: float(reserved_index_exact(params, n_r1, k)) for k in range(2, k_max + 1)}
    rounded = {k: int(math.floor(v + 0.5)) for k, v in exact.items()}
    return ReservedStateTable(n_r1, reserved_interval(params, n_r1), exact, rounded)


def min_first_reserved(params: PhysicalParams, spec: ThermalSpec) -> float:
    """Smallest real n_r1 whose second reserved state clears n_th + 4 dn.

    Inverts the k = 2 reserved-index formula; clamped at zero.
    """
    if params.g == 0:
        raise ValueError("reserved states need a non-zero coupling")
    target = spec.n_bar_th + 4.0 * spec.spread
    shift = params.detuning**2 / (4.0 * params.g**2)
    n = (target + 1.0 - 3.0 * shift) / 4.0 - 1.0
    return max(0.0, n)


def unconditional_map(
    pops: ResonatorPopulations, params: PhysicalParams, tau: float
) -> MeasurementOutcome:
    """One round of step 1 (qubit in |e>, outcome discarded)."""
    p = pops.p
    n_c = pops.n_c
    retention, transfer = cooling_weights(params, n_c + 1, tau)
    leak = p[n_c] * transfer[n_c + 1]
    if leak > LEAKAGE_TOL:
        raise CutoffLeakageError(
            f"unconditional map would push {leak:.2e} of population past n_c={n_c}; "
            "increase the cutoff"
        )
    out = p * retention[1:]
    out[1:] += p[:-1] * transfer[1 : n_c + 1]
    # |e,n_c> has no partner inside the cutoff: the truncated dynamics keeps it
    out[n_c] += leak
    return MeasurementOutcome(ResonatorPopulations(out), 1.0, conditional=False)


def conditional_map(
    pops: ResonatorPopulations, params: PhysicalParams, tau: float
) -> MeasurementOutcome:
    """One round of step 2 (qubit in |g>, keep the |e> outcome)."""
    p = pops.p
    _, transfer = cooling_weights(params, pops.n_c, tau)
    out = np.zeros_like(p)
    out[:-1] = transfer[1:] * p[1:]
    w_in = pops.weight
    prob = float(out.sum() / w_in) if w_in > 0 else 0.0
    if prob < FAILURE_TOL:
        raise MeasurementFailedError(
            f"conditional measurement almost surely fails (probability {prob:.2e})"
        )
    return MeasurementOutcome(ResonatorPopulations(out), prob, conditional=True)


def kraus_R(params: PhysicalParams, tau: float, n_c: int | None = None) -> np.ndarray:
    """Resonator operator <e|U(tau)|g>, strictly above the diagonal.

    The common phase exp(-i detuning tau / 2) is the one carried by the
    block propagator; populations never depend on it.
    """
    n_c = params.n_c if n_c is None else n_c
    n = np.arange(1, n_c + 1)
    om = rabi_frequency(params, n)
    beta = -1j * params.g * np.sqrt(n) * np.sin(om * tau) / om
    R = np.zeros((n_c + 1, n_c + 1), dtype=complex)
    R[n - 1, n] = np.exp(-0.5j * params.detuning * tau) * beta
    return R


def optimal_conditional_interval(params: PhysicalParams, n: int) -> float:
    """pi / (2 Omega_n): makes |beta_n|^2 maximal for the level being lowered."""
    if n < 1:
        raise ValueError("nothing to transfer from the ground state")
    om = rabi_frequency(params, n)
    if om == 0:
        raise ValueError("no transfer without coupling or detuning")
    return math.pi / (2.0 * om)


def transfer_ratios(history) -> np.ndarray:
    """eta[m - 1, n] = p_n^(m) / p_n^(m-1); NaN where the denominator vanishes."""
    h = np.array([getattr(x, "p", x) for x in history], dtype=float)
    prev, cur = h[:-1], h[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(prev > 0, cur / np.where(prev > 0, prev, 1.0), np.nan)
    return eta


def transfer_ratio(history, m: int, n: int) -> float:
    if m < 1:
        raise ValueError("m counts measurements and starts at 1")
    prev = getattr(history[m - 1], "p", history[m - 1])[n]
    cur = getattr(history[m], "p", history[m])[n]
    if prev <= 0:
        return math.nan
    return float(cur / prev)
