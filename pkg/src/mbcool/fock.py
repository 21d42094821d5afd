"""Fock-space state containers, thermal states and state metrics.

Units are SI throughout: angular frequencies in rad/s, temperature in K,
times in s. The composite qubit-resonator space is ordered qubit-major,
``index = q * (n_c + 1) + n`` with ``q = 0`` for |g> and ``q = 1`` for |e>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

NORM_TOL = 1e-9
TRUNCATION_TOL = 1e-8


@dataclass(frozen=True)
class PhysicalParams:
    """Model constants of the qubit-resonator system.

    ``detuning`` is omega_e - omega_b. ``gamma`` is the resonator damping
    rate used only by the open-system solver.
    """

    omega_b: float
    detuning: float
    g: float
    temperature: float
    gamma: float = 0.0
    n_c: int = 40

    def __post_init__(self):
        # g = 0 is the uncoupled limit, used to check bare resonator relaxation
        if not self.g >= 0:
            raise ValueError(f"coupling g must be non-negative, got {self.g}")
        if self.n_c < 1:
            raise ValueError(f"Fock cutoff n_c must be >= 1, got {self.n_c}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")

    @classmethod
    def from_ratios(
        cls,
        omega_b: float = 3.7e9,
        temperature: float = 0.1,
        g_ratio: float = 0.04,
        detuning_ratio: float = 0.02,
        gamma_ratio: float = 0.0,
        n_c: int = 40,
    ) -> "PhysicalParams":
        """Build parameters with g, detuning and gamma given in units of omega_b."""
        return cls(
            omega_b=omega_b,
            detuning=detuning_ratio * omega_b,
            g=g_ratio * omega_b,
            temperature=temperature,
            gamma=gamma_ratio * omega_b,
            n_c=n_c,
        )

    def with_cutoff(self, n_c: int) -> "PhysicalParams":
        return replace(self, n_c=int(n_c))

    @property
    def dim(self) -> int:
        """Dimension of the composite qubit-resonator space."""
        return 2 * (self.n_c + 1)


@dataclass(frozen=True)
class ThermalSpec:
    n_bar_th: float

    def __post_init__(self):
        if self.n_bar_th < 0:
            raise ValueError(f"thermal occupation must be non-negative, got {self.n_bar_th}")

    @property
    def ratio(self) -> float:
        """Geometric ratio n/(1+n) between neighbouring thermal populations."""
        return self.n_bar_th / (1.0 + self.n_bar_th)

    @property
    def spread(self) -> float:
        """Root-mean-square deviation sqrt(n + n^2) of the thermal distribution."""
        return math.sqrt(self.n_bar_th + self.n_bar_th**2)


@dataclass(frozen=True)
class ResonatorPopulations:
    """Diagonal of the resonator density matrix, possibly unnormalized.

    The total ``weight`` of an unnormalized vector is the probability that
    all conditional measurements leading to it succeeded.
    """

    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float, copy=True)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("populations must be a 1-d vector of length n_c + 1 >= 2")
        if np.any(p < -1e-15):
            raise ValueError(f"negative population {p.min():.3e}")
        if p.sum() > 1.0 + NORM_TOL:
            raise ValueError(f"total population {p.sum():.12f} exceeds one")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def fock(cls, n: int, n_c: int) -> "ResonatorPopulations":
        p = np.zeros(n_c + 1)
        p[n] = 1.0
        return cls(p)

    @property
    def n_c(self) -> int:
        return self.p.size - 1

    @property
    def weight(self) -> float:
        return float(self.p.sum())

    @property
    def is_normalized(self) -> bool:
        return abs(self.weight - 1.0) <= NORM_TOL

    def normalized(self) -> "ResonatorPopulations":
        w = self.weight
        if w <= 0:
            raise ValueError("cannot normalize a zero population vector")
        return ResonatorPopulations(self.p / w)

    def __len__(self) -> int:
        return self.p.size


def thermal_occupation(params: PhysicalParams) -> ThermalSpec:
    """Bose-Einstein occupation 1/(exp(hbar omega_b / k_B T) - 1)."""
    if params.temperature == 0:
        return ThermalSpec(0.0)
    if params.omega_b <= 0:
        raise ValueError("omega_b must be positive")
    x = HBAR * params.omega_b / (K_B * params.temperature)
    return ThermalSpec(1.0 / math.expm1(x))


def default_cutoff(spec: ThermalSpec) -> int:
    """max(40, ceil(n + 10 dn)), raised if needed so the thermal tail is below TRUNCATION_TOL."""
    n_c = max(40, math.ceil(spec.n_bar_th + 10.0 * spec.spread))
    q = spec.ratio
    if q > 0:
        n_c = max(n_c, math.ceil(math.log(TRUNCATION_TOL) / math.log(q)))
    return n_c


def protocol_cutoff(spec: ThermalSpec, rounds: int, tail_tol: float = 1e-10) -> int:
    """Cutoff safe for ``rounds`` unconditional maps started from a thermal state.

    Each unconditional map moves population up by at most one level, so only
    thermal mass initially above ``n_c - rounds`` can ever reach the cutoff.
    The returned cutoff keeps that mass below ``tail_tol``.
    """
    q = spec.ratio
    if q == 0:
        tail = 0
    else:
        tail = math.ceil(math.log(tail_tol) / math.log(q))
    return max(default_cutoff(spec), tail + rounds)


def thermal_state(spec: ThermalSpec, n_c: int) -> ResonatorPopulations:
    """Thermal populations truncated to n <= n_c and renormalized."""
    if spec.n_bar_th == 0:
        return ResonatorPopulations.fock(0, n_c)
    q = spec.ratio
    loss = q ** (n_c + 1)
    if loss > TRUNCATION_TOL:
        raise ValueError(
            f"thermal truncation loss {loss:.2e} at n_c={n_c}; "
            f"use n_c >= {default_cutoff(spec)}"
        )
    n = np.arange(n_c + 1)
    p = (1.0 - q) * q**n
    return ResonatorPopulations(p / p.sum())


def accumulated_population(spec: ThermalSpec, N: int) -> float:
    """Thermal probability of finding n <= N, i.e. 1 - q^(N + 1)."""
    if N < 0:
        raise ValueError("N must be non-negative")
    return 1.0 - spec.ratio ** (N + 1)


def average_occupation(pops: ResonatorPopulations) -> float:
    if not pops.is_normalized:
        raise ValueError(
            f"average occupation needs normalized populations (weight {pops.weight:.6g})"
        )
    return float(np.arange(pops.p.size) @ pops.p)


def fidelity(pops: ResonatorPopulations, n: int) -> float:
    """Overlap <n|rho_b|n> with a Fock state."""
    if not 0 <= n <= pops.n_c:
        raise IndexError(f"Fock index {n} outside 0..{pops.n_c}")
    return float(pops.p[n])


# --- composite density matrices -------------------------------------------------


def qubit_projector(state: str) -> np.ndarray:
    if state not in ("g", "e"):
        raise ValueError(f"qubit state must be 'g' or 'e', got {state!r}")
    k = 0 if state == "g" else 1
    proj = np.zeros((2, 2))
    proj[k, k] = 1.0
    return proj


def embed(pops: ResonatorPopulations, qubit: str = "e") -> np.ndarray:
    """Composite density matrix |q><q| (x) diag(p)."""
    return np.kron(qubit_projector(qubit), np.diag(pops.p)).astype(complex)


def embed_matrix(rho_b: np.ndarray, qubit: str) -> np.ndarray:
    return np.kron(qubit_projector(qubit), rho_b).astype(complex)


def qubit_block(rho: np.ndarray, qubit: str) -> np.ndarray:
    """Resonator operator <q| rho |q> (unnormalized)."""
    d = rho.shape[0] // 2
    s = slice(0, d) if qubit == "g" else slice(d, 2 * d)
    return rho[s, s]


def trace_out_qubit(rho: np.ndarray) -> np.ndarray:
    return qubit_block(rho, "g") + qubit_block(rho, "e")


def resonator_populations(rho: np.ndarray) -> np.ndarray:
    """Diagonal of the reduced resonator state."""
    return np.real(np.diag(trace_out_qubit(rho))).copy()


def check_density_matrix(rho: np.ndarray, herm_tol: float = 1e-12) -> None:
    """Raise if ``rho`` is not Hermitian, trace-bounded and (nearly) positive."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] % 2:
        raise ValueError(f"composite density matrix must be square of even size, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (deviation {herm:.2e})")
    tr = float(np.real(np.trace(rho)))
    if not -1e-12 <= tr <= 1.0 + 1e-9:
        raise ValueError(f"trace {tr} outside [0, 1]")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam.min() < -1e-9:
        raise ValueError(f"negative eigenvalue {lam.min():.2e}")
