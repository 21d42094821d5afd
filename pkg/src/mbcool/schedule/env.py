"""Step-1 environment: unconditional measurements with intervals a * tau_r."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..fock import (
    PhysicalParams,
    ResonatorPopulations,
    protocol_cutoff,
    thermal_occupation,
    thermal_state,
)
from ..jc import cooling_weights
from ..maps import higher_reserved_states, reserved_interval, unconditional_map

FIDELITY_CAP = 1.0 - 1e-9


def reward(pops: ResonatorPopulations, n_r: int) -> float:
    """10 tan(F_r pi / 2) of the reserved-state fidelity, capped below F_r = 1."""
    f = min(max(float(pops.p[n_r]), 0.0), FIDELITY_CAP)
    return 10.0 * math.tan(0.5 * math.pi * f)


@dataclass(frozen=True)
class MeasurementSchedule:
    """Step-1 intervals as integer multiples of ``tau_r``."""

    actions: tuple
    tau_r: float
    n_r: int
    source: str = "manual"

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        if any(a < 1 for a in self.actions):
            raise ValueError("interval multiples must be >= 1")

    @property
    def intervals(self) -> np.ndarray:
        return np.array(self.actions, dtype=float) * self.tau_r

    def __len__(self) -> int:
        return len(self.actions)

    @classmethod
    def equal_spacing(cls, rounds: int, tau_r: float, n_r: int) -> "MeasurementSchedule":
        return cls((1,) * rounds, tau_r, n_r, source="equal")

    def to_dict(self) -> dict:
        return {
            "actions": list(self.actions),
            "tau_r": self.tau_r,
            "n_r": self.n_r,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementSchedule":
        return cls(tuple(d["actions"]), float(d["tau_r"]), int(d["n_r"]), d.get("source", "file"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "MeasurementSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CoolingEnv:
    """Closed-system step-1 simulator seen by the schedule optimizers.

    The observation is the population vector truncated at ``obs_cutoff``
    plus the fraction of rounds already spent.
    """

    params: PhysicalParams
    n_r: int
    rounds: int = 30
    n_actions: int = 5
    initial: ResonatorPopulations | None = None
    obs_cutoff: int | None = None
    tau_r: float = field(init=False)

    def __post_init__(self):
        if self.n_actions < 1:
            raise ValueError("need at least one action")
        if self.initial is None:
            self.initial = thermal_state(thermal_occupation(self.params), self.params.n_c)
        if self.initial.n_c != self.params.n_c:
            raise ValueError("initial state cutoff does not match params.n_c")
        if not 0 <= self.n_r <= self.params.n_c:
            raise ValueError("reserved state outside the Fock cutoff")
        self.tau_r = reserved_interval(self.params, self.n_r)
        if self.obs_cutoff is None:
            second = higher_reserved_states(self.params, self.n_r, 2)[2]
            self.obs_cutoff = second + 5
        self.obs_cutoff = min(self.obs_cutoff, self.params.n_c)
        self._batch_weights = self._weights()

    @classmethod
    def for_protocol(cls, params: PhysicalParams, n_r: int, rounds: int = 30, n_actions: int = 5):
        """Environment with a cutoff large enough for ``rounds`` thermal maps."""
        n_c = protocol_cutoff(thermal_occupation(params), rounds)
        return cls(params.with_cutoff(max(n_c, params.n_c)), n_r, rounds, n_actions)

    @property
    def obs_dim(self) -> int:
        return self.obs_cutoff + 2

    def observe(self, pops: ResonatorPopulations, step: int) -> np.ndarray:
        obs = np.empty(self.obs_dim)
        obs[:-1] = pops.p[: self.obs_cutoff + 1]
        obs[-1] = step / self.rounds
        return obs

    def step(self, pops: ResonatorPopulations, action: int):
        """Apply one measurement with interval ``action * tau_r``; returns (state, reward)."""
        if not 1 <= action <= self.n_actions:
            raise ValueError(f"action {action} outside 1..{self.n_actions}")
        nxt = unconditional_map(pops, self.params, action * self.tau_r).state
        return nxt, reward(nxt, self.n_r)

    def run(self, actions) -> list:
        """Population snapshots for a fixed action sequence, initial state included."""
        states = [self.initial]
        for a in actions:
            states.append(self.step(states[-1], a)[0])
        return states

    def final_fidelity(self, actions) -> float:
        return float(self.run(actions)[-1].p[self.n_r])

    def schedule(self, actions, source: str) -> MeasurementSchedule:
        return MeasurementSchedule(tuple(actions), self.tau_r, self.n_r, source)

    # batched maps for search; same arithmetic as unconditional_map
    def _weights(self):
        n_c = self.params.n_c
        out = []
        for a in range(1, self.n_actions + 1):
            ret, tr = cooling_weights(self.params, n_c + 1, a * self.tau_r)
            out.append((ret[1:], tr[1 : n_c + 1], tr[n_c + 1]))
        return out

    def batch_step(self, P: np.ndarray, action: int) -> np.ndarray:
        """Apply one action to every row of a (batch, n_c + 1) population array."""
        ret, tr, top = self._batch_weights[action - 1]
        out = P * ret
        out[:, 1:] += P[:, :-1] * tr
        out[:, -1] += P[:, -1] * top
        return out
