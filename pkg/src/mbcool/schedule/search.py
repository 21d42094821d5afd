"""Deterministic schedule searches used as baselines and as oracles for RL."""

from __future__ import annotations

import itertools

import numpy as np

from .env import CoolingEnv, MeasurementSchedule


def exhaustive_search(env: CoolingEnv) -> MeasurementSchedule:
    """Best of all d^M schedules (ties broken by lexicographic order)."""
    best, best_f = None, -1.0
    for actions in itertools.product(range(1, env.n_actions + 1), repeat=env.rounds):
        f = env.final_fidelity(actions)
        if f > best_f:
            best, best_f = actions, f
    return env.schedule(best, "exhaustive")


def _completion_score(env: CoolingEnv, P: np.ndarray, remaining: int) -> np.ndarray:
    """Best final F_r reachable by repeating a single action for the remaining rounds."""
    if remaining == 0:
        return P[:, env.n_r].copy()
    scores = np.full(P.shape[0], -np.inf)
    for a in range(1, env.n_actions + 1):
        Q = P
        for _ in range(remaining):
            Q = env.batch_step(Q, a)
        scores = np.maximum(scores, Q[:, env.n_r])
    return scores


def beam_search(env: CoolingEnv, beam_width: int = 64) -> MeasurementSchedule:
    """Beam search over the d^M schedule tree maximizing the final F_r.

    Partial schedules are ranked by the best F_r obtainable when a constant
    interval fills the remaining rounds, then by their current F_r. At the
    last round the rank is the final F_r itself, so a beam of width >= d^M
    is exhaustive.
    """
    if beam_width < 1:
        raise ValueError("beam width must be >= 1")
    d = env.n_actions
    P = env.initial.p[None, :]
    seqs = [()]
    for m in range(env.rounds):
        C = np.concatenate([env.batch_step(P, a) for a in range(1, d + 1)])
        cand = [s + (a,) for a in range(1, d + 1) for s in seqs]
        score = _completion_score(env, C, env.rounds - m - 1)
        # stable order: score, then current F_r, then candidate index
        order = np.lexsort((np.arange(len(cand)), -C[:, env.n_r], -score))[:beam_width]
        P = C[order]
        seqs = [cand[i] for i in order]
    best = seqs[0]
    env.final_fidelity(best)  # re-run through the guarded map
    return env.schedule(best, f"beam{beam_width}")
