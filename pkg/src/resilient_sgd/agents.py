"""Honest two-time-scale local updates and Byzantine attack models.

Within a round each agent starts from the broadcast point and runs ``T``
steps of::

    x_{t+1} = x_t - beta * y_t
    y_{t+1} = (1 - alpha) * y_t + alpha * g(x_t; sample_t)

The tracker ``y`` is never reset; it carries over from one round to the next.
``local_steps`` runs this for a stack of agents at once and is what the
simulator uses; ``honest_local_round`` is the one-agent wrapper around it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .objectives import ObjectiveKind, honest_population_gradient, sample_gradient
from .streams import SampleStream

DIVERGENCE_NORM = 1e12


class AttackKind(str, enum.Enum):
    SHIFTED_MEAN = "shifted_mean"
    SIGN_FLIP = "sign_flip"
    LARGE_NOISE = "large_noise"


@dataclass(frozen=True)
class ByzantineAttack:
    kind: AttackKind = AttackKind.SHIFTED_MEAN
    factor: float = 2.0  # ShiftedMean: data centered at factor * x*
    scale: float = 10.0  # LargeNoise: std of the message around x_bar

    def center(self, truth: np.ndarray) -> np.ndarray:
        """Data center the attacker's local dynamics run on."""
        if self.kind is AttackKind.SHIFTED_MEAN:
            return self.factor * np.asarray(truth, dtype=float)
        return np.asarray(truth, dtype=float)


@dataclass
class HonestAgentState:
    agent_id: int
    x: np.ndarray
    y: np.ndarray


@dataclass
class LocalTrace:
    """Per-step record of one agent's round, ``t = 0..T``."""

    x: np.ndarray  # (T+1, d)
    y: np.ndarray  # (T+1, d)
    e: np.ndarray  # (T+1, d): y_t - grad q(x_bar)


def _first_bad_row(arr: np.ndarray, rows) -> int | None:
    block = arr if rows is None else arr[rows]
    sq = np.einsum("ij,ij->i", block, block)
    # NaN fails the comparison, so non-finite rows are caught too
    bad = np.flatnonzero(~(sq <= DIVERGENCE_NORM**2))
    if bad.size == 0:
        return None
    offset = 0 if rows is None else np.arange(arr.shape[0])[rows][0]
    return int(bad[0] + offset)


def _run(kind, x_bar, y, alpha_k, beta_k, samples, record, check_rows=None):
    n, t_local = samples.shape[0], samples.shape[1]
    x = np.broadcast_to(x_bar, y.shape).copy()
    xs = ys = None
    if record:
        xs = np.empty((n, t_local + 1, x.shape[1]))
        ys = np.empty_like(xs)
        xs[:, 0], ys[:, 0] = x, y
    for t in range(t_local):
        g = sample_gradient(kind, x, samples[:, t])
        x = x - beta_k * y
        y = (1.0 - alpha_k) * y + alpha_k * g
        if check_rows is not None:
            for arr in (x, y):
                row = _first_bad_row(arr, check_rows)
                if row is not None:
                    return t, row
        if record:
            xs[:, t + 1], ys[:, t + 1] = x, y
    return x, y, xs, ys


def local_steps(kind: ObjectiveKind, x_bar: np.ndarray, y: np.ndarray, alpha_k: float,
                beta_k: float, samples: np.ndarray, round_index: int = 0,
                guard_rows: slice | None = None, agent_ids=None, record: bool = False):
    """Run the T-step local loop for a stack of agents.

    ``y`` has shape (n, d) and holds y_{k,0}; ``samples`` has shape (n, T, d)
    and supplies one sample per step in order. Returns
    ``(x_T, y_T, xs, ys)`` where ``xs``/``ys`` are the full (n, T+1, d)
    histories when ``record`` is set and ``None`` otherwise. ``guard_rows``
    selects the rows checked for divergence (all rows by default).
    """
    x, y_new, xs, ys = _run(kind, x_bar, y, alpha_k, beta_k, samples, record)
    rows = guard_rows if guard_rows is not None else slice(None)
    if _first_bad_row(x, rows) is None and _first_bad_row(y_new, rows) is None:
        return x, y_new, xs, ys
    # replay step by step to report where it happened
    step, row = _run(kind, x_bar, y, alpha_k, beta_k, samples, False, rows)
    agent = int(agent_ids[row]) if agent_ids is not None else row
    raise DivergenceError(round_index, step, agent)


def gradient_error(y, x_bar, kind: ObjectiveKind, x_star) -> np.ndarray:
    """Tracker deviation from the exact honest gradient at the broadcast point."""
    return np.asarray(y, dtype=float) - honest_population_gradient(kind, x_bar, x_star)


def honest_local_round(state: HonestAgentState, x_bar, alpha_k: float, beta_k: float,
                       t_local: int, kind: ObjectiveKind, stream: SampleStream,
                       x_star=None, audit: bool = False, round_index: int = 0):
    """One agent's round. Updates ``state`` in place.

    Draws exactly ``t_local`` samples from ``stream``. Returns the message
    x_{k,T} and, when ``audit`` is set, a ``LocalTrace`` (needs ``x_star``).
    """
    x_bar = np.asarray(x_bar, dtype=float)
    samples = stream.take(t_local)[None]
    x_t, y_t, xs, ys = local_steps(kind, x_bar, state.y[None], alpha_k, beta_k, samples,
                                   round_index, agent_ids=[state.agent_id], record=audit)
    state.x = x_t[0]
    state.y = y_t[0]
    trace = None
    if audit:
        if x_star is None:
            raise ValueError("audit traces need x_star")
        grad_ref = honest_population_gradient(kind, x_bar, x_star)
        trace = LocalTrace(x=xs[0], y=ys[0], e=ys[0] - grad_ref)
    return state.x.copy(), trace


def apply_attack(attack: ByzantineAttack, x_bar: np.ndarray, local_messages: np.ndarray,
                 unit_noise: np.ndarray | None = None) -> np.ndarray:
    """Turn the attackers' locally computed iterates into what they send.

    ``local_messages`` are the results of running the honest dynamics on the
    attackers' own data; ``unit_noise`` (same shape) is only used by
    ``LARGE_NOISE``.
    """
    if attack.kind is AttackKind.SHIFTED_MEAN:
        return local_messages
    if attack.kind is AttackKind.SIGN_FLIP:
        return x_bar - (local_messages - x_bar)
    return x_bar + attack.scale * unit_noise


def byzantine_message(attack: ByzantineAttack, state: HonestAgentState, x_bar,
                      alpha_k: float, beta_k: float, t_local: int, kind: ObjectiveKind,
                      stream: SampleStream, noise_stream: SampleStream | None = None,
                      round_index: int = 0) -> np.ndarray:
    """Message of one Byzantine agent.

    The attacker runs the honest recursion on its own data (``stream`` must be
    centered at ``attack.center(x*)``), keeping its tracker in ``state``.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    m, _ = honest_local_round(state, x_bar, alpha_k, beta_k, t_local, kind, stream,
                              round_index=round_index)
    noise = None
    if attack.kind is AttackKind.LARGE_NOISE:
        if noise_stream is None:
            raise ValueError("LargeNoise needs a noise stream")
        noise = noise_stream.take(1)[0]
    return apply_attack(attack, x_bar, m, noise)
