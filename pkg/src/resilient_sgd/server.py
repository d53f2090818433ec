"""Comparative-elimination filter and survivor averaging.

The server sorts received iterates by Euclidean distance to the current
global point and drops the ``f`` farthest. Ties go to the lower agent index;
non-finite messages rank as infinitely far.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError


@dataclass(frozen=True)
class FilterOutcome:
    survivors: np.ndarray  # agent ids, ascending distance (rank order)
    eliminated: np.ndarray  # agent ids, ascending distance
    distances: np.ndarray  # indexed like the canonical (sorted-id) message order
    ids: np.ndarray  # canonical ascending agent ids matching ``distances``
    byz_survivors: int | None = None  # |B_k|, only with ground-truth labels
    honest_eliminated: int | None = None  # |H \ H_k|

    @property
    def survivor_set(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.survivors)


def _as_arrays(messages) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(messages, Mapping):
        items = list(messages.items())
    else:
        items = list(messages)
    if not items:
        raise ConfigurationError("no messages received")
    ids = np.array([int(i) for i, _ in items])
    points = np.array([np.asarray(p, dtype=float) for _, p in items])
    order = np.argsort(ids, kind="stable")
    if np.unique(ids).size != ids.size:
        raise ConfigurationError("duplicate agent ids")
    return ids[order], points[order]


def filter_arrays(points: np.ndarray, x_bar: np.ndarray, f: int,
                  ids: np.ndarray | None = None, byzantine: np.ndarray | None = None
                  ) -> FilterOutcome:
    """Fast path: ``points`` (n, d) with ascending ``ids`` (default 0..n-1).

    ``byzantine`` is an optional boolean mask of ground-truth labels, used only
    for the diagnostic counts.
    """
    n = points.shape[0]
    if not 0 <= f < n:
        raise ConfigurationError(f"need 0 <= f < number of messages, got f={f}, n={n}")
    if points.shape[1] != x_bar.shape[-1]:
        raise DimensionMismatchError(points.shape[1], x_bar.shape[-1], "messages and x_bar")
    if ids is None:
        ids = np.arange(n)
    diff = points - x_bar
    with np.errstate(invalid="ignore", over="ignore"):
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    dist = np.where(np.isfinite(dist), dist, np.inf)
    # primary key distance, secondary key agent id
    order = np.lexsort((ids, dist))
    keep, drop = order[:n - f], order[n - f:]
    byz_surv = honest_elim = None
    if byzantine is not None:
        byz_surv = int(np.count_nonzero(byzantine[keep]))
        honest_elim = int(np.count_nonzero(~byzantine[drop]))
    return FilterOutcome(ids[keep], ids[drop], dist, ids, byz_surv, honest_elim)


def ce_filter(messages: Iterable[tuple[int, np.ndarray]] | Mapping[int, np.ndarray],
              x_bar, f: int, byzantine_ids: Iterable[int] | None = None) -> FilterOutcome:
    """Filter a list of ``(agent_id, point)`` messages.

    The result does not depend on the order of ``messages``.
    """
    ids, points = _as_arrays(messages)
    x_bar = np.asarray(x_bar, dtype=float)
    mask = None
    if byzantine_ids is not None:
        mask = np.isin(ids, np.fromiter(byzantine_ids, dtype=int))
    return filter_arrays(points, x_bar, f, ids, mask)


def aggregate(survivor_messages) -> np.ndarray:
    """Mean of the surviving iterates, summed in ascending agent-id order.

    Accepts ``(id, point)`` pairs, a mapping, or a plain list of points
    (already in canonical order).
    """
    items = list(survivor_messages.items()) if isinstance(survivor_messages, Mapping) \
        else list(survivor_messages)
    if not items:
        raise ConfigurationError("cannot aggregate an empty survivor set")
    if isinstance(items[0], tuple) and len(items[0]) == 2 and np.ndim(items[0][0]) == 0:
        _, points = _as_arrays(items)
    else:
        points = np.array([np.asarray(p, dtype=float) for p in items])
    return points.mean(axis=0)


def byzantine_correction_term(survivors, messages: np.ndarray, honest_mask: np.ndarray,
                              x_bar) -> np.ndarray:
    """Deviation of the filtered average from the honest average.

    ``(1/|H|) * [sum over Byzantine survivors of (m_i - x_bar)
    - sum over eliminated honest agents of (m_i - x_bar)]``. ``messages`` is
    indexed by agent id and ``honest_mask`` holds the ground-truth labels.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    n = messages.shape[0]
    kept = np.zeros(n, dtype=bool)
    kept[np.asarray(survivors, dtype=int)] = True
    byz_kept = kept & ~honest_mask
    honest_dropped = ~kept & honest_mask
    dev = messages - x_bar
    total = dev[byz_kept].sum(axis=0) - dev[honest_dropped].sum(axis=0)
    return total / np.count_nonzero(honest_mask)
