"""Exception types shared across the package."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid parameters or configuration (f >= N, empty sample sets, ...)."""


class DimensionMismatchError(ValueError):
    def __init__(self, left: int, right: int, what: str = "operands"):
        self.left = left
        self.right = right
        super().__init__(f"dimension mismatch between {what}: {left} != {right}")


class DivergenceError(RuntimeError):
    """An iterate left the finite range (norm > 1e12 or NaN/Inf).

    Carries the round and local step at which it was detected, plus the
    replication index once the simulator has attached it.
    """

    def __init__(self, round_index: int, step: int, agent: int | None = None,
                 replication: int | None = None):
        self.round_index = round_index
        self.step = step
        self.agent = agent
        self.replication = replication
        where = f"round {round_index}, step {step}"
        if agent is not None:
            where += f", agent {agent}"
        if replication is not None:
            where = f"replication {replication}, " + where
        super().__init__(f"iterate diverged at {where}")
