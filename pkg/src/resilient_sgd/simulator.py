"""Round orchestration, metrics, theoretical bounds and Monte Carlo runs.

Agents ``0..f-1`` are Byzantine and ``f..N-1`` honest. The labels are used
only for diagnostics (|B_k|, W_k, audits); the filter never sees them.

Metrics for round ``k`` are taken at the start of the round, before the
update, so ``W_k`` uses the trackers ``y_{k,0}`` against the exact honest
gradient at ``x_bar_k``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import streams
from .agents import AttackKind, ByzantineAttack, apply_attack, local_steps
from .errors import ConfigurationError, DivergenceError
from .objectives import (AgentData, CurvatureConstants, DataMode, DataModel, ObjectiveKind,
                         curvature, honest_population_gradient, objective_value,
                         sample_gradient)
from .schedule import (RegimeReport, ScheduleParams, validate_basic,
                       validate_filter_condition, validate_theorem)
from .server import filter_arrays

log = logging.getLogger(__name__)

RATE_FIT_FRACTION = 0.5
RATE_FIT_MIN_ROUNDS = 200
X0_RADIUS = 10.0


@dataclass(frozen=True)
class SimulationConfig:
    n_agents: int = 50
    n_byzantine: int = 8
    dim: int = 10
    t_local: int = 3
    n_rounds: int = 1000
    replications: int = 1
    master_seed: int = 0
    objective: ObjectiveKind = ObjectiveKind.SC_QUADRATIC
    data_model: DataModel = field(default_factory=DataModel)
    attack: ByzantineAttack = field(default_factory=ByzantineAttack)
    schedule: ScheduleParams = field(default_factory=lambda: ScheduleParams(1.0, 0.5, 10.0))
    regime: str | None = None  # defaults to the objective's natural regime
    audit: bool = False
    y_init: str = "zero"  # or "first-sample"
    x0_radius: float = X0_RADIUS

    def __post_init__(self):
        if not 0 <= self.n_byzantine < self.n_agents:
            raise ConfigurationError(
                f"constraint f < N violated: f={self.n_byzantine}, N={self.n_agents}")
        if self.t_local < 1:
            raise ConfigurationError(f"constraint T >= 1 violated: T={self.t_local}")
        if self.replications < 1:
            raise ConfigurationError("constraint replications >= 1 violated")
        if self.n_rounds < 1:
            raise ConfigurationError("constraint n_rounds >= 1 violated")
        if self.dim < 1:
            raise ConfigurationError("constraint dim >= 1 violated")
        if self.y_init not in ("zero", "first-sample"):
            raise ConfigurationError(f"unknown y_init {self.y_init!r}")
        if self.regime is None:
            object.__setattr__(self, "regime",
                               "SC" if self.objective is ObjectiveKind.SC_QUADRATIC else "PL")
        if self.regime not in ("SC", "PL"):
            raise ConfigurationError(f"unknown regime {self.regime!r}")

    @property
    def n_honest(self) -> int:
        return self.n_agents - self.n_byzantine

    @property
    def curvature(self) -> CurvatureConstants:
        return curvature(self.objective, self.data_model.noise_std, self.dim)

    def reports(self) -> dict[str, RegimeReport]:
        curv = self.curvature
        return {
            "basic": validate_basic(self.schedule, curv, self.t_local),
            "theorem": validate_theorem(self.regime, self.schedule, curv, self.t_local),
            "filter": validate_filter_condition(self.n_byzantine, self.n_agents, curv),
        }


def truth_and_start(config: SimulationConfig) -> tuple[np.ndarray, np.ndarray]:
    """x* and x_bar_0, shared by all replications of a master seed."""
    gen = streams.generator(config.master_seed, streams.PURPOSE_WORLD)
    x_star = gen.standard_normal(config.dim)
    u = gen.standard_normal(config.dim)
    u /= np.linalg.norm(u)
    return x_star, x_star + config.x0_radius * u


@dataclass
class RoundTrace:
    """Everything the lemma audit needs about one round."""

    k: int
    alpha: float
    beta: float
    x_bar: np.ndarray
    x_bar_next: np.ndarray
    xs: np.ndarray  # (N, T+1, d)
    ys: np.ndarray  # (N, T+1, d)
    messages: np.ndarray  # (N, d), what the server received
    survivors: np.ndarray
    byz_survivors: int


@dataclass
class World:
    config: SimulationConfig
    replication: int
    x_star: np.ndarray
    x_bar: np.ndarray
    y: np.ndarray  # (N, d) trackers, Byzantine rows included
    bank: streams.StreamBank
    noise_bank: streams.StreamBank | None
    honest: np.ndarray  # boolean mask


def build_world(config: SimulationConfig, replication: int = 0) -> World:
    x_star, x0 = truth_and_start(config)
    n, f, d = config.n_agents, config.n_byzantine, config.dim
    data, gens = [], []
    for i in range(n):
        center = config.attack.center(x_star) if i < f else x_star
        frozen = streams.generator(config.master_seed, replication, streams.PURPOSE_FROZEN, i)
        data.append(AgentData.generate(config.data_model, center, frozen))
        gens.append(streams.generator(config.master_seed, replication, streams.PURPOSE_DATA, i))
    bank = streams.StreamBank(gens, data)
    noise_bank = None
    if f > 0 and config.attack.kind is AttackKind.LARGE_NOISE:
        unit = DataModel(mode=DataMode.POPULATION, noise_std=1.0)
        noise_bank = streams.StreamBank(
            [streams.generator(config.master_seed, replication, streams.PURPOSE_ATTACK, i)
             for i in range(f)],
            [AgentData(unit, np.zeros(d)) for _ in range(f)])
    if config.y_init == "zero":
        y = np.zeros((n, d))
    else:
        y = sample_gradient(config.objective, x0, bank.take(1)[:, 0])
    honest = np.arange(n) >= f
    return World(config, replication, x_star, x0.copy(), y, bank, noise_bank, honest)


def compute_W(honest_y: np.ndarray, x_bar, kind: ObjectiveKind, x_star) -> float:
    """Honest average of |y_i - grad q_i(x_bar)|^2."""
    e = honest_y - honest_population_gradient(kind, x_bar, x_star)
    return float(np.einsum("ij,ij->", e, e) / honest_y.shape[0])


def optimality_error(regime: str, kind: ObjectiveKind, x_bar, x_star) -> float:
    """|x_bar - x*|^2 in the SC regime, q(x_bar) - q* in the PL regime."""
    if regime == "SC":
        diff = np.asarray(x_bar) - x_star
        return float(diff @ diff)
    return float(objective_value(kind, x_bar, x_star))


def lyapunov(regime: str, opt_error: float, W: float) -> float:
    return opt_error + W


def theoretical_bound(regime: str, params: ScheduleParams, curv: CurvatureConstants,
                      t_local: int, n_byzantine: int, n_honest: int, v0: float,
                      k: int) -> float:
    """Right-hand side bounding E[V_{k+1}] under theorem-valid parameters."""
    mu, L, T, s2 = curv.mu, curv.lipschitz, t_local, curv.sigma_sq
    ca, h, f = params.c_alpha, params.h, n_byzantine
    denom = 1.0 + h + k
    head = h**2 * v0 / denom**2
    if regime == "SC":
        return (head + 150 * (L + 1) ** 3 * T**2 * s2 * ca**2 / (mu * denom)
                + 128 * (L + 1) ** 2 * T**2 * s2 * f * ca**2 / (denom * n_honest))
    return (head + 150 * T * s2 * ca**2 / denom
            + 112 * T**2 * s2 * f * ca**2 / (denom * n_honest))


def contraction_diagnostic(regime: str, beta_k: float, curv: CurvatureConstants,
                           t_local: int, byz_survivors, n_honest: int):
    """Per-round Lyapunov contraction coefficient using the observed |B_k|."""
    mu, L, T = curv.mu, curv.lipschitz, t_local
    ratio = np.asarray(byz_survivors, dtype=float) / n_honest
    if regime == "SC":
        return 1 - 23 * mu * T * beta_k / 12 + 17 * L * T * beta_k * ratio / 3
    return 1 - 9 * mu * T * beta_k / 6 + 4 * L * T * beta_k * ratio


def run_round(world: World, k: int, schedule=None, record: bool = False):
    """Advance the world by one global round.

    Returns ``(opt_error, W, byz_survivors, trace)``; the metrics describe the
    state at the start of round ``k``.
    """
    cfg = world.config
    schedule = schedule or cfg.schedule
    kind, f = cfg.objective, cfg.n_byzantine
    a, b = schedule.alpha(k), schedule.beta(k)
    x_bar = world.x_bar

    opt = optimality_error(cfg.regime, kind, x_bar, world.x_star)
    W = compute_W(world.y[f:], x_bar, kind, world.x_star)

    samples = world.bank.take(cfg.t_local)
    x_t, y_t, xs, ys = local_steps(kind, x_bar, world.y, a, b, samples, k,
                                   guard_rows=slice(f, None), record=record)
    messages = x_t
    if f > 0 and cfg.attack.kind is not AttackKind.SHIFTED_MEAN:
        noise = world.noise_bank.take(1)[:, 0] if world.noise_bank is not None else None
        messages = x_t.copy()
        messages[:f] = apply_attack(cfg.attack, x_bar, x_t[:f], noise)
    outcome = filter_arrays(messages, x_bar, f, byzantine=~world.honest)
    new_bar = messages[np.sort(outcome.survivors)].mean(axis=0)
    if not np.isfinite(new_bar).all():
        raise DivergenceError(k, cfg.t_local, None)

    trace = None
    if record:
        trace = RoundTrace(k, a, b, x_bar.copy(), new_bar.copy(), xs, ys, messages.copy(),
                           outcome.survivors.copy(), outcome.byz_survivors)
    world.y = y_t
    world.x_bar = new_bar
    return opt, W, outcome.byz_survivors, trace


@dataclass
class TrajectoryMetrics:
    k: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    opt_error: np.ndarray
    W: np.ndarray
    V: np.ndarray
    byz_survivors: np.ndarray
    contraction: np.ndarray
    bound: np.ndarray
    x_star: np.ndarray
    final_x_bar: np.ndarray
    traces: list[RoundTrace] | None = None


def bound_series(config: SimulationConfig, v0: float, n_rounds: int, schedule=None) -> np.ndarray:
    """Bound on V_k for k = 0..K-1 (row 0 is V_0 itself, row k uses the k-1 bound)."""
    params = schedule or config.schedule
    curv = config.curvature
    out = np.empty(n_rounds)
    out[0] = v0
    for k in range(1, n_rounds):
        out[k] = theoretical_bound(config.regime, params, curv, config.t_local,
                                   config.n_byzantine, config.n_honest, v0, k - 1)
    return out


def run_trajectory(config: SimulationConfig, replication: int = 0, schedule=None
                   ) -> TrajectoryMetrics:
    schedule = schedule or config.schedule
    K = config.n_rounds
    world = build_world(config, replication)
    opt = np.empty(K)
    W = np.empty(K)
    byz = np.zeros(K, dtype=int)
    traces = [] if config.audit else None
    for k in range(K):
        try:
            opt[k], W[k], byz[k], tr = run_round(world, k, schedule, record=config.audit)
        except DivergenceError as exc:
            exc.replication = replication
            raise
        if traces is not None:
            traces.append(tr)
    ks = np.arange(K)
    alpha = np.array([schedule.alpha(k) for k in ks])
    beta = np.array([schedule.beta(k) for k in ks])
    V = opt + W
    curv = config.curvature
    contraction = contraction_diagnostic(config.regime, beta, curv, config.t_local, byz,
                                         config.n_honest)
    bound = bound_series(config, V[0], K, schedule if isinstance(schedule, ScheduleParams) else None)
    return TrajectoryMetrics(ks, alpha, beta, opt, W, V, byz, contraction, bound,
                             world.x_star, world.x_bar, traces)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    k_start: int
    k_end: int


def fit_loglog_slope(k: np.ndarray, values: np.ndarray, fraction: float = RATE_FIT_FRACTION,
                     min_rounds: int = RATE_FIT_MIN_ROUNDS) -> RateFit | None:
    """Least-squares slope of log(values) against log(k) over the tail window.

    Returns None when fewer than ``min_rounds`` rounds are available.
    """
    k = np.asarray(k)
    values = np.asarray(values, dtype=float)
    if len(k) < min_rounds:
        return None
    start = int(len(k) * (1 - fraction))
    kk, vv = k[start:], values[start:]
    keep = (kk > 0) & (vv > 0) & np.isfinite(vv)
    if np.count_nonzero(keep) < 2:
        return None
    slope, intercept = np.polyfit(np.log(kk[keep]), np.log(vv[keep]), 1)
    return RateFit(float(slope), float(intercept), int(kk[0]), int(kk[-1]))


class ExperimentDivergenceError(RuntimeError):
    def __init__(self, failures: list[DivergenceError]):
        self.failures = failures
        reps = ", ".join(str(f.replication) for f in failures)
        super().__init__(f"{len(failures)} replication(s) diverged: {reps}; first: {failures[0]}")


@dataclass
class ExperimentSummary:
    k: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    bound: np.ndarray
    contraction: np.ndarray
    rate_fit: RateFit | None
    bound_dominated: bool
    bound_binding: bool  # True only when the theorem validators all pass
    replications: int


@dataclass
class ExperimentResult:
    config: SimulationConfig
    summary: ExperimentSummary
    trajectories: list[TrajectoryMetrics]


METRICS = ("opt_error", "W", "V", "byz_survivors")


def _run_one(args):
    config, rep = args
    try:
        return run_trajectory(config, rep)
    except DivergenceError as exc:
        return exc


def summarize(config: SimulationConfig, trajs: list[TrajectoryMetrics]) -> ExperimentSummary:
    mean, std = {}, {}
    for name in METRICS:
        stack = np.stack([getattr(t, name).astype(float) for t in trajs])
        mean[name] = stack.mean(axis=0)
        std[name] = stack.std(axis=0, ddof=1) if len(trajs) > 1 else np.zeros(stack.shape[1])
    first = trajs[0]
    K = len(first.k)
    curv = config.curvature
    contraction = contraction_diagnostic(config.regime, first.beta, curv, config.t_local,
                                         mean["byz_survivors"], config.n_honest)
    bound = bound_series(config, float(mean["V"][0]), K)
    reports = config.reports()
    binding = reports["theorem"].satisfied and reports["filter"].satisfied \
        and reports["basic"].satisfied
    dominated = bool(np.all(mean["V"] <= bound))
    return ExperimentSummary(first.k, first.alpha, first.beta, mean, std, bound, contraction,
                             fit_loglog_slope(first.k, mean["V"]), dominated, binding,
                             len(trajs))


def run_experiment(config: SimulationConfig, workers: int = 1) -> ExperimentResult:
    """Run all replications and aggregate per-round statistics.

    Results are gathered in replication order, so the summary is identical for
    any ``workers`` value.
    """
    basic = validate_basic(config.schedule, config.curvature, config.t_local)
    if not basic.satisfied:
        names = ", ".join(c.name for c in basic.violations)
        raise ConfigurationError(f"schedule fails basic validation: {names}")
    jobs = [(config, r) for r in range(config.replications)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    failures = [r for r in results if isinstance(r, DivergenceError)]
    if failures:
        raise ExperimentDivergenceError(failures)
    summary = summarize(config, results)
    log.info("experiment done: f=%d K=%d reps=%d slope=%s", config.n_byzantine,
             config.n_rounds, config.replications,
             None if summary.rate_fit is None else round(summary.rate_fit.slope, 3))
    return ExperimentResult(config, summary, results)


def with_overrides(config: SimulationConfig, **changes) -> SimulationConfig:
    return replace(config, **changes)
