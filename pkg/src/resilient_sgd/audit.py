"""Pathwise re-evaluation of the appendix inequalities on recorded traces.

Each check records ``lhs``, ``rhs`` and ``slack = rhs - lhs`` per round (and
per agent/step where the inequality is per agent). A slack below
``-SLACK_TOL`` is a failure.

Which checks run:

* ``lemma3`` (local drift) and ``lemma6`` (norm of the filter correction)
  hold on every sample path and are checked in all settings.
* ``lemma2``, ``lemma4`` and ``lemma5`` are statements about expectations.
  With zero gradient noise they become pathwise and are checked only then.
* ``identity`` checks the exact decomposition of the server update into
  honest drift, tracker error and the filter correction.

The drift inequality is evaluated with ``s`` = number of local steps taken,
i.e. ``|x_s - x_bar|^2 <= 2 L^2 s^2 b^2 |x_bar - x*|^2 + 2 s b^2 sum_{l<s} |e_l|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .objectives import DataMode, honest_population_gradient
from .server import byzantine_correction_term
from .simulator import RoundTrace, SimulationConfig, TrajectoryMetrics

SLACK_TOL = 1e-9
IDENTITY_RTOL = 1e-10

LEMMAS = ("lemma2", "lemma3", "lemma4", "lemma5", "lemma6", "identity")


@dataclass
class AuditRow:
    lemma: str
    round: int
    agent: int  # -1 when the inequality is aggregate over agents
    step: int  # -1 when not per step
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class AuditReport:
    rows: dict[str, list[AuditRow]] = field(default_factory=lambda: {k: [] for k in LEMMAS})
    skipped: dict[str, str] = field(default_factory=dict)

    @property
    def failures(self) -> list[AuditRow]:
        return [r for rows in self.rows.values() for r in rows if r.slack < -SLACK_TOL]

    @property
    def passed(self) -> bool:
        return not self.failures

    def min_slack(self, lemma: str) -> float | None:
        rows = self.rows.get(lemma, [])
        return min((r.slack for r in rows), default=None)

    def merge(self, other: "AuditReport") -> None:
        for k, v in other.rows.items():
            self.rows.setdefault(k, []).extend(v)
        self.skipped.update(other.skipped)


def _sq(v) -> float:
    return float(np.dot(v, v))


def lemma3_rows(tr: RoundTrace, e: np.ndarray, dist_sq: float, L: float,
                honest_ids: np.ndarray) -> list[AuditRow]:
    rows = []
    b = tr.beta
    T = tr.xs.shape[1] - 1
    e_sq = np.einsum("ntd,ntd->nt", e, e)
    drift = tr.xs[honest_ids] - tr.x_bar
    drift_sq = np.einsum("ntd,ntd->nt", drift, drift)
    for j, i in enumerate(honest_ids):
        for s in range(1, T + 1):
            rhs = 2 * L**2 * s**2 * b**2 * dist_sq + 2 * s * b**2 * e_sq[j, :s].sum()
            rows.append(AuditRow("lemma3", tr.k, int(i), s, float(drift_sq[j, s]), float(rhs)))
    return rows


def lemma2_rows(tr: RoundTrace, e: np.ndarray, L: float, sigma_sq: float,
                honest_ids: np.ndarray) -> list[AuditRow]:
    rows = []
    a = tr.alpha
    T = tr.xs.shape[1] - 1
    e_sq = np.einsum("ntd,ntd->nt", e, e)
    drift = tr.xs[honest_ids] - tr.x_bar
    drift_sq = np.einsum("ntd,ntd->nt", drift, drift)
    for j, i in enumerate(honest_ids):
        for t in range(T):
            rhs = (1 - a) * e_sq[j, t] + a * L**2 * drift_sq[j, t] + a**2 * sigma_sq
            rows.append(AuditRow("lemma2", tr.k, int(i), t, float(e_sq[j, t + 1]), float(rhs)))
    return rows


def audit_round(tr: RoundTrace, config: SimulationConfig, x_star: np.ndarray) -> AuditReport:
    """Evaluate every applicable inequality on a single round."""
    report = AuditReport()
    curv = config.curvature
    L, mu = curv.lipschitz, curv.mu
    T = config.t_local
    kind = config.objective
    f = config.n_byzantine
    n_h = config.n_honest
    honest_ids = np.arange(f, config.n_agents)
    honest_mask = np.arange(config.n_agents) >= f
    a, b = tr.alpha, tr.beta
    noiseless = config.data_model.noise_std == 0

    grad = honest_population_gradient(kind, tr.x_bar, x_star)
    e = tr.ys[honest_ids] - grad  # (|H|, T+1, d)
    dist_sq = _sq(tr.x_bar - x_star)
    W = float(np.einsum("nd,nd->", e[:, 0], e[:, 0]) / n_h)
    e_norm_sum = float(np.linalg.norm(e[:, :T], axis=2).sum())
    e_sq_sum = float(np.einsum("ntd,ntd->", e[:, :T], e[:, :T]))

    report.rows["lemma3"] = lemma3_rows(tr, e, dist_sq, L, honest_ids)

    E = byzantine_correction_term(tr.survivors, tr.messages, honest_mask, tr.x_bar)
    grad_norm = float(np.linalg.norm(grad))
    rhs6 = 2 * L * T * b * tr.byz_survivors / (mu * n_h) * grad_norm + 2 * b * e_norm_sum / n_h
    report.rows["lemma6"] = [AuditRow("lemma6", tr.k, -1, -1, float(np.linalg.norm(E)), rhs6)]

    predicted = tr.x_bar - T * b * grad - b * e[:, :T].sum(axis=(0, 1)) / n_h + E
    resid = float(np.linalg.norm(tr.x_bar_next - predicted))
    tol = IDENTITY_RTOL * max(1.0, float(np.linalg.norm(tr.x_bar)))
    report.rows["identity"] = [AuditRow("identity", tr.k, -1, -1, resid, tol)]

    if noiseless:
        report.rows["lemma2"] = lemma2_rows(tr, e, L, 0.0, honest_ids)
        if a <= 1 / (2 * L * T):
            rhs4 = 2 * T * W + 4 * L**4 * T**3 * b**2 * dist_sq
            report.rows["lemma4"] = [AuditRow("lemma4", tr.k, -1, -1, e_sq_sum / n_h, rhs4)]
            if L * T * b <= 1 and f <= n_h:
                lhs5 = _sq(tr.x_bar_next - tr.x_bar)
                rhs5 = 100 * L**2 * T**2 * b**2 * dist_sq + 40 * b**2 * T**2 * W
                report.rows["lemma5"] = [AuditRow("lemma5", tr.k, -1, -1, lhs5, rhs5)]
            else:
                report.skipped["lemma5"] = "needs L*T*beta_k <= 1 and f <= N - f"
        else:
            report.skipped["lemma4"] = "needs alpha_k <= 1/(2 L T)"
            report.skipped["lemma5"] = "needs alpha_k <= 1/(2 L T)"
    else:
        for name in ("lemma2", "lemma4", "lemma5"):
            report.skipped[name] = "expectation statement; audited only with zero noise"
    return report


def lemma_audit(traj: TrajectoryMetrics, config: SimulationConfig) -> AuditReport:
    if traj.traces is None:
        raise ConfigurationError("lemma audit requested but no traces were recorded")
    if config.data_model.mode is not DataMode.POPULATION:
        raise ConfigurationError("lemma audit requires the Population data model")
    report = AuditReport()
    for tr in traj.traces:
        report.merge(audit_round(tr, config, traj.x_star))
    return report
