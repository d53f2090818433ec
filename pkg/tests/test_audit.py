import numpy as np
import pytest

from resilient_sgd import audit
from resilient_sgd.audit import lemma_audit
from resilient_sgd.errors import ConfigurationError
from resilient_sgd.objectives import DataMode, DataModel, ObjectiveKind
from resilient_sgd.simulator import SimulationConfig, run_trajectory

EXACT = DataModel(DataMode.POPULATION, noise_std=0.0)
NOISY = DataModel(DataMode.POPULATION, noise_std=1.0)


class FixedSteps:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def alpha(self, k):
        return self.a

    def beta(self, k):
        return self.b


def audited(**kw):
    base = dict(n_agents=5, n_byzantine=1, dim=4, t_local=3, n_rounds=30, data_model=EXACT,
                audit=True)
    base.update(kw)
    cfg = SimulationConfig(**base)
    return cfg, run_trajectory(cfg)


def test_tiny_noiseless_run_has_no_negative_slack():
    cfg, traj = audited(n_agents=3, n_byzantine=0, t_local=2, n_rounds=5)
    rep = lemma_audit(traj, cfg)
    assert rep.passed
    for lemma in audit.LEMMAS:
        assert rep.rows[lemma], lemma


@pytest.mark.parametrize("kind", list(ObjectiveKind))
def test_noiseless_audit_passes_with_byzantine_agent(kind):
    for seed in range(3):
        cfg, traj = audited(objective=kind, master_seed=seed)
        rep = lemma_audit(traj, cfg)
        assert rep.passed, rep.failures[:3]
        assert rep.min_slack("lemma6") >= 0


def test_noisy_audit_checks_pathwise_lemmas_only():
    cfg, traj = audited(data_model=NOISY)
    rep = lemma_audit(traj, cfg)
    assert rep.passed
    assert rep.rows["lemma3"] and rep.rows["lemma6"] and rep.rows["identity"]
    for name in ("lemma2", "lemma4", "lemma5"):
        assert not rep.rows[name]
        assert name in rep.skipped


def test_zero_beta_drift_bound_is_tight():
    cfg = SimulationConfig(n_agents=3, n_byzantine=0, dim=2, t_local=2, n_rounds=3,
                           data_model=EXACT, audit=True)
    traj = run_trajectory(cfg, schedule=FixedSteps(0.5, 0.0))
    rows = lemma_audit(traj, cfg).rows["lemma3"]
    assert all(r.lhs == 0.0 and r.rhs == 0.0 and r.slack == 0.0 for r in rows)


def test_drift_bound_needs_steps_taken_not_step_index():
    # after one step the drift is beta^2 |y_0|^2 > 0, while a bound indexed by
    # the step number t = 0 has a zero right-hand side
    cfg, traj = audited(n_rounds=3)
    tr = traj.traces[1]
    drift = tr.xs[cfg.n_byzantine:, 1] - tr.x_bar
    y0 = tr.ys[cfg.n_byzantine:, 0]
    assert np.allclose(drift, -tr.beta * y0, rtol=1e-12, atol=0)
    assert np.all(np.sum(drift**2, axis=1) > 0)
    first = [r for r in lemma_audit(traj, cfg).rows["lemma3"] if r.step == 1 and r.round == 1]
    assert all(r.lhs > 0 and r.slack >= 0 for r in first)


def test_corrupted_rhs_is_detected(monkeypatch):
    real = audit.lemma3_rows

    def corrupt(*args):
        rows = real(*args)
        rows[0].rhs = rows[0].lhs - 1.0
        return rows

    monkeypatch.setattr(audit, "lemma3_rows", corrupt)
    cfg, traj = audited(n_rounds=2)
    rep = lemma_audit(traj, cfg)
    assert not rep.passed
    bad = rep.failures[0]
    assert bad.lemma == "lemma3" and bad.round == 0


def test_audit_requires_traces_and_population_data():
    cfg = SimulationConfig(n_agents=4, n_byzantine=1, n_rounds=2, data_model=EXACT)
    with pytest.raises(ConfigurationError, match="traces"):
        lemma_audit(run_trajectory(cfg), cfg)
    fin = SimulationConfig(n_agents=4, n_byzantine=1, n_rounds=2, audit=True)
    with pytest.raises(ConfigurationError, match="Population"):
        lemma_audit(run_trajectory(fin), fin)


def test_noiseless_tracker_bound_has_no_noise_term():
    cfg, traj = audited(n_rounds=4)
    tr = traj.traces[2]
    rows = [r for r in lemma_audit(traj, cfg).rows["lemma4"] if r.round == 2]
    assert len(rows) == 1
    W = float(np.mean(np.sum((tr.ys[1:, 0] - (tr.x_bar - traj.x_star)) ** 2, axis=1)))
    L, T, b = 1.0, 3, tr.beta
    want = 2 * T * W + 4 * L**4 * T**3 * b**2 * float(np.sum((tr.x_bar - traj.x_star) ** 2))
    assert rows[0].rhs == pytest.approx(want, rel=1e-12)
