import pytest

from resilient_sgd.errors import ConfigurationError
from resilient_sgd.objectives import CurvatureConstants, ObjectiveKind, curvature
from resilient_sgd.schedule import (ScheduleParams, alpha, beta, theorem_params, validate_basic,
                                    validate_filter_condition, validate_theorem_pl,
                                    validate_theorem_sc)

UNIT = CurvatureConstants(mu=1.0, lipschitz=1.0, sigma_sq=0.0)


def names(report):
    return [c.name for c in report.violations]


def test_alpha_examples():
    assert alpha(ScheduleParams(1.0, 1.0, 0.0), 0) == 1.0
    assert alpha(ScheduleParams(1.0, 1.0, 0.0), 3) == 0.25
    assert alpha(ScheduleParams(24.0, 1.0, 100.0), 0) == 24 / 101


def test_beta_examples_at_theorem_constants():
    # C_beta fixed by the theorems for mu = 1, T = 3
    assert beta(ScheduleParams(24.0, 72 / 3, 100.0), 0) == 24 / 101
    assert beta(ScheduleParams(24.0, 12 / 3, 100.0), 0) == 4 / 101
    assert beta(ScheduleParams(4.0, 4.0, 0.0), 3) == 1.0


def test_steps_decrease_and_keep_their_ratio():
    p = ScheduleParams(3.0, 0.7, 5.0)
    prev_a, prev_b = p.alpha(0), p.beta(0)
    for k in range(1, 200):
        a, b = p.alpha(k), p.beta(k)
        assert 0 < a < prev_a and 0 < b < prev_b
        assert b / a == pytest.approx(0.7 / 3.0, rel=1e-14)
        prev_a, prev_b = a, b


def test_basic_validation_examples():
    assert "C_beta <= C_alpha" in names(validate_basic(ScheduleParams(1.0, 2.0, 5.0), UNIT, 3))
    assert validate_basic(ScheduleParams(24.0, 24.0, 100.0), UNIT, 3).satisfied
    bad = validate_basic(ScheduleParams(24.0, 24.0, 10.0), UNIT, 3)
    assert "L*T*beta_0 <= 1" in names(bad)
    check = next(c for c in bad.checks if c.name == "L*T*beta_0 <= 1")
    assert check.lhs == pytest.approx(72 / 11)


def test_report_satisfied_iff_no_violations():
    for p in (ScheduleParams(1.0, 2.0, 0.0), ScheduleParams(1.0, 0.5, 10.0)):
        rep = validate_basic(p, UNIT, 3)
        assert rep.satisfied == (not rep.violations)


def test_sc_theorem_constants():
    p = theorem_params("SC", UNIT, 3)
    assert p.c_beta == 24.0
    assert p.c_alpha == 84**4 * 2**4 / 6
    assert validate_theorem_sc(p, UNIT, 3).satisfied
    off = ScheduleParams(p.c_alpha, 23.9, p.h)
    assert any("72/(mu T)" in n for n in names(validate_theorem_sc(off, UNIT, 3)))


def test_pl_theorem_constants():
    p = theorem_params("PL", UNIT, 3)
    assert p.c_beta == 4.0
    assert p.c_alpha == pytest.approx(12**5 * 16 * 3, rel=1e-13)
    assert validate_theorem_pl(p, UNIT, 3).satisfied
    rep = validate_theorem_pl(ScheduleParams(4.0, 4.0, 1e30), UNIT, 3)
    ratio = next(c for c in rep.checks if c.name.startswith("beta_k/alpha_k"))
    assert not ratio.ok and ratio.lhs == 1.0
    assert ratio.rhs == pytest.approx(1 / (12**4 * 16 * 9))


@pytest.mark.parametrize("regime,validate", [("SC", validate_theorem_sc),
                                             ("PL", validate_theorem_pl)])
def test_reports_are_total(regime, validate):
    rep = validate(theorem_params(regime, UNIT, 3), UNIT, 3)
    assert len(rep.checks) == 6
    assert len({c.name for c in rep.checks}) == 6


@pytest.mark.parametrize("regime", ["SC", "PL"])
@pytest.mark.parametrize("kind", list(ObjectiveKind))
def test_validity_at_zero_persists_for_later_rounds(regime, kind):
    curv = curvature(kind, 1.0, 10)
    T = 3
    p = theorem_params(regime, curv, T)
    mu, L = curv.mu, curv.lipschitz
    for k in (1, 10, 1_000, 1_000_000):
        a, b = p.alpha(k), p.beta(k)
        if regime == "SC":
            assert a <= mu / (8**4 * (L + 1) ** 4 * T)
            assert b <= mu / (12**4 * L**2 * T)
            assert b / a <= mu / (14**4 * (L + 1) ** 4 * T) * (1 + 1e-12)
        else:
            assert a <= mu**2 / (6**4 * (L + 1) ** 3 * T)
            assert b <= mu**2 / (12**4 * L**3 * T)
            assert b / a <= mu**2 / (12**4 * (L + 1) ** 4 * T**2) * (1 + 1e-12)
        assert L * T * b <= 1 and a <= 1 and p.c_beta <= p.c_alpha


def test_filter_condition_examples():
    assert validate_filter_condition(10, 50, UNIT).satisfied
    check = validate_filter_condition(10, 50, UNIT).checks[0]
    assert (check.lhs, check.rhs) == (0.25, pytest.approx(1 / 3))
    assert validate_filter_condition(0, 7, UNIT).satisfied
    assert not validate_filter_condition(17, 50, UNIT).satisfied
    with pytest.raises(ConfigurationError):
        validate_filter_condition(50, 50, UNIT)


def test_schedule_params_reject_bad_values():
    with pytest.raises(ConfigurationError):
        ScheduleParams(0.0, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        ScheduleParams(1.0, 1.0, -1.0)
