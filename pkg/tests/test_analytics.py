import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from piggyback.analytics import (
    NewsAnalyticInputs,
    baseline_completion_days,
    cycle_durations,
    p_replicated_email,
    p_replicated_news,
    power_law_fit,
    records_on_server_analytic,
    tr_email_analytic,
    tr_news_analytic,
    tr_news_series,
)
from piggyback.core import RepositoryProfile, ValidationError, make_repository
from piggyback.mail import EmailTrafficModel, bundled_domains, h_no_history, q_email, run_scenario as email_run
from piggyback.news import NetworkProfile, NewsReceiverPolicy, SenderPolicy, q_news, run_scenario

ACTIVE = RepositoryProfile(100_000, 1e6, 100, 400)


def inputs(r=100, q=10.0, sleep=0, ttl=30, horizon=100, ra=0, ru=0, **kw):
    return NewsAnalyticInputs(RepositoryProfile(r, 100, ra, ru), q, sleep, ttl, horizon, **kw)


# -- W_k and MaxK ---------------------------------------------------------


def test_static_cycles_constant():
    cyc = cycle_durations(inputs(horizon=95))
    assert cyc.durations == [10.0] * 9 and cyc.max_k == 9


def test_cycles_double_when_changes_match_rate():
    cyc = cycle_durations(inputs(r=100, q=10, ra=6, ru=4, horizon=10_000))
    w = cyc.durations
    assert w[0] == 10
    assert all(b == pytest.approx(2 * a) for a, b in zip(w, w[1:]))
    assert sum(w) <= 10_000 < sum(w) + 2 * w[-1]


def test_cycles_include_sleep():
    cyc = cycle_durations(inputs(r=100, q=10, sleep=5, horizon=60))
    assert cyc.durations == [15.0] * 4


def test_single_baseline_one_cycle():
    assert cycle_durations(inputs(sleep=math.inf, horizon=50)).max_k == 1
    assert cycle_durations(inputs(sleep=math.inf, horizon=5)).max_k == 0


def test_cycles_against_simulated_completions():
    # first few cycles of the continuous Active baseline; a baseline ending at
    # real time t completes on day ceil(t) in the simulator
    net = NetworkProfile.from_bits_per_second(1.5e6)
    q = q_news(ACTIVE, net)
    cyc = cycle_durations(NewsAnalyticInputs(ACTIVE, q, 0, 30, 40))
    ts = run_scenario(make_repository(ACTIVE, 1), SenderPolicy("continuous"), NewsReceiverPolicy(30), net, 40)
    ends = np.ceil(np.cumsum(cyc.durations))
    sim = ts.meta["baseline_completions"][: len(ends)]
    assert cyc.max_k >= 3
    assert np.all(np.abs(np.array(sim) - ends) <= 1)


def test_inputs_validation():
    with pytest.raises(ValidationError):
        inputs(q=0)
    with pytest.raises(ValidationError):
        inputs(ttl=0)


# -- TR_news --------------------------------------------------------------


def test_tr_news_day_zero():
    assert tr_news_analytic(inputs(), 0) == 0


def test_tr_news_continuous_static_capacity_limited():
    x = inputs(q=7.5, horizon=200)
    for d in (1, 13, 200):
        assert tr_news_analytic(x, d) == math.floor(7.5 * d)


def test_tr_news_beyond_horizon():
    x = inputs(q=3.0, horizon=10)
    assert tr_news_analytic(x, 50) == 150


def test_single_baseline_only_deltas_after():
    x = inputs(r=100, q=50, sleep=math.inf, ra=2, ru=1, horizon=20)
    tr = tr_news_series(x)
    assert tr[3] == 100 + 3 * 3
    assert np.all(np.diff(tr[3:]) == 3)
    assert baseline_completion_days(x) == [2]


def test_records_on_server_difference_form():
    x = inputs(r=400, q=33.3, sleep=4, ra=5, ru=2, ttl=12, horizon=150, copies_target=2)
    tr = tr_news_series(x)
    for d in range(0, 151):
        expect = tr[d] - tr[max(d - 12, 0)]
        assert records_on_server_analytic(x, d) == expect
        if d <= 12:
            assert records_on_server_analytic(x, d) == tr_news_analytic(x, d)


def test_steady_state_continuous():
    x = inputs(r=1000, q=50, ttl=10, horizon=200, ra=5, ru=3)
    assert records_on_server_analytic(x, 200) == 10 * 50


@pytest.mark.slow
def test_mature_equivalence_all_days():
    mature = RepositoryProfile(1_000_000, 1e5, 10, 5)
    net = NetworkProfile(1e10)
    sender = SenderPolicy("cyclic", sleep=5, copies_target=2)
    days = 400
    ts = run_scenario(make_repository(mature, 1), sender, NewsReceiverPolicy(30), net, days)
    x = NewsAnalyticInputs(mature, q_news(mature, net), 5, 30, days, copies_target=2)
    assert np.array_equal(tr_news_series(x)[1:], ts["tr_news"])
    assert baseline_completion_days(x) == ts.meta["baseline_completions"]


modes = st.sampled_from(["single", "continuous", "cyclic"])


@settings(max_examples=60, deadline=None)
@given(
    r=st.integers(0, 1000),
    ra=st.integers(0, 25),
    ru=st.integers(0, 25),
    q=st.floats(0.3, 200),
    ttl=st.integers(1, 40),
    days=st.integers(1, 400),
    mode=modes,
    sleep=st.integers(0, 8),
    copies=st.integers(1, 3),
    during=st.booleans(),
)
def test_simulator_equals_cycle_model(r, ra, ru, q, ttl, days, mode, sleep, copies, during):
    prof = RepositoryProfile(r, 100, ra, min(ru, r))
    sender = SenderPolicy(mode, sleep=sleep, copies_target=copies, updates_during_sleep=during)
    net = NetworkProfile(q * 100 * 4 / 3)
    ts = run_scenario(make_repository(prof, 0), sender, NewsReceiverPolicy(ttl), net, days)
    x = NewsAnalyticInputs(
        prof, q_news(prof, net), sender.effective_sleep, ttl, days,
        copies_target=copies if mode == "cyclic" else 1, updates_during_sleep=during,
    )
    tr = tr_news_series(x)
    assert np.array_equal(tr[1:], ts["tr_news"])
    on_server = tr[1:] - tr[np.maximum(np.arange(1, days + 1) - ttl, 0)]
    assert np.array_equal(on_server, ts["records_on_server"])


# -- probabilities --------------------------------------------------------


def test_p_news_early_days():
    p = p_replicated_news(100, 5, 30, 1000, 10)
    assert p.raw == pytest.approx(100 * 5 / (1000 + 50)) and not p.clamped


def test_p_news_steady_numerator():
    for d in (31, 100, 2000):
        p = p_replicated_news(12_150, d, 30, 100_000, 100)
        assert p.raw * (100_000 + 100 * d) == pytest.approx(12_150 * 30)


def test_p_news_active_day_2000_below_one():
    q = q_news(ACTIVE, NetworkProfile.from_bits_per_second(1.5e6, 0.25))
    p = p_replicated_news(q, 2000, 30, 100_000, 100)
    assert p.value < 1 and not p.clamped
    assert p_replicated_news(q, 300, 30, 100_000, 100).clamped


def test_p_email_values():
    assert p_replicated_email(1272, 0, 100_000, 100).value == 0
    assert p_replicated_email(1272, 1, 100_000, 0).raw == pytest.approx(1272 / 100_000)
    with pytest.raises(ValidationError):
        p_replicated_email(1, 1, 0, 0)


def test_p_email_crosses_one_at_full_coverage():
    prof = RepositoryProfile(1000, 10)
    q = 70.0
    ts = email_run(make_repository(prof, 0), EmailTrafficModel(domain_volumes=[0, q]), True, 20)
    full = ts.meta["full_coverage_day"][2]
    assert p_replicated_email(q, full, 1000, 0).raw >= 1
    assert p_replicated_email(q, full - 1, 1000, 0).raw < 1


# -- TR_email -------------------------------------------------------------


def test_tr_email_first_day():
    m = EmailTrafficModel()
    prof = RepositoryProfile(1000, 1)
    assert tr_email_analytic(m, 5, 1, False, prof).attached == pytest.approx(q_email(m, 5))
    assert tr_email_analytic(m, 5, 1, True, prof).attached == pytest.approx(q_email(m, 5))


def test_tr_email_with_history_two_readings():
    m = EmailTrafficModel(domain_volumes=[0, 30])
    prof = RepositoryProfile(100, 1)
    tot = tr_email_analytic(m, 2, 10, True, prof)
    assert tot.attached == 300 and tot.unique == 100


def test_tr_email_no_history_uses_h():
    m = EmailTrafficModel(domain_volumes=[0, 10])
    prof = RepositoryProfile(100, 1, 2, 1)
    expected = sum(10 * h_no_history(d, prof, 10).value for d in range(1, 31))
    assert tr_email_analytic(m, 2, 30, False, prof).attached == pytest.approx(expected)


def test_tr_email_no_history_concave_static():
    m = EmailTrafficModel(domain_volumes=[0, 25])
    prof = RepositoryProfile(400, 1)
    series = np.array([tr_email_analytic(m, 2, d, False, prof).attached for d in range(0, 60)])
    assert np.all(np.diff(series, 2) <= 1e-9)


def test_tr_email_no_history_against_monte_carlo():
    # with a static pool h(d) is exact, so the expected unique count is the sum
    m = EmailTrafficModel(domain_volumes=[0, 40])
    prof = RepositoryProfile(1000, 1)
    days = 40
    uniques = []
    for seed in range(100):
        ts = email_run(make_repository(prof, seed), m, False, days, seed=seed)
        uniques.append(ts["unique_received"][-1])
    expected = tr_email_analytic(m, 2, days, False, prof).attached
    assert np.mean(uniques) == pytest.approx(expected, rel=0.02)


# -- power-law fit --------------------------------------------------------


def test_fit_recovers_parameters():
    ranks = np.arange(1, 101)
    fit = power_law_fit(zip(ranks, 7378 * ranks**-1.6))
    assert fit.c == pytest.approx(7378, rel=1e-6)
    assert fit.b == pytest.approx(1.6, rel=1e-6)
    assert fit.residual < 1e-12


@settings(max_examples=50)
@given(st.floats(1, 1e6), st.floats(0.2, 4), st.integers(3, 200))
def test_fit_round_trip(c, b, n):
    ranks = np.arange(1, n + 1)
    fit = power_law_fit(zip(ranks, c * ranks**-b))
    assert fit.c == pytest.approx(c, rel=1e-6) and fit.b == pytest.approx(b, rel=1e-6)


def test_fit_bundled_domains():
    # ranks 2-50 of the department log; the tail is much flatter than 1.6
    rows = [(r, e) for r, e, _ in bundled_domains() if r >= 2]
    fit = power_law_fit(rows)
    assert 0.9 < fit.b < 1.1
    assert fit.residual > 0


@pytest.mark.parametrize("pts", [[(1, 5.0)], [(1, 5.0), (2, 3.0)], [(1, 5.0), (2, 0.0), (3, 1.0)]])
def test_fit_rejects_bad_input(pts):
    with pytest.raises(ValueError):
        power_law_fit(pts)
