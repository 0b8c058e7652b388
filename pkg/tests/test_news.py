import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from piggyback.core import RepositoryProfile, ValidationError, make_repository
from piggyback.news import (
    NEWS_CSV_COLUMNS,
    NetworkProfile,
    NewsReceiverPolicy,
    NewsSimulation,
    SenderMode,
    SenderPolicy,
    q_news,
    run_scenario,
    t_news,
)

ACTIVE = RepositoryProfile(100_000, 1e6, 100, 400)
T1 = 1.5e6 / 8 * 86_400  # 1.5 Mbps in bytes/day


def net_for_q(q, size):
    """Bandwidth that gives exactly ``q`` full-content records a day."""
    return NetworkProfile(q * size * 4 / 3)


def test_q_news_active():
    assert q_news(ACTIVE, NetworkProfile(T1)) == pytest.approx(T1 / (1e6 * 4 / 3))
    assert q_news(ACTIVE, NetworkProfile(T1)) == pytest.approx(12_150)


def test_q_news_by_reference_example():
    net = NetworkProfile.from_bits_per_second(0.125e6)
    assert net.bandwidth == pytest.approx(1.35e9)
    sender = SenderPolicy(by_reference=True, metadata_size=1000)
    prof = RepositoryProfile(500_000, 1000)
    assert q_news(prof, net, sender) == pytest.approx(1.35e6)
    assert t_news(prof, net, sender) == pytest.approx(0.37, abs=0.01)


def test_downtime_haircut():
    assert q_news(ACTIVE, NetworkProfile(T1, 0.25)) == pytest.approx(0.75 * 12_150)


def test_unbounded_bandwidth():
    assert math.isinf(q_news(ACTIVE, NetworkProfile(math.inf)))
    repo = make_repository(RepositoryProfile(50, 100, 2, 1), seed=0)
    ts = run_scenario(repo, SenderPolicy("single"), NewsReceiverPolicy(10), NetworkProfile(math.inf), 5)
    assert list(ts["posted_today"]) == [53, 3, 3, 3, 3]


def test_t_news_values():
    assert t_news(ACTIVE, NetworkProfile(T1)) == pytest.approx(8.23, abs=0.01)
    assert t_news(RepositoryProfile(0, 1e6), NetworkProfile(T1)) == 0
    assert t_news(ACTIVE, NetworkProfile(T1)) == pytest.approx(ACTIVE.record_count / q_news(ACTIVE, NetworkProfile(T1)))


@pytest.mark.parametrize("bad", [dict(bandwidth=0), dict(bandwidth=1, downtime_fraction=1.0)])
def test_network_validation(bad):
    with pytest.raises(ValidationError):
        NetworkProfile(**bad)


def test_policy_validation():
    with pytest.raises(ValidationError):
        NewsReceiverPolicy(n_ttl=0)
    with pytest.raises(ValidationError):
        SenderPolicy("cyclic", sleep=-1)
    with pytest.raises(ValueError):
        SenderPolicy("sometimes")


def test_effective_sleep():
    assert SenderPolicy("continuous", sleep=7).effective_sleep == 0
    assert math.isinf(SenderPolicy("single").effective_sleep)
    assert SenderPolicy("cyclic", sleep=5).effective_sleep == 5


def test_empty_repository_day():
    repo = make_repository(RepositoryProfile(0, 100), seed=0)
    sim = NewsSimulation(repo, SenderPolicy("continuous"), NewsReceiverPolicy(5), NetworkProfile(1e6))
    assert sim.step_day(repo.advance_day()) == (0, 0)
    assert sim.day == 1 and sim.records_on_server() == 0 and sim.tr_news == 0


def test_delta_day_must_match():
    repo = make_repository(RepositoryProfile(5, 100), seed=0)
    sim = NewsSimulation(repo, SenderPolicy("continuous"), NewsReceiverPolicy(5), NetworkProfile(1e6))
    repo.advance_day()
    with pytest.raises(ValueError):
        sim.step_day(repo.advance_day())


def test_csv_columns():
    repo = make_repository(RepositoryProfile(30, 100, 1, 1), seed=0)
    ts = run_scenario(repo, SenderPolicy("cyclic", sleep=2), NewsReceiverPolicy(5), net_for_q(10, 100), 1)
    text = ts.to_csv()
    assert text.splitlines()[0] == ",".join(NEWS_CSV_COLUMNS)
    assert len(text.splitlines()) == 2
    assert len(ts) == 1


def test_days_must_be_positive():
    repo = make_repository(RepositoryProfile(3, 100), seed=0)
    with pytest.raises(ValueError):
        run_scenario(repo, SenderPolicy(), NewsReceiverPolicy(), NetworkProfile(1e6), 0)


def test_early_days_post_at_full_rate():
    repo = make_repository(RepositoryProfile(1000, 100), seed=0)
    ts = run_scenario(repo, SenderPolicy("continuous"), NewsReceiverPolicy(30), net_for_q(7.5, 100), 25)
    days = ts["day"]
    assert np.array_equal(ts["records_on_server"], np.floor(7.5 * days))


def test_single_baseline_steady_state():
    repo = make_repository(RepositoryProfile(1000, 100, 5, 3), seed=0)
    ts = run_scenario(repo, SenderPolicy("single"), NewsReceiverPolicy(10), net_for_q(50, 100), 200)
    tail = ts["records_on_server"][-50:]
    assert np.all(tail == 10 * (5 + 3))


def test_continuous_steady_state():
    repo = make_repository(RepositoryProfile(1000, 100, 5, 3), seed=0)
    ts = run_scenario(repo, SenderPolicy("continuous"), NewsReceiverPolicy(10), net_for_q(50, 100), 200)
    assert np.all(ts["records_on_server"][-50:] == 10 * 50)


def test_single_baseline_posts_everything_once():
    repo = make_repository(RepositoryProfile(100, 100), seed=0)
    ts = run_scenario(repo, SenderPolicy("single"), NewsReceiverPolicy(50), net_for_q(30, 100), 10)
    assert ts["tr_news"][-1] == 100
    assert ts.meta["baseline_completions"] == [4]


def test_infeasible_single_baseline_never_complete():
    # T_news = 100 / 3 > N_ttl = 20
    repo = make_repository(RepositoryProfile(100, 100, 1, 0), seed=0)
    ts = run_scenario(repo, SenderPolicy("single"), NewsReceiverPolicy(20), net_for_q(3, 100), 300)
    assert np.all(ts["distinct_on_server"] < ts["repo_size"])
    assert np.all(ts["records_on_server"] < ts["repo_size"])


def test_cyclic_with_zero_sleep_is_continuous():
    prof = RepositoryProfile(300, 100, 4, 6)
    series = []
    for sender in (SenderPolicy("cyclic", sleep=0), SenderPolicy("continuous")):
        ts = run_scenario(make_repository(prof, 2), sender, NewsReceiverPolicy(12), net_for_q(37.3, 100), 150)
        series.append(ts.to_csv())
    assert series[0] == series[1]


def test_cyclic_sleep_pauses_posting():
    prof = RepositoryProfile(100, 100)
    sender = SenderPolicy("cyclic", sleep=3, copies_target=1, updates_during_sleep=False)
    ts = run_scenario(make_repository(prof, 0), sender, NewsReceiverPolicy(30), net_for_q(50, 100), 12)
    # baseline on days 1-2, asleep 3-5, next baseline 6-7, asleep 8-10, ...
    assert list(ts["posted_today"]) == [50, 50, 0, 0, 0, 50, 50, 0, 0, 0, 50, 50]
    assert ts.meta["baseline_completions"] == [2, 7, 12]


def test_continuous_restarts_on_leftover_capacity():
    prof = RepositoryProfile(100, 100)
    ts = run_scenario(make_repository(prof, 0), SenderPolicy("continuous"), NewsReceiverPolicy(30),
                      net_for_q(30, 100), 10)
    assert np.all(ts["posted_today"] == 30)
    assert ts.meta["baseline_completions"] == [4, 7, 10]


def test_cyclic_copies_target_back_to_back():
    prof = RepositoryProfile(100, 100)
    sender = SenderPolicy("cyclic", sleep=2, copies_target=2)
    ts = run_scenario(make_repository(prof, 0), sender, NewsReceiverPolicy(30), net_for_q(100, 100), 8)
    assert ts.meta["baseline_completions"] == [1, 2, 5, 6]


def test_updates_during_sleep_are_posted():
    prof = RepositoryProfile(100, 100, 2, 3)
    sender = SenderPolicy("cyclic", sleep=3, updates_during_sleep=True)
    ts = run_scenario(make_repository(prof, 0), sender, NewsReceiverPolicy(30), net_for_q(200, 100), 4)
    assert list(ts["posted_today"][1:4]) == [5, 5, 5]


def test_updates_become_new_posts():
    prof = RepositoryProfile(20, 100, 0, 20)
    repo = make_repository(prof, 0)
    ts = run_scenario(repo, SenderPolicy("single"), NewsReceiverPolicy(30), net_for_q(1000, 100), 3)
    # day 1: baseline + 20 updates; days 2-3: 20 updated records each
    assert list(ts["posted_today"]) == [40, 20, 20]
    assert ts["distinct_on_server"][-1] == 20


def test_expiry_window():
    repo = make_repository(RepositoryProfile(100, 100), seed=0)
    ts = run_scenario(repo, SenderPolicy("single"), NewsReceiverPolicy(3), net_for_q(25, 100), 10)
    # posted days 1..4, each post lives exactly 3 days
    assert list(ts["expired_today"]) == [0, 0, 0, 25, 25, 25, 25, 0, 0, 0]
    assert list(ts["records_on_server"]) == [25, 50, 75, 75, 50, 25, 0, 0, 0, 0]


def test_oversize_records_skipped():
    prof = RepositoryProfile(200, 1000, size_spread=0.5)
    repo = make_repository(prof, 0)
    limit = 4 * math.ceil(1200 / 3)
    receiver = NewsReceiverPolicy(30, max_article_size=limit)
    with pytest.warns(UserWarning, match="skipped"):
        ts = run_scenario(repo, SenderPolicy("single"), receiver, net_for_q(1000, 1000), 2)
    expected_skips = int(np.count_nonzero(4 * np.ceil(repo.sizes / 3) > limit))
    assert ts.meta["skipped_oversize"] == expected_skips > 0
    assert ts["tr_news"][-1] == 200 - expected_skips


def test_by_reference_ignores_size_limit():
    repo = make_repository(RepositoryProfile(50, 10_000), 0)
    sender = SenderPolicy("single", by_reference=True, metadata_size=500)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ts = run_scenario(repo, sender, NewsReceiverPolicy(30, max_article_size=100), NetworkProfile(1e9), 1)
    assert ts["tr_news"][-1] == 50


def test_deterministic_output():
    prof = RepositoryProfile(500, 300, 7, 9)
    a = run_scenario(make_repository(prof, 11), SenderPolicy("cyclic", sleep=4), NewsReceiverPolicy(15),
                     net_for_q(41.7, 300), 120)
    b = run_scenario(make_repository(prof, 11), SenderPolicy("cyclic", sleep=4), NewsReceiverPolicy(15),
                     net_for_q(41.7, 300), 120)
    assert a.to_csv() == b.to_csv()


policies = st.sampled_from(
    [SenderPolicy("single"), SenderPolicy("continuous"), SenderPolicy("cyclic", sleep=3, copies_target=2),
     SenderPolicy("cyclic", sleep=1, updates_during_sleep=False)]
)


@settings(max_examples=40, deadline=None)
@given(
    r=st.integers(0, 400),
    ra=st.integers(0, 15),
    ru=st.integers(0, 15),
    q=st.floats(0.5, 120),
    ttl=st.integers(1, 40),
    days=st.integers(1, 120),
    sender=policies,
)
def test_conservation_and_expiry(r, ra, ru, q, ttl, days, sender):
    prof = RepositoryProfile(r, 100, ra, min(ru, r))
    repo = make_repository(prof, 0)
    sim = NewsSimulation(repo, sender, NewsReceiverPolicy(ttl), net_for_q(q, 100))
    tr = [0]
    for d in range(1, days + 1):
        waiting_before = sim.queue_len
        delta = repo.advance_day()
        posted, _ = sim.step_day(delta)
        # never post more than the day's capacity or what was queued
        cap = math.floor(sim.q * d) - math.floor(sim.q * (d - 1))
        assert posted <= cap
        assert sim.queue_len >= 0
        if sender.mode is SenderMode.SINGLE:
            # one snapshot at most; back-to-back policies may restart within a day
            assert posted <= waiting_before + repo.record_count + len(delta)
        tr.append(sim.tr_news)
        assert all(day > d - ttl for day, _ in sim.posted)
        assert sim.records_on_server() == tr[d] - tr[max(d - ttl, 0)]
        assert sim.records_on_server() == sum(len(p) for _, p in sim.posted)


@settings(max_examples=25, deadline=None)
@given(
    r=st.integers(1, 300),
    ra=st.integers(0, 10),
    ru=st.integers(0, 10),
    q=st.floats(1, 60),
    bump=st.floats(1.0, 3.0),
    ttl=st.integers(1, 30),
)
def test_more_bandwidth_never_hurts_continuous(r, ra, ru, q, bump, ttl):
    prof = RepositoryProfile(r, 100, ra, min(ru, r))
    lo = run_scenario(make_repository(prof, 0), SenderPolicy("continuous"), NewsReceiverPolicy(ttl),
                      net_for_q(q, 100), 80)
    hi = run_scenario(make_repository(prof, 0), SenderPolicy("continuous"), NewsReceiverPolicy(ttl),
                      net_for_q(q * bump, 100), 80)
    assert np.all(hi["records_on_server"] >= lo["records_on_server"])
