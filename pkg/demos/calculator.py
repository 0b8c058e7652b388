"""
Back-of-the-envelope numbers
============================

The closed-form estimates are handy before running any simulation. The
same values are available from the command line as ``piggyback calc``.
"""

from piggyback import NetworkProfile, RepositoryProfile, SenderPolicy, t_news
from piggyback.analytics import (
    NewsAnalyticInputs,
    cycle_durations,
    p_replicated_email,
    p_replicated_news,
    power_law_fit,
)
from piggyback.mail import EmailTrafficModel, bundled_domains, derive_c, q_email, zeta

###############################################################################
# Mail volume constant and per-domain rates.

print(f"zeta(1.6) = {zeta(1.6):.6f}")
print(f"c = 16866 / zeta(1.6) = {derive_c(16866, 1.6):.1f}")
print(f"rank 3 receives {q_email(EmailTrafficModel(), 3):.0f} records/day")

###############################################################################
# Advertising 500,000 records by reference (1 KB of metadata each) over a
# 0.125 Mbps link takes well under a day.

ads = RepositoryProfile(500_000, 1e6, 0, 0)
link = NetworkProfile.from_bits_per_second(0.125e6)
print(f"\nby-reference baseline: {t_news(ads, link, SenderPolicy('single', by_reference=True)):.2f} days")

###############################################################################
# Cycle lengths for a cyclic sender: each cycle has to post the changes
# that piled up during the previous one, so cycles stretch.

profile = RepositoryProfile(100_000, 1e6, 100, 400)
cycles = cycle_durations(NewsAnalyticInputs(profile, q_news=9112.5, sleep=3, n_ttl=30, horizon=200))
print(f"\nfirst cycles (days): {[round(w, 2) for w in cycles.durations[:6]]}, {cycles.max_k} fit in 200 days")

###############################################################################
# Share of the repository replicated on day 2000.

print(f"p_news(q=9112.5, D=2000, ttl=30) = {p_replicated_news(9112.5, 2000, 30, 100_000, 100).value:.3f}")
print(f"p_email(rank 20, D=2000) = {p_replicated_email(q_email(EmailTrafficModel(), 20), 2000, 100_000, 100).value:.3f}")

###############################################################################
# Fitting the power law to the bundled 30-day mail log (rank 1 is the
# sender's own domain and is left out).

rows = [(r, e / 30) for r, e, _ in bundled_domains() if r >= 2]
fit = power_law_fit(rows)
print(f"\nmail log fit: c = {fit.c:.0f}, b = {fit.b:.3f}")
