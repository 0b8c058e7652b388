"""
Three ways to keep a repository on a news server
================================================

A news server forgets every article after ``n_ttl`` days, so a repository
that wants to stay replicated there has to keep posting. This demo runs
the three sender policies against the same small repository and prints
how much of it is on the server as time goes by.
"""

import numpy as np

from piggyback import (
    NetworkProfile,
    NewsReceiverPolicy,
    RepositoryProfile,
    SenderPolicy,
    make_repository,
    q_news,
)
from piggyback.news import run_scenario as run_news

###############################################################################
# A repository of 2,000 records of about 50 KB, gaining 20 records a day and
# updating 10. The link carries 200 records a day once base64 is paid for.

profile = RepositoryProfile(2_000, 50_000, adds_per_day=20, updates_per_day=10)
net = NetworkProfile(200 * 50_000 * 4 / 3)
server = NewsReceiverPolicy(n_ttl=30)
print(f"q_news = {q_news(profile, net):.1f} records/day")

###############################################################################
# Single baseline: one snapshot, then only the changes. Once the snapshot
# ages out, the server holds just the last 30 days of changes.

policies = {
    "single": SenderPolicy("single"),
    "continuous": SenderPolicy("continuous"),
    "cyclic S=10": SenderPolicy("cyclic", sleep=10),
}
runs = {name: run_news(make_repository(profile, seed=1), p, server, net, 400)
        for name, p in policies.items()}

###############################################################################
# Coverage counts distinct records with at least one live post; volume
# copies counts every live post against the repository size.

print(f"\n{'day':>5} " + " ".join(f"{name:>22}" for name in runs))
for day in (30, 60, 100, 200, 300, 400):
    cells = []
    for ts in runs.values():
        i = day - 1
        cells.append(f"{ts['coverage_fraction'][i]:6.1%} cov {ts['volume_copies'][i]:5.2f} vol")
    print(f"{day:>5} " + " ".join(f"{c:>22}" for c in cells))

###############################################################################
# The single baseline settles at ``n_ttl * (R_a + R_u)`` posts and the
# continuous one at ``n_ttl * q_news``, the most any policy can hold. By
# day 400 the repository has grown to 10,000 records, more than those 6,000
# posts can cover.

print()
for name, ts in runs.items():
    tail = np.unique(ts["records_on_server"][-30:])
    print(f"{name:>12}: baselines finished on days {ts.meta['baseline_completions'][:6]}..., "
          f"posts on server at the end {tail.tolist()}")
