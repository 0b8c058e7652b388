"""
Replicating through ordinary outbound mail
==========================================

Every message a department sends can carry one archived record. The
busiest receiving domains get thousands of messages a day; the twentieth
gets about sixty. This demo follows how quickly each domain ends up holding
the whole repository, with and without a per-domain history pointer.
"""

from piggyback import EmailTrafficModel, RepositoryProfile, make_repository, q_email
from piggyback.analytics import expected_coverage_no_history
from piggyback.mail import run_scenario as run_email

model = EmailTrafficModel(total_volume=16866, exponent=1.6)
print(f"c = {model.c:.1f} emails/day at rank 1")
for rank in (2, 3, 5, 10, 20):
    print(f"  rank {rank:>2}: {q_email(model, rank):8.1f} records/day")

###############################################################################
# A repository of 20,000 records that grows by 10 a day. With a history
# pointer each domain receives records in order and never sees a repeat
# until it has them all.

profile = RepositoryProfile(20_000, 100_000, adds_per_day=10, updates_per_day=5)
days = 600
with_h = run_email(make_repository(profile, 2), model, True, days)
without = run_email(make_repository(profile, 2), model, False, days, seed=7)

print("\nday of full coverage (history pointer):")
for rank, day in with_h.meta["full_coverage_day"].items():
    if rank in (2, 3, 5, 10, 15, 20):
        print(f"  rank {rank:>2}: {day if day is not None else f'not within {days} days'}")

###############################################################################
# Without a pointer the sender picks records at random each day, so repeats
# creep in and coverage approaches 1 only asymptotically. The analytic
# expectation uses the same daily attachment counts.

rank = 20
rows = without.data["rank"] == rank
slots = without.data["records_attached"][rows]
expected = expected_coverage_no_history(profile, slots)
cov = without.data["coverage"][rows]
dups = without.data["duplicates"][rows]
print(f"\nrank {rank} without history:")
for day in (100, 300, 600):
    print(f"  day {day}: coverage {cov[day - 1]:.3f} (expected {expected[day - 1]:.3f}), "
          f"{dups[day - 1]} duplicate attachments")
