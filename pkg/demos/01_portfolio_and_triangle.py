"""Build a synthetic two-line motor portfolio, censor it at a valuation date,
and collapse the claim-level records into the classical run-off triangle to
see what the aggregate view keeps and what it throws away.
"""

import numpy as np

from granres import (
    aggregate_triangle,
    censor,
    chain_ladder_reserve,
    default_model,
    parse_iso,
    synthesize,
)

start, end = parse_iso("2016-01-01"), parse_iso("2021-12-31")
model = default_model(3000, start, end, dependence="archimedean")
rng = np.random.default_rng(7)
portfolio = synthesize(model, start, end, rng)

print(f"claims generated: {len(portfolio.claims)}")
print(f"claim types: {portfolio.claim_types}")
print(f"data cutoff day: {portfolio.data_cutoff}")

c = portfolio.claims[0]
print("\none record, the unit everything downstream works on:")
print(f"  id {c.claim_id}  type {c.claim_type}")
print(f"  accident day {c.accident_day}  reported day {c.reporting_day}"
      f"  (delay {c.delay_days()} days)")
print(f"  payments (day, amount): {c.payments[:4]}")

# censoring keeps what a reserving actuary could actually see on that date:
# claims reported by then, and only their payments made by then
valuation = parse_iso("2020-12-31")
seen = censor(portfolio, valuation)
n_pay_full = sum(len(x.payments) for x in portfolio.claims)
n_pay_seen = sum(len(x.payments) for x in seen.claims)
print(f"\nvisible at 2020-12-31: {len(seen.claims)} of {len(portfolio.claims)} claims,"
      f" {n_pay_seen} of {n_pay_full} payments")

tri = aggregate_triangle(seen, granularity=1)
print(f"\ncumulative paid triangle, origin years {tri.origin_years}:")
with np.printoptions(precision=0, suppress=True, linewidth=120):
    print(tri.cells)

cl = chain_ladder_reserve(tri)
print("\ndevelopment factors:", [round(f, 3) for f in cl["factors"]])
print("chain-ladder reserve by origin:")
for year, r in cl["reserve_by_origin"].items():
    print(f"  {year}: {r:12.2f}")
print(f"chain-ladder total reserve: {cl['total_reserve']:.2f}")

# the aggregate view has no reporting delays, no payment-count dynamics, no
# severities: just one point estimate. the claim-level model refits all of
# that and returns a distribution instead; see the next demos.
