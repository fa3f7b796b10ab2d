"""
When is the coupled sum square-integrable?
==========================================

Take Y = 0, Y_i = (i+1)^(-3/2) and q_i = (i+1)^(-2). Then ||Y_i - Y||^2 = (i+1)^(-3).

The exact criterion sums (1/q_{i+1} - 1/q_i) ||Y_i - Y||^2, whose terms decay like
2/i^2. The older sufficient criterion sums ||Y_{i-1} - Y||^2 / q_i, whose terms
decay like 1/i and so diverge.
"""

import math

from rmlmc import check_coupled_condition, check_sufficient_condition

q = lambda i: (i + 1.0) ** -2
gamma = lambda i: (i + 1.0) ** -3

exact = check_coupled_condition(q, gamma, n_terms=10_000)
print("exact criterion:", exact.verdict.value)
print("  partial sum after 10^4 terms:", exact.partial_sums[-1])
print("  fitted tail exponent:", round(exact.tail_exponent, 3))
print("  last increment:", exact.partial_sums[-1] - exact.partial_sums[-2])

old = check_sufficient_condition(q, gamma, n_terms=10_000)
print("sufficient criterion:", old.verdict.value)
print("  partial sum:", round(old.partial_sums[-1], 3))

# The divergent sum grows like the harmonic series: one ln(10) per decade.
for n in (100, 1000, 10_000):
    print(f"  S({n}) - ln({n}) = {old.partial_sums[n - 1] - math.log(n):.4f}")

# So the exact criterion accepts an estimator that the older test rejects.
