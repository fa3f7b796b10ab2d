"""
Optimal truncation schedule from a lower hull
=============================================

A randomized multilevel estimator stops at a random level S with survival
probabilities q_i = Pr(S >= i). The best q for a given cost profile t and moment
profile gamma is read off the lower convex hull of the points (t_i, gamma_i).
"""

import numpy as np

from rmlmc import lower_hull, objective_R, optimal_distribution, optimal_value

# A small profile whose hull skips several points.
t = np.arange(7.0)
gamma = np.array([20.0, 22, 14, 5, 4, 1, 0])

hull = lower_hull(t, gamma)
print("hull vertices:", hull.support)
print("gamma' on the grid:", hull.gamma_prime)

# The slopes of the hull give the schedule: q*_i = sqrt(theta_i / theta_0).
res = optimal_distribution(t, gamma)
print("slopes theta:", res.theta)
print("q*:", np.round(res.q_star, 6))

# Points strictly above the hull share the q value of their neighbour, so the
# schedule is flat across hull segments.

# The optimal work-variance product has a closed form in the hull.
print("R(q*)        =", objective_R(res.q_star, t, gamma))
print("closed form  =", optimal_value(t, gamma))

# Any other feasible schedule does worse.
for name, q in [("q = 1", np.ones(6)),
                ("q = 2^-i", 2.0 ** -np.arange(6)),
                ("q = 0.8^i", 0.8 ** np.arange(6))]:
    print(f"R({name:9s}) =", round(objective_R(q, t, gamma), 4))

# The sweep is linear: pushes plus pops never exceed 2(m+2).
rng = np.random.default_rng(0)
m = 200_000
t_big = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 2.0, m + 1))])
g_big = np.append(rng.uniform(0, 1, m + 1), 0.0)
print("m =", m, "ops =", lower_hull(t_big, g_big).n_ops, "bound =", 2 * (m + 2))
