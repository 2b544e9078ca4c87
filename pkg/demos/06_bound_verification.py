"""Numerical verification of the four analytic bounds.

Each suite draws random admissible instances and checks its inequality with
1e-9 relative slack: two loss lower bounds (NCC and SCE at temperature 1) and
two sandwiches tying a transformed vector's norm to the squared cosines
against the transformation's columns. The same machinery runs behind
`copa verify`.
"""

import numpy as np

from copa import (
    ncc_lower_bound,
    normalize_rows,
    run_all_suites,
    sce_lower_bound,
    vector_transform_sandwich,
)

for outcome in run_all_suites(trials=400, seed=11):
    print(f"{outcome.name}: {outcome.passed}/{outcome.total} instances hold")

# a concrete instance of each bound, worked by hand
z = np.eye(2)
labels = np.array([0, 1])
lhs, rhs = ncc_lower_bound(z, labels, alpha=0.0)
print(f"\nNCC bound on the orthonormal pair: loss {lhs:.6f} >= bound {rhs:.1f}")

lhs, rhs = sce_lower_bound(z, z.copy(), labels)
print(f"SCE bound on the orthonormal pair: loss {lhs:.6f} >= bound {rhs:.1f}")

# the sandwich is tight when the transformation has rank one
v = np.array([0.6, 0.8, 0.0])
theta = np.zeros((3, 3))
theta[:, 1] = [1.0, 2.0, -1.0]
lower, middle, upper = vector_transform_sandwich(v, theta)
print(f"rank-1 sandwich: {lower:.6f} <= {middle:.6f} <= {upper:.6f} (equality)")

# and strict for a generic transformation
rng = np.random.default_rng(0)
v = normalize_rows(rng.normal(size=(1, 6)))[0]
theta = rng.normal(size=(6, 6))
lower, middle, upper = vector_transform_sandwich(v, theta)
print(f"generic sandwich: {lower:.3f} <= {middle:.3f} <= {upper:.3f}")
