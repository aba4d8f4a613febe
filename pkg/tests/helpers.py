"""Shared oracles and statistical bands for the test suite.

Frozen expected values are computed by independent means (block-count
arithmetic, high-precision evaluation of the closed-form budget) and
asserted against the implementation; the oracles never call the code paths
they check.
"""

from __future__ import annotations

import math

# Demo dataset blocks: (value, count, records in the Toys department).
DEMO_BLOCKS = (
    (1e9, 100, 50),
    (1e8, 1_000, 0),
    (1e7, 10_000, 5_000),
    (1e6, 1_000_000, 1_000_000),
    (10.0, 1_000, 0),
)

# Frozen from block-count arithmetic: 100 + 1,000 + 10,000 + 1,000,000 + 1,000.
DEMO_N = 1_012_100
# Frozen from sum(value * count): 3*10^11 + 10^12 + 10^4.
DEMO_S = 1_300_000_010_000.0
# Frozen from sum over the Toys membership: 50*10^9 + 5,000*10^7 + 10^6*10^6.
DEMO_Q1_EXACT = 1.1e12
# Demo budget for the (m=10^6, p=10^-6, eps=0.04) guarantee.
DEMO_B = 8852
# The deterministic top-k answer to the Toys query: the baseline keeps the
# 100 + 1,000 + 7,752 largest records; even-position Toys assignment puts
# 3,876 Toys records among the kept 10^7-valued ones: 50e9 + 3876e7.
TOPK_Q1_ANSWER = 8.876e10

# High-precision evaluations of ceil(ln(2m/p) / (2 eps^2)), frozen.
BUDGET_CASES = (
    (10**6, 1e-6, 0.04, 8852),
    (1, 0.5, 1.0, 1),
    (100, 0.05, 0.1, 415),
)


def expected_block_bag_mass(value: float, count: int, b: int = DEMO_B) -> float:
    """Expectation of a block's bag mass: b * (block mass) / S."""
    return b * value * count / DEMO_S


def multinomial_band(trials: int, probability: float, sigmas: float = 3.0) -> float:
    """Allowed deviation of a binomial count from its expectation."""
    return sigmas * math.sqrt(trials * probability * (1.0 - probability))


def exhaustive_subset_sums(values) -> dict:
    """Brute-force oracle: exact sum for every bitmask subset of values."""
    n = len(values)
    sums = {0: 0.0}
    for mask in range(1, 1 << n):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + float(values[low.bit_length() - 1])
    return sums
