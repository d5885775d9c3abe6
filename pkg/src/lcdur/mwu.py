"""Two-sample Mann-Whitney U test with exact-enumeration and normal-approximation modes.

Ties are handled with mid-ranks in both modes: the exact mode enumerates the
distribution of the mid-rank U statistic over all C(n_a+n_b, n_a) placements
and reports the two-sided tail P(|U - mu| >= |u_obs - mu|); the approximate
mode applies the variance tie correction plus a continuity correction of
0.5.  Both are symmetric in sample order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySampleError, ExactModeTooLargeError

ALPHA = 0.05

# Exact mode is refused when the number of rank placements C(n_a+n_b, n_a)
# exceeds this cap.  The cap also keeps the enumeration counters exact in
# 64-bit integers.
EXACT_COMBINATION_CAP = 10**12

# cells of the enumeration table (bounds its memory to ~200 MB)
EXACT_TABLE_CELL_CAP = 25_000_000


@dataclass(frozen=True)
class MwuResult:
    """Outcome of one two-sample test; `u_statistic` belongs to sample A."""

    u_statistic: float
    z_value: float | None
    p_two_sided: float
    n_a: int
    n_b: int
    method: str  # "exact" | "normal_approx"
    tie_corrected: bool

    @property
    def decision(self) -> str:
        return "Reject H0" if self.p_two_sided < ALPHA else "Accept H0"


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing the mean of their rank block."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    svals = values[order]
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and svals[j + 1] == svals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_correction_term(pooled: np.ndarray) -> float:
    """Sum of t^3 - t over groups of t tied values in the pooled sample."""
    _, counts = np.unique(pooled, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def _exact_two_tail_count(doubled_ranks: list[int], k: int, center2: int, c2: int) -> tuple[int, int]:
    """Count k-subsets whose doubled U statistic lies at least c2 from center2.

    Subset-sum dynamic program over the pooled doubled mid-ranks; returns
    (count in the two tails, total number of subsets).
    """
    total_sum = sum(doubled_ranks)
    counts = np.zeros((k + 1, total_sum + 1), dtype=np.int64)
    counts[0, 0] = 1
    seen = 0
    for r in doubled_ranks:
        seen += 1
        for j in range(min(k, seen), 0, -1):
            counts[j, r:] += counts[j - 1, : total_sum + 1 - r]
    dist = counts[k]
    # doubled rank sum s maps to doubled U via 2U = s - k(k+1)
    offset = k * (k + 1)
    u2_values = np.arange(total_sum + 1) - offset
    in_tails = np.abs(u2_values - center2) >= c2
    return int(dist[in_tails].sum()), int(dist.sum())


def mwu_test(a, b, mode: str = "auto") -> MwuResult:
    """Two-sided Mann-Whitney U test of samples `a` and `b`.

    `mode` is one of "auto", "exact", "approx".  Under "auto" the exact
    enumeration is used whenever both samples have at most 8 values,
    otherwise the tie-corrected normal approximation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise EmptySampleError("both samples must be non-empty")
    if mode not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown mode {mode!r}")

    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r_a = float(ranks[:n_a].sum())
    u_a = r_a - n_a * (n_a + 1) / 2.0
    has_ties = len(np.unique(pooled)) < len(pooled)

    if mode == "auto":
        mode = "exact" if (n_a <= 8 and n_b <= 8) else "approx"

    if mode == "exact":
        n = n_a + n_b
        k = min(n_a, n_b)
        if math.comb(n, k) > EXACT_COMBINATION_CAP:
            raise ExactModeTooLargeError(
                f"C({n},{k}) exceeds the exact-mode cap of {EXACT_COMBINATION_CAP}"
            )
        if (k + 1) * (n * (n + 1) + 1) > EXACT_TABLE_CELL_CAP:
            raise ExactModeTooLargeError(
                f"the exact enumeration table for n_a={n_a}, n_b={n_b} would be too large"
            )
        # two-sided p = P(|U - mu| >= |u_obs - mu|) over every placement;
        # |U_A - mu| and |U_B - mu| agree placement by placement, so the
        # smaller side can be enumerated even when ties break symmetry
        u2_obs = int(round(2.0 * u_a))
        center2 = n_a * n_b  # doubled mean of U
        doubled = [int(round(2.0 * r)) for r in ranks]
        tails, total = _exact_two_tail_count(doubled, k, center2, abs(u2_obs - center2))
        p = tails / total
        return MwuResult(u_a, None, p, n_a, n_b, "exact", has_ties)

    n = n_a + n_b
    tie_term = _tie_correction_term(pooled)
    variance = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if variance <= 0.0:
        # every pooled value identical: no evidence against H0
        return MwuResult(u_a, 0.0, 1.0, n_a, n_b, "normal_approx", has_ties)
    sd = math.sqrt(variance)
    mean_u = n_a * n_b / 2.0
    shrunk = max(abs(u_a - mean_u) - 0.5, 0.0)  # continuity correction
    z = math.copysign(shrunk / sd, u_a - mean_u) if shrunk > 0.0 else 0.0
    p = min(1.0, 2.0 * _norm_sf(shrunk / sd))
    return MwuResult(u_a, z, p, n_a, n_b, "normal_approx", has_ties)


def pairwise_mwu_matrix(groups, mode: str = "auto") -> list[list[float | None]]:
    """Upper-triangular matrix of two-sided p-values between ordered groups.

    Entry [i][j] with i < j holds mwu_test(groups[i], groups[j]).p_two_sided;
    the diagonal and lower triangle are None.
    """
    m = len(groups)
    if m < 2:
        raise ValueError("need at least two groups")
    matrix: list[list[float | None]] = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            matrix[i][j] = mwu_test(groups[i], groups[j], mode=mode).p_two_sided
    return matrix


def _norm_sf(x: float) -> float:
    """Upper-tail probability of the standard normal distribution."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))
