"""Step-up multiple-testing procedures over grouped p-values.

The grouped adaptive procedure estimates, per group, how many hypotheses look
null (via the count of p-values above a tuning level lambda), turns that into
a data-driven weight per group, and runs the usual step-up rule on the
weighted p-values.  With a single group it collapses to the classic adaptive
procedure with null-proportion estimate (m - R + 1)/(m*(1 - lambda)).

A group in which no p-value lies at or below lambda gets weight +inf: its
members can never be rejected.  Weighted p-values are deliberately not
clipped to [0, 1]; the step-up rule compares raw products against k*alpha/m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class GroupedPValues:
    """A p-value vector plus a partition of its indices into groups.

    pvalues: 1-d array, entries in [0, 1].
    groups: tuple of integer index arrays forming a partition of range(m).
    """

    pvalues: np.ndarray
    groups: tuple

    def __post_init__(self):
        p = np.asarray(self.pvalues, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("GroupedPValues: pvalues must be a nonempty 1-d vector")
        if np.isnan(p).any() or (p < 0.0).any() or (p > 1.0).any():
            raise ValueError("GroupedPValues: every p-value must lie in [0, 1]")
        if len(self.groups) == 0:
            raise ValueError("GroupedPValues: at least one group is required")
        groups = tuple(np.asarray(g, dtype=np.intp).ravel() for g in self.groups)
        for g in groups:
            if g.size == 0:
                raise ValueError("GroupedPValues: empty groups are not allowed")
        flat = np.concatenate(groups)
        if flat.size != p.size or not np.array_equal(np.sort(flat), np.arange(p.size)):
            raise ValueError("GroupedPValues: groups must partition the index range exactly")
        labels = np.empty(p.size, dtype=np.intp)
        for j, g in enumerate(groups):
            labels[g] = j
        object.__setattr__(self, "pvalues", p)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "_labels", labels)

    @property
    def m(self) -> int:
        return self.pvalues.size

    @property
    def g(self) -> int:
        return len(self.groups)

    @property
    def group_sizes(self) -> tuple:
        return tuple(int(g.size) for g in self.groups)

    @property
    def labels(self) -> np.ndarray:
        """Index -> group position map (read-only companion to groups)."""
        return self._labels

    @classmethod
    def from_labels(cls, pvalues, labels) -> "GroupedPValues":
        """Build from an arbitrary label per index; groups ordered by first appearance."""
        labels = list(labels)
        order: dict = {}
        for i, lab in enumerate(labels):
            order.setdefault(lab, []).append(i)
        return cls(np.asarray(pvalues, dtype=float), tuple(np.asarray(v) for v in order.values()))


@dataclass(frozen=True)
class GBHWeights:
    """Per-group weights plus the threshold counts they were built from.

    w[j] is +inf exactly when group j has no p-value <= lambda.
    """

    w: tuple
    r_total: int
    r_per_group: tuple


@dataclass(frozen=True, eq=False)
class RejectionResult:
    """Outcome of a step-up rule: sorted rejected indices, the step count
    k_star, the acting threshold k_star*alpha/m, and the scores it ran on."""

    rejected: tuple
    k_star: int
    threshold: float
    weighted_pvalues: np.ndarray


def _validate_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha={alpha} outside (0, 1)")


def _validate_lambda(lam: float) -> None:
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lambda={lam} outside (0, 1)")


def _validate_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a nonempty 1-d vector")
    if np.isnan(s).any() or (s < 0.0).any():
        raise ValueError("scores must be >= 0 (inf allowed, NaN not)")
    return s


def bh_step_up(scores, alpha: float) -> RejectionResult:
    """Step-up rule at level alpha on nonnegative scores (may exceed 1 or be inf).

    k_star = max{k : s_(k) <= k*alpha/m}; rejects every index whose score is
    <= k_star*alpha/m, so ties at the boundary are decided jointly by value.
    """
    s = _validate_scores(scores)
    _validate_alpha(alpha)
    m = s.size
    sorted_s = np.sort(s)
    thresholds = alpha * np.arange(1, m + 1) / m
    ok = np.nonzero(sorted_s <= thresholds)[0]
    k_star = int(ok[-1] + 1) if ok.size else 0
    threshold = k_star * alpha / m
    rejected = tuple(int(i) for i in np.nonzero(s <= threshold)[0]) if k_star else ()
    return RejectionResult(rejected=rejected, k_star=k_star, threshold=threshold,
                           weighted_pvalues=s)


def step_up_oracle(scores, alpha: float) -> RejectionResult:
    """Brute-force reference for bh_step_up.

    Walks k = m, m-1, ..., 1 and takes the first k whose threshold k*alpha/m
    already covers at least k scores (a counting restatement of the sorted
    condition; it never sorts, so it shares no code path with bh_step_up).
    """
    s = _validate_scores(scores)
    _validate_alpha(alpha)
    m = s.size
    for k in range(m, 0, -1):
        t = k * alpha / m
        if int(np.count_nonzero(s <= t)) >= k:
            rejected = tuple(int(i) for i in np.nonzero(s <= t)[0])
            return RejectionResult(rejected=rejected, k_star=k, threshold=t,
                                   weighted_pvalues=s)
    return RejectionResult(rejected=(), k_star=0, threshold=0.0, weighted_pvalues=s)


def gbh1_weights(gp: GroupedPValues, lam: float) -> GBHWeights:
    """Adaptive group weights w_j = (n_j - R_j + 1)(R + g - 1)/(m(1-lambda)R_j).

    R_j counts p-values <= lambda inside group j, R their total.  R_j = 0
    yields w_j = +inf (the group is never rejected).
    """
    _validate_lambda(lam)
    p = gp.pvalues
    m, g = gp.m, gp.g
    r_per_group = tuple(int(np.count_nonzero(p[idx] <= lam)) for idx in gp.groups)
    r_total = sum(r_per_group)
    w = []
    for j, idx in enumerate(gp.groups):
        n_j, r_j = idx.size, r_per_group[j]
        if r_j == 0:
            w.append(math.inf)
        else:
            w.append((n_j - r_j + 1) * (r_total + g - 1) / (m * (1.0 - lam) * r_j))
    return GBHWeights(w=tuple(w), r_total=r_total, r_per_group=r_per_group)


def gbh1_weights_loo(gp: GroupedPValues, lam: float, k: int) -> GBHWeights:
    """Leave-one-out weights with index k removed from every threshold count.

    w_j = (n_j - R_j^(-k)) * (R^(-k) + g) / (m (1-lambda) (R_j^(-k) + 1)),
    evaluated for every group with its own leave-one-out counts (for groups
    not containing k the counts are unchanged).  Always finite: removing k
    from its group of size n_j caps that group's count at n_j - 1, and the
    denominator count enters as R_j^(-k) + 1 >= 1.  The entry for k's own
    group is the quantity the domination and monotonicity results speak to.
    """
    _validate_lambda(lam)
    if not (0 <= int(k) < gp.m):
        raise ValueError(f"index k={k} outside range(0, {gp.m})")
    k = int(k)
    p = gp.pvalues
    m, g = gp.m, gp.g
    below_k = 1 if p[k] <= lam else 0
    r_per_group = []
    for j, idx in enumerate(gp.groups):
        r_j = int(np.count_nonzero(p[idx] <= lam))
        if gp.labels[k] == j:
            r_j -= below_k
        r_per_group.append(r_j)
    r_total = sum(r_per_group)
    w = []
    for j, idx in enumerate(gp.groups):
        n_j, r_j = idx.size, r_per_group[j]
        w.append((n_j - r_j) * (r_total + g) / (m * (1.0 - lam) * (r_j + 1)))
    return GBHWeights(w=tuple(w), r_total=r_total, r_per_group=tuple(r_per_group))


def gbh1(gp: GroupedPValues, lam: float, alpha: float) -> RejectionResult:
    """Grouped adaptive procedure: weight each group, then step up at alpha.

    The weighted value for members of an infinite-weight group is +inf
    regardless of the raw p-value: weight +inf means no group member sits at
    or below lambda, so those p-values all exceed lambda > 0 and the
    0 * inf corner cannot arise.
    """
    wts = gbh1_weights(gp, lam)
    w_by_index = np.asarray(wts.w, dtype=float)[gp.labels]
    infinite = np.isinf(w_by_index)
    if infinite.any():
        assert (gp.pvalues[infinite] > lam).all()
    scores = np.where(infinite, np.inf, gp.pvalues * np.where(infinite, 1.0, w_by_index))
    return bh_step_up(scores, alpha)


def storey(pvalues, lam: float, alpha: float) -> RejectionResult:
    """Single-group adaptive procedure: scale all p-values by the estimated
    null fraction (m - R + 1)/(m(1-lambda)) and step up at alpha."""
    _validate_lambda(lam)
    _validate_alpha(alpha)
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("storey: pvalues must be a nonempty 1-d vector")
    if np.isnan(p).any() or (p < 0.0).any() or (p > 1.0).any():
        raise ValueError("storey: every p-value must lie in [0, 1]")
    m = p.size
    r = int(np.count_nonzero(p <= lam))
    w = (m - r + 1) / (m * (1.0 - lam))
    return bh_step_up(p * w, alpha)
