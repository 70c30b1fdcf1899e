"""Two-group logrank (Mantel-Cox) test and its permutation-based calibration.

At each pooled event time the observed group-1 deaths are compared with the
expectation under a shared hazard::

    Z = sum_i (d_1i - n_1i d_i / n_i)
        / sqrt( sum_i n_1i n_2i d_i (n_i - d_i) / (n_i^2 (n_i - 1)) )

Event times where only one spell is at risk contribute nothing to either
sum.  The numerator terms are evaluated as (d_1i n_2i - d_2i n_1i) / n_i -
algebraically identical, but the integer products keep label swaps exactly
antisymmetric in floating point.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import EstimationError
from .km import durations_from_spells
from .validation import check_durations_events

#: Default z thresholds at which permutation tail probabilities are compared
#: against the standard normal (10%, 5%, 1% two-sided points).
DEFAULT_TAIL_THRESHOLDS = (1.645, 1.96, 2.576)


@dataclass(frozen=True)
class LogrankTimeRow:
    """Per-event-time contributions; ``variance_term`` is 0 at skipped times."""

    t: int
    d1: int
    n1: int
    d: int
    n: int
    expected1: float
    variance_term: float


@dataclass(frozen=True)
class LogrankResult:
    z: float | None
    p_two_sided: float | None
    n1: int
    n2: int
    events1: int
    events2: int
    per_time: tuple

    @property
    def degenerate(self):
        """True when no event time contributed variance; z is undefined."""
        return self.z is None

    def as_dict(self):
        return {
            "z": self.z,
            "p_two_sided": self.p_two_sided,
            "degenerate": self.degenerate,
            "n_group1": self.n1,
            "n_group2": self.n2,
            "events_group1": self.events1,
            "events_group2": self.events2,
            "per_time": [
                {"t": row.t, "d1": row.d1, "n1": row.n1, "d": row.d,
                 "n": row.n, "expected1": row.expected1,
                 "variance_term": row.variance_term}
                for row in self.per_time
            ],
        }


def _at_risk(sorted_durations, times):
    return sorted_durations.size - np.searchsorted(sorted_durations, times, side="left")

def _death_counts(durations, events, times):
    ages = durations[events]
    if ages.size == 0:
        return np.zeros(times.size, dtype=np.int64)
    idx = np.searchsorted(times, ages)
    # ages not present in `times` cannot occur for pooled death times
    return np.bincount(idx, minlength=times.size).astype(np.int64)


def _z_terms(n1, d1, n, d):
    """Vectorized numerator terms and variance terms over pooled event times."""
    n2 = n - n1
    d2 = d - d1
    usable = n >= 2
    with np.errstate(divide="ignore", invalid="ignore"):
        numerator_terms = np.where(usable, (d1 * n2 - d2 * n1) / n, 0.0)
        variance_terms = np.where(
            usable, n1 * n2 * d * (n - d) / (n * n * (n - 1.0)), 0.0)
    return numerator_terms, variance_terms


def logrank_from_arrays(durations1, events1, durations2, events2):
    """Logrank test on raw duration/event arrays."""
    durations1, events1 = check_durations_events(durations1, events1)
    durations2, events2 = check_durations_events(durations2, events2)
    if durations1.size == 0 or durations2.size == 0:
        raise EstimationError("logrank needs two non-empty groups")

    pooled = np.concatenate([durations1, durations2])
    pooled_events = np.concatenate([events1, events2])
    times = np.unique(pooled[pooled_events])

    sorted1 = np.sort(durations1)
    sorted_pooled = np.sort(pooled)
    n1 = _at_risk(sorted1, times)
    n = _at_risk(sorted_pooled, times)
    d1 = _death_counts(durations1, events1, times)
    d = _death_counts(pooled, pooled_events, times)

    numerator_terms, variance_terms = _z_terms(
        n1.astype(np.float64), d1.astype(np.float64),
        n.astype(np.float64), d.astype(np.float64))

    with np.errstate(divide="ignore", invalid="ignore"):
        expected1 = np.where(n > 0, n1 * d / n, 0.0)
    per_time = tuple(
        LogrankTimeRow(t=int(times[i]), d1=int(d1[i]), n1=int(n1[i]),
                       d=int(d[i]), n=int(n[i]),
                       expected1=float(expected1[i]),
                       variance_term=float(variance_terms[i]))
        for i in range(times.size)
    )

    variance = float(np.sum(variance_terms))
    counts = dict(n1=int(durations1.size), n2=int(durations2.size),
                  events1=int(events1.sum()), events2=int(events2.sum()))
    if variance <= 0.0:
        return LogrankResult(z=None, p_two_sided=None, per_time=per_time, **counts)

    z = float(np.sum(numerator_terms)) / math.sqrt(variance)
    p = float(2.0 * norm.sf(abs(z)))
    return LogrankResult(z=z, p_two_sided=p, per_time=per_time, **counts)


def logrank(group1, group2):
    """Logrank test on two disjoint spell collections."""
    group1, group2 = list(group1), list(group2)
    if not group1 or not group2:
        raise EstimationError("logrank needs two non-empty groups")
    overlap = {s.establishment_id for s in group1} & \
              {s.establishment_id for s in group2}
    if overlap:
        raise ValueError(
            f"groups share {len(overlap)} establishment ids; "
            "logrank requires disjoint groups")
    d1, e1 = durations_from_spells(group1)
    d2, e2 = durations_from_spells(group2)
    return logrank_from_arrays(d1, e1, d2, e2)


@dataclass(frozen=True)
class PermutationReport:
    """Empirical null distribution of Z versus the standard normal.

    ``tail_probs`` are two-sided, P(|Z| > threshold); ``upper_tail_probs``
    are one-sided, P(Z > threshold).  ``max_abs_disagreement`` is the worst
    gap to the corresponding normal probability across both conventions.
    """

    replications: int
    valid_replications: int
    degenerate_replications: int
    group1_size: int
    seed: int
    thresholds: tuple
    tail_probs: tuple
    normal_probs: tuple
    upper_tail_probs: tuple
    upper_normal_probs: tuple
    max_abs_disagreement: float
    z_mean: float
    z_var: float

    def as_dict(self):
        return {
            "replications": self.replications,
            "valid_replications": self.valid_replications,
            "degenerate_replications": self.degenerate_replications,
            "group1_size": self.group1_size,
            "seed": self.seed,
            "thresholds": list(self.thresholds),
            "tail_probs": list(self.tail_probs),
            "normal_probs": list(self.normal_probs),
            "upper_tail_probs": list(self.upper_tail_probs),
            "upper_normal_probs": list(self.upper_normal_probs),
            "max_abs_disagreement": self.max_abs_disagreement,
            "z_mean": self.z_mean,
            "z_var": self.z_var,
        }


def _replication_rng(seed, replication):
    # Philox is counter-based: one independent stream per replication index,
    # so a parallel schedule cannot change any stream.
    key = (int(seed) & ((1 << 64) - 1)) | ((int(replication) + 1) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def permutation_null_check(pooled, group1_size, replications, seed,
                           thresholds=DEFAULT_TAIL_THRESHOLDS,
                           max_degenerate_fraction=0.05):
    """Estimate the null distribution of Z by relabeling the pooled sample.

    Each replication assigns a uniformly random subset of ``group1_size``
    spells to group 1, holding each spell's censoring with it, and records
    the logrank z.  Degenerate replications (no usable event time) are
    discarded and counted; more than ``max_degenerate_fraction`` of them is
    an error.  Deterministic given ``seed``.
    """
    pooled = list(pooled)
    n = len(pooled)
    if not 0 < group1_size < n:
        raise ValueError("group1_size must be strictly between 0 and the pooled size")
    if replications < 1:
        raise ValueError("replications must be at least 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")

    durations, events = durations_from_spells(pooled)
    times = np.unique(durations[events])
    if times.size == 0:
        raise EstimationError("pooled sample has no deaths; nothing to permute")
    sorted_pooled = np.sort(durations)
    n_all = _at_risk(sorted_pooled, times).astype(np.float64)
    d_all = _death_counts(durations, events, times).astype(np.float64)

    # Per-spell bucket indices: how many event times the spell is at risk for,
    # and (for deaths) which event time it dies at.
    risk_idx = np.searchsorted(times, durations, side="right")
    death_idx = np.searchsorted(times, durations)

    zs = np.empty(replications, dtype=np.float64)
    n_valid = 0
    n_degenerate = 0
    k = times.size
    for rep in range(replications):
        rng = _replication_rng(seed, rep)
        members = rng.permutation(n)[:group1_size]
        counts = np.bincount(risk_idx[members], minlength=k + 1)
        n1 = group1_size - np.cumsum(counts)[:k].astype(np.float64)
        member_deaths = members[events[members]]
        d1 = np.bincount(death_idx[member_deaths], minlength=k).astype(np.float64)

        numerator_terms, variance_terms = _z_terms(n1, d1, n_all, d_all)
        variance = float(np.sum(variance_terms))
        if variance <= 0.0:
            n_degenerate += 1
            continue
        zs[n_valid] = float(np.sum(numerator_terms)) / math.sqrt(variance)
        n_valid += 1

    if n_degenerate / replications > max_degenerate_fraction:
        raise EstimationError(
            f"{n_degenerate} of {replications} permutation replications were "
            "degenerate; the pooled sample is too sparse for calibration")

    zs = zs[:n_valid]
    thresholds = tuple(float(t) for t in thresholds)
    tail = tuple(float(np.mean(np.abs(zs) > t)) for t in thresholds)
    normal_tail = tuple(float(2.0 * norm.sf(t)) for t in thresholds)
    upper = tuple(float(np.mean(zs > t)) for t in thresholds)
    normal_upper = tuple(float(norm.sf(t)) for t in thresholds)
    disagreement = max(
        max(abs(a - b) for a, b in zip(tail, normal_tail)),
        max(abs(a - b) for a, b in zip(upper, normal_upper)),
    )

    return PermutationReport(
        replications=replications,
        valid_replications=n_valid,
        degenerate_replications=n_degenerate,
        group1_size=group1_size,
        seed=int(seed),
        thresholds=thresholds,
        tail_probs=tail,
        normal_probs=normal_tail,
        upper_tail_probs=upper,
        upper_normal_probs=normal_upper,
        max_abs_disagreement=float(disagreement),
        z_mean=float(np.mean(zs)),
        z_var=float(np.var(zs)),
    )
