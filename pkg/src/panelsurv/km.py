"""Product-limit survival estimation for right-censored establishment spells.

The survival curve is the running product of per-event-time conditional
survival fractions::

    S(t) = prod over event times t_i <= t of (1 - d_i / n_i)

where event times are the distinct ages (in quarters) at which at least one
death occurs, ``d_i`` deaths happen at ``t_i``, and ``n_i`` establishments
are at risk there.  The risk table keeps the full bookkeeping per event
time: ``s`` alive just prior, ``c`` censored since the previous event time,
``n = s - c`` at risk, ``d`` deaths.  A spell censored exactly at an event
time stays in the risk set at that time; only censorings strictly earlier
remove it.

Survival values are computed as exact integer product ratios, one correctly
rounded float division per event time, so with no censoring the curve equals
the empirical survivor fraction bit for bit.  Each ratio's numerator and
denominator are running products of counts; Python integers keep them exact.
"""

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .errors import EstimationError
from .validation import check_durations_events, check_age


@dataclass(frozen=True)
class SurvivalCurve:
    """Risk table plus survival and variance at each event time.

    All arrays are aligned with ``times`` (strictly increasing event ages).
    ``max_observed_age`` is the largest age in the data, censored spells
    included - it bounds how far the curve is supported.
    """

    times: np.ndarray
    s: np.ndarray
    c: np.ndarray
    n: np.ndarray
    d: np.ndarray
    survival: np.ndarray
    variance: np.ndarray
    n0: int
    max_observed_age: int

    def __len__(self):
        return len(self.times)


def durations_from_spells(spells):
    """Extract (durations, event indicators) arrays from spells."""
    durations = np.fromiter((s.lifetime_quarters for s in spells),
                            dtype=np.int64, count=len(spells))
    events = np.fromiter((s.is_death for s in spells),
                         dtype=bool, count=len(spells))
    return durations, events


def km_curve(durations, events):
    """Fit the product-limit curve to duration/event arrays.

    Raises :class:`EstimationError` on empty input.  An all-censored input
    is legal and yields an empty event-time list (survival identically 1).
    """
    durations, events = check_durations_events(durations, events)
    if durations.size == 0:
        raise EstimationError("cannot estimate a survival curve from zero spells")

    n0 = int(durations.size)
    max_observed_age = int(durations.max())
    sorted_durations = np.sort(durations)
    times = np.unique(durations[events])

    # At risk at t: every spell, dead or censored, whose age reaches t.
    n = n0 - np.searchsorted(sorted_durations, times, side="left")
    d = np.zeros(times.size, dtype=np.int64)
    death_ages = durations[events]
    if death_ages.size:
        d = np.bincount(np.searchsorted(times, death_ages),
                        minlength=times.size).astype(np.int64)

    # s: alive just prior to each event time; c: censored since the last one.
    s = np.empty_like(n)
    if times.size:
        s[0] = n0
        s[1:] = n[:-1] - d[:-1]
    c = s - n

    survival = np.ones(times.size, dtype=np.float64)
    numerator = 1
    denominator = 1
    for i in range(times.size):
        numerator *= int(n[i]) - int(d[i])
        denominator *= int(n[i])
        survival[i] = numerator / denominator

    curve = SurvivalCurve(
        times=times.astype(np.int64), s=s.astype(np.int64), c=c.astype(np.int64),
        n=n.astype(np.int64), d=d, survival=survival,
        variance=np.zeros(times.size, dtype=np.float64),
        n0=n0, max_observed_age=max_observed_age,
    )
    return greenwood_variance(curve)


def km_estimate(spells):
    """Product-limit curve from a spell collection (variance included)."""
    spells = list(spells)
    if not spells:
        raise EstimationError("cannot estimate a survival curve from zero spells")
    durations, events = durations_from_spells(spells)
    return km_curve(durations, events)


def greenwood_variance(curve):
    """Return the curve with the variance column (re)computed.

    variance(t) = S(t)^2 * sum over t_i <= t of d_i / (n_i (n_i - d_i)).
    Where the curve reaches zero the n_i = d_i term blows up against the
    vanishing S(t)^2 factor; the variance there is zero.
    """
    n = curve.n.astype(np.float64)
    d = curve.d.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(n > d, d / (n * (n - d)), np.inf)
        variance = curve.survival ** 2 * np.cumsum(terms)
    variance[curve.survival == 0.0] = 0.0
    return replace(curve, variance=variance)


def survival_at(curve, age_quarters):
    """Step-function lookup: S at the largest event time <= age (1 before any)."""
    age = check_age(age_quarters)
    idx = np.searchsorted(curve.times, age, side="right")
    if idx == 0:
        return 1.0
    return float(curve.survival[idx - 1])


@dataclass(frozen=True)
class MedianLifetime:
    """Median age in quarters, or a not-reached marker with the last observed age."""

    quarters: int | None
    last_observed_age: int

    @property
    def reached(self):
        return self.quarters is not None

    @property
    def years(self):
        return self.quarters / 4 if self.reached else None

    def render(self):
        """Two-decimal years, prefixed '>' when the median was not reached."""
        if self.reached:
            return f"{self.quarters / 4:.2f}"
        return f">{self.last_observed_age / 4:.2f}"


def median_lifetime(curve):
    """Smallest event time with S <= 1/2; not-reached marker otherwise."""
    below = np.nonzero(curve.survival <= 0.5)[0]
    if below.size:
        return MedianLifetime(quarters=int(curve.times[below[0]]),
                              last_observed_age=curve.max_observed_age)
    return MedianLifetime(quarters=None, last_observed_age=curve.max_observed_age)


def conditional_quarterly_rates(curve):
    """Per-quarter conditional survival: rate(t) = S(t)/S(t-1), S(0) = 1.

    Emitted for every age from 1 through the last observed age, stopping
    once the curve hits zero (the ratio is undefined from there on).
    """
    rates = []
    previous = 1.0
    for t in range(1, curve.max_observed_age + 1):
        if previous == 0.0:
            break
        current = survival_at(curve, t)
        rates.append((t, current / previous))
        previous = current
    return rates


class KaplanMeierEstimator(BaseEstimator):
    """Product-limit estimator with a scikit-learn style interface.

    Fit on durations (ages in quarters) and event indicators; ``predict``
    evaluates the fitted step function at arbitrary ages.

    >>> est = KaplanMeierEstimator().fit([1, 2, 3, 4, 5], [1, 0, 1, 1, 0])
    >>> est.predict([0, 1, 3])
    array([1.        , 0.8       , 0.53333333])
    """

    def fit(self, durations, event_observed):
        self.curve_ = km_curve(durations, event_observed)
        self.median_ = median_lifetime(self.curve_)
        return self

    def predict(self, ages):
        """Survival probability at each age (vectorized step lookup)."""
        self._check_fitted()
        ages = np.asarray(ages)
        if np.any(ages < 0):
            raise ValueError("ages must be non-negative")
        idx = np.searchsorted(self.curve_.times, ages, side="right")
        padded = np.concatenate(([1.0], self.curve_.survival))
        return padded[idx]

    def survival_at(self, age_quarters):
        self._check_fitted()
        return survival_at(self.curve_, age_quarters)

    def conditional_quarterly_rates(self):
        self._check_fitted()
        return conditional_quarterly_rates(self.curve_)

    def _check_fitted(self):
        if not hasattr(self, "curve_"):
            raise EstimationError("estimator is not fitted; call fit first")
