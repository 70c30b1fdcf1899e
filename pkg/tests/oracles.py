"""Brute-force reference computations used to pin expected test values.

Everything here works directly from the definitions, in exact rational
arithmetic, one risk set at a time.  Nothing is shared with the package
under test, so these stay valid as an independent cross-check.
"""

import math
from fractions import Fraction


def km_oracle(pairs):
    """Product-limit curve from (age, died) pairs by direct risk-set enumeration.

    Returns a list of rows, one per distinct death age, each a dict with
    exact-Fraction survival and variance plus the s/c/n/d bookkeeping.
    """
    pairs = list(pairs)
    n0 = len(pairs)
    event_times = sorted({age for age, died in pairs if died})

    rows = []
    surv = Fraction(1)
    gw_sum = Fraction(0)
    prev_n = n0
    prev_d = 0
    first = True
    for t in event_times:
        n = sum(1 for age, _ in pairs if age >= t)
        d = sum(1 for age, died in pairs if died and age == t)
        s = n0 if first else prev_n - prev_d
        c = s - n
        surv *= 1 - Fraction(d, n)
        if n > d:
            gw_sum += Fraction(d, n * (n - d))
            var = surv * surv * gw_sum
        else:
            var = Fraction(0)
        rows.append({"t": t, "s": s, "c": c, "n": n, "d": d,
                     "survival": surv, "variance": var})
        prev_n, prev_d, first = n, d, False
    return rows


def survival_at_oracle(rows, age):
    """Step-function lookup: survival at the largest event time <= age."""
    surv = Fraction(1)
    for row in rows:
        if row["t"] <= age:
            surv = row["survival"]
    return surv


def median_oracle(rows, max_observed_age):
    """Smallest event time with survival <= 1/2, else None (not reached)."""
    for row in rows:
        if row["survival"] <= Fraction(1, 2):
            return row["t"]
    return None


def conditional_rates_oracle(rows, max_age):
    """rate(t) = S(t)/S(t-1) for t = 1..max_age, omitting once S(t-1) = 0."""
    rates = []
    for t in range(1, max_age + 1):
        prev = survival_at_oracle(rows, t - 1)
        if prev == 0:
            break
        rates.append((t, survival_at_oracle(rows, t) / prev))
    return rates


def logrank_oracle(pairs1, pairs2):
    """Two-group Mantel-Cox statistic evaluated term by term in Fractions.

    Returns (z, numerator, variance) as floats; z is None when no event
    time contributes variance.
    """
    pooled = list(pairs1) + list(pairs2)
    event_times = sorted({age for age, died in pooled if died})
    num = Fraction(0)
    var = Fraction(0)
    for t in event_times:
        n1 = sum(1 for age, _ in pairs1 if age >= t)
        n2 = sum(1 for age, _ in pairs2 if age >= t)
        n = n1 + n2
        if n <= 1:
            continue
        d1 = sum(1 for age, died in pairs1 if died and age == t)
        d2 = sum(1 for age, died in pairs2 if died and age == t)
        d = d1 + d2
        num += d1 - Fraction(n1 * d, n)
        var += Fraction(n1 * n2 * d * (n - d), n * n * (n - 1))
    if var == 0:
        return None, float(num), 0.0
    return float(num) / math.sqrt(float(var)), float(num), float(var)
