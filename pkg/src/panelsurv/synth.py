"""Synthetic quarterly panels with known hazard and censoring processes.

The generator draws, per establishment, a birth quarter, a startup size, a
true lifetime from the discrete per-quarter hazard, and an independent
ownership-change age.  Records carry constant employment from birth until
death, ownership change, or the window end, whichever observation ends
first.  Everything is driven by a counter-based (Philox) stream, so a run
is fully determined by the seed.

Death and censoring ages are drawn independently; when both land on the
same quarter the death is emitted (the sale draw never masks a death), so
the observed-data hazard at each age equals the specified one exactly and
the product-limit estimator stays unbiased against ``true_survival``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .ingest import QuarterlyRecord, SECTOR_PRIVATE
from .lifecourse import DEFAULT_WINDOW, ObservationWindow
from .quarters import format_quarter, parse_quarter

HAZARD_KINDS = ("constant", "piecewise_by_age", "u_shaped")


@dataclass(frozen=True)
class HazardSpec:
    """Per-quarter death probabilities by age; the last value extends forever."""

    probs: tuple
    kind: str = "piecewise_by_age"
    label: str = ""

    def __post_init__(self):
        if self.kind not in HAZARD_KINDS:
            raise ValueError(f"unknown hazard kind: {self.kind!r}")
        if len(self.probs) == 0:
            raise ValueError("hazard needs at least one probability")
        if any(not 0.0 <= p < 1.0 for p in self.probs):
            raise ValueError("hazard probabilities must lie in [0, 1)")

    @classmethod
    def constant(cls, prob, label=""):
        return cls(probs=(float(prob),), kind="constant", label=label)

    @classmethod
    def u_shaped(cls, probs, label=""):
        return cls(probs=tuple(float(p) for p in probs), kind="u_shaped", label=label)

    def at_age(self, age_quarters):
        if age_quarters < 1:
            raise ValueError("hazard is defined for ages >= 1")
        return self.probs[min(age_quarters, len(self.probs)) - 1]


def true_survival(hazard, age_quarters):
    """Analytic survival: product of (1 - h_k) over k = 1..age."""
    if age_quarters < 0:
        raise ValueError("age must be non-negative")
    out = 1.0
    for k in range(1, age_quarters + 1):
        out *= 1.0 - hazard.at_age(k)
    return out


#: Startup-size mix used when a panel spec does not override it.
DEFAULT_SIZE_DIST = ((1, 0.40), (3, 0.30), (5, 0.10), (10, 0.12), (25, 0.08))


@dataclass(frozen=True)
class PanelSpec:
    """How many establishments to draw and how they enter the panel.

    ``entry`` is either ``"uniform"`` over the window's birth quarters or a
    4-tuple of seasonal weights by quarter-of-year; ``first_birth_quarter``
    and ``last_birth_quarter`` optionally clamp the entry range (a fixture
    whose long-age estimates must be free of window-boundary masking needs
    births early enough to observe those ages).  ``censor_prob`` is the
    independent per-quarter ownership-change probability.
    """

    n_establishments: int
    seed: int
    window: ObservationWindow = DEFAULT_WINDOW
    entry: object = "uniform"
    censor_prob: float = 0.0
    size_dist: tuple = DEFAULT_SIZE_DIST
    naics: str = "722110"
    id_prefix: str = "E"
    first_birth_quarter: int | None = None
    last_birth_quarter: int | None = None

    def __post_init__(self):
        if self.n_establishments < 1:
            raise ValueError("n_establishments must be positive")
        if not 0.0 <= self.censor_prob < 1.0:
            raise ValueError("censor_prob must lie in [0, 1)")
        total = sum(p for _, p in self.size_dist)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"size distribution probabilities sum to {total}, not 1")
        if self.entry != "uniform":
            weights = tuple(self.entry)
            if len(weights) != 4 or sum(weights) <= 0:
                raise ValueError("seasonal entry needs 4 non-negative weights")


@dataclass(frozen=True)
class TruthRecord:
    """Ground truth for one establishment: what the generator actually drew."""

    establishment_id: str
    birth_quarter: int
    death_quarter: int | None     # true death, None if beyond the horizon
    censor_quarter: int | None    # ownership censoring actually applied


def _first_crossing(uniforms, cumulative_survival):
    """Age at which each uniform crosses the survival curve (horizon+1 = never).

    ``cumulative_survival[t]`` is P(alive past age t) for t = 0..horizon.
    The drawn age is the smallest t >= 1 with u >= S(t).
    """
    horizon = cumulative_survival.size - 1
    # S is non-increasing; count how many of S(1..horizon) exceed u.
    ascending = cumulative_survival[1:][::-1]
    below = np.searchsorted(ascending, uniforms, side="right")
    return (horizon - below + 1).astype(np.int64)


def generate_panel(spec, hazard):
    """Draw a synthetic panel; returns (records, truth rows).

    Records are in the exact ingestion format; truth rows let round-trip
    tests compare reconstructed spells against what was drawn.
    """
    window = spec.window
    first = window.start_quarter + 1
    last = window.end_quarter
    if spec.first_birth_quarter is not None:
        first = max(first, spec.first_birth_quarter)
    if spec.last_birth_quarter is not None:
        last = min(last, spec.last_birth_quarter)
    birth_quarters = np.arange(first, last + 1)
    if birth_quarters.size == 0:
        raise ValueError("window is too small for any birth")
    horizon = window.n_quarters

    if spec.entry == "uniform":
        weights = np.ones(birth_quarters.size)
    else:
        seasonal = np.asarray(spec.entry, dtype=np.float64)
        weights = seasonal[birth_quarters % 4]
    weights = weights / weights.sum()

    rng = np.random.Generator(np.random.Philox(key=int(spec.seed)))
    n = spec.n_establishments

    births = rng.choice(birth_quarters, size=n, p=weights)
    sizes = rng.choice(np.array([s for s, _ in spec.size_dist], dtype=np.int64),
                       size=n, p=np.array([p for _, p in spec.size_dist]))

    death_surv = np.ones(horizon + 1)
    for t in range(1, horizon + 1):
        death_surv[t] = death_surv[t - 1] * (1.0 - hazard.at_age(t))
    lifetimes = _first_crossing(rng.random(n), death_surv)

    if spec.censor_prob > 0.0:
        censor_surv = np.ones(horizon + 1)
        censor_surv[1:] = np.cumprod(np.full(horizon, 1.0 - spec.censor_prob))
        censor_ages = _first_crossing(rng.random(n), censor_surv)
    else:
        censor_ages = np.full(n, horizon + 1, dtype=np.int64)

    max_ages = window.end_quarter - births + 1
    ownership = (censor_ages < lifetimes) & (censor_ages <= max_ages)
    observed_ages = np.minimum(np.minimum(lifetimes, censor_ages), max_ages)

    width = len(str(n - 1)) if n > 1 else 1
    records = []
    truths = []
    for i in range(n):
        establishment_id = f"{spec.id_prefix}{i:0{width}d}"
        birth = int(births[i])
        size = int(sizes[i])
        span = int(observed_ages[i])
        last = span - 1
        for k in range(span):
            records.append(QuarterlyRecord(
                establishment_id=establishment_id,
                quarter=birth + k,
                employment=size,
                naics=spec.naics,
                sector_kind=SECTOR_PRIVATE,
                multi_unit=False,
                ownership_change=bool(ownership[i]) and k == last,
            ))
        truths.append(TruthRecord(
            establishment_id=establishment_id,
            birth_quarter=birth,
            death_quarter=birth + int(lifetimes[i]) - 1
            if lifetimes[i] <= horizon else None,
            censor_quarter=birth + int(censor_ages[i]) - 1
            if ownership[i] else None,
        ))
    return records, truths


TRUTH_COLUMNS = ("establishment_id", "birth", "true_death", "ownership_censor")


def write_truth(path, truths):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_COLUMNS)
        for t in truths:
            writer.writerow([
                t.establishment_id,
                format_quarter(t.birth_quarter),
                format_quarter(t.death_quarter) if t.death_quarter is not None else "",
                format_quarter(t.censor_quarter) if t.censor_quarter is not None else "",
            ])


def read_truth(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRUTH_COLUMNS:
            raise ValueError(f"unexpected truth file header: {header}")
        out = []
        for row in reader:
            if not row:
                continue
            out.append(TruthRecord(
                establishment_id=row[0],
                birth_quarter=parse_quarter(row[1]),
                death_quarter=parse_quarter(row[2]) if row[2] else None,
                censor_quarter=parse_quarter(row[3]) if row[3] else None,
            ))
    return out
