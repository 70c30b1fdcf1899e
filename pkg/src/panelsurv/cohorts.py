"""Cohort selection and the standard reports.

Cohorts are named by predicate bundles over spells: startup-size class,
birth epoch, industry code prefix.  The report builders produce the three
standard tables (median-lifetime differences by size and epoch; survival
statistics per industry; quarterly birth and death rates) in both rendered
and machine-readable form.
"""

import logging
from dataclasses import dataclass

from .km import km_estimate, median_lifetime, survival_at
from .lifecourse import EndReason
from .logrank import logrank
from .quarters import parse_quarter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SizeClass:
    """Closed startup-size range; ``max_size`` of None means unbounded."""

    label: str
    min_size: int
    max_size: int | None = None

    def contains(self, size):
        if size < self.min_size:
            return False
        return self.max_size is None or size <= self.max_size


DEFAULT_SIZE_CLASSES = (
    SizeClass("small", 0, 5),
    SizeClass("medium", 6, 20),
    SizeClass("large", 21, None),
)

SMALL_STARTUP = DEFAULT_SIZE_CLASSES[0]


@dataclass(frozen=True)
class BirthEpoch:
    """Closed range of birth quarters."""

    label: str
    first_quarter: int
    last_quarter: int

    def __post_init__(self):
        if self.first_quarter > self.last_quarter:
            raise ValueError("epoch first quarter must not exceed its last")

    def contains(self, quarter):
        return self.first_quarter <= quarter <= self.last_quarter


DEFAULT_EPOCHS = (
    BirthEpoch("1992-2000 Expansion", parse_quarter("1992Q2"), parse_quarter("2000Q4")),
    BirthEpoch("2001 Recession", parse_quarter("2001Q1"), parse_quarter("2001Q4")),
    BirthEpoch("2002-2007 Expansion", parse_quarter("2002Q1"), parse_quarter("2007Q4")),
    BirthEpoch("All birth years", parse_quarter("1992Q2"), parse_quarter("2011Q3")),
)


@dataclass(frozen=True)
class CohortSpec:
    """Conjunction of optional predicates; unset fields mean no restriction."""

    size_class: SizeClass | None = None
    epoch: BirthEpoch | None = None
    naics_prefix: str | None = None

    def matches(self, spell):
        if self.size_class is not None and not self.size_class.contains(spell.startup_size):
            return False
        if self.epoch is not None and not self.epoch.contains(spell.birth_quarter):
            return False
        if self.naics_prefix is not None and not spell.naics.startswith(self.naics_prefix):
            return False
        return True

    def describe(self):
        parts = []
        if self.size_class is not None:
            parts.append(f"size={self.size_class.label}")
        if self.epoch is not None:
            parts.append(f"epoch={self.epoch.label}")
        if self.naics_prefix is not None:
            parts.append(f"naics={self.naics_prefix}")
        return " ".join(parts) if parts else "all spells"


def select_cohort(spells, spec):
    """Spells matching every set predicate (empty result is legal)."""
    return [s for s in spells if spec.matches(s)]


# ---------------------------------------------------------------------------
# quarterly birth / death rates


@dataclass(frozen=True)
class RatePoint:
    quarter: int
    birth_rate: float
    death_rate: float
    n_active: int


def birth_death_rate_series(spells):
    """Quarterly birth and death rates with the active-spell denominator.

    active(q) counts spells with birth <= q <= end; quarters with nothing
    active are absent from the series rather than reported as 0/0.
    """
    spells = list(spells)
    if not spells:
        return []
    first = min(s.birth_quarter for s in spells)
    last = max(s.end_quarter for s in spells)
    span = last - first + 1

    births = [0] * span
    deaths = [0] * span
    delta = [0] * (span + 1)
    for s in spells:
        births[s.birth_quarter - first] += 1
        delta[s.birth_quarter - first] += 1
        delta[s.end_quarter - first + 1] -= 1
        if s.end_reason is EndReason.DEATH:
            deaths[s.end_quarter - first] += 1

    series = []
    active = 0
    for offset in range(span):
        active += delta[offset]
        if active == 0:
            continue
        series.append(RatePoint(
            quarter=first + offset,
            birth_rate=births[offset] / active,
            death_rate=deaths[offset] / active,
            n_active=active,
        ))
    return series


# ---------------------------------------------------------------------------
# median-difference matrix (focal industry vs. the rest)


@dataclass(frozen=True)
class MedianDiffCell:
    size_label: str
    epoch_label: str
    status: str                      # "ok" | "not_reached" | "empty"
    diff_years: float | None
    significant: bool | None
    focal_count: int
    rest_count: int
    z: float | None
    p: float | None


ALL_SIZES_LABEL = "All sizes"


def median_diff_table(spells, size_classes=DEFAULT_SIZE_CLASSES,
                      epochs=DEFAULT_EPOCHS, focal_naics_prefix="722110"):
    """Median-lifetime differences, one cell per size class x epoch.

    Each cell is the focal industry's median minus the median over the whole
    cell (focal included), so a focal selection that matches everything gives
    exactly zero.  The 5%-level significance flag comes from the logrank test
    of focal against its complement, the only disjoint comparison; with an
    empty complement there is no evidence of a difference and the flag stays
    off.  A trailing "All sizes" row is computed over the un-partitioned
    cohort, not aggregated from the cells.  Cells where either median is not
    reached are incomparable; cells with no focal spells are absent.
    """
    cells = []
    row_specs = [(cls.label, cls) for cls in size_classes] + [(ALL_SIZES_LABEL, None)]
    for size_label, size_class in row_specs:
        for epoch in epochs:
            base = [s for s in spells
                    if epoch.contains(s.birth_quarter)
                    and (size_class is None or size_class.contains(s.startup_size))]
            focal = [s for s in base if s.naics.startswith(focal_naics_prefix)]
            rest = [s for s in base if not s.naics.startswith(focal_naics_prefix)]
            cells.append(_median_diff_cell(size_label, epoch.label, focal, rest))
    return cells


def _median_diff_cell(size_label, epoch_label, focal, rest):
    common = dict(size_label=size_label, epoch_label=epoch_label,
                  focal_count=len(focal), rest_count=len(rest))
    if not focal:
        return MedianDiffCell(status="empty", diff_years=None, significant=False,
                              z=None, p=None, **common)
    z = p = None
    significant = False
    if rest:
        result = logrank(focal, rest)
        z, p = result.z, result.p_two_sided
        significant = bool(p is not None and p < 0.05)
    focal_median = median_lifetime(km_estimate(focal))
    base_median = median_lifetime(km_estimate(focal + rest))
    if not (focal_median.reached and base_median.reached):
        return MedianDiffCell(status="not_reached", diff_years=None,
                              significant=significant, z=z, p=p, **common)
    diff = (focal_median.quarters - base_median.quarters) / 4
    return MedianDiffCell(status="ok", diff_years=diff, significant=significant,
                          z=z, p=p, **common)


def render_median_diff(cell):
    """Plain-text cell: two-decimal years, '*' when significant at 5%."""
    if cell.status == "empty":
        return "NA"
    if cell.status == "not_reached":
        return "NR"
    text = f"{cell.diff_years:.2f}"
    return text + "*" if cell.significant else text


# ---------------------------------------------------------------------------
# per-industry survival report


@dataclass(frozen=True)
class IndustryRow:
    name: str
    naics_prefix: str
    count: int
    first_year_survival: float | None
    median: object | None            # MedianLifetime
    median_small: object | None
    z: float | None
    p: float | None
    is_baseline: bool


def industry_report(spells, industries, baseline_prefix):
    """One row per (name, naics prefix): survival statistics plus a logrank
    comparison against the baseline cohort (all startup sizes).

    Establishments in the baseline cohort are removed from every other row,
    so each comparison is against disjoint groups; the baseline's own row
    carries no test.  Unknown prefixes yield a zero-count row.
    """
    spells = list(spells)
    baseline = [s for s in spells if s.naics.startswith(baseline_prefix)]
    rows = []
    for name, prefix in industries:
        is_baseline = prefix == baseline_prefix
        cohort = [s for s in spells if s.naics.startswith(prefix)]
        if not is_baseline:
            cohort = [s for s in cohort if not s.naics.startswith(baseline_prefix)]
        if not cohort:
            logger.warning("industry %r (naics %s) matched no spells", name, prefix)
            rows.append(IndustryRow(name=name, naics_prefix=prefix, count=0,
                                    first_year_survival=None, median=None,
                                    median_small=None, z=None, p=None,
                                    is_baseline=is_baseline))
            continue

        curve = km_estimate(cohort)
        small = [s for s in cohort if SMALL_STARTUP.contains(s.startup_size)]
        z = p = None
        if not is_baseline and baseline:
            result = logrank(cohort, baseline)
            z, p = result.z, result.p_two_sided
        rows.append(IndustryRow(
            name=name,
            naics_prefix=prefix,
            count=len(cohort),
            first_year_survival=survival_at(curve, 4),
            median=median_lifetime(curve),
            median_small=median_lifetime(km_estimate(small)) if small else None,
            z=z,
            p=p,
            is_baseline=is_baseline,
        ))
    return rows


# ---------------------------------------------------------------------------
# rendering conventions shared by the reports

INDUSTRY_REPORT_COLUMNS = ("name", "naics", "1-year survival rate",
                           "median lifetime", "median small-only",
                           "z-stat", "p-value", "count")


def render_p(p):
    if p is None:
        return "-"
    if p < 0.0001:
        return "<.0001"
    return f"{p:.3f}"


def render_z(z):
    return "-" if z is None else f"{z:.2f}"


def render_survival(value):
    return "-" if value is None else f"{value:.2f}"


def render_median(median):
    return "-" if median is None else median.render()


def render_count(count):
    """Counts disclosed to the nearest hundred, thousands-separated."""
    return f"{round(count / 100) * 100:,}"


def industry_report_rendered_rows(rows):
    """Rendered cells in the fixed column order of INDUSTRY_REPORT_COLUMNS."""
    out = []
    for row in rows:
        out.append([
            row.name,
            row.naics_prefix,
            render_survival(row.first_year_survival),
            render_median(row.median),
            render_median(row.median_small),
            render_z(row.z),
            render_p(row.p),
            render_count(row.count),
        ])
    return out


#: Default industry lists for the two survival tables: the most numerous
#: startup categories, and a broader selection of comparison industries.
TOP_STARTUP_INDUSTRIES = (
    ("All service-providing (excluding baseline)", ""),
    ("Full-service restaurants", "722110"),
    ("Limited-service restaurants", "722211"),
    ("Offices of real estate agents and brokers", "531210"),
    ("Offices of physicians", "621111"),
    ("Offices of lawyers", "541110"),
    ("Other scientific and technical consulting services", "541690"),
    ("Custom computer programming services", "541511"),
    ("Computer systems design services", "541512"),
    ("Insurance agencies and brokerages", "524210"),
    ("Landscaping services", "561730"),
    ("Administrative management consulting services", "541611"),
    ("Janitorial services", "561720"),
    ("General automotive repair", "811111"),
    ("Offices of dentists", "621210"),
    ("Engineering services", "541330"),
)

SELECTED_INDUSTRIES = (
    ("Record stores", "451220"),
    ("Computer training", "611420"),
    ("Amusement arcades", "713120"),
    ("Photofinishing", "81292"),
    ("Hobby, toy, and game stores", "45112"),
    ("Electronics and appliance stores", "443"),
    ("Packaging and labeling services", "561910"),
    ("Household goods repair and maintenance", "8114"),
    ("Clothing and clothing accessories stores", "448"),
    ("Book stores", "451211"),
    ("Electronic equipment repair and maintenance", "81121"),
    ("Specialty food stores", "4452"),
    ("Cosmetic and beauty supply stores", "451"),
    ("Photography studios", "541921"),
    ("Locksmiths", "561622"),
    ("Furniture and home furnishings stores", "442"),
    ("Sporting goods stores", "45111"),
    ("Automotive repair and maintenance", "8111"),
    ("Hair, nail, and skin care services", "81211"),
    ("Drinking places, alcoholic beverages", "722410"),
    ("Building material and garden supply stores", "444"),
    ("Automobile driving schools", "611692"),
    ("Sewing, needlework, and piece goods stores", "45113"),
    ("Drycleaning and laundry services", "8123"),
    ("Convenience stores", "44512"),
    ("Pet care services (except veterinary)", "812910"),
    ("Musical instrument and supplies stores", "45114"),
)
