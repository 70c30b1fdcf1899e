"""Life-course reconstruction: from quarterly records to establishment spells.

Birth is the first quarter with positive employment inside the observation
window; death is the last positive quarter when the establishment then
disappears for good.  Establishments already alive at the window start have
unknown ages and are only counted, never turned into spells.  Interior
quarters with zero or missing employment do not split a spell.
"""

import csv
import logging
from dataclasses import dataclass, replace
from enum import Enum

from .quarters import format_quarter, parse_quarter

logger = logging.getLogger(__name__)


class EndReason(str, Enum):
    DEATH = "death"
    CENSORED_WINDOW_END = "censored_window_end"
    CENSORED_OWNERSHIP_CHANGE = "censored_ownership_change"


@dataclass(frozen=True)
class ObservationWindow:
    """Observed quarter range; births are only credited strictly after the start."""

    start_quarter: int
    end_quarter: int

    def __post_init__(self):
        if self.start_quarter >= self.end_quarter:
            raise ValueError("window start must precede window end")

    @property
    def n_quarters(self):
        return self.end_quarter - self.start_quarter + 1


#: 1992Q1 through 2011Q3, the default panel extent.
DEFAULT_WINDOW = ObservationWindow(parse_quarter("1992Q1"), parse_quarter("2011Q3"))


@dataclass(frozen=True, slots=True)
class EstablishmentSpell:
    """One reconstructed life course."""

    establishment_id: str
    birth_quarter: int
    end_quarter: int
    end_reason: EndReason
    lifetime_quarters: int
    startup_size: int
    naics: str

    @property
    def is_death(self):
        return self.end_reason is EndReason.DEATH


def make_spell(establishment_id, birth_quarter, end_quarter, end_reason,
               startup_size, naics):
    """Spell constructor that derives lifetime (end - birth + 1)."""
    if end_quarter < birth_quarter:
        raise ValueError("spell ends before it begins")
    return EstablishmentSpell(
        establishment_id=establishment_id,
        birth_quarter=birth_quarter,
        end_quarter=end_quarter,
        end_reason=EndReason(end_reason),
        lifetime_quarters=end_quarter - birth_quarter + 1,
        startup_size=startup_size,
        naics=naics,
    )


@dataclass
class TypeCounts:
    """How each distinct establishment was classified.

    type1: birth and death both observed.
    type2: birth observed, still alive at window end (right-censored).
    type3: alive at window start, death observed (age unknown, counted only).
    type4: alive at window start and at window end (counted only).
    never_alive: no positive-employment quarter in the window.
    """

    type1: int = 0
    type2: int = 0
    type3: int = 0
    type4: int = 0
    never_alive: int = 0

    @property
    def total(self):
        return self.type1 + self.type2 + self.type3 + self.type4 + self.never_alive

    def as_dict(self):
        return {
            "type1_birth_and_death_known": self.type1,
            "type2_right_censored": self.type2,
            "type3_birth_unknown": self.type3,
            "type4_both_unknown": self.type4,
            "never_alive": self.never_alive,
            "total_establishments": self.total,
        }


def build_spells(records, window=DEFAULT_WINDOW):
    """Reconstruct one spell per establishment born inside the window.

    Returns ``(spells, TypeCounts)`` with spells sorted by establishment id.
    Records dated after the window end are outside observation and ignored.
    """
    by_establishment = {}
    for record in records:
        by_establishment.setdefault(record.establishment_id, []).append(record)

    spells = []
    counts = TypeCounts()
    for establishment_id in sorted(by_establishment):
        history = sorted(by_establishment[establishment_id], key=lambda r: r.quarter)
        positives = [r for r in history
                     if r.employment > 0 and r.quarter <= window.end_quarter]
        if not positives:
            counts.never_alive += 1
            continue

        birth = positives[0].quarter
        last_alive = positives[-1].quarter
        if birth <= window.start_quarter:
            # Alive at the window start: age unknown, count but emit no spell.
            if last_alive < window.end_quarter:
                counts.type3 += 1
            else:
                counts.type4 += 1
            continue

        if last_alive < window.end_quarter:
            reason = EndReason.DEATH
            counts.type1 += 1
        else:
            reason = EndReason.CENSORED_WINDOW_END
            counts.type2 += 1

        spells.append(make_spell(
            establishment_id=establishment_id,
            birth_quarter=birth,
            end_quarter=last_alive,
            end_reason=reason,
            startup_size=positives[0].employment,
            naics=positives[0].naics,
        ))

    return spells, counts


def apply_ownership_censoring(spells, records):
    """Truncate spells at the first ownership change inside them.

    An ownership change in the final (death) quarter converts the death to a
    censoring: treating a sale as a failure would bias mortality upward.
    Flags dated before the birth quarter are ignored with a warning.
    """
    flags = {}
    for record in records:
        if record.ownership_change:
            flags.setdefault(record.establishment_id, []).append(record.quarter)

    out = []
    for spell in spells:
        quarters = sorted(flags.get(spell.establishment_id, ()))
        early = [q for q in quarters if q < spell.birth_quarter]
        if early:
            logger.warning(
                "ownership change at %s precedes birth of %s; ignored",
                format_quarter(early[0]), spell.establishment_id)
        in_spell = [q for q in quarters
                    if spell.birth_quarter <= q <= spell.end_quarter]
        if in_spell:
            cut = in_spell[0]
            spell = replace(
                spell,
                end_quarter=cut,
                end_reason=EndReason.CENSORED_OWNERSHIP_CHANGE,
                lifetime_quarters=cut - spell.birth_quarter + 1,
            )
        out.append(spell)
    return out


SPELL_COLUMNS = ("establishment_id", "birth", "end", "end_reason",
                 "lifetime_quarters", "startup_size", "naics")


def write_spells(path, spells):
    """Write the spell interchange file (quarters rendered as YYYYQn)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPELL_COLUMNS)
        for s in spells:
            writer.writerow([
                s.establishment_id,
                format_quarter(s.birth_quarter),
                format_quarter(s.end_quarter),
                s.end_reason.value,
                s.lifetime_quarters,
                s.startup_size,
                s.naics,
            ])


def read_spells(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SPELL_COLUMNS:
            raise ValueError(f"unexpected spell file header: {header}")
        spells = []
        for row in reader:
            if not row:
                continue
            spells.append(EstablishmentSpell(
                establishment_id=row[0],
                birth_quarter=parse_quarter(row[1]),
                end_quarter=parse_quarter(row[2]),
                end_reason=EndReason(row[3]),
                lifetime_quarters=int(row[4]),
                startup_size=int(row[5]),
                naics=row[6],
            ))
    return spells
