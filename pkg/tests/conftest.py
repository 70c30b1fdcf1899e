import pytest

from panelsurv.ingest import QuarterlyRecord
from panelsurv.lifecourse import EndReason, make_spell
from panelsurv.quarters import parse_quarter


def record(eid, quarter, employment, naics="722110", sector="private",
           multi=False, ownership=False):
    return QuarterlyRecord(
        establishment_id=eid,
        quarter=parse_quarter(quarter) if isinstance(quarter, str) else quarter,
        employment=employment,
        naics=naics,
        sector_kind=sector,
        multi_unit=multi,
        ownership_change=ownership,
    )


def spell_of(lifetime, died, eid, startup_size=3, naics="722110", birth=8000):
    reason = EndReason.DEATH if died else EndReason.CENSORED_WINDOW_END
    return make_spell(eid, birth, birth + lifetime - 1, reason, startup_size, naics)


def spells_from_pairs(pairs, naics="722110", prefix="S", startup_size=3):
    """(age, died) pairs -> spells with distinct ids."""
    return [spell_of(age, died, f"{prefix}{i}", startup_size=startup_size, naics=naics)
            for i, (age, died) in enumerate(pairs)]


@pytest.fixture
def five_spell_pairs():
    """The canonical small fixture: deaths at ages 1, 3, 4; censored at 2, 5."""
    return [(1, True), (2, False), (3, True), (4, True), (5, False)]


@pytest.fixture
def five_spells(five_spell_pairs):
    return spells_from_pairs(five_spell_pairs)


def random_pairs(rng, n, max_age=20, censor_fraction=0.3):
    ages = rng.integers(1, max_age + 1, size=n)
    died = rng.random(n) > censor_fraction
    return list(zip(ages.tolist(), died.tolist()))
