import random

import pytest

from panelsurv.lifecourse import (
    DEFAULT_WINDOW,
    EndReason,
    ObservationWindow,
    apply_ownership_censoring,
    build_spells,
    make_spell,
    read_spells,
    write_spells,
)
from panelsurv.quarters import parse_quarter

from conftest import record

Q = parse_quarter


def alive(eid, first, last, employment=3, **kw):
    return [record(eid, q, employment, **kw) for q in range(Q(first), Q(last) + 1)]


def test_window_validation():
    with pytest.raises(ValueError):
        ObservationWindow(100, 100)


def test_simple_death_spell():
    records = alive("E1", "1995Q1", "1997Q4")
    spells, counts = build_spells(records)
    assert counts.type1 == 1 and counts.total == 1
    (s,) = spells
    assert s.birth_quarter == Q("1995Q1")
    assert s.end_quarter == Q("1997Q4")
    assert s.end_reason is EndReason.DEATH
    assert s.lifetime_quarters == 12
    assert s.startup_size == 3


def test_alive_at_window_end_is_censored():
    records = alive("E1", "2010Q1", "2011Q3")
    spells, counts = build_spells(records)
    assert counts.type2 == 1
    (s,) = spells
    assert s.end_reason is EndReason.CENSORED_WINDOW_END
    assert s.lifetime_quarters == DEFAULT_WINDOW.end_quarter - s.birth_quarter + 1


def test_interior_zero_employment_does_not_split_spell():
    records = (alive("E1", "1994Q1", "1994Q4")
               + [record("E1", Q("1995Q1"), 0), record("E1", Q("1995Q2"), 0)]
               + alive("E1", "1995Q3", "1996Q2"))
    spells, counts = build_spells(records)
    assert len(spells) == 1
    (s,) = spells
    assert s.birth_quarter == Q("1994Q1")
    assert s.end_quarter == Q("1996Q2")
    assert s.end_reason is EndReason.DEATH
    assert s.lifetime_quarters == 10


def test_alive_at_window_start_counted_not_emitted():
    records = alive("E1", "1992Q1", "1994Q2")
    spells, counts = build_spells(records)
    assert spells == []
    assert counts.type3 == 1  # died within the window, age unknown
    records2 = alive("E2", "1992Q1", "2011Q3")
    spells2, counts2 = build_spells(records2)
    assert spells2 == [] and counts2.type4 == 1


def test_never_alive():
    records = [record("E1", Q("1995Q1"), 0), record("E1", Q("1995Q2"), 0)]
    spells, counts = build_spells(records)
    assert spells == [] and counts.never_alive == 1


def test_startup_size_is_birth_quarter_employment():
    records = [record("E1", Q("1995Q1"), 2), record("E1", Q("1995Q2"), 50)]
    spells, _ = build_spells(records)
    assert spells[0].startup_size == 2


def test_records_after_window_end_ignored():
    records = alive("E1", "2011Q1", "2012Q4")
    spells, _ = build_spells(records)
    assert spells[0].end_quarter == DEFAULT_WINDOW.end_quarter
    assert spells[0].end_reason is EndReason.CENSORED_WINDOW_END


def test_partition_property():
    rng = random.Random(7)
    records = []
    for i in range(300):
        eid = f"E{i:03d}"
        kind = rng.randrange(5)
        if kind == 0:
            records.extend(alive(eid, "1995Q1", "1999Q4"))            # type 1
        elif kind == 1:
            records.extend(alive(eid, "2009Q1", "2011Q3"))            # type 2
        elif kind == 2:
            records.extend(alive(eid, "1992Q1", "1993Q4"))            # type 3
        elif kind == 3:
            records.extend(alive(eid, "1992Q1", "2011Q3"))            # type 4
        else:
            records.append(record(eid, Q("1995Q1"), 0))               # never alive
    spells, counts = build_spells(records)
    assert counts.total == 300
    assert counts.type1 + counts.type2 == len(spells)
    assert all(s.birth_quarter > DEFAULT_WINDOW.start_quarter for s in spells)


def test_order_invariance():
    records = (alive("E1", "1995Q1", "1997Q4") + alive("E2", "2000Q1", "2011Q3")
               + [record("E3", Q("1998Q2"), 0)])
    shuffled = records[:]
    random.Random(3).shuffle(shuffled)
    assert build_spells(records) == build_spells(shuffled)


class TestOwnershipCensoring:
    def test_truncates_at_change(self):
        records = alive("E1", "2000Q1", "2005Q4")
        records[13] = record("E1", Q("2003Q2"), 3, ownership=True)
        spells, _ = build_spells(records)
        (s,) = apply_ownership_censoring(spells, records)
        assert s.end_quarter == Q("2003Q2")
        assert s.end_reason is EndReason.CENSORED_OWNERSHIP_CHANGE
        assert s.lifetime_quarters == Q("2003Q2") - Q("2000Q1") + 1

    def test_change_in_death_quarter_takes_precedence(self):
        records = alive("E1", "2000Q1", "2001Q4")
        records[-1] = record("E1", Q("2001Q4"), 3, ownership=True)
        spells, _ = build_spells(records)
        (s,) = apply_ownership_censoring(spells, records)
        assert s.end_quarter == Q("2001Q4")
        assert s.end_reason is EndReason.CENSORED_OWNERSHIP_CHANGE

    def test_no_flags_is_identity(self):
        records = alive("E1", "2000Q1", "2001Q4") + alive("E2", "2002Q1", "2011Q3")
        spells, _ = build_spells(records)
        assert apply_ownership_censoring(spells, records) == spells

    def test_flag_before_birth_ignored_with_warning(self, caplog):
        records = [record("E1", Q("1999Q4"), 0, ownership=True)] + \
            alive("E1", "2000Q1", "2001Q4")
        spells, _ = build_spells(records)
        with caplog.at_level("WARNING"):
            out = apply_ownership_censoring(spells, records)
        assert out == spells
        assert "precedes birth" in caplog.text

    def test_earliest_change_wins(self):
        records = alive("E1", "2000Q1", "2005Q4")
        records[8] = record("E1", Q("2002Q1"), 3, ownership=True)
        records[12] = record("E1", Q("2003Q1"), 3, ownership=True)
        spells, _ = build_spells(records)
        (s,) = apply_ownership_censoring(spells, records)
        assert s.end_quarter == Q("2002Q1")


def test_spell_file_round_trip(tmp_path):
    spells = [
        make_spell("E1", Q("1995Q1"), Q("1997Q4"), EndReason.DEATH, 3, "722110"),
        make_spell("E2", Q("2000Q2"), Q("2011Q3"),
                   EndReason.CENSORED_WINDOW_END, 12, "541110"),
        make_spell("E3", Q("2001Q1"), Q("2004Q2"),
                   EndReason.CENSORED_OWNERSHIP_CHANGE, 1, "621210"),
    ]
    path = tmp_path / "spells.csv"
    write_spells(path, spells)
    assert read_spells(path) == spells


def test_make_spell_rejects_reversed_range():
    with pytest.raises(ValueError):
        make_spell("E1", 100, 99, EndReason.DEATH, 1, "722110")
