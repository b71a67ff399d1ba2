import pytest

from locfill.geo import GeoPoint
from locfill.ingest import (
    AccountVerdict,
    ClockShift,
    RawEvent,
    account_verdict,
    apply_exclusion_list,
    filter_spoofed_accounts,
    parse_events,
    parse_timestamp,
    speed_violation,
)

# 10 miles eastward along the equator, within float noise.
TEN_MILES_LON = 10.0 / 69.09409442795152


def ev(user="u1", ts=0, lat=0.0, lon=0.0):
    return RawEvent(user, ts, GeoPoint(lat, lon))


class TestParsing:
    def test_empty_stream(self):
        events, report = parse_events([])
        assert events == {} and report.parsed == 0 and report.skipped == 0

    def test_csv_lines_with_one_malformed(self):
        lines = [
            "u1,2014-01-06T00:00:00Z,40.7,-73.9",
            "u1,2014-01-06T01:00:00Z,40.8,-73.9",
            "not,a,line",
            "u2,2014-01-06T02:00:00Z,40.6,-73.8",
        ]
        events, report = parse_events(lines)
        assert report.parsed == 3 and report.skipped == 1
        assert len(events["u1"]) == 2 and len(events["u2"]) == 1

    def test_json_lines_autodetected(self):
        lines = [
            '{"user": "a", "ts": 3600, "lat": 1.0, "lon": 2.0}',
            '{"user": "a", "ts": "2014-01-06T00:00:00Z", "lat": 1.0, "lon": 2.5}',
        ]
        events, report = parse_events(lines)
        assert report.parsed == 2
        assert events["a"][0].point.lon == 2.0

    def test_exact_duplicates_dropped(self):
        line = "u1,2014-01-06T00:00:00Z,40.7,-73.9"
        events, report = parse_events([line, line])
        assert len(events["u1"]) == 1
        assert report.duplicates == 1 and report.parsed == 1

    def test_events_sorted_per_user(self):
        lines = [
            "u1,2014-01-06T05:00:00Z,40.7,-73.9",
            "u1,2014-01-06T01:00:00Z,40.7,-73.9",
        ]
        events, _ = parse_events(lines)
        ts = [e.ts for e in events["u1"]]
        assert ts == sorted(ts)

    def test_header_line_ignored(self):
        lines = ["user_id,iso8601_ts,lat,lon", "u1,2014-01-06T00:00:00Z,40.7,-73.9"]
        events, report = parse_events(lines)
        assert report.parsed == 1 and report.skipped == 0

    def test_bad_coordinates_skipped(self):
        events, report = parse_events(["u1,2014-01-06T00:00:00Z,95.0,-73.9"])
        assert report.parsed == 0 and report.skipped == 1

    def test_timestamp_formats(self):
        assert parse_timestamp("1388966400") == 1388966400
        assert parse_timestamp("2014-01-06T00:00:00Z") == 1388966400
        assert parse_timestamp("2014-01-06T00:00:00+00:00") == 1388966400
        with pytest.raises(ValueError):
            parse_timestamp("")


class TestClockShift:
    def test_fixed_offset(self):
        shift = ClockShift(utc_offset_hours=-5.0)
        assert shift.apply(1388966400) == 1388966400 - 5 * 3600

    def test_dst_switchover_adds_hour(self):
        switch = 1394330400  # 2014-03-09 02:00 EST in UTC seconds
        shift = ClockShift(utc_offset_hours=-5.0, dst_start_ts=switch)
        assert shift.apply(switch - 1) == switch - 1 - 5 * 3600
        assert shift.apply(switch + 1) == switch + 1 - 4 * 3600


class TestSpeedViolation:
    def test_same_point_never_violates(self):
        assert not speed_violation(ev(ts=0), ev(ts=0))
        assert not speed_violation(ev(ts=0), ev(ts=9999))

    def test_ten_miles_in_ten_minutes_violates(self):
        # 1.0 mi/min > 0.5 threshold
        assert speed_violation(ev(ts=0), ev(ts=600, lon=TEN_MILES_LON))

    def test_ten_miles_in_thirty_minutes_ok(self):
        # 0.33 mi/min
        assert not speed_violation(ev(ts=0), ev(ts=1800, lon=TEN_MILES_LON))

    def test_identical_timestamps_far_apart_violates(self):
        # > 0.05 mi with zero interval: the one-second guard makes this fast.
        apart = ev(ts=0, lon=0.06 / 69.0941)
        assert speed_violation(ev(ts=0), apart)

    def test_out_of_order_rejected(self):
        with pytest.raises(ValueError):
            speed_violation(ev(ts=10), ev(ts=0))


def _user_with_excursions(n_events: int, n_violations: int, user="u"):
    """Mostly stationary user; each excursion jumps 10 mi in 10 minutes
    (exactly one violation) and returns three hours later (no violation)."""
    events = [RawEvent(user, 0, GeoPoint(0.0, 0.0))]
    remaining = n_violations
    while len(events) < n_events:
        prev = events[-1]
        if remaining > 0 and len(events) % 2 == 1:
            # 10 miles in 10 minutes: one violation on this transition.
            events.append(RawEvent(user, prev.ts + 600, GeoPoint(0.0, TEN_MILES_LON)))
            remaining -= 1
        elif prev.point.lon != 0.0:
            # Slow return: 10 miles over 3 hours.
            events.append(RawEvent(user, prev.ts + 3 * 3600, GeoPoint(0.0, 0.0)))
        else:
            events.append(RawEvent(user, prev.ts + 3600, GeoPoint(0.0, 0.0)))
    assert remaining == 0
    return events


class TestAccountFiltering:
    def test_six_percent_excluded(self):
        events = _user_with_excursions(100, 6)
        verdict = account_verdict("u", events)
        assert verdict.violating_events == 6
        assert verdict.excluded

    def test_five_percent_retained(self):
        events = _user_with_excursions(100, 5)
        verdict = account_verdict("u", events)
        assert verdict.violating_events == 5
        assert not verdict.excluded  # 5% is not more than 5%

    def test_single_event_retained(self):
        verdict = account_verdict("u", [ev()])
        assert verdict == AccountVerdict("u", 1, 0, False)

    def test_filter_drops_whole_account(self):
        good = {"ok": [ev("ok", ts) for ts in (0, 3600)]}
        bad = {"bad": _user_with_excursions(10, 5)}  # 50% violations
        retained, verdicts = filter_spoofed_accounts({**good, **bad})
        assert set(retained) == {"ok"}
        assert {v.user_id: v.excluded for v in verdicts} == {"ok": False, "bad": True}

    def test_idempotent(self):
        events = {
            "a": _user_with_excursions(100, 3),
            "b": _user_with_excursions(100, 20),
        }
        once, _ = filter_spoofed_accounts(events)
        twice, verdicts = filter_spoofed_accounts(once)
        assert twice == once
        assert all(not v.excluded for v in verdicts)

    def test_order_preserved(self):
        events = {"a": _user_with_excursions(50, 2)}
        retained, _ = filter_spoofed_accounts(events)
        assert [e.ts for e in retained["a"]] == [e.ts for e in events["a"]]


def test_exclusion_list():
    events = {"a": [ev("a")], "b": [ev("b")], "c": [ev("c")]}
    kept, removed = apply_exclusion_list(events, ["b", "zz"])
    assert set(kept) == {"a", "c"}
    assert removed == ["b"]
