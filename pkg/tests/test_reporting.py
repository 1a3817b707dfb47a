"""Reporting tests: linear model, measured benchmark, CSV export."""

import csv
import io
import random

import pytest

from tagroll.attendance import AttendanceService
from tagroll.protocol import TagId
from tagroll.reporting import (
    BARCODE,
    CSV_HEADER,
    MANUAL,
    RFID,
    EntryMethod,
    build_report,
    export_report_csv,
    measure_rfid_roll_call,
    model_total_time,
    run_benchmark,
)
from tagroll.store import Actor, NotFound, RegistryStore, Role

OPERATOR = Actor("desk", Role.OPERATOR)


class TestLinearModel:
    def test_reference_timing_values(self):
        manual = EntryMethod(MANUAL, 10.0)
        barcode = EntryMethod(BARCODE, 2.0)
        rfid = EntryMethod(RFID, 0.2)
        assert model_total_time(rfid, 60) == 12.0
        assert model_total_time(manual, 100) == 1000.0
        assert model_total_time(barcode, 0) == 0.0
        assert model_total_time(manual, 60) == 600.0
        assert model_total_time(barcode, 60) == 120.0

    def test_linearity(self):
        rng = random.Random(1)
        for method in (EntryMethod(MANUAL, 10.0), EntryMethod(BARCODE, 2.0), EntryMethod(RFID, 0.2)):
            for _ in range(50):
                a, b = rng.randrange(0, 500), rng.randrange(0, 500)
                assert model_total_time(method, a + b) == pytest.approx(
                    model_total_time(method, a) + model_total_time(method, b)
                )

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            model_total_time(EntryMethod(MANUAL, 10.0), -1)
        with pytest.raises(ValueError):
            EntryMethod(MANUAL, 0.0)


class TestMeasuredRollCall:
    def test_sixty_students_twelve_seconds(self):
        seconds, records = measure_rfid_roll_call(60)
        assert seconds == 12.0
        assert records == 60

    def test_one_student(self):
        seconds, records = measure_rfid_roll_call(1)
        assert seconds == 0.2 and records == 1

    def test_measured_equals_model_for_any_n(self):
        rfid = EntryMethod(RFID, 0.2)
        for n in (1, 3, 17, 100):
            measured, _ = measure_rfid_roll_call(n)
            assert measured == model_total_time(rfid, n)  # tolerance 0


class TestBenchmark:
    def test_standard_sizes_present(self):
        result = run_benchmark(60)
        assert result.class_sizes == [1, 10, 60, 100]
        assert result.seconds_for(MANUAL, 60) == 600.0
        assert result.seconds_for(BARCODE, 60) == 120.0
        assert result.seconds_for(RFID, 60) == 12.0
        assert result.seconds_for(RFID, 1) == 0.2
        assert result.seconds_for(RFID, 10) == 2.0
        assert result.seconds_for(RFID, 100) == 20.0

    def test_extra_class_size_included(self):
        result = run_benchmark(37)
        assert 37 in result.class_sizes
        assert result.seconds_for(RFID, 37) == model_total_time(EntryMethod(RFID, 0.2), 37)

    def test_rfid_rows_measured_others_modeled(self):
        result = run_benchmark(10)
        sources = {r.method: r.source for r in result.rows}
        assert sources[RFID] == "measured"
        assert sources[MANUAL] == sources[BARCODE] == "modeled"

    def test_table_and_series_render(self):
        result = run_benchmark(60)
        table = result.table()
        assert "manual" in table and "n=60" in table and "12 s" in table
        assert "rfid,60,12" in result.series_lines()
        assert all(len(line.split(",")) == 3 for line in result.series_lines())


def _session_with_records(n_present=2, n_pending=1):
    svc = AttendanceService(RegistryStore())
    for i in range(1, n_present + 1):
        svc.store.put_student(
            OPERATOR, name=f"Student {i}", course="EXTC", stream="B.Tech",
            trimester="T5", tag_id=TagId(i), now=0.0,
        )
    sess = svc.open_session("EXTC", "B.Tech", "T5", now=0.0)
    now = 0.0
    for i in range(1, n_present + n_pending + 1):
        now += 3.0
        svc.ingest_scan(sess.id, TagId(i), now=now)
    return svc, sess


class TestCsvExport:
    def test_header_and_row_count(self):
        svc, sess = _session_with_records(n_present=3, n_pending=0)
        data = export_report_csv(svc.store, sess.id)
        lines = data.decode("utf-8").split("\r\n")
        assert lines[0] == ",".join(CSV_HEADER)
        assert len([l for l in lines if l]) == 4

    def test_sixty_present_students_61_lines(self):
        svc, sess = _session_with_records(n_present=60, n_pending=0)
        data = export_report_csv(svc.store, sess.id)
        assert len([l for l in data.decode().split("\r\n") if l]) == 61

    def test_empty_session_header_only(self):
        svc = AttendanceService(RegistryStore())
        sess = svc.open_session("EXTC", "B.Tech", "T5", now=0.0)
        data = export_report_csv(svc.store, sess.id)
        assert data.decode("utf-8") == ",".join(CSV_HEADER) + "\r\n"

    def test_unknown_session(self):
        with pytest.raises(NotFound):
            export_report_csv(RegistryStore(), "SES9999")

    def test_comma_in_name_roundtrips(self):
        svc = AttendanceService(RegistryStore())
        svc.store.put_student(
            OPERATOR, name='Rao, Asha "AR"', course="EXTC", stream="B,Tech",
            trimester="T5", tag_id=TagId(1), now=0.0,
        )
        sess = svc.open_session("EXTC", "B.Tech", "T5", now=0.0)
        svc.ingest_scan(sess.id, TagId(1), now=1.0)
        data = export_report_csv(svc.store, sess.id)
        parsed = list(csv.reader(io.StringIO(data.decode("utf-8"))))
        assert parsed[1][0] == 'Rao, Asha "AR"'
        assert parsed[1][2] == "EXTC" and parsed[1][3] == "B,Tech"

    def test_pending_and_present_distinguishable(self):
        svc, sess = _session_with_records(n_present=1, n_pending=1)
        parsed = list(csv.reader(io.StringIO(export_report_csv(svc.store, sess.id).decode())))
        by_status = {row[7]: row for row in parsed[1:]}
        assert by_status["present"][0] == "Student 1"
        assert by_status["pending_registration"][0] == ""

    def test_report_rows_match_store_records(self):
        # faithfulness oracle: direct store scan
        svc, sess = _session_with_records(n_present=4, n_pending=3)
        report = build_report(svc.store, sess.id, generated_s=99.0)
        records = svc.store.records_for_session(sess.id)
        assert len(report.rows) == len(records)
        assert {r.tag_id for r in report.rows} == {
            rec.tag_id.canonical for rec in records
        }
        assert {(r.tag_id, r.first_seen_s, r.last_seen_s, r.status) for r in report.rows} == {
            (rec.tag_id.canonical, rec.first_seen_s, rec.last_seen_s, rec.status.value)
            for rec in records
        }

    def test_csv_parse_back_field_identical(self):
        svc, sess = _session_with_records(n_present=5, n_pending=2)
        report = build_report(svc.store, sess.id, generated_s=0.0)
        data = export_report_csv(svc.store, sess.id)
        parsed = list(csv.reader(io.StringIO(data.decode("utf-8"))))
        assert parsed[0] == CSV_HEADER
        for raw, row in zip(parsed[1:], report.rows):
            assert raw == [
                row.name,
                row.tag_id,
                row.course,
                row.stream,
                row.trimester,
                f"{row.first_seen_s:.3f}",
                f"{row.last_seen_s:.3f}",
                row.status,
            ]
