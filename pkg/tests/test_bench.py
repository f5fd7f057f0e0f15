"""Benchmark harness tests: cheap configurations keep these fast; the full
paper-scale workloads run in the acceptance suite."""

import math

import pytest

from bagpipe.bench import (
    BenchCell,
    BenchReport,
    CacheBenchConfig,
    ScaleBenchConfig,
    compare_backends,
    estimate_cluster_hours,
    parse_report,
    run_cache_bench,
    run_codec_bench,
    run_scale_bench,
    serialize_codec_rows,
    serialize_report,
    serialize_scale_rows,
    sleep_task_command,
)


# --- estimator ---


def test_estimator_paper_inputs():
    # 600,000 machine-hours across 10,000 machines at 0.6 efficiency
    assert estimate_cluster_hours(600_000, 10_000, 0.6) == 100.0


def test_estimator_identity():
    assert estimate_cluster_hours(42.0, 1, 1.0) == 42.0


def test_estimator_general_case():
    assert estimate_cluster_hours(100, 8, 0.9) == pytest.approx(13.888888, rel=1e-6)


def test_estimator_domain_errors():
    with pytest.raises(ValueError):
        estimate_cluster_hours(-1, 10, 0.5)
    with pytest.raises(ValueError):
        estimate_cluster_hours(1, 0, 0.5)
    for efficiency in (0.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            estimate_cluster_hours(1, 1, efficiency)


def test_estimator_efficiency_one_is_linear():
    assert estimate_cluster_hours(100, 4, 1.0) == 25.0


# --- report serialization ---


def sample_report():
    cells = [
        BenchCell("disk", "read", 0.1 + 1 / 3, 0.05),
        BenchCell("disk", "write", 0.25, 0.01),
        BenchCell("memory", "read", 0.05, 0.2),
        BenchCell("memory", "write", 0.125, 0.0),
    ]
    return BenchReport(
        workload="small-file",
        file_count=10,
        file_size_bytes=1024,
        repeats=3,
        scale_factor=100_000,
        machine="testbox/1cpu",
        timestamp="2026-01-02T03:04:05",
        noisy=True,
        write_ratio=2.0,
        read_ratio=0.1 + 1 / 3,
        paper_reference="write 3.0x, read 10.0x",
        cells=cells,
    )


def test_report_roundtrip_lossless():
    report = sample_report()
    text = serialize_report(report)
    assert parse_report(text) == report


def test_report_format_shape():
    text = serialize_report(sample_report())
    lines = text.splitlines()
    assert "workload=small-file" in lines
    assert "[table]" in lines
    table_at = lines.index("[table]")
    assert lines[table_at + 1] == "backend\tphase\tmean_s\tcov"
    assert len(lines[table_at + 2 :]) == 4
    # floats carry full precision for lossless re-parsing
    assert repr(0.1 + 1 / 3) in text


def test_parse_report_rejects_garbage():
    with pytest.raises(ValueError):
        parse_report("not a report\n")
    text = serialize_report(sample_report())
    body = text.replace("workload=small-file\n", "")
    with pytest.raises(ValueError, match="missing key"):
        parse_report(body)


# --- cache benchmark (tiny configuration) ---


def test_cache_bench_memory_runs():
    config = CacheBenchConfig(3, 512, "memory", "small-file")
    result = run_cache_bench(config)
    assert result["write_s"] > 0
    assert result["read_s"] > 0


def test_cache_bench_disk_runs(tmp_path):
    config = CacheBenchConfig(3, 512, "disk", "small-file", work_dir=str(tmp_path))
    result = run_cache_bench(config)
    assert result["write_s"] > 0
    assert result["read_s"] > 0
    assert list(tmp_path.iterdir()) == []  # cleaned up after itself


def test_cache_bench_config_validation(tmp_path):
    with pytest.raises(ValueError):
        CacheBenchConfig(1, 1, "tape", "small-file")
    with pytest.raises(ValueError, match="empty benchmark"):
        CacheBenchConfig(0, 1, "memory", "small-file")
    with pytest.raises(ValueError, match="needs a work_dir"):
        CacheBenchConfig(1, 1, "disk", "small-file")


def test_compare_backends_tiny(tmp_path):
    report = compare_backends(
        "small-file", work_dir=str(tmp_path), repeats=1, scale_factor=100_000
    )
    assert report.workload == "small-file"
    assert report.file_count == 10  # 1,000,000 / 100,000
    assert report.file_size_bytes == 1024
    assert report.scale_factor == 100_000
    assert {(c.backend, c.phase) for c in report.cells} == {
        ("disk", "read"),
        ("disk", "write"),
        ("memory", "read"),
        ("memory", "write"),
    }
    assert report.write_ratio > 0
    assert report.read_ratio > 0
    assert parse_report(serialize_report(report)) == report


def test_compare_backends_rejects_unknown_workload():
    with pytest.raises(ValueError):
        compare_backends("medium-file", repeats=1, scale_factor=1000)


# --- scale benchmark (tiny configuration) ---


def test_sleep_task_command_shape():
    command = sleep_task_command(25)
    assert command[0] == "/bin/sh"
    assert "sleep 0.025" in command[2]
    assert "BPR1" in command[2]


def test_scale_config_validation():
    with pytest.raises(ValueError, match="ascending"):
        ScaleBenchConfig(worker_counts=(2, 1))
    with pytest.raises(ValueError):
        ScaleBenchConfig(worker_counts=())
    with pytest.raises(ValueError):
        ScaleBenchConfig(task_count=0)


def test_scale_bench_tiny_run():
    rows = run_scale_bench(ScaleBenchConfig(worker_counts=(1, 2), task_count=4, task_ms=10))
    assert [r.workers for r in rows] == [1, 2]
    assert rows[0].speedup == 1.0  # baseline is itself
    assert rows[0].efficiency == 1.0
    assert all(r.wall_s > 0 for r in rows)
    assert rows[1].speedup == pytest.approx(rows[0].wall_s / rows[1].wall_s)
    assert rows[1].efficiency == pytest.approx(rows[1].speedup / 2)


def test_serialize_scale_rows_shape():
    rows = run_scale_bench(ScaleBenchConfig(worker_counts=(1,), task_count=2, task_ms=5))
    text = serialize_scale_rows(rows)
    lines = text.splitlines()
    assert lines[0] == "workers\twall_s\tspeedup\tefficiency"
    assert lines[1].startswith("1\t")


# --- codec benchmark ---


def test_codec_bench_rows():
    rows = run_codec_bench(record_count=200, payload_size=64, repeats=1)
    backends = {row.backend for row in rows}
    assert "pure" in backends
    ops = {row.op for row in rows if row.backend == "pure"}
    assert ops == {"encode_block", "parse_block", "encode_frames", "decode_frames"}
    assert all(row.mean_s >= 0 for row in rows)
    text = serialize_codec_rows(rows)
    assert text.startswith("backend\top\tmean_s\n")
    if "native" in backends:
        assert "x pure" in text


def test_nan_is_not_in_reports():
    report = sample_report()
    text = serialize_report(report)
    assert not math.isnan(parse_report(text).read_ratio)
