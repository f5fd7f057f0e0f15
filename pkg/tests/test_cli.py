"""Command line tests driven through real subprocesses."""

import os
import subprocess
import sys

import pytest

from bagpipe.bag import MessageRecord
from bagpipe.frames import decode_bytes

from conftest import build_bag_bytes, make_records, write_bag_file

CLI = (sys.executable, "-m", "bagpipe")


def run_cli(*args, stdin: bytes = b"", check=False, timeout=120):
    proc = subprocess.run(
        CLI + args, input=stdin, capture_output=True, timeout=timeout
    )
    if check and proc.returncode != 0:
        raise AssertionError(
            f"exit {proc.returncode}\nstdout: {proc.stdout!r}\nstderr: {proc.stderr!r}"
        )
    return proc


@pytest.fixture
def fixture_bag(tmp_path):
    records = [
        MessageRecord("/b", 200, b"\x02"),
        MessageRecord("/a", 100, b"\x01"),
        MessageRecord("/a", 300, b"\x03\x04"),
    ]
    return records, str(write_bag_file(tmp_path / "fix.dbag", records))


def test_bag_info_golden(fixture_bag):
    _, path = fixture_bag
    proc = run_cli("bag", "info", path, check=True)
    lines = proc.stdout.decode().splitlines()
    size = os.path.getsize(path)
    assert lines == [
        "record_count=3",
        f"byte_size={size}",
        "min_timestamp=100",
        "max_timestamp=300",
        "truncated=false",
        "topic:/a=2",
        "topic:/b=1",
    ]


def test_bag_info_from_stdin(fixture_bag):
    records, path = fixture_bag
    data = open(path, "rb").read()
    proc = run_cli("bag", "info", "-", stdin=data, check=True)
    assert b"record_count=3" in proc.stdout


def test_bag_info_missing_file_is_exit_1(tmp_path):
    proc = run_cli("bag", "info", str(tmp_path / "nope.dbag"))
    assert proc.returncode == 1
    assert proc.stderr.startswith(b"error:")
    assert proc.stdout == b""


def test_bag_info_corrupt_file_is_exit_1(tmp_path, fixture_bag):
    _, path = fixture_bag
    data = bytearray(open(path, "rb").read())
    data[-1] ^= 0xFF  # break the trailer total
    bad = tmp_path / "bad.dbag"
    bad.write_bytes(bytes(data))
    proc = run_cli("bag", "info", str(bad))
    assert proc.returncode == 1
    assert b"error:" in proc.stderr


def test_unknown_command_is_exit_2():
    proc = run_cli("no-such-command")
    assert proc.returncode == 2


def test_missing_required_argument_is_exit_2():
    proc = run_cli("bench", "estimate", "--hours", "1")
    assert proc.returncode == 2


def test_record_from_play_roundtrip(tmp_path, fixture_bag):
    records, src = fixture_bag
    out = tmp_path / "copy.dbag"
    proc = run_cli(
        "bag", "record", str(out),
        "--from-play", src, "--count", "3", "--all",
        check=True,
    )
    assert out.read_bytes() == build_bag_bytes(records)


def test_record_with_idle_stop(tmp_path, fixture_bag):
    records, src = fixture_bag
    out = tmp_path / "copy.dbag"
    run_cli(
        "bag", "record", str(out),
        "--from-play", src, "--idle-ms", "300", "--all",
        check=True,
    )
    assert out.read_bytes() == build_bag_bytes(records)


def test_record_topic_filter(tmp_path, fixture_bag):
    records, src = fixture_bag
    out = tmp_path / "only-a.dbag"
    run_cli(
        "bag", "record", str(out),
        "--from-play", src, "--topics", "/a", "--idle-ms", "300",
        check=True,
    )
    expected = [r for r in records if r.topic == "/a"]
    assert out.read_bytes() == build_bag_bytes(expected)


def test_record_requires_a_stop_or_source():
    proc = run_cli("bag", "record", "/tmp/x.dbag", "--all")
    assert proc.returncode == 1
    assert b"error:" in proc.stderr


def test_play_reports_published_count(fixture_bag):
    _, path = fixture_bag
    proc = run_cli("bag", "play", path, "--rate", "0", check=True)
    assert b"published=3" in proc.stdout


def test_run_collect_pipeline(tmp_path):
    records = make_records(8, seed=31)
    bag = str(write_bag_file(tmp_path / "in.dbag", records))
    proc = run_cli(
        "run", "--bag", bag, "--partitions", "2", "--cmd", "/bin/cat",
        "--collect", "--local-workers", "1",
        check=True,
    )
    frames = decode_bytes(proc.stdout)
    assert [f.name for f in frames] == [f"0/{i}" for i in range(4)] + [
        f"1/{i}" for i in range(4, 8)
    ]


def test_run_store_pipeline(tmp_path):
    records = make_records(6, seed=32)
    bag = str(write_bag_file(tmp_path / "in.dbag", records))
    out_dir = tmp_path / "parts"
    out_dir.mkdir()
    proc = run_cli(
        "run", "--bag", bag, "--partitions", "3", "--cmd", "/bin/cat",
        "--store", str(out_dir), "--local-workers", "2",
        check=True,
    )
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["part-00000.bpr", "part-00001.bpr", "part-00002.bpr"]
    listed = proc.stdout.decode().splitlines()
    assert [os.path.basename(line) for line in listed] == names


def test_run_failure_reports_partitions(tmp_path):
    records = make_records(4, seed=33)
    bag = str(write_bag_file(tmp_path / "in.dbag", records))
    proc = run_cli(
        "run", "--bag", bag, "--partitions", "2",
        "--cmd", "cat >/dev/null; exit 5",
        "--collect", "--local-workers", "1",
    )
    assert proc.returncode == 1
    assert b"exited with status 5" in proc.stderr


def test_run_cmd_is_a_shell_pipeline(tmp_path):
    records = make_records(4, seed=35)
    bag = str(write_bag_file(tmp_path / "in.dbag", records))
    proc = run_cli(
        "run", "--bag", bag, "--partitions", "2", "--cmd", "cat | cat",
        "--collect", "--local-workers", "1",
        check=True,
    )
    frames = decode_bytes(proc.stdout)
    assert [f.name for f in frames] == ["0/0", "0/1", "1/2", "1/3"]


def test_frames_unwrap(tmp_path):
    records = make_records(5, seed=34)
    bag = str(write_bag_file(tmp_path / "in.dbag", records))
    collected = run_cli(
        "run", "--bag", bag, "--partitions", "1", "--cmd", "/bin/cat",
        "--collect", "--local-workers", "1",
        check=True,
    ).stdout
    unwrapped = run_cli("frames", "unwrap", stdin=collected, check=True).stdout
    frames = decode_bytes(unwrapped)
    assert [f.payload for f in frames] == [r.payload for r in records]
    assert [f.name for f in frames] == [f"0/{i}" for i in range(5)]


def test_scenario_generate_and_info(tmp_path):
    out = tmp_path / "suite"
    proc = run_cli(
        "scenario", "generate", "--out", str(out), "--duration-s", "0.2",
        check=True,
    )
    assert b"cases=63" in proc.stdout
    manifest = (out / "manifest.tsv").read_text()
    assert len(manifest.splitlines()) == 63
    info = run_cli("bag", "info", str(out / "case-0000.dbag"), check=True)
    assert b"record_count=4" in info.stdout


def test_scenario_generate_no_filter(tmp_path):
    out = tmp_path / "suite"
    proc = run_cli(
        "scenario", "generate", "--out", str(out), "--duration-s", "0.1",
        "--no-filter", check=True,
    )
    assert b"cases=72" in proc.stdout


def test_bench_estimate_paper_numbers():
    proc = run_cli(
        "bench", "estimate", "--hours", "600000", "--workers", "10000",
        "--efficiency", "0.6", check=True,
    )
    assert proc.stdout.decode().strip() == "100"


def test_bench_estimate_bad_efficiency_is_exit_1():
    proc = run_cli(
        "bench", "estimate", "--hours", "1", "--workers", "1", "--efficiency", "2.0"
    )
    assert proc.returncode == 1


def test_bench_codec_tiny():
    proc = run_cli(
        "bench", "codec", "--records", "200", "--size", "32", "--repeats", "1",
        check=True,
    )
    assert proc.stdout.startswith(b"backend\top\tmean_s")
