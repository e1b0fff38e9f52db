import json
import subprocess
import sys

import pytest

from attnbench import ci
from attnbench.cli import main

DATA = ci.data_path("published_ns_metrics.csv").parent


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_support_prints_matrix(capsys, tmp_path):
    code, out, _ = run(capsys, "support", "--out", str(tmp_path / "s.csv"))
    assert code == 0
    assert out.splitlines()[0] == "seed: 0"
    rows = {line.split()[0]: line.split()[1:] for line in out.splitlines()[2:12]}
    assert rows["performer"] == ["yes", "-", "yes", "yes"]
    assert rows["cosformer"] == ["yes", "-", "yes", "-"]
    assert (tmp_path / "s.csv").read_text().startswith("mechanism,NS,CS,NC,CC")


def test_outputs_create_missing_directories(capsys, tmp_path):
    target = tmp_path / "a" / "b" / "support.csv"
    code, _, _ = run(capsys, "support", "--out", str(target))
    assert code == 0 and target.exists()


def test_verify_single(capsys):
    code, out, _ = run(capsys, "verify", "--mechanism", "local")
    assert code == 0
    assert "FAIL" not in out and "checks passed" in out


def test_verify_unknown_mechanism(capsys):
    code, _, err = run(capsys, "verify", "--mechanism", "nosuch")
    assert code == 2 and "unknown mechanism" in err


def test_verify_failure_exit_code(capsys, monkeypatch):
    from attnbench import verify

    bad = verify.CheckResult("local", "forced", False, note="boom")
    monkeypatch.setattr(verify, "run_all", lambda names, seed: [bad])
    code, out, err = run(capsys, "verify", "--mechanism", "local")
    assert code == 1 and "FAILED: local forced boom" in err


def test_verify_deterministic(capsys):
    _, a, _ = run(capsys, "verify", "--mechanism", "all", "--seed", "7")
    _, b, _ = run(capsys, "verify", "--mechanism", "all", "--seed", "7")
    assert a == b
    assert a.startswith("seed: 7\n")


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["support", "--frobnicate"])
    assert exc.value.code == 2


def test_bad_pattern_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--pattern", "xx"])
    assert exc.value.code == 2


def test_bench_then_efflen(capsys, tmp_path):
    csv_path = tmp_path / "bench.csv"
    code, out, _ = run(capsys, "bench", "--small", "--mechanisms", "vanilla,abc,performer",
                       "--lengths", "64,128,256", "--repeats", "3", "--seed", "4", "--out", str(csv_path))
    assert code == 0 and "seed: 4" in out
    assert csv_path.exists()
    svg = csv_path.with_suffix(".svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 6

    json_path = tmp_path / "eff.json"
    code, _, _ = run(capsys, "efflen", "--input", str(csv_path), "--baseline", "vanilla", "--out", str(json_path))
    assert code == 0
    report = json.loads(json_path.read_text())
    assert {(r["mechanism"], r["metric"]) for r in report} == {
        ("abc", "time"), ("abc", "memory"), ("performer", "time"), ("performer", "memory")
    }
    assert all({"coefficients", "r_squared", "efficiency_length", "exists"} <= set(r) for r in report)


def test_bench_unsupported_pattern(capsys):
    code, _, err = run(capsys, "bench", "--small", "--mechanisms", "performer", "--pattern", "cs", "--lengths", "64,128")
    assert code == 2 and "does not support" in err


def test_bench_bad_lengths(capsys):
    code, _, _ = run(capsys, "bench", "--small", "--lengths", "128,64")
    assert code == 2


def test_efflen_without_baseline(capsys, tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("mechanism,pattern,length,median_time_s,peak_bytes,time_ratio,mem_ratio\nabc,ns,1,1.0,1,,\n")
    code, _, err = run(capsys, "efflen", "--input", str(path))
    assert code == 2


def test_efflen_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "efflen", "--input", str(tmp_path / "nope.csv"))
    assert code == 1


def test_ci_published(capsys, tmp_path):
    prefix = tmp_path / "ns"
    code, out, _ = run(capsys, "ci", "--metrics", str(DATA / "published_ns_metrics.csv"),
                       "--stats", str(DATA / "published_ns_stats.csv"), "--out", str(prefix))
    assert code == 0
    rows = {}
    for line in (tmp_path / "ns_task.csv").read_text().splitlines()[1:]:
        model, task, value = line.split(",")
        rows[model, task] = float(value)
    assert abs(rows["vanilla", "TTS"] + 0.301) <= 0.02
    assert abs(rows["local", "Sum"] - 2.617) <= 0.02
    assert (tmp_path / "ns_overall.csv").read_text().startswith("model,overall_ci\n")


def test_ci_computed_stats(capsys):
    code, out, _ = run(capsys, "ci", "--metrics", str(DATA / "published_ns_metrics.csv"), "--exclude", "FlashAttention")
    assert code == 0
    line = next(l for l in out.splitlines() if l.startswith("local "))
    assert "Sum=+2.617" in line


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "attnbench.cli", "support"], capture_output=True, text=True)
    assert out.returncode == 0 and "abc" in out.stdout
