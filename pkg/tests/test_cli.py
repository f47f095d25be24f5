import json

import pytest

from mpifutures.cli import main


@pytest.fixture
def model(models_dir):
    return lambda name: str(models_dir / f"{name}.fut")


def test_parse_ok(model, capsys):
    assert main(["parse", model("election")]) == 0
    assert "ok" in capsys.readouterr().out


def test_parse_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.fut"
    bad.write_text("process P =\n  send(0, 1")
    assert main(["parse", str(bad)]) == 2
    assert "2:" in capsys.readouterr().err


def test_canonical_is_stable(model, tmp_path, capsys):
    main(["parse", "--emit", "canonical", model("election")])
    first = capsys.readouterr().out
    again = tmp_path / "again.fut"
    again.write_text(first)
    main(["parse", "--emit", "canonical", str(again)])
    assert capsys.readouterr().out == first


def test_explore_election(model, tmp_path, capsys):
    report, lts = tmp_path / "r.json", tmp_path / "e.aut"
    code = main(["explore", model("election"), "--n", "3", "--values", "3,1,2", "--props", "all",
                 "--report", str(report), "--lts", str(lts)])
    assert code == 0
    data = json.loads(report.read_text())
    assert data["schema_version"] == 1 and data["leader"] == 0
    assert all(p["verdict"] == "holds" for p in data["properties"])
    assert lts.read_text().startswith("des (0, 257, 128)")


def test_explore_deadlock(model, capsys):
    assert main(["explore", model("deadlock"), "--n", "2"]) == 1
    assert "deadlock: fails  witness: []" in capsys.readouterr().out


def test_explore_leak(model, capsys):
    assert main(["explore", model("leak"), "--n", "2", "--props", "leak"]) == 1
    assert "send(0, 1, hello<>)|nrecv" in capsys.readouterr().out


def test_explore_truncated(model):
    assert main(["explore", model("producer"), "--bound", "1000"]) == 3


def test_explore_duplicate_values(model, capsys):
    assert main(["explore", model("election"), "--values", "3,3"]) == 2
    assert "distinct" in capsys.readouterr().err


def test_explore_unknown_property(model):
    assert main(["explore", model("leak"), "--n", "2", "--props", "safety"]) == 2


def test_explore_needs_values(model):
    assert main(["explore", model("election"), "--n", "2"]) == 2


def test_simulate_writes_traces(tmp_path, capsys):
    out = tmp_path / "t"
    assert main(["simulate", "--program", "election", "--n", "3", "--values", "3,1,2", "--seed", "4",
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["rank0.jsonl", "rank1.jsonl", "rank2.jsonl"]
    assert json.loads(capsys.readouterr().out)["leaders"] == [0, 0, 0]


def test_simulate_same_seed_same_bytes(tmp_path):
    for d in ("a", "b"):
        main(["simulate", "--n", "4", "--values", "4,7,1,6", "--seed", "9", "--out", str(tmp_path / d)])
    for r in range(4):
        assert (tmp_path / "a" / f"rank{r}.jsonl").read_bytes() == (tmp_path / "b" / f"rank{r}.jsonl").read_bytes()


def test_simulate_exhaustive(capsys):
    assert main(["simulate", "--n", "2", "--values", "5,9", "--exhaustive", "--depth", "40"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["statuses"] == ["completed"] and summary["outcomes"] >= 1


def test_simulate_exhaustive_bound(capsys):
    assert main(["simulate", "--n", "3", "--exhaustive", "--depth", "5"]) == 3


def test_simulate_unknown_program():
    assert main(["simulate", "--program", "ring", "--n", "2"]) == 2


def test_check_round_trip(model, tmp_path, capsys):
    out = tmp_path / "t"
    main(["simulate", "--n", "3", "--values", "3,1,2", "--seed", "2", "--out", str(out)])
    report = tmp_path / "v.json"
    traces = [str(out / f"rank{r}.jsonl") for r in range(3)]
    assert main(["check", model("election"), *traces, "--values", "3,1,2", "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert [v["verdict"] for v in data["verdicts"]] == ["accepted"] * 3


def test_check_swapped(model, tmp_path, capsys):
    out = tmp_path / "t"
    main(["simulate", "--n", "2", "--values", "5,9", "--out", str(out)])
    path = out / "rank0.jsonl"
    lines = path.read_text().splitlines()
    lines[0], lines[1] = lines[1], lines[0]
    path.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["check", model("election"), str(path), "--values", "5,9"]) == 1
    assert "rejected at index 0" in capsys.readouterr().out


def test_check_rank_future(model, tmp_path, capsys):
    out = tmp_path / "t"
    main(["simulate", "--n", "2", "--values", "5,9", "--out", str(out)])
    path = str(out / "rank1.jsonl")
    assert main(["check", model("election"), path, "--values", "5,9", "--rank-future", "1=Elect(i, 9, 9, 0)"]) == 0
    assert main(["check", model("election"), path, "--values", "5,9", "--rank-future", "1=Elect(i, 5, 5, 0)"]) == 1


def test_check_missing_trace(model, tmp_path):
    assert main(["check", model("election"), str(tmp_path / "nope.jsonl"), "--values", "5,9"]) == 2


def test_check_malformed_trace(model, tmp_path):
    bad = tmp_path / "rank0.jsonl"
    bad.write_text("{not json\n")
    assert main(["check", model("election"), str(bad), "--values", "5,9"]) == 2


def test_missing_model(tmp_path):
    assert main(["parse", str(tmp_path / "missing.fut")]) == 2


def test_threads_env_is_respected(model, monkeypatch):
    monkeypatch.setenv("FUTURE_VERIFY_THREADS", "1")
    assert main(["explore", model("election"), "--values", "5,9", "--workers", "8"]) == 0
