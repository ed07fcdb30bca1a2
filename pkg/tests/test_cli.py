import json

import pytest

from popcast.cli import build_parser, main


def run_cli(args):
    return main(list(args))


@pytest.fixture
def raw_epoch_file(tmp_path):
    # three users, ratings, epoch-second timestamps 0 / 1.5 days / 3 days
    path = tmp_path / "raw.csv"
    path.write_text(
        "1,10,0,5\n"
        "1,11,129600,4\n"
        "1,12,259200,1\n"
        "2,10,129600,3\n"
        "2,11,259200,5\n"
        "3,10,0,2\n"
    )
    return path


@pytest.fixture
def synth_events(tmp_path):
    out = tmp_path / "events.csv"
    rc = run_cli(
        [
            "synth",
            "--horizon-days",
            "120",
            "--links-per-day",
            "40",
            "--new-items-per-day",
            "1.5",
            "--theta",
            "0.05",
            "--fitness",
            "uniform",
            "--seed",
            "9",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    return out


def test_ingest_filters_and_summary(raw_epoch_file, tmp_path, capsys):
    out = tmp_path / "events.csv"
    rc = run_cli(
        [
            "ingest",
            str(raw_epoch_file),
            "--min-rating-exclusive",
            "2",
            "--min-user-events",
            "2",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    # ratings 1 and 2 drop; user 3 then has no events; users 1 and 2 keep 2 each
    assert summary["n_users"] == 2
    assert summary["n_links"] == 4
    assert summary["min_day"] == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].split(",")[:2] == ["1", "10"]


def test_ingest_missing_file_exit_2(tmp_path, capsys):
    out = tmp_path / "x.csv"
    rc = run_cli(["ingest", str(tmp_path / "nope.csv"), "--out", str(out)])
    assert rc == 2
    assert not out.exists()
    assert "not found" in capsys.readouterr().err


def test_ingest_parse_error_names_file_and_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,10,0\n1,xx,86400\n")
    rc = run_cli(["ingest", str(bad), "--out", str(tmp_path / "out.csv")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "bad.csv" in err
    assert "line 2" in err


def test_ingest_day_granularities_agree_on_equivalent_data(tmp_path):
    # the same logical data expressed as day indices and as epoch seconds
    days_file = tmp_path / "days.csv"
    days_file.write_text("1,10,0\n2,11,3\n3,12,7\n")
    epoch_file = tmp_path / "epoch.csv"
    epoch_file.write_text(
        f"1,10,0\n2,11,{3 * 86400}\n3,12,{7 * 86400}\n"
    )
    out_days = tmp_path / "out_days.csv"
    out_epoch = tmp_path / "out_epoch.csv"
    assert run_cli(
        ["ingest", str(days_file), "--day-granularity", "days", "--out", str(out_days)]
    ) == 0
    assert run_cli(
        ["ingest", str(epoch_file), "--day-granularity", "epoch-seconds", "--out", str(out_epoch)]
    ) == 0
    assert out_days.read_bytes() == out_epoch.read_bytes()


def test_ingest_iso_dates_and_header(tmp_path):
    raw = tmp_path / "iso.csv"
    raw.write_text("user_id,item_id,timestamp\n1,10,2004-01-01\n2,11,2004-01-05\n")
    out = tmp_path / "out.csv"
    rc = run_cli(
        [
            "ingest",
            str(raw),
            "--day-granularity",
            "iso8601",
            "--header",
            "--columns",
            "user_id,item_id,timestamp",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert out.read_text() == "1,10,0\n2,11,4\n"


def test_ingest_ownership_and_sampling(tmp_path, capsys):
    raw = tmp_path / "raw.csv"
    raw.write_text("5,50,0\n5,51,1\n6,51,2\n6,50,3\n")
    owners = tmp_path / "owners.csv"
    owners.write_text("50,5\n51,6\n")
    out = tmp_path / "out.csv"
    rc = run_cli(
        [
            "ingest",
            str(raw),
            "--day-granularity",
            "days",
            "--ownership",
            str(owners),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert out.read_text() == "5,51,1\n6,50,3\n"


def test_score_deterministic_bytes(synth_events, tmp_path):
    out1 = tmp_path / "s1.csv"
    out2 = tmp_path / "s2.csv"
    args = [
        "score",
        str(synth_events),
        "--predictor",
        "proposed",
        "--lambda",
        "0.9",
        "--gamma",
        "0.1",
        "--tp",
        "30",
        "--t",
        "80",
    ]
    assert run_cli(args + ["--out", str(out1)]) == 0
    assert run_cli(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    sidecar = json.loads((tmp_path / "s1.json").read_text())
    assert sidecar["predictor"]["kind"] == "proposed"
    assert sidecar["normalized"] is True


def test_score_t_out_of_range(synth_events, tmp_path, capsys):
    rc = run_cli(
        [
            "score",
            str(synth_events),
            "--predictor",
            "total",
            "--t",
            "5000",
            "--out",
            str(tmp_path / "s.csv"),
        ]
    )
    assert rc == 2
    assert "outside data range" in capsys.readouterr().err


def test_sweep_outputs_and_worker_invariance(synth_events, tmp_path, capsys):
    args = [
        "sweep",
        str(synth_events),
        "--cuts",
        "4",
        "--seed",
        "3",
        "--n",
        "10,20",
        "--lambda-grid",
        "0,0.9",
        "--gamma-grid",
        "0,0.1",
        "--no-figures",
    ]
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert run_cli(args + ["--out", str(out1)]) == 0
    capsys.readouterr()
    assert run_cli(args + ["--out", str(out2), "--workers", "3"]) == 0
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["n_failed_cells"] == 0
    assert summary["plan"]["n_cuts"] == 4


def test_sweep_with_plan_file(synth_events, tmp_path):
    plan = {
        "n_cuts": 2,
        "seed": 11,
        "t_p_days": 20,
        "t_f_days": 20,
        "lambda_grid": [0.9],
        "gamma_grid": [0.1],
        "ns": [5],
        "predictors": [{"kind": "pbp"}, {"kind": "proposed"}],
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan))
    out = tmp_path / "rep"
    rc = run_cli(
        ["sweep", str(synth_events), "--plan", str(plan_path), "--no-figures", "--out", str(out)]
    )
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["plan"]["t_p_days"] == 20
    assert {a["predictor"] for a in summary["averages"]} == {"pbp", "proposed"}


def test_evaluate_with_explicit_cuts(synth_events, tmp_path):
    out = tmp_path / "eval"
    rc = run_cli(
        [
            "evaluate",
            str(synth_events),
            "--predictor",
            "proposed",
            "--lambda",
            "0.9",
            "--gamma",
            "0.1",
            "--t",
            "60,80",
            "--n",
            "10",
            "--no-figures",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["cuts"] == [60, 80]
    assert len(summary["averages"]) == 1


def test_horizon_command(synth_events, tmp_path):
    out = tmp_path / "hz"
    rc = run_cli(
        [
            "horizon",
            str(synth_events),
            "--tf-list",
            "10,30",
            "--cuts",
            "3",
            "--n",
            "10",
            "--no-figures",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    t_fs = {line.split(",")[5] for line in lines[1:]}
    assert t_fs == {"10", "30"}


def test_compare_command(synth_events, tmp_path, capsys):
    report = tmp_path / "rep"
    assert (
        run_cli(
            [
                "sweep",
                str(synth_events),
                "--cuts",
                "3",
                "--n",
                "10",
                "--lambda-grid",
                "0.9",
                "--gamma-grid",
                "0.1",
                "--no-figures",
                "--out",
                str(report),
            ]
        )
        == 0
    )
    capsys.readouterr()
    rc = run_cli(
        [
            "compare",
            str(report),
            "--baseline",
            "pbp,lambda=0.9",
            "--challenger",
            "proposed,lambda=0.9,gamma=0.1",
            "--no-figures",
        ]
    )
    assert rc == 0
    payload = json.loads((report / "comparison.json").read_text())
    assert payload["baseline"]["predictor"] == "pbp"
    metrics = {r["metric"] for r in payload["rows"]}
    assert metrics == {"p_n", "q_n", "auc"}
    csv_header = (report / "comparison.csv").read_text().splitlines()[0]
    assert csv_header.startswith("n,metric,baseline,challenger")


def test_compare_bad_selector(synth_events, tmp_path, capsys):
    report = tmp_path / "rep"
    assert (
        run_cli(
            [
                "sweep",
                str(synth_events),
                "--cuts",
                "2",
                "--n",
                "10",
                "--no-figures",
                "--out",
                str(report),
            ]
        )
        == 0
    )
    rc = run_cli(
        ["compare", str(report), "--baseline", "pbp,lambda=0.5", "--challenger", "total"]
    )
    assert rc == 2


def test_synth_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["synth", "--horizon-days", "30", "--links-per-day", "5", "--seed", "4"]
    assert run_cli(args + ["--out", str(a)]) == 0
    assert run_cli(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a_truth.csv").read_text().splitlines()[0] == "item_id,birth_day,fitness"


def test_help_lists_documented_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["score", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "0.9" in text  # lambda default
    assert "0.1" in text  # gamma default
    assert "30" in text  # window defaults

    with pytest.raises(SystemExit):
        main(["sweep", "--help"])
    text = capsys.readouterr().out
    assert "10" in text  # cuts default
    assert "42" in text  # seed default
    assert "50,100,200" in text  # list sizes default

    with pytest.raises(SystemExit):
        main(["synth", "--help"])
    text = capsys.readouterr().out
    assert "365" in text
    assert "100" in text

    with pytest.raises(SystemExit):
        main(["ingest", "--help"])
    text = capsys.readouterr().out
    assert "epoch-seconds" in text


def test_every_subcommand_has_help():
    parser = build_parser()
    for sub in ("ingest", "score", "evaluate", "sweep", "horizon", "synth", "compare"):
        with pytest.raises(SystemExit) as exc:
            parser.parse_args([sub, "--help"])
        assert exc.value.code == 0
