import io
import math

import pytest

from popcast import (
    ContractError,
    CutSpec,
    InteractionEvent,
    PredictorSpec,
    ScoreTable,
    build_index,
    make_log,
    normalize_scores,
    rank_top_n,
    score,
    score_pbp,
    score_proposed,
    score_total_popularity,
    write_score_table,
)
from conftest import random_log
from oracles import pbp_scan, rank_by, recency_weighted_table_scan


def log_of(*item_days):
    return make_log(
        InteractionEvent(user_id=u, item_id=item, day=day)
        for u, (item, day) in enumerate(item_days)
    )


def test_total_popularity_is_degree():
    # item 1: 3 links by day 9; item 2: 1 link
    index = build_index(log_of((1, 1), (1, 5), (1, 9), (2, 3)))
    table = score_total_popularity(index, CutSpec(t=9, t_p=5, t_f=1))
    assert table.scores == {1: 3.0, 2: 1.0}
    assert not table.normalized
    assert table.spec.kind == "total"


def test_cut_outside_data_range_is_an_error():
    index = build_index(log_of((1, 5)))
    with pytest.raises(ContractError, match="outside"):
        score_total_popularity(index, CutSpec(t=4, t_p=1, t_f=1))
    with pytest.raises(ContractError, match="outside"):
        score_total_popularity(index, CutSpec(t=6, t_p=1, t_f=1))


def test_pbp_arithmetic():
    # one item with 10 links by t and 4 links by t - t_p
    days = [0, 1, 2, 3, 10, 11, 12, 13, 14, 15]
    index = build_index(log_of(*((7, d) for d in days)))
    cut = CutSpec(t=15, t_p=10, t_f=1)
    table = score_pbp(index, cut, 0.5)
    assert table.scores[7] == pytest.approx(10 - 0.5 * 4)


def test_pbp_reductions(rng):
    for _ in range(25):
        log = random_log(rng)
        index = build_index(log)
        t = int(rng.integers(log.min_day, log.max_day + 1))
        cut = CutSpec(t=t, t_p=int(rng.integers(1, 10)), t_f=1)
        total = score_total_popularity(index, cut)
        lam0 = score_pbp(index, cut, 0.0)
        lam1 = score_pbp(index, cut, 1.0)
        for item in total.scores:
            assert lam0.scores[item] == total.scores[item]
            assert lam1.scores[item] == index.past_gain(item, cut)


def test_pbp_lambda_range():
    index = build_index(log_of((1, 1)))
    with pytest.raises(ContractError):
        score_pbp(index, CutSpec(t=1, t_p=1, t_f=1), 1.5)


def test_pbp_window_gain_form():
    days = [0, 1, 2, 3, 10, 11]
    index = build_index(log_of(*((7, d) for d in days)))
    cut = CutSpec(t=11, t_p=5, t_f=1)
    # degree 6, window gain 2: k - lam * gain = 6 - 0.5 * 2
    table = score_pbp(index, cut, 0.5, pbp_form="window-gain")
    assert table.scores[7] == pytest.approx(5.0)


def test_proposed_hand_computed_example():
    # item 1 linked on days 1 and 9, item 2 on day 10; cut at t=10, t_p=5
    index = build_index(log_of((1, 1), (1, 9), (2, 10)))
    cut = CutSpec(t=10, t_p=5, t_f=1)
    table = score_proposed(index, cut, 1.0, 0.1)
    raw_1 = 1.0 * (math.exp(-0.9) + math.exp(-0.1))
    raw_2 = 1.0 * math.exp(0.0)
    assert table.normalized
    assert table.scores[1] == pytest.approx(raw_1 / (raw_1 + raw_2), rel=1e-12)
    assert table.scores[2] == pytest.approx(raw_2 / (raw_1 + raw_2), rel=1e-12)
    assert table.scores[1] == pytest.approx(0.5674, abs=5e-5)
    assert table.scores[2] == pytest.approx(0.4326, abs=5e-5)


def test_proposed_zero_parameters_squares_degree():
    index = build_index(log_of((1, 1), (1, 5), (1, 9), (2, 3)))
    cut = CutSpec(t=9, t_p=5, t_f=1)
    table = score_proposed(index, cut, 0.0, 0.0)
    total = score_total_popularity(index, cut)
    z = sum(v**2 for v in total.scores.values())
    for item, degree in total.scores.items():
        assert table.scores[item] == pytest.approx(degree**2 / z, rel=1e-12)
    for n in range(1, len(total.scores) + 1):
        assert rank_top_n(table, n) == rank_top_n(total, n)


def test_proposed_single_candidate_normalizes_to_one():
    index = build_index(log_of((1, 1), (1, 2)))
    table = score_proposed(index, CutSpec(t=2, t_p=2, t_f=1), 0.5, 0.3)
    assert table.normalized
    assert table.scores[1] == 1.0


def test_proposed_all_zero_scores_left_unnormalized():
    # every candidate's window gain is zero at lambda=1
    index = build_index(log_of((1, 0), (2, 1), (1, 20)))
    cut = CutSpec(t=10, t_p=5, t_f=1)
    table = score_proposed(index, cut, 1.0, 0.1)
    assert not table.normalized
    assert all(v == 0.0 for v in table.scores.values())


def test_proposed_matches_per_link_brute_force(rng):
    for _ in range(40):
        log = random_log(rng)
        index = build_index(log)
        t = int(rng.integers(log.min_day, log.max_day + 1))
        cut = CutSpec(t=t, t_p=int(rng.integers(1, 12)), t_f=1)
        lam = float(rng.random())
        gamma = float(rng.random())
        table = score_proposed(index, cut, lam, gamma)
        expected, normalized = recency_weighted_table_scan(log, t, cut.t_p, lam, gamma)
        assert table.normalized == normalized
        assert set(table.scores) == set(expected)
        for item, value in expected.items():
            assert table.scores[item] == pytest.approx(value, rel=1e-9, abs=1e-12)


def test_proposed_windowed_decay_variant():
    index = build_index(log_of((1, 0), (1, 9), (2, 8)))
    cut = CutSpec(t=9, t_p=4, t_f=1)
    table = score_proposed(index, cut, 0.0, 0.5, windowed_decay=True)
    # only links after day 5 feed the recency factor
    raw_1 = 2.0 * math.exp(0.5 * (9 - 9))
    raw_2 = 1.0 * math.exp(0.5 * (8 - 9))
    z = raw_1 + raw_2
    assert table.scores[1] == pytest.approx(raw_1 / z, rel=1e-12)
    assert table.scores[2] == pytest.approx(raw_2 / z, rel=1e-12)


def test_older_links_never_outscore_newer_at_same_gain():
    # items 1 and 2 have equal degree and equal window gain; item 1's links
    # are pairwise strictly older (item 3 only anchors the day range)
    index = build_index(log_of((1, 1), (1, 2), (2, 5), (2, 6), (3, 10)))
    for gamma in (0.0, 0.1, 0.5, 1.0):
        table = score_proposed(index, CutSpec(t=10, t_p=10, t_f=1), 0.5, gamma)
        assert table.scores[1] <= table.scores[2] + 1e-15


def test_score_dispatcher():
    index = build_index(log_of((1, 1), (2, 3)))
    cut = CutSpec(t=3, t_p=2, t_f=1)
    assert score(index, cut, PredictorSpec(kind="total")).spec.kind == "total"
    assert score(index, cut, PredictorSpec(kind="pbp", lambda_=0.5)).spec.lambda_ == 0.5
    table = score(index, cut, PredictorSpec(kind="proposed", lambda_=0.5, gamma=0.2))
    assert table.spec.gamma == 0.2
    assert table.spec.t_p == 2


def test_normalize_scores():
    cut = CutSpec(t=1, t_p=1, t_f=1)
    spec = PredictorSpec(kind="total")
    table = ScoreTable(cut=cut, spec=spec, scores={1: 2.0, 2: 2.0})
    normalized = normalize_scores(table)
    assert normalized.scores == {1: 0.5, 2: 0.5}
    assert normalized.normalized
    zero = normalize_scores(ScoreTable(cut=cut, spec=spec, scores={1: 0.0, 2: 0.0}))
    assert not zero.normalized
    assert zero.scores == {1: 0.0, 2: 0.0}
    with pytest.raises(ContractError):
        normalize_scores(ScoreTable(cut=cut, spec=spec, scores={1: -1.0}))


def test_normalized_tables_sum_to_one(rng):
    for _ in range(25):
        log = random_log(rng)
        index = build_index(log)
        t = int(rng.integers(log.min_day, log.max_day + 1))
        table = score_proposed(
            index, CutSpec(t=t, t_p=5, t_f=1), float(rng.random()), float(rng.random())
        )
        if table.normalized:
            assert sum(table.scores.values()) == pytest.approx(1.0, abs=1e-9)


def test_scores_are_nonnegative(rng):
    for _ in range(25):
        log = random_log(rng)
        index = build_index(log)
        t = int(rng.integers(log.min_day, log.max_day + 1))
        cut = CutSpec(t=t, t_p=int(rng.integers(1, 10)), t_f=1)
        lam = float(rng.random())
        for table in (
            score_total_popularity(index, cut),
            score_pbp(index, cut, lam),
            score_proposed(index, cut, lam, float(rng.random())),
        ):
            assert all(v >= 0 for v in table.scores.values())


def test_rank_top_n_tie_break():
    cut = CutSpec(t=1, t_p=1, t_f=1)
    table = ScoreTable(
        cut=cut, spec=PredictorSpec(kind="total"), scores={1: 3.0, 2: 1.0, 3: 3.0}
    )
    assert rank_top_n(table, 2) == [1, 3]
    assert rank_top_n(table, 99) == [1, 3, 2]
    with pytest.raises(ContractError):
        rank_top_n(table, 0)


def test_rank_top_n_matches_full_sort_oracle(rng):
    for _ in range(20):
        items = list(range(int(rng.integers(1, 12))))
        scores = {i: float(rng.integers(0, 5)) for i in items}
        table = ScoreTable(
            cut=CutSpec(t=1, t_p=1, t_f=1),
            spec=PredictorSpec(kind="total"),
            scores=scores,
        )
        full = rank_by(scores, items)
        for n in range(1, len(items) + 2):
            assert rank_top_n(table, n) == full[:n]


def test_pbp_matches_link_count_oracle(rng):
    for _ in range(30):
        log = random_log(rng)
        index = build_index(log)
        t = int(rng.integers(log.min_day, log.max_day + 1))
        cut = CutSpec(t=t, t_p=int(rng.integers(1, 12)), t_f=1)
        lam = float(rng.random())
        table = score_pbp(index, cut, lam)
        for item in table.scores:
            assert table.scores[item] == pytest.approx(
                pbp_scan(log, item, t, cut.t_p, lam), rel=1e-9, abs=1e-12
            )


def test_write_score_table_deterministic(tmp_path):
    index = build_index(log_of((1, 1), (1, 9), (2, 10)))
    cut = CutSpec(t=10, t_p=5, t_f=7)
    table = score_proposed(index, cut, 0.9, 0.1)
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    write_score_table(table, out1)
    write_score_table(table, out2)
    assert out1.read_bytes() == out2.read_bytes()
    sidecar = (tmp_path / "a.json").read_text()
    assert '"kind": "proposed"' in sidecar
    assert '"t": 10' in sidecar
    header = out1.read_text().splitlines()[0]
    assert header == "item_id,score"


def test_write_score_table_to_stream():
    index = build_index(log_of((1, 1)))
    table = score_total_popularity(index, CutSpec(t=1, t_p=1, t_f=1))
    buf = io.StringIO()
    write_score_table(table, buf)
    assert buf.getvalue() == "item_id,score\n1,1.0\n"


def test_predictor_spec_validation():
    with pytest.raises(ContractError):
        PredictorSpec(kind="bogus")
    with pytest.raises(ContractError):
        PredictorSpec(kind="pbp", lambda_=-0.1)
    with pytest.raises(ContractError):
        PredictorSpec(kind="proposed", gamma=-1.0)
    with pytest.raises(ContractError):
        PredictorSpec(kind="pbp", t_p=0)
