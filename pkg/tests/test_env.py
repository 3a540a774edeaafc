import numpy as np
import pytest

from qufur.env import (
    DomainSpec,
    export_stream,
    lower_bound_stream,
    replay_stream,
    synthetic_stream,
    table_stream,
)
from qufur.errors import StreamParseError
from qufur.nonlinear import HypothesisTable


def test_domain_spec_validation():
    with pytest.raises(ValueError):
        DomainSpec(entries=())
    with pytest.raises(ValueError):
        DomainSpec(entries=((3, 2),))  # duration below dimension
    with pytest.raises(ValueError):
        DomainSpec(entries=((1, 5),), ordering="zigzag")


def test_synthetic_paper_scale_config():
    # 20 domains mixing (d_u=6, T_u=100) and (d_u=3, T_u=50) inside d=88;
    # mutual orthogonality requires sum(d_u) <= 88, so a 9/11 mix is used
    entries = tuple([(6, 100)] * 9 + [(3, 50)] * 11)
    spec = DomainSpec(entries=entries)
    gt, rounds = synthetic_stream(spec, ambient_d=88, eta=np.sqrt(0.1), seed=0)
    assert len(rounds) == 9 * 100 + 11 * 50
    assert np.linalg.norm(gt.theta_star) == pytest.approx(1.0)
    for r in rounds[:50] + rounds[-50:]:
        assert np.linalg.norm(r.x) == pytest.approx(1.0, abs=1e-9)
        assert abs(r.true_mean) <= 1.0 + 1e-12


def test_synthetic_domains_are_orthogonal():
    spec = DomainSpec(entries=((2, 4), (3, 5), (1, 2)))
    _, rounds = synthetic_stream(spec, ambient_d=6, eta=0.1, seed=3)
    by_domain = {}
    for r in rounds:
        by_domain.setdefault(r.domain_id, []).append(r.x)
    for u, xs_u in by_domain.items():
        for v, xs_v in by_domain.items():
            if u == v:
                continue
            gram = np.stack(xs_u) @ np.stack(xs_v).T
            assert np.max(np.abs(gram)) < 1e-9


def test_synthetic_round_counts_per_domain():
    spec = DomainSpec(entries=((2, 7), (1, 4)))
    _, rounds = synthetic_stream(spec, ambient_d=3, eta=0.0, seed=9)
    counts = {}
    for r in rounds:
        counts[r.domain_id] = counts.get(r.domain_id, 0) + 1
    assert counts == {0: 7, 1: 4}


def test_synthetic_dimension_overflow():
    with pytest.raises(ValueError):
        synthetic_stream(DomainSpec(entries=((4, 5),)), ambient_d=3, eta=0.1, seed=0)


def test_synthetic_orderings():
    spec = DomainSpec(entries=((1, 3), (1, 3)), ordering="sequential")
    _, rounds = synthetic_stream(spec, 2, 0.0, 4)
    assert [r.domain_id for r in rounds] == [0, 0, 0, 1, 1, 1]

    spec_i = DomainSpec(entries=((1, 3), (1, 3)), ordering="interleaved")
    _, rounds_i = synthetic_stream(spec_i, 2, 0.0, 4)
    assert [r.domain_id for r in rounds_i] == [0, 1, 0, 1, 0, 1]

    spec_s = DomainSpec(entries=((1, 3), (1, 3)), ordering="shuffled")
    _, rounds_s = synthetic_stream(spec_s, 2, 0.0, 4)
    assert sorted(r.domain_id for r in rounds_s) == [0, 0, 0, 1, 1, 1]


def test_stream_determinism():
    spec = DomainSpec(entries=((2, 10), (1, 5)), ordering="shuffled")
    _, a = synthetic_stream(spec, 4, 0.3, 77)
    _, b = synthetic_stream(spec, 4, 0.3, 77)
    for ra, rb in zip(a, b):
        assert ra.domain_id == rb.domain_id and ra.y == rb.y
        assert np.array_equal(ra.x, rb.x)


def test_lower_bound_single_coordinate():
    gt, rounds = lower_bound_stream(DomainSpec(entries=((1, 4),)), seed=0)
    assert len(rounds) == 4
    for r in rounds:
        assert np.array_equal(r.x, [1.0])
        assert r.y in (0.0, 1.0)
        assert r.true_mean == pytest.approx(float(gt.theta_star[0]))


def test_lower_bound_subblock_lengths():
    _, rounds = lower_bound_stream(DomainSpec(entries=((3, 10),)), seed=1)
    coords = [int(np.argmax(r.x)) for r in rounds]
    lengths = [coords.count(i) for i in range(3)]
    assert lengths == [3, 3, 4]


def test_lower_bound_subblocks_long_enough():
    for d_u, t_u in ((2, 5), (4, 13), (5, 23)):
        _, rounds = lower_bound_stream(DomainSpec(entries=((d_u, t_u),)), seed=2)
        coords = [int(np.argmax(r.x)) for r in rounds]
        assert len(coords) == t_u
        for i in range(d_u):
            assert coords.count(i) >= t_u / (2 * d_u)


def test_lower_bound_truth_bounds():
    spec = DomainSpec(entries=((2, 100), (4, 400)))
    gt, rounds = lower_bound_stream(spec, seed=5)
    assert gt.theta_star.shape == (6,)
    assert np.all((0.0 <= gt.theta_star) & (gt.theta_star <= 1.0))
    assert np.linalg.norm(gt.theta_star) <= np.sqrt(6)
    assert all(abs(r.true_mean) <= 1.0 for r in rounds)


def test_table_stream():
    table = HypothesisTable(support=["a", "b"], values=[[0.5, -0.5], [0.1, 0.9]],
                            truth_index=0)
    gt, rounds = table_stream(table, horizon=30, eta=0.0, seed=0)
    assert gt.truth_index == 0
    for r in rounds:
        assert r.x in ("a", "b")
        assert r.y == r.true_mean


def test_export_and_replay_round_trip(tmp_path):
    spec = DomainSpec(entries=((2, 6), (1, 3)))
    _, rounds = synthetic_stream(spec, 3, 0.2, 11)
    path = tmp_path / "stream.csv"
    export_stream(rounds, path)
    _, replayed = replay_stream(path)
    assert len(replayed) == len(rounds)
    for orig, rep in zip(rounds, replayed):
        assert rep.t == orig.t and rep.domain_id == orig.domain_id
        assert rep.y == orig.y and rep.true_mean == orig.true_mean
        assert np.array_equal(rep.x, np.asarray(orig.x))


def test_replay_small_file_bit_exact(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text(
        "t,domain_id,true_mean,y,x_0,x_1\n"
        "0,0,0.25,0.5,0.6,0.8\n"
        "1,0,NA,-0.25,1.0,0.0\n"
        "2,1,0.125,0.0,0.0,-1.0\n"
    )
    _, rounds = replay_stream(path)
    assert len(rounds) == 3
    assert rounds[0].true_mean == 0.25 and rounds[0].y == 0.5
    assert rounds[1].true_mean is None
    assert np.array_equal(rounds[2].x, [0.0, -1.0])


def test_replay_errors_name_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,domain_id,true_mean,y,x_0\n0,0,0.1,0.2,oops\n")
    with pytest.raises(StreamParseError, match="line 2"):
        replay_stream(path)
    path.write_text("t,domain_id,true_mean,y,x_0\n0,0,0.1,0.2,0.5\n0,0,0.1,0.2,0.5\n")
    with pytest.raises(StreamParseError, match="line 3"):
        replay_stream(path)
    path.write_text("time,domain,x\n")
    with pytest.raises(StreamParseError, match="line 1"):
        replay_stream(path)


def test_replay_rescales_oversized_rows(tmp_path, caplog):
    path = tmp_path / "big.csv"
    path.write_text("t,domain_id,true_mean,y,x_0,x_1\n0,0,0.0,0.0,3.0,4.0\n")
    with caplog.at_level("WARNING"):
        _, rounds = replay_stream(path)
    assert np.linalg.norm(rounds[0].x) == pytest.approx(1.0)
    assert "rescaled 1" in caplog.text
