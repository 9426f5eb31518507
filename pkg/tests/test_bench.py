import io
import math

import numpy as np
import pytest

from tgasched.bench import (
    evaluate, gen_random_jsp, gen_random_mtsp, load_best_known, load_taillard_set, optimality_gap, summarize,
    write_records_csv, write_summary_csv,
)
from tgasched.bench.formats import (
    DATA_ENV, ParseError, data_dir, format_taillard, format_tsplib, parse_taillard, parse_tsplib, read_instance,
    tsplib_instance, write_instance,
)
from tgasched.env import MtspInstance
from tgasched.policy import Policy, PolicyConfig

TSP = """NAME : tiny
TYPE : TSP
DIMENSION: 3
EDGE_WEIGHT_TYPE : EUC_2D
NODE_COORD_SECTION
1 0 0
2 3 4
3 6 0
EOF
"""


# ---------------------------------------------------------------- generators

def test_gen_mtsp():
    a, b = gen_random_mtsp(20, 2, 7), gen_random_mtsp(20, 2, 7)
    np.testing.assert_array_equal(a.cities, b.cities)
    np.testing.assert_array_equal(a.depot, b.depot)
    assert a.num_cities == 20 and a.num_agents == 2
    assert np.all((a.cities >= 0) & (a.cities <= 1)) and np.all((a.depot >= 0) & (a.depot <= 1))
    assert not np.array_equal(a.cities, gen_random_mtsp(20, 2, 8).cities)


def test_gen_jsp():
    a = gen_random_jsp(10, 3, 1)
    assert a.num_jobs == 10 and a.num_machines == 3
    for route in a.jobs:
        assert sorted(mc for mc, _ in route) == [0, 1, 2]
        assert all(1 <= p <= 99 for _, p in route)
    assert format_taillard(a) == format_taillard(gen_random_jsp(10, 3, 1))
    short = gen_random_jsp(4, 2, 1, time_range=(5, 6))
    assert all(p in (5, 6) for route in short.jobs for _, p in route)


# ---------------------------------------------------------------- TSPLib

def test_parse_tsplib_basic():
    d = parse_tsplib(TSP)
    assert d["name"] == "tiny" and d["coords"].shape == (3, 2) and d["salesmen"] is None


def test_tsplib_missing_section():
    with pytest.raises(ParseError, match="NODE_COORD_SECTION"):
        parse_tsplib("NAME : x\nDIMENSION : 1\n")


def test_tsplib_bad_coordinate_reports_line():
    with pytest.raises(ParseError) as err:
        parse_tsplib(TSP.replace("2 3 4", "2 3 x"))
    assert err.value.line == 7


def test_tsplib_dimension_mismatch():
    with pytest.raises(ParseError, match="DIMENSION"):
        parse_tsplib(TSP.replace("DIMENSION: 3", "DIMENSION: 4"))


def test_tsplib_instance_depot_choice():
    inst = tsplib_instance(TSP, 2)
    np.testing.assert_array_equal(inst.depot, [0, 0])
    inst3 = tsplib_instance(TSP, 2, depot=3)
    np.testing.assert_array_equal(inst3.depot, [6, 0])
    with pytest.raises(ParseError):
        tsplib_instance(TSP)  # no salesmen given
    with pytest.raises(ParseError):
        tsplib_instance(TSP, 2, depot=9)


def test_tsplib_round_trip():
    inst = gen_random_mtsp(9, 3, 0)
    back = tsplib_instance(format_tsplib(inst))
    np.testing.assert_array_equal(back.cities, inst.cities)
    np.testing.assert_array_equal(back.depot, inst.depot)
    assert back.num_agents == 3


# ---------------------------------------------------------------- Taillard

def test_parse_taillard_small():
    inst = parse_taillard("2 2\n0 3 1 2\n1 4 0 1")
    assert inst.num_jobs == 2 and inst.num_machines == 2 and inst.num_ops == 4
    assert tuple(inst.jobs[1][0]) == (1, 4)


@pytest.mark.parametrize("text,match", [
    ("2 2\n0 3 1 2", "declares 2 jobs"),
    ("1 2\n0 -3 1 2", "nonpositive"),
    ("1 2\n0 3 5 2", "outside"),
    ("1 2\n0 3 1", "pairs"),
    ("", "empty"),
])
def test_parse_taillard_errors(text, match):
    with pytest.raises(ParseError, match=match):
        parse_taillard(text)


def test_taillard_round_trip():
    inst = gen_random_jsp(5, 4, 3)
    assert format_taillard(parse_taillard(format_taillard(inst))) == format_taillard(inst)


def test_bundled_taillard_set():
    insts = load_taillard_set()
    assert [i.name for i in insts] == [f"ta{k:02d}" for k in range(1, 11)]
    assert all(i.num_jobs == 15 and i.num_machines == 15 and i.num_ops == 225 for i in insts)
    best = load_best_known()
    assert all(best[i.name] > 0 for i in insts)
    assert best["ta01"] == 1231


def test_data_dir_env_override(monkeypatch, tmp_path):
    monkeypatch.setenv(DATA_ENV, str(tmp_path))
    assert data_dir() == tmp_path


def test_read_write_instance(tmp_path):
    m, j = gen_random_mtsp(4, 2, 0), gen_random_jsp(3, 2, 0)
    write_instance(m, tmp_path / "a.tsp")
    write_instance(j, tmp_path / "b.txt")
    np.testing.assert_array_equal(read_instance(tmp_path / "a.tsp").cities, m.cities)
    assert read_instance(tmp_path / "b.txt").name == "b"


# ---------------------------------------------------------------- metrics and evaluation

def test_gap():
    assert optimality_gap(115.4, 100) == pytest.approx(1.154)
    assert optimality_gap(7.0, 7.0) == 1.0
    with pytest.raises(ValueError):
        optimality_gap(1.0, 0.0)


def test_oracle_reference_gives_unit_gap():
    insts = [gen_random_mtsp(5, 2, s) for s in range(5)]
    recs = evaluate(insts, "oracle", reference="oracle")
    assert [r.gap for r in recs] == [1.0] * 5


def test_gap_at_least_one_against_oracle():
    insts = [gen_random_mtsp(6, 2, s) for s in range(5)]
    for solver in ("nearest", "farthest", "random", "nearest-neighbor"):
        assert all(r.gap >= 1.0 for r in evaluate(insts, solver, reference="oracle"))


def test_summary_of_identical_makespans():
    inst = gen_random_jsp(3, 3, 0)
    recs = evaluate([inst] * 100, "mor")
    s = summarize(recs)
    assert s["std_makespan"] == 0.0 and s["count"] == 100 and math.isnan(s["mean_gap"])


def test_failures_are_recorded_and_sweep_continues():
    insts = [gen_random_mtsp(4, 2, 0), gen_random_jsp(2, 2, 0), gen_random_mtsp(4, 2, 1)]
    recs = evaluate(insts, "nearest")
    assert [r.ok for r in recs] == [True, False, True]
    assert "SolverMismatchError" in recs[1].error
    assert summarize(recs)["failed"] == 1


def test_evaluate_does_not_mutate_and_is_reproducible():
    insts = [gen_random_mtsp(6, 2, s) for s in range(6)]
    before = [i.cities.copy() for i in insts]
    pol = Policy.create(PolicyConfig(hidden=8, actor_hidden=(8,)), 0)
    outs = []
    for threads in (1, 3):
        fh = io.StringIO()
        write_records_csv(evaluate(insts, "policy", policy=pol, reference="oracle", threads=threads), fh)
        outs.append(fh.getvalue())
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0] == "instance,solver,seed,makespan,reference,gap,error"
    assert all(np.array_equal(a, i.cities) for a, i in zip(before, insts))


def test_taillard_dispatch_rows():
    recs = evaluate(load_taillard_set(["ta01"]), "spt", reference=load_best_known())
    assert recs[0].gap == recs[0].makespan / 1231
    fh = io.StringIO()
    write_summary_csv({"spt": summarize(recs)}, fh)
    assert fh.getvalue().startswith("solver,count,failed,mean_makespan")


def test_timing_column_optional():
    recs = evaluate([gen_random_mtsp(3, 1, 0)], "nearest")
    fh = io.StringIO()
    write_records_csv(recs, fh, timing=True)
    assert fh.getvalue().splitlines()[0].endswith(",seconds")


def test_evaluate_rejects_policy_without_checkpoint():
    with pytest.raises(ValueError):
        evaluate([MtspInstance((0, 0), [(1, 0)], 1)], "policy")
