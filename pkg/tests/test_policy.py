import numpy as np
import pytest

from tgasched import env
from tgasched.env import JspInstance, MtspInstance, validate
from tgasched.graph import build_graph
from tgasched.policy import Policy, PolicyConfig, select_action


def _small(problem="mtsp", **kw):
    return Policy.create(PolicyConfig(problem=problem, hidden=8, actor_hidden=(16,), **kw), seed=0)


def test_zero_actor_gives_uniform_distribution():
    p = _small()
    for k in p.params.values:
        if k.startswith("actor"):
            p.params.values[k][...] = 0.0
    g = build_graph(env.reset(MtspInstance((0, 0), [(1, 0), (0, 1), (1, 1), (2, 2)], 2)))
    np.testing.assert_allclose(p.probabilities([g])[0], 0.25)


def test_single_candidate_has_probability_one():
    p = _small()
    g = build_graph(env.reset(MtspInstance((0, 0), [(1, 0)], 1)))
    assert p.probabilities([g])[0].tolist() == [1.0]


def test_greedy_ties_go_to_lowest_index():
    assert select_action([0.25, 0.25, 0.5, 0.0])[0] == 2
    assert select_action([0.5, 0.5])[0] == 0


def test_sampling_follows_probabilities():
    rng = np.random.default_rng(0)
    counts = np.bincount([select_action([0.2, 0.8], "sample", rng)[0] for _ in range(4000)], minlength=2)
    assert abs(counts[1] / 4000 - 0.8) < 0.03
    assert select_action([0.0, 1.0], "sample", rng) == (1, 1.0)


def test_select_action_errors():
    with pytest.raises(ValueError):
        select_action([1.0], "sample")
    with pytest.raises(ValueError):
        select_action([1.0], "beam")


def test_batched_probabilities_match_single():
    p = _small("jsp")
    inst = JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)
    s = env.reset(inst)
    g1 = build_graph(s)
    g2 = build_graph(env.step(s, env.feasible_actions(s)[0]))
    both = p.probabilities([g1, g2])
    np.testing.assert_allclose(both[0], p.probabilities([g1])[0], atol=1e-12)
    np.testing.assert_allclose(both[1], p.probabilities([g2])[0], atol=1e-12)
    for d in both:
        assert d.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("problem", ["mtsp", "jsp"])
def test_run_produces_valid_solutions(problem):
    p = _small(problem)
    rng = np.random.default_rng(1)
    if problem == "mtsp":
        insts = [MtspInstance(rng.random(2), rng.random((n, 2)), 2) for n in (3, 5, 7)]
    else:
        insts = [JspInstance.from_matrices(np.stack([rng.permutation(3) for _ in range(3)]),
                                           rng.integers(1, 9, (3, 3))) for _ in range(3)]
    for mode in ("greedy", "sample"):
        for ep in p.run(insts, mode, rng, record=True):
            assert validate(ep.instance, env.solution(ep.final_state)).ok
            assert len(ep.graphs) == ep.length == len(ep.probs)
            assert all(0 < q <= 1 for q in ep.probs)


def test_greedy_run_is_deterministic_and_matches_call():
    p = _small()
    inst = MtspInstance((0.5, 0.5), np.random.default_rng(2).random((6, 2)), 2)
    a = p.run([inst])[0].makespan
    assert a == p.run([inst])[0].makespan
    assert env.makespan(env.rollout(inst, p)) == a


def test_save_load_round_trip(tmp_path):
    p = _small("jsp", embedder="gn")
    path = tmp_path / "p.npz"
    p.save(path, {"note": "x"})
    q = Policy.load(path)
    assert q.config == p.config
    g = build_graph(env.reset(JspInstance([[(0, 3), (1, 2)], [(1, 4), (0, 1)]], 2)))
    np.testing.assert_array_equal(q.logits(g), p.logits(g))


def test_policy_config_dict_round_trip():
    c = PolicyConfig(problem="jsp", hidden=16, actor_hidden=(8, 4))
    assert PolicyConfig.from_dict(c.to_dict()) == c
