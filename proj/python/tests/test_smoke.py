import math

import numpy as np
import pytest

import mnlmdp


def test_softmax_and_sigma():
    p = mnlmdp.softmax(np.array([0.0, math.log(3.0)]))
    assert np.allclose(p, [0.25, 0.75])
    assert mnlmdp.sigma_squared(p) == pytest.approx(4 * 0.25 * 0.75, abs=1e-12)
    h = mnlmdp.hessian(p)
    assert np.allclose(h, np.diag(p) - np.outer(p, p))


def test_nll_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(3, 2))
    theta = np.array([0.3, -0.2])

    def nll(t):
        z = rows @ t
        return -(z[1] - np.log(np.exp(z).sum()))

    g = mnlmdp.nll_gradient(rows, [0, 1, 2], 1, theta)
    eps = 1e-6
    fd = [(nll(theta + eps * e) - nll(theta - eps * e)) / (2 * eps) for e in np.eye(2)]
    assert np.allclose(g, fd, atol=1e-7)


def test_ocee_stream_and_snapshot():
    params = mnlmdp.ConfidenceParams(0.1, 2, 1.0, 1.0)
    est = mnlmdp.Ocee(params)
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    for k in range(50):
        est.update(rows, [0, 1], k % 2, params)
    assert est.samples_seen == 50
    assert np.linalg.norm(est.theta_online) <= 1.0 + 1e-12
    back = mnlmdp.Ocee.from_json(est.to_json())
    assert np.array_equal(back.estimate, est.estimate)
    assert params.beta(50) > params.beta(1)


def test_projection_lands_on_ball():
    got = mnlmdp.project_h_norm(np.array([2.0, 2.0]), np.diag([4.0, 1.0]), 1.0)
    assert np.linalg.norm(got) == pytest.approx(1.0, abs=1e-9)


def test_riverswim_and_round_trip():
    env = mnlmdp.riverswim(4, 12)
    assert (env.num_states, env.num_actions, env.horizon) == (4, 2, 12)
    support, probs = env.kernel(0, 1, 1)
    assert sorted(support) == [0, 1, 2]
    assert probs.sum() == pytest.approx(1.0)
    values = env.optimal_values()
    assert len(values.v) == 13
    again = mnlmdp.load_env(mnlmdp.env_to_dict(env))
    assert np.array_equal(again.optimal_values().v[0], values.v[0])
    assert mnlmdp.riverswim(4, 12, features="reference").dim == 6


def test_hard_instance():
    env = mnlmdp.hard_instance(3, 4, 0.05, 0.1, [[1, 1, 1, 1], [1, 1, 1, 1]])
    assert env.num_states == 9
    assert env.num_actions == 4


def test_run_experiment(tmp_path):
    out = mnlmdp.run_experiment(
        {
            "env": "riverswim",
            "agent": {"kind": "va_mnl", "beta_scale": 0.0125},
            "episodes": 30,
            "seeds": [1, 2],
            "output_path": str(tmp_path / "run"),
        }
    )
    lines = out["csv"].strip().splitlines()
    assert lines[0].startswith("seed,episode,")
    assert len(lines) == 1 + 60
    assert len(out["curve"]["regret_mean"]) == 30
    assert all(x >= 0 for x in out["curve"]["regret_mean"])
    assert out["summary"]["config_digest"]
    assert (tmp_path / "run" / "episodes.csv").exists()


def test_errors_map_to_value_error():
    with pytest.raises(ValueError):
        mnlmdp.validate_config({"env": "riverswim", "seeds": [1, 1]})
    with pytest.raises(ValueError):
        mnlmdp.riverswim(4, 12, features="dense")
