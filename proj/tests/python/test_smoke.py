import json
import math
import os

import pytest

omiga_core = pytest.importorskip("omiga_core")

CONFIG_DIR = os.environ.get("OMIGA_CONFIG_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "configs"))


@pytest.fixture(scope="module")
def matrix_env(tmp_path_factory):
    cfg = {
        "env_name": "matrix_game",
        "n_agents": 2,
        "payoff_table": [[1.0, 0.0], [0.0, 0.0]],
        "horizon": 1,
    }
    path = tmp_path_factory.mktemp("cfg") / "matrix.json"
    path.write_text(json.dumps(cfg))
    return omiga_core.Env.from_config_file(str(path))


def test_env_rollout(matrix_env):
    ep, obs = matrix_env.reset(seed=0)
    assert ep.state == 0
    assert obs == [[1.0], [1.0]]
    nxt, obs2, reward, done = matrix_env.step(ep, [0, 0])
    assert reward == 1.0
    assert done


def test_oracle_matches_hand_computation(matrix_env):
    mdp = matrix_env.tabular_export(0.99)
    pol = omiga_core.make_behavior_policy(matrix_env, "uniform", 0)
    mu = omiga_core.behavior_joint(mdp, pol)
    sol = omiga_core.oracle_solve(mdp, mu, 1.0, 1e-12)
    expect = math.log((math.e + 3.0) / 4.0)
    assert abs(sol.v_star[0] - expect) < 1e-9
    assert abs(sum(sol.pi_star[0]) - 1.0) < 1e-8
    assert abs(sol.v_star[0] - (sol.u_star[0] + 1.0)) < 1e-12


def test_local_v_solve_closed_form():
    v = omiga_core.local_v_solve(1.0, 1.0, [1.0, 0.0], [0.5, 0.5])
    assert abs(v - math.log((math.e + 1.0) / 2.0)) < 1e-12


def test_dataset_and_training_flow(matrix_env, tmp_path):
    pol = omiga_core.make_behavior_policy(matrix_env, "uniform", 0)
    ds = omiga_core.generate_dataset(matrix_env, pol, 200, 0)
    assert ds.manifest.n_transitions == 200
    out = tmp_path / "d"
    omiga_core.save_dataset(ds, str(out))
    loaded = omiga_core.load_dataset(str(out))
    assert loaded.manifest.n_episodes == 200

    cfg = omiga_core.TrainConfig()
    cfg.alpha = 1.0
    cfg.steps = 120
    cfg.batch_size = 32
    cfg.hidden = [8]
    cfg.mixer_hidden = [4]
    cfg.eval_interval = 60
    cfg.eval_episodes = 8
    cfg.seed = 0
    res = omiga_core.train(loaded, matrix_env, cfg)
    assert len(res.metrics) == 2
    assert all(math.isfinite(row.q_loss) for row in res.metrics)

    ev = omiga_core.evaluate(res.checkpoint, matrix_env, episodes=32, seed=1)
    assert ev.episodes == 32
    assert 0.0 <= ev.mean <= 1.0

    ckpt_path = tmp_path / "ckpt.json"
    res.checkpoint.save(str(ckpt_path))
    back = omiga_core.Checkpoint.load(str(ckpt_path))
    ev2 = omiga_core.evaluate(back, matrix_env, episodes=32, seed=1)
    assert ev2.mean == ev.mean


def test_shipped_configs_load():
    env = omiga_core.Env.from_config_file(os.path.join(CONFIG_DIR, "coop_grid.json"))
    assert env.n_agents == 2
    assert env.n_actions == 4
    assert env.obs_dim == 18
    mdp = env.tabular_export(0.99)
    assert mdp.n_states == 81


def test_validation_errors_surface_as_python_exceptions(matrix_env):
    with pytest.raises(ValueError):
        omiga_core.local_v_solve(-1.0, 1.0, [1.0], [1.0])
    with pytest.raises(ValueError):
        omiga_core.Env.from_config_file("/nonexistent.json")
