"""Smoke test for the fedrl extension module.

Build and place the module next to this file, then run it:

    cargo build --release -p fedrl-py
    cp target/release/libfedrl.so python/fedrl.so
    python3 python/smoke_test.py
"""

import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import fedrl  # noqa: E402


def check_reward():
    assert fedrl.compute_reward(0.0, 0.0, [0.0] * 7) == (2.0, 1.0, 1.0)
    assert fedrl.compute_reward(25.0, 0.0, [0.0] * 7)[0] == 0.0
    assert fedrl.compute_reward(0.0, 0.0, [1.0] * 7) == (0.0, 1.0, 0.0)
    assert fedrl.compute_reward(12.5, 0.0, [0.0] * 7) == (1.5, 0.5, 1.0)


def check_rates_and_transition():
    comp = fedrl.EpiEnv().compartments
    rates = fedrl.compute_rates([0.0] * 7, comp)
    assert abs(rates[2] - 0.02) < 1e-12
    assert abs(rates[3] - 0.16) < 1e-12
    nxt = fedrl.step_transition(comp, [0.001, 0.5, 0.02, 0.16])
    assert abs(nxt["next_infected"] - 100.0) < 1e-9
    assert abs(nxt["known"] + nxt["undiscovered"] - nxt["next_infected"]) < 1e-9


def check_env():
    env = fedrl.EpiEnv({"horizon": 10}, seed=3)
    obs, comp = env.reset(7)
    assert len(obs) == 4 and comp["normal"] == 100000.0
    total = 0.0
    done = False
    while not done:
        obs, reward, done, info = env.step([1] * 7)
        assert 0.0 <= reward <= 2.0
        total += reward
    assert env.steps == 10 and env.done
    assert total <= env.reward_ceiling
    try:
        env.step([0] * 7)
    except RuntimeError:
        pass
    else:
        raise AssertionError("stepping a finished episode must fail")

    a = fedrl.EpiEnv(seed=5)
    b = fedrl.EpiEnv(seed=5)
    a.reset(9)
    b.reset(9)
    assert a.step_continuous([0.3] * 7) == b.step_continuous([0.3] * 7)


def check_params():
    dims = [2, 3]
    p = fedrl.ParamVector(dims, [0.0] * 9)
    q = fedrl.ParamVector(dims, [2.0] * 9)
    mean = fedrl.average_params([p, q])
    assert mean.values == [1.0] * 9
    assert fedrl.average_params([q, q, q]) == q
    assert fedrl.ParamVector.from_bytes(q.to_bytes()) == q
    try:
        fedrl.average_params([p, fedrl.ParamVector.zeros([3, 3])])
    except (ValueError, RuntimeError):
        pass
    else:
        raise AssertionError("mismatched layouts must fail")


def check_selection():
    sel = fedrl.select_clients(10, 5, 0, 1)
    assert sel == [1, 2, 4, 5, 7], sel
    assert fedrl.select_clients(4, 4, 9, 2) == [0, 1, 2, 3]
    try:
        fedrl.select_clients(10, 11, 0, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("k > n must fail")


def check_experiment():
    cfg = fedrl.default_config()
    assert cfg["federation"]["n_clients"] == 10
    with tempfile.TemporaryDirectory() as out:
        cfg = {
            "env": {"horizon": 12},
            "federation": {"n_clients": 3, "k_selected": 2, "local_epochs": 1, "global_epochs": 2},
            "agent": {"hidden_dims": [8]},
            "eval_episodes": 1,
            "out_dir": out,
        }
        summary = fedrl.run_experiment(cfg, "both")
        assert [r["rounds"] for r in summary["runs"]] == [2, 2]
        fed = os.path.join(out, "metrics_fed.csv")
        central = os.path.join(out, "metrics_central.csv")
        rows = fedrl.load_metrics(fed)
        assert rows[-1]["model"] == "global" and rows[-1]["phase"] == "eval"
        report = fedrl.compare_runs(fed, central)
        assert report["rounds"] == [1, 2]
        with open(os.path.join(out, "config.json")) as f:
            assert json.load(f)["federation"]["k_selected"] == 2
        try:
            fedrl.run_experiment({"federation": {"k_selected": 11}})
        except ValueError:
            pass
        else:
            raise AssertionError("invalid config must fail")


def main():
    checks = [
        check_reward,
        check_rates_and_transition,
        check_env,
        check_params,
        check_selection,
        check_experiment,
    ]
    for check in checks:
        check()
        print(f"ok {check.__name__}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
