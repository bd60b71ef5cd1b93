import json
import math

import numpy as np
import pytest

import meanfield as mf

SYSTEM = json.dumps(
    {
        "order": 1,
        "dimension": 1,
        "drift_form": "motsch_tadmor",
        "kernel": {"type": "gaussian", "length": 0.5},
        "sigma": 0.0,
    }
)
INIT = json.dumps({"type": "gaussian_mixture"})


def test_sample_initial_shapes_and_determinism():
    a = mf.sample_initial(INIT, 64, 7)["positions"]
    b = mf.sample_initial(INIT, 64, 7)["positions"]
    assert a.shape == (1, 64)
    np.testing.assert_array_equal(a, b)


def test_simulate_and_drift():
    x0 = mf.sample_initial(INIT, 32, 3)["positions"]
    traj = mf.simulate(SYSTEM, x0, steps=20, dt=0.01, seed=5)
    assert len(traj["positions"]) == 21
    drift = mf.eval_drift(SYSTEM, x0)
    fd = (traj["positions"][1] - traj["positions"][0]) / 0.01
    np.testing.assert_allclose(drift, fd, atol=1e-12)


def test_fit_and_rollout(tmp_path):
    cfg = {
        "system": json.loads(SYSTEM),
        "init": json.loads(INIT),
        "N": 32,
        "M": 3,
        "L": 20,
        "dt": 0.01,
        "split": {"train": 2, "test": 1},
        "model": {"k": 4, "emb_hidden": [8], "int_hidden": [8]},
        "optim": {"epochs": 3, "seed": 1},
        "seed": 9,
    }
    ckpt = tmp_path / "model.json"
    result = mf.fit(json.dumps(cfg), str(ckpt))
    assert math.isfinite(result["final_train_loss"])
    assert ckpt.exists()

    x0 = mf.sample_initial(INIT, 32, 11)["positions"]
    drift = mf.mvnn_drift_all(str(ckpt), x0)
    assert drift.shape == x0.shape
    traj = mf.rollout(str(ckpt), x0, dt=0.01, steps=10, seed=2)
    assert len(traj["positions"]) == 11
    assert mf.config_hash(json.dumps(cfg)) == traj["config_hash"] or traj["config_hash"] == ""


def test_metrics():
    assert mf.wasserstein_1d([0.0, 2.0], [1.0, 3.0], 2) == pytest.approx(1.0)
    samples = np.random.default_rng(0).normal(size=(1, 200))
    kde = mf.gaussian_kde(samples, grid=512)
    assert kde["mass"] == pytest.approx(1.0, abs=1e-3)
    a = np.random.default_rng(1).normal(size=(2, 50))
    assert mf.sliced_wasserstein(a, a, 16, 3) == pytest.approx(0.0, abs=1e-12)


def test_config_error():
    with pytest.raises(mf.ConfigError):
        mf.fit(json.dumps({"bad": 1}))
