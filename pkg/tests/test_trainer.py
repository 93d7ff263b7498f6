import csv
import json

import numpy as np
import pytest

from nslkdd_ae.autoencoder import Architecture, init_params, load_model
from nslkdd_ae.dataset import EncodedDataset, TrafficClass
from nslkdd_ae.errors import DataError
from nslkdd_ae.trainer import (
    AdamState, LossHistory, TrainConfig, adam_step, epoch_order, fit, save_checkpoint,
    split_validation, train,
)

SMALL = Architecture(input_dim=6, hidden=(4, 3, 2))


def normal_data(n, dim=6, seed=0):
    return EncodedDataset(np.random.default_rng(seed).random((n, dim)), np.zeros(n, dtype=int))


def test_config_validation():
    for bad in ({"learning_rate": 0}, {"batch_size": 0}, {"epochs": 0},
                {"validation_fraction": 1.0}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert TrainConfig().to_dict()["learning_rate"] == 1e-4


def test_adam_zero_gradient_fixed_point():
    p = init_params(0, SMALL)
    state = AdamState.fresh(p)
    new, s = adam_step(p, p.zeros_like(), state, TrainConfig())
    assert new == p and s.t == 1


def test_adam_constant_gradient_moves_by_lr_sign():
    p = init_params(0, SMALL)
    g = p.zeros_like()
    g.flat[...] = np.where(np.arange(g.flat.size) % 2, 3.0, -0.02)
    cfg = TrainConfig(learning_rate=1e-3)
    new, _ = adam_step(p, g, AdamState.fresh(p), cfg)
    np.testing.assert_allclose(new.flat - p.flat, -cfg.learning_rate * np.sign(g.flat), rtol=1e-5)


def reference_adam(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    theta = list(theta)
    for t, g in enumerate(grads, start=1):
        for k in range(len(theta)):
            m[k] = b1 * m[k] + (1 - b1) * g[k]
            v[k] = b2 * v[k] + (1 - b2) * (g[k] * g[k])
            m_hat = m[k] / (1 - b1 ** t)
            v_hat = v[k] / (1 - b2 ** t)
            theta[k] = theta[k] - lr * m_hat / (v_hat ** 0.5 + eps)
    return theta


def test_adam_two_steps_match_reference():
    rng = np.random.default_rng(3)
    p = init_params(3, SMALL)
    g1, g2 = p.zeros_like(), p.zeros_like()
    g1.flat[...] = rng.normal(size=p.flat.size)
    g2.flat[...] = rng.normal(size=p.flat.size)
    cfg = TrainConfig(learning_rate=1e-2)
    state = AdamState.fresh(p)
    q, state = adam_step(p, g1, state, cfg)
    q, state = adam_step(q, g2, state, cfg)
    expected = reference_adam(p.flat.tolist(), [g1.flat.tolist(), g2.flat.tolist()], 1e-2)
    assert q.flat.tolist() == expected
    assert state.t == 2


def test_adam_rejects_incongruent_shapes():
    p = init_params(0, SMALL)
    with pytest.raises(ValueError):
        adam_step(p, init_params(0, Architecture(input_dim=7, hidden=(4, 3, 2))),
                  AdamState.fresh(p), TrainConfig())


@pytest.mark.slow
def test_memorizes_identical_samples():
    x = np.random.default_rng(0).random(122)
    data = EncodedDataset(np.tile(x, (640, 1)), np.zeros(640, dtype=int))
    _, history = train(data, TrainConfig(epochs=100))
    assert len(history) == 100
    assert history.train_loss[-1] < 1e-4


def test_fit_rejects_attack_samples():
    data = normal_data(100)
    data.classes[7] = TrafficClass.DOS
    with pytest.raises(DataError, match="Normal"):
        fit(data, TrainConfig(epochs=1), SMALL)


def test_fit_rejects_too_few_samples():
    with pytest.raises(DataError, match="at least 64"):
        fit(normal_data(63), TrainConfig(epochs=1), SMALL)


def test_fit_rejects_width_mismatch():
    with pytest.raises(DataError):
        fit(normal_data(100, dim=7), TrainConfig(epochs=1), SMALL)


def test_split_validation_sizes_and_disjoint():
    tr, va = split_validation(1000, 0.1, 4)
    assert va.size == 100 and tr.size == 900
    assert not set(tr) & set(va) and set(tr) | set(va) == set(range(1000))
    assert np.array_equal(split_validation(1000, 0.1, 4)[1], va)


def test_epoch_order_depends_only_on_seed_and_epoch():
    idx = np.arange(50)
    assert np.array_equal(epoch_order(idx, 1, 3), epoch_order(idx.copy(), 1, 3))
    assert not np.array_equal(epoch_order(idx, 1, 3), epoch_order(idx, 1, 4))
    assert not np.array_equal(epoch_order(idx, 1, 3), epoch_order(idx, 2, 3))
    assert sorted(epoch_order(idx, 1, 3)) == list(idx)


def test_validation_samples_never_contribute_gradients():
    seen = []
    cfg = TrainConfig(epochs=3, batch_size=8, learning_rate=1e-3)
    result = fit(normal_data(120), cfg, SMALL, on_batch=lambda epoch, idx: seen.append(idx))
    used = np.concatenate(seen)
    assert not np.isin(result.validation_index, used).any()
    # every training sample is used exactly once per epoch
    assert np.array_equal(np.bincount(used, minlength=120)[result.train_index], np.full(108, 3))


def test_training_is_deterministic_and_learns():
    cfg = TrainConfig(epochs=20, batch_size=8, learning_rate=1e-2, seed=5)
    a = fit(normal_data(200), cfg, SMALL)
    b = fit(normal_data(200), cfg, SMALL)
    assert a.history == b.history and a.params == b.params
    assert a.history.train_loss[-1] < a.history.train_loss[0]
    assert all(v >= 0 for v in a.history.train_loss + a.history.validation_loss)


def test_checkpoint_and_loss_csv(tmp_path):
    cfg = TrainConfig(epochs=2, batch_size=8, learning_rate=1e-3)
    result = fit(normal_data(80), cfg, SMALL)
    path = tmp_path / "model.json"
    save_checkpoint(path, result.params, history=result.history, adam=result.adam,
                    schema_checksum="feed", config=cfg)
    params, doc = load_model(path)
    assert params == result.params
    assert LossHistory.from_dict(doc["loss_history"]) == result.history
    assert AdamState.from_dict(doc["adam"]).t == result.adam.t
    assert doc["train_config"]["epochs"] == 2
    assert [p.name for p in tmp_path.iterdir()] == ["model.json"]  # no temp file left
    result.history.write_csv(tmp_path / "loss.csv")
    rows = list(csv.reader((tmp_path / "loss.csv").open()))
    assert rows[0] == ["epoch", "train_loss", "validation_loss"] and len(rows) == 3
    assert float(rows[2][1]) == result.history.train_loss[1]
    json.loads(path.read_text())
