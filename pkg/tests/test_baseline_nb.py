import numpy as np
import pytest

from nslkdd_ae.baseline_nb import NaiveBayesModel, nb_predict, nb_train
from nslkdd_ae.dataset import EncodedDataset, EncodedSample, TrafficClass
from nslkdd_ae.detector import Verdict
from nslkdd_ae.errors import DataError, ShapeError

N, D = int(TrafficClass.NORMAL), int(TrafficClass.DOS)


def mixed_data(n=200, seed=0, n_numeric=4, n_binary=5):
    rng = np.random.default_rng(seed)
    classes = rng.choice([N, D, int(TrafficClass.PROBE)], n)
    attack = classes != N
    numeric = rng.normal(0.3 + 0.4 * attack[:, None], 0.1, (n, n_numeric))
    binary = (rng.random((n, n_binary)) < np.where(attack[:, None], 0.8, 0.2)).astype(float)
    return EncodedDataset(np.hstack([numeric, binary]), classes)


def test_ml_estimates_two_samples():
    data = EncodedDataset(np.array([[0.2, 1.0], [0.7, 0.0]]), np.array([N, D]))
    m = nb_train(data, n_numeric=1)
    assert m.means[:, 0].tolist() == [0.2, 0.7]
    assert m.variances[:, 0].tolist() == [1e-9, 1e-9]
    assert m.priors.tolist() == [0.5, 0.5]
    assert m.rates[:, 0].tolist() == [2 / 3, 1 / 3]


def test_smoothed_rates_strictly_inside_unit_interval():
    data = mixed_data()
    data.features[:, 4] = 1.0  # a column that is always hot
    data.features[:, 5] = 0.0  # and one never hot
    m = nb_train(data, n_numeric=4)
    assert np.all((m.rates > 0) & (m.rates < 1))
    assert np.isclose(m.priors.sum(), 1.0) and np.all(m.variances >= m.variance_floor)


def test_single_class_rejected():
    with pytest.raises(DataError):
        nb_train(EncodedDataset(np.zeros((5, 3)), np.zeros(5, int)), n_numeric=1)


def test_dominant_attack_pattern_predicted_attack():
    rng = np.random.default_rng(1)
    attack_pattern = np.array([0.9, 0.9, 1.0, 0.0])
    x = np.vstack([np.tile(attack_pattern, (80, 1)) + [[0.01, -0.01, 0, 0]] * (rng.random((80, 1)) - 0.5),
                   np.c_[rng.normal(0.2, 0.05, (20, 2)), np.tile([0.0, 1.0], (20, 1))]])
    classes = np.r_[np.full(80, D), np.zeros(20, int)]
    m = nb_train(EncodedDataset(x, classes), n_numeric=2)
    assert nb_predict(m, EncodedSample(attack_pattern, TrafficClass.DOS)) is Verdict.ATTACK
    assert nb_predict(m, np.array([0.2, 0.2, 0.0, 1.0])) is Verdict.NORMAL


def test_symmetric_model_ties_to_normal():
    m = NaiveBayesModel(np.array([0.5, 0.5]), np.zeros((2, 2)), np.ones((2, 2)),
                        np.full((2, 3), 0.3))
    assert nb_predict(m, np.array([0.4, -1.0, 1.0, 0.0, 1.0])) is Verdict.NORMAL


def test_duplicated_training_data():
    data = mixed_data()
    twice = EncodedDataset(np.vstack([data.features, data.features]), np.r_[data.classes, data.classes])
    a, b = nb_train(data, n_numeric=4), nb_train(twice, n_numeric=4)
    assert np.array_equal(a.priors, b.priors)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.variances, b.variances)
    # add-one smoothing is applied to the doubled counts
    attack = twice.is_attack
    ones = twice.features[attack, 4:].sum(axis=0)
    assert np.array_equal(b.rates[1], (ones + 1) / (attack.sum() + 2))


def test_within_block_feature_permutation_invariance():
    train, test = mixed_data(seed=2), mixed_data(seed=3)
    perm = np.r_[np.random.default_rng(0).permutation(4), 4 + np.random.default_rng(1).permutation(5)]
    a = nb_train(train, n_numeric=4)
    b = nb_train(EncodedDataset(train.features[:, perm], train.classes), n_numeric=4)
    assert np.array_equal(a.predict_attack(test.features), b.predict_attack(test.features[:, perm]))


def test_log_joint_finite_far_from_training_data():
    m = nb_train(mixed_data(), n_numeric=4)
    lj = m.log_joint(np.array([[1e3, -1e3, 0.0, 5.0, 1, 0, 1, 0, 1]]))
    assert np.all(np.isfinite(lj))
    with pytest.raises(ShapeError):
        m.log_joint(np.zeros((1, 8)))


def test_model_file_roundtrip(tmp_path):
    m = nb_train(mixed_data(), n_numeric=4)
    m.save(tmp_path / "nb.json")
    back = NaiveBayesModel.load(tmp_path / "nb.json")
    for field in ("priors", "means", "variances", "rates"):
        assert np.array_equal(getattr(back, field), getattr(m, field))
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        NaiveBayesModel.load(tmp_path / "bad.json")
