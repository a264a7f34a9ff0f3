import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privpca.errors import InvalidInputError
from privpca.metrics import sin_distance, top_eigpair
from privpca.model import (
    Dataset,
    SampleMatrix,
    gaussian_model_params,
    make_neighboring,
    sample_gaussian_dataset,
    sample_toy_dataset,
    spiked_sigma,
    toy_model_params,
    validate_psd,
)


def test_zero_sigma_gives_zero_samples():
    ds = sample_gaussian_dataset(np.zeros((3, 3)), 5, seed=1)
    assert np.all(ds.dense() == 0)


def test_identity_sigma_empirical_mean():
    ds = sample_gaussian_dataset(np.eye(2), 100_000, seed=2)
    assert np.linalg.norm(ds.mean_matrix() - np.eye(2), 2) <= 0.05


def test_same_seed_bitwise_identical():
    s = spiked_sigma(4)
    a = sample_gaussian_dataset(s, 50, seed=9)
    b = sample_gaussian_dataset(s, 50, seed=9)
    assert a == b
    assert a.factors.tobytes() == b.factors.tobytes()
    assert a != sample_gaussian_dataset(s, 50, seed=10)


def test_non_psd_rejected():
    with pytest.raises(InvalidInputError):
        sample_gaussian_dataset(np.diag([1.0, -0.1]), 3, seed=0)


def test_slightly_asymmetric_accepted():
    m = np.array([[1.0, 0.2 + 1e-14], [0.2, 1.0]])
    assert np.allclose(validate_psd(m), validate_psd(m).T)


def test_rank1_factor_matches_data():
    ds = sample_gaussian_dataset(spiked_sigma(5), 20, seed=3)
    for s in ds.samples:
        assert np.allclose(s.data, np.outer(s.factor, s.factor), atol=1e-12)


def test_dataset_is_immutable():
    ds = sample_gaussian_dataset(np.eye(2), 4, seed=0)
    with pytest.raises(ValueError):
        ds.factors[0, 0] = 5.0


def test_toy_noiseless_samples_are_vvT(e1):
    v = e1(4)
    ds = sample_toy_dataset(v, 0.0, 30, seed=1)
    for a in ds.dense():
        assert np.array_equal(a, np.outer(v, v))


def test_toy_top_eigenvector(e1):
    v = e1(10)
    ds = sample_toy_dataset(v, 0.01, 100_000, seed=4)
    _, u = top_eigpair(ds.mean_matrix())
    assert sin_distance(u, v) <= 0.05


def test_toy_rejects_non_unit():
    with pytest.raises(InvalidInputError):
        sample_toy_dataset(np.array([1.0, 1.0]), 0.1, 10, seed=0)


def test_toy_population_params(e1):
    p = toy_model_params(e1(10), 0.1, 1000)
    assert p.lambda1 == pytest.approx(1.1)
    assert p.lambda2 == pytest.approx(0.1)
    ev = np.linalg.eigvalsh(p.sigma)
    assert ev[-1] == pytest.approx(1.1) and ev[-2] == pytest.approx(0.1)


def test_gaussian_params_diag():
    p = gaussian_model_params(np.diag([1.0, 0.5]), 100)
    assert (p.lambda1, p.lambda2) == (1.0, 0.5)
    assert p.kappa == pytest.approx(2.0, rel=1e-12)
    assert p.k_tail == 4 and p.a_tail == 1


def test_gaussian_params_no_gap():
    p = gaussian_model_params(np.eye(3), 100)
    assert math.isinf(p.kappa)


def test_gaussian_params_m_bound():
    p = gaussian_model_params(np.diag([2.0, 1.0, 1.0]), 1000)
    assert p.m_bound == pytest.approx(3 * math.log(1000))
    assert p.m_bound == pytest.approx(20.72, abs=0.01)


def test_make_neighboring_identity_and_single_change():
    ds = sample_gaussian_dataset(spiked_sigma(3), 10, seed=5)
    assert make_neighboring(ds, 0, ds[0]) == ds
    other = make_neighboring(ds, 3, SampleMatrix.from_factor(np.ones(3)))
    diff = np.any(other.factors != ds.factors, axis=1)
    assert diff.sum() == 1 and diff[3]
    # replacement = remove one + add one: multiset symmetric difference <= 2
    a = {tuple(r) for r in ds.factors}
    b = {tuple(r) for r in other.factors}
    assert len(a ^ b) <= 2


def test_make_neighboring_out_of_range():
    ds = sample_gaussian_dataset(np.eye(2), 3, seed=0)
    with pytest.raises(IndexError):
        make_neighboring(ds, 3, ds[0])


def test_make_neighboring_dense_replacement():
    ds = sample_gaussian_dataset(np.eye(2), 3, seed=0)
    rep = SampleMatrix(data=np.array([[1.0, 2.0], [0.0, 1.0]]))
    out = make_neighboring(ds, 1, rep)
    assert not out.is_rank1
    assert np.array_equal(out[1].data, rep.data)
    assert np.array_equal(out[0].data, ds[0].data)


def test_gradients_match_dense():
    ds = sample_gaussian_dataset(spiked_sigma(4), 7, seed=1)
    w = np.arange(4.0)
    dense = Dataset(matrices=ds.dense())
    assert np.allclose(ds.gradients(w), dense.gradients(w))
    assert np.allclose(ds.gradients(w, 2, 5), ds.dense()[2:5] @ w)


def test_matrix_bernstein_concentration():
    d, n = 10, 100_000
    s = spiked_sigma(d)
    ok = 0
    for seed in range(20):
        ds = sample_gaussian_dataset(s, n, seed)
        ok += np.linalg.norm(ds.mean_matrix() - s, 2) <= 4 * math.sqrt(d * math.log(d) / n)
    assert ok >= 19


def test_toy_mean_norm(e1):
    d, n, s2 = 10, 20_000, 0.1
    ok = 0
    for seed in range(20):
        x = sample_toy_dataset(e1(d), s2, n, seed).factors
        ok += np.linalg.norm(x.mean(axis=0)) <= 5 * math.sqrt(s2) * math.sqrt(d / n) + 5 / math.sqrt(n)
    assert ok >= 19


@given(st.integers(0, 2**32), st.integers(1, 30))
def test_determinism_property(seed, n):
    s = spiked_sigma(3, 2.0, 1.0)
    assert sample_gaussian_dataset(s, n, seed) == sample_gaussian_dataset(s, n, seed)
