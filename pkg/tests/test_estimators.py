import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from e3normals.errors import ConfigError, DataError, ShapeMismatch, TooFewPoints
from e3normals.estimators import (
    JetCoefficients,
    JetEstimator,
    NetConfig,
    NetworkParams,
    NeuralEstimator,
    PCAEstimator,
    fit_jet,
    init_params,
    jet_estimate,
    load_params,
    make_estimator,
    neural_estimate,
    pca_estimate,
    save_params,
)
from e3normals.estimators.classical import monomials
from e3normals.estimators.neural import params_from_bytes, params_to_bytes
from e3normals.frames import build_frame_set, to_canonical
from e3normals.geom import random_orthogonal, unoriented_angle


def grid(n=11, half=0.5):
    g = np.linspace(-half, half, n)
    xx, yy = np.meshgrid(g, g)
    return xx.ravel(), yy.ravel()


def test_pca_examples():
    x, y = grid()
    plane = np.column_stack([x, y, np.zeros_like(x)])
    np.testing.assert_array_equal(pca_estimate(plane), np.tile([0.0, 0.0, 1.0], (len(x), 1)))
    with pytest.raises(TooFewPoints):
        pca_estimate(plane[:2])


def test_pca_on_rotated_plane_in_canonical_frame():
    rng = np.random.default_rng(0)
    x, y = grid()
    q = random_orthogonal(rng)
    plane = np.column_stack([x * 2, y, np.zeros_like(x)]) @ q.T
    fs = build_frame_set(plane)
    canon = to_canonical(fs.frames[0], plane)
    n = pca_estimate(canon)[0]
    # canonical axis 0 is the smallest-variance direction
    assert abs(abs(n[0]) - 1) < 1e-9


def test_monomial_order():
    assert monomials(2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    for k in (1, 2, 3):
        assert len(monomials(k)) == (k + 1) * (k + 2) // 2
    with pytest.raises(ConfigError):
        JetCoefficients(2, np.zeros(5))


@pytest.mark.parametrize("order", [1, 2, 3])
def test_jet_exact_plane(order):
    x, y = grid()
    pts = np.column_stack([x, y, 0.3 * x + 0.4 * y])
    want = np.array([-0.3, -0.4, 1.0]) / np.linalg.norm([-0.3, -0.4, 1.0])
    assert np.max(unoriented_angle(jet_estimate(pts, order), want)) <= 1e-9


def test_jet_zero_plane():
    x, y = grid()
    out = jet_estimate(np.column_stack([x, y, np.zeros_like(x)]), 2)
    np.testing.assert_allclose(out, np.tile([0, 0, 1.0], (len(x), 1)), atol=1e-12)


def test_jet_paraboloid_gradient():
    x, y = grid(21)
    pts = np.column_stack([x, y, x * x + y * y])
    q = np.array([[0.1, 0.0, 0.01]])
    fit = fit_jet(pts, 2)
    want = np.array([-0.2, 0.0, 1.0]) / np.linalg.norm([-0.2, 0.0, 1.0])
    assert unoriented_angle(fit.normals(q)[0], want) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_order_one_plane_any_pose(seed):
    rng = np.random.default_rng(seed)
    q = random_orthogonal(rng)
    local = np.column_stack([rng.uniform(-1, 1, (50, 2)), np.zeros(50)])
    pts = local @ q.T + rng.normal(size=3)
    out = jet_estimate(pts, 1)
    assert np.max(unoriented_angle(out, q[:, 2])) <= 1e-9


def test_jet_too_few_and_bad_order():
    x, y = grid(2)
    with pytest.raises(TooFewPoints):
        jet_estimate(np.column_stack([x, y, x]), 2)
    with pytest.raises(ConfigError):
        JetEstimator(4)


def test_jet_ill_conditioned_falls_back(caplog):
    t = np.linspace(0, 1, 20)
    line = np.column_stack([t, 2 * t, 0.5 * t])
    with caplog.at_level(logging.WARNING):
        out, fell_back = jet_estimate(line, 2, return_fallback=True)
    assert fell_back and "PCA" in caplog.text
    np.testing.assert_array_equal(out, pca_estimate(line))


@pytest.mark.parametrize("est", [PCAEstimator(), JetEstimator(2), NeuralEstimator(init_params(seed=1))])
def test_output_contract(est):
    pts = np.random.default_rng(2).normal(size=(60, 3)) * [1, 1, 0.1]
    out = est.estimate(pts)
    assert out.shape == pts.shape
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1, atol=1e-6)


def test_neural_zero_head_is_guarded():
    p = init_params(seed=3)
    arrays = [a.copy() for a in p.arrays]
    arrays[-2][:] = 0.0
    arrays[-1][:] = 0.0
    out = neural_estimate(np.random.default_rng(4).normal(size=(30, 3)), NetworkParams(p.config, arrays))
    np.testing.assert_array_equal(out, np.tile([0.0, 0.0, 1.0], (30, 1)))


def test_neural_determinism_and_permutation():
    params = init_params(seed=5)
    rng = np.random.default_rng(6)
    for _ in range(5):
        x = rng.normal(size=(80, 3))
        a = neural_estimate(x, params)
        assert a.tobytes() == neural_estimate(x.copy(), params).tobytes()
        perm = rng.permutation(80)
        np.testing.assert_allclose(neural_estimate(x[perm], params), a[perm], atol=1e-9)


def test_neural_batch_matches_single():
    params = init_params(seed=7)
    x = np.random.default_rng(8).normal(size=(4, 50, 3))
    batch = NeuralEstimator(params).estimate_batch(x)
    for k in range(4):
        np.testing.assert_allclose(batch[k], neural_estimate(x[k], params), atol=1e-12)


def test_raw_network_is_not_equivariant():
    params = init_params(seed=9)
    rng = np.random.default_rng(10)
    x = rng.normal(size=(100, 3))
    q = random_orthogonal(rng)
    dev = unoriented_angle(neural_estimate(x @ q.T, params), neural_estimate(x, params) @ q.T)
    assert np.max(dev) > 1e-2


def test_neural_shape_mismatch():
    params = init_params(seed=0)
    with pytest.raises(ShapeMismatch):
        neural_estimate(np.zeros((10, 4)), params)
    with pytest.raises(ShapeMismatch):
        NetworkParams(params.config, params.arrays[:-1])


def test_params_round_trip(tmp_path):
    for cfg in (NetConfig(), NetConfig.with_fused_dim(32), NetConfig(encoder=(8,), decoder=(4, 4, 4))):
        p = init_params(cfg, seed=11)
        q = params_from_bytes(params_to_bytes(p))
        assert q.config == p.config
        assert all(a.tobytes() == b.tobytes() for a, b in zip(p.arrays, q.arrays))
    path = tmp_path / "net.bin"
    save_params(p, path)
    assert params_to_bytes(load_params(path)) == path.read_bytes()


def test_params_byte_layout():
    cfg = NetConfig(encoder=(2,), decoder=(), out_dim=3)
    p = init_params(cfg, seed=0)
    data = params_to_bytes(p)
    head = np.frombuffer(data[4:28], dtype="<u4")
    assert data[:4] == b"E3NP"
    assert list(head) == [1, 3, 1, 2, 0, 3]
    body = np.frombuffer(data[28:], dtype="<f8")
    np.testing.assert_array_equal(body[:6], p.arrays[0].ravel())


def test_params_rejects_bad_files():
    data = params_to_bytes(init_params(seed=0))
    with pytest.raises(DataError):
        params_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(DataError):
        params_from_bytes(data[:-8])
    with pytest.raises(DataError):
        params_from_bytes(data[:10])


def test_make_estimator(tmp_path):
    assert make_estimator("pca").name == "pca"
    assert make_estimator("jet", 3).name == "jet3"
    with pytest.raises(ConfigError):
        make_estimator("neural")
    with pytest.raises(ConfigError):
        make_estimator("svm")
    save_params(init_params(seed=0), tmp_path / "p.bin")
    assert make_estimator("neural", params_path=tmp_path / "p.bin").name == "neural"
