import numpy as np
import pytest

from adaptive_labels.encoder import (
    EncoderConfig, EncoderParams, forward, init_encoder, l2_penalty, load_checkpoint, save_checkpoint,
)
from adaptive_labels.errors import ConfigError, DataError, DimensionError
from adaptive_labels.lwal import Adam
from adaptive_labels.tensor import Tensor, backward


def _params(weights, head_l2=0.1):
    return EncoderParams([Tensor(np.asarray(W, float), requires_grad=True) for W in weights],
                         [Tensor(np.zeros(np.shape(W)[1]), requires_grad=True) for W in weights], head_l2)


def test_same_seed_same_bytes():
    cfg = EncoderConfig(7, 5, [4], init_seed=3)
    a, b = init_encoder(cfg), init_encoder(cfg)
    for p, q in zip(a.parameters(), b.parameters()):
        assert p.data.tobytes() == q.data.tobytes()


def test_shapes_chain():
    params = init_encoder(EncoderConfig(6, 3, [8, 5]))
    assert [W.shape for W in params.weights] == [(6, 8), (8, 5), (5, 3)]
    assert forward(params, np.ones((4, 6))).shape == (4, 3)


def test_no_hidden_is_one_linear_map():
    params = init_encoder(EncoderConfig(4, 3))
    assert len(params.weights) == 1
    X = np.random.default_rng(0).normal(size=(5, 4))
    np.testing.assert_allclose(forward(params, X).data, X @ params.weights[0].data, atol=1e-15)


def test_fan_in_bound():
    params = init_encoder(EncoderConfig(100, 20, [50]))
    assert np.abs(params.weights[0].data).max() <= 0.1
    assert np.abs(params.weights[1].data).max() <= 1 / np.sqrt(50)
    assert all(np.all(b.data == 0) for b in params.biases)


def test_bad_dims():
    with pytest.raises(ConfigError):
        EncoderConfig(0, 3)
    with pytest.raises(ConfigError):
        EncoderConfig(3, 3, head_l2=-1)


def test_zero_weights_give_zero():
    params = _params([np.zeros((3, 4)), np.zeros((4, 2))])
    assert np.all(forward(params, np.ones((2, 3))).data == 0)


def test_identity_weights():
    X = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(forward(_params([np.eye(3)]), X).data, X)


def test_matches_plain_numpy_chain(rng):
    params = init_encoder(EncoderConfig(5, 4, [6, 3], init_seed=1))
    for b in params.biases:
        b.data[:] = rng.normal(size=b.shape)
    X = rng.normal(size=(7, 5))
    h = X
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W.data + b.data
        if i < 2:
            h = np.maximum(h, 0)
    assert np.abs(forward(params, X).data - h).max() < 1e-12


def test_input_width_checked():
    with pytest.raises(DimensionError):
        forward(init_encoder(EncoderConfig(3, 2)), np.ones((2, 4)))


def test_batch_permutation_equivariance(rng):
    params = init_encoder(EncoderConfig(5, 4, [6]))
    X = rng.normal(size=(9, 5))
    perm = rng.permutation(9)
    np.testing.assert_array_equal(forward(params, X[perm]).data, forward(params, X).data[perm])


@pytest.mark.parametrize("head_l2, W, expected", [
    (0.0, [[1.0, 2], [3, 4]], 0.0),
    (0.1, [[0.0, 0], [0, 0]], 0.0),
    (0.1, [[1.0, 2], [3, 4]], 3.0),
])
def test_l2_penalty(head_l2, W, expected):
    assert l2_penalty(_params([W], head_l2)).item() == pytest.approx(expected, abs=1e-15)


def test_l2_only_touches_last_layer():
    params = _params([np.ones((2, 2)), np.ones((2, 2))], head_l2=1.0)
    assert l2_penalty(params).item() == 4.0


def test_l2_alone_shrinks_head(rng):
    params = init_encoder(EncoderConfig(4, 3, [5], head_l2=0.1))
    opt = Adam(params.parameters(), lr=1e-2)
    before = np.linalg.norm(params.weights[-1].data)
    for _ in range(20):
        params.zero_grad()
        backward(l2_penalty(params))
        opt.step()
    assert np.linalg.norm(params.weights[-1].data) < before


def test_checkpoint_round_trip(tmp_path, rng):
    params = init_encoder(EncoderConfig(5, 4, [3], init_seed=9))
    table = rng.normal(size=(2, 4))
    path = tmp_path / "ck.bin"
    save_checkpoint(path, params, table, ["a b", "ü"])
    loaded, t, names = load_checkpoint(path)
    for p, q in zip(params.parameters(), loaded.parameters()):
        assert p.data.tobytes() == q.data.tobytes()
    assert t.tobytes() == table.tobytes()
    assert names == ["a b", "ü"]


def test_checkpoint_without_table(tmp_path):
    path = tmp_path / "ck.bin"
    save_checkpoint(path, init_encoder(EncoderConfig(2, 2)))
    _, t, names = load_checkpoint(path)
    assert t is None and names is None


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE0000")
    with pytest.raises(DataError):
        load_checkpoint(bad)
    good = tmp_path / "good.bin"
    save_checkpoint(good, init_encoder(EncoderConfig(3, 2)))
    good.write_bytes(good.read_bytes()[:-5])
    with pytest.raises(DataError):
        load_checkpoint(good)
