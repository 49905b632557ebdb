import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gradcheck
from oracles import conv1d_ref, maxpool_ref, sigmoid_ref
from osrf._accel import HAVE_NUMBA
from osrf.errors import (
    ChecksumMismatch,
    EmptyDataset,
    InvalidConfig,
    InvalidLabel,
    IoError,
    LabelOutOfRange,
    NonFiniteError,
    ShapeMismatch,
    VersionMismatch,
)
from osrf.nn import (
    AdamState,
    Conv1d,
    Dense,
    Flatten,
    MaxPool1d,
    Model,
    ReLU,
    Sigmoid,
    TrainConfig,
    adam_step,
    categorical_cross_entropy,
    cce_sigmoid,
    default_architecture,
    load_model,
    model_checksum,
    model_from_bytes,
    model_to_bytes,
    one_hot,
    relu,
    save_model,
    sigmoid,
    softmax,
    train,
)
from osrf.nn import kernels as K


def tiny_model(seed=0, n_cls=3, length=32, names=None):
    arch = default_architecture((2, length), n_cls, conv_channels=(4,), pool=2, dense_units=(8,))
    return Model.from_architecture(arch, (2, length), seed=seed, class_names=names)


class TestGradients:
    @pytest.mark.parametrize("name", sorted(gradcheck.CHECKS))
    def test_finite_differences(self, name):
        worst = max(gradcheck.CHECKS[name](seed) for seed in range(5))
        assert worst < 1e-4


class TestConv1d:
    def test_identity_kernel(self):
        layer = Conv1d(1, 1)
        layer.w[0, 0] = [0, 1, 0]
        x = np.arange(10.0).reshape(1, 1, 10)
        assert np.array_equal(layer.forward(x)[0, 0], x[0, 0, 1:-1])

    def test_zero_input_gives_bias(self):
        layer = Conv1d(2, 3)
        layer.init_params(np.random.default_rng(0))
        layer.b[...] = [1.0, -2.0, 0.5]
        out = layer.forward(np.zeros((1, 2, 8)))
        assert np.array_equal(out[0], np.repeat(layer.b[:, None], 6, axis=1))

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        layer = Conv1d(2, 3)
        layer.init_params(rng)
        layer.b[...] = rng.standard_normal(3)
        x = rng.standard_normal((1, 2, 8))
        assert np.allclose(layer.forward(x), conv1d_ref(x, layer.w, layer.b), rtol=0, atol=1e-13)

    def test_zero_grad(self):
        layer = Conv1d(2, 3)
        layer.init_params(np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal((2, 2, 9))
        layer.forward(x)
        gx = layer.backward(np.zeros((2, 3, 7)))
        assert not gx.any() and not layer.grads[0].any() and not layer.grads[1].any()

    def test_single_output_grad_is_input_window(self):
        layer = Conv1d(2, 3)
        x = np.random.default_rng(2).standard_normal((1, 2, 9))
        layer.forward(x)
        g = np.zeros((1, 3, 7))
        g[0, 1, 4] = 1.0
        layer.backward(g)
        assert np.array_equal(layer.grads[0][1], x[0, :, 4:7])
        assert not layer.grads[0][[0, 2]].any()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Conv1d(2, 3).forward(np.zeros((1, 3, 8)))
        with pytest.raises(ShapeMismatch):
            Conv1d(2, 3).output_shape((2, 2))


class TestMaxPool:
    def test_pool_one_identity(self):
        x = np.random.default_rng(0).standard_normal((2, 3, 7))
        assert np.array_equal(MaxPool1d(1).forward(x), x)

    def test_example(self):
        out = MaxPool1d(2, 2).forward(np.array([[[1.0, 3.0, 2.0, 4.0]]]))
        assert out.tolist() == [[[3.0, 4.0]]]

    def test_ties_route_to_lowest_index(self):
        layer = MaxPool1d(3, 3)
        layer.forward(np.array([[[5.0, 5.0, 1.0]]]))
        assert layer.backward(np.array([[[1.0]]])).tolist() == [[[1.0, 0.0, 0.0]]]

    def test_matches_oracle_with_overlap(self):
        x = np.random.default_rng(3).standard_normal((2, 2, 17))
        assert np.array_equal(MaxPool1d(4, 3).forward(x), maxpool_ref(x, 4, 3))

    def test_invalid_pool(self):
        with pytest.raises(ShapeMismatch):
            MaxPool1d(0)


class TestDense:
    def test_identity(self):
        layer = Dense(4, 4)
        layer.w[...] = np.eye(4)
        x = np.random.default_rng(0).standard_normal((3, 4))
        assert np.array_equal(layer.forward(x), x)

    def test_zero_input(self):
        layer = Dense(3, 2)
        layer.b[...] = [0.5, -1.0]
        assert np.array_equal(layer.forward(np.zeros((1, 3))), [[0.5, -1.0]])

    def test_shape(self):
        with pytest.raises(ShapeMismatch):
            Dense(3, 2).forward(np.zeros((1, 4)))


class TestActivations:
    def test_values(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5
        assert relu(np.array([-5.0, 5.0])).tolist() == [0.0, 5.0]
        assert np.allclose(softmax(np.full(4, 2.5)), 0.25)

    def test_sigmoid_matches_definition(self):
        z = np.linspace(-30, 30, 121)
        assert np.allclose(sigmoid(z), sigmoid_ref(z), rtol=1e-12, atol=0)

    def test_sigmoid_strictly_inside_unit_interval(self):
        s = sigmoid(np.array([-1e4, -800.0, 800.0, 1e4]))
        assert np.all(s > 0) and np.all(s < 1)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.floats(-100, 100))
    def test_softmax_properties(self, z, c):
        z = np.array(z)
        p = softmax(z)
        assert abs(p.sum() - 1) < 1e-9
        assert np.max(np.abs(softmax(z + c) - p)) < 1e-9

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(-20_000, 20_000), min_size=1, max_size=12, unique=True))
    def test_sigmoid_monotone_argmax(self, z):
        # steps of 1e-3 stay resolvable in float64 over this range
        z = np.array(z) * 1e-3
        s = sigmoid(z)
        order = np.argsort(z)
        assert np.all(np.diff(s[order]) > 0)
        assert np.argmax(s) == np.argmax(z)


class TestLoss:
    def test_certain_true_class(self):
        assert categorical_cross_entropy(np.array([1.0, 0.2]), np.array([1.0, 0.0])) < 1e-11

    def test_one_over_e(self):
        loss = categorical_cross_entropy(np.array([0.1, 1 / math.e]), np.array([0.0, 1.0]))
        assert loss == pytest.approx(1.0, abs=1e-12)

    def test_invalid_labels(self):
        with pytest.raises(InvalidLabel):
            categorical_cross_entropy(np.array([0.5, 0.5]), np.array([1.0, 1.0]))
        with pytest.raises(InvalidLabel):
            one_hot([3], 3)

    def test_cce_gradient_only_on_hot_entry(self):
        _, g = cce_sigmoid(np.array([[0.3, -0.2, 1.0]]), np.array([[0.0, 1.0, 0.0]]))
        assert g[0, 0] == 0 and g[0, 2] == 0 and g[0, 1] < 0


class TestAdam:
    def test_zero_grads(self):
        p = [np.array([1.0, -2.0])]
        st_ = AdamState.for_params(p)
        adam_step(p, [np.zeros(2)], st_)
        assert p[0].tolist() == [1.0, -2.0] and st_.t == 1

    def test_first_step_is_signed_lr(self):
        p = [np.array([0.5, 0.5, 0.5])]
        g = [np.array([3.0, -0.2, 1e-3])]
        st_ = AdamState.for_params(p)
        adam_step(p, g, st_)
        assert np.allclose(p[0] - 0.5, -st_.lr * np.sign(g[0]), atol=st_.lr * 1e-3, rtol=0)

    def test_defaults(self):
        s = AdamState()
        assert (s.lr, s.beta1, s.beta2, s.eps, s.t) == (1e-3, 0.9, 0.999, 1e-8, 0)

    def test_descends_quadratic(self):
        w = [np.array([1.0, 1.0])]
        st_ = AdamState.for_params(w, lr=0.05)
        for _ in range(100):
            adam_step(w, [2 * w[0]], st_)
        assert np.linalg.norm(w[0]) < 0.1

    def test_shape_mismatch(self):
        p = [np.zeros(2)]
        with pytest.raises(ShapeMismatch):
            adam_step(p, [np.zeros(3)], AdamState.for_params(p))


class TestModel:
    def test_default_architecture_shapes(self):
        arch = default_architecture((2, 4096), 5)
        m = Model.from_architecture(arch, (2, 4096))
        kinds = [layer.kind for layer in m.layers]
        assert kinds == ["conv1d", "relu", "maxpool1d"] * 3 + ["flatten", "dense", "relu", "dense", "sigmoid"]
        flat = next(layer for layer in m.layers if layer.kind == "dense")
        assert flat.n_in == 64 * 63 and flat.n_out == 128
        assert m.num_classes == 5

    def test_must_end_with_dense_sigmoid(self):
        with pytest.raises(ShapeMismatch):
            Model([Flatten(), Dense(8, 2)], (1, 8))

    def test_kernel_three_only(self):
        with pytest.raises(ShapeMismatch):
            Model([Conv1d(1, 1, kernel=5), Flatten(), Dense(4, 2), Sigmoid()], (1, 8))

    def test_shapes_compose(self):
        with pytest.raises(ShapeMismatch):
            Model([Flatten(), Dense(7, 2), Sigmoid()], (1, 8))

    def test_predict(self):
        m = tiny_model()
        x = np.random.default_rng(0).random((2, 32))
        a, b = m.predict(x), m.predict(x)
        assert a.sigmoid.shape == (3,)
        assert np.all((a.sigmoid > 0) & (a.sigmoid < 1))
        assert np.array_equal(a.logits, b.logits)
        with pytest.raises(ShapeMismatch):
            m.predict(np.zeros((2, 31)))

    def test_float32_path(self):
        m = tiny_model(seed=4)
        x = np.random.default_rng(1).random((16, 2, 32))
        _, s64 = m.predict_batch(x)
        _, s32 = m.predict_batch(x, dtype=np.float32)
        assert np.max(np.abs(s32 - s64) / s64) < 1e-3

    def test_copy_is_independent(self):
        m = tiny_model(names=["a", "b", "c"])
        c = m.copy()
        c.params[0][...] += 1
        assert not np.array_equal(c.params[0], m.params[0])
        assert c.class_names == ["a", "b", "c"]


def blobs(n, seed, length=32):
    """Two classes separated along one coordinate of the input."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    x = rng.random((n, 2, length)) * 0.2
    x[:, 0, 5] += np.where(y == 1, 1.0, 0.0)
    return x, y


class TestTrain:
    def test_single_example_overfits(self):
        m = tiny_model(seed=1)
        x = np.random.default_rng(2).random((1, 2, 32))
        res = train(m, x, np.array([2]), TrainConfig(epochs=50, batch_size=1, lr=1e-2))
        assert res.losses[-1] < res.losses[0]
        assert len(res.losses) == 50
        assert m.predict(x[0]).sigmoid[2] > 0.99

    def test_deterministic(self):
        x, y = blobs(64, 0)
        a = train(tiny_model(seed=5, n_cls=2), x, y, TrainConfig(epochs=2, batch_size=16, shuffle_seed=3))
        b = train(tiny_model(seed=5, n_cls=2), x, y, TrainConfig(epochs=2, batch_size=16, shuffle_seed=3))
        assert model_to_bytes(a.model) == model_to_bytes(b.model)
        assert a.losses == b.losses

    def test_separable_toy(self):
        x, y = blobs(400, 1)
        # the oracle separator: coordinate (0, 5) thresholded at 0.6
        assert np.all((x[:, 0, 5] > 0.6) == (y == 1))
        m = tiny_model(seed=2, n_cls=2)
        train(m, x, y, TrainConfig(epochs=10, batch_size=32, lr=3e-3))
        _, s = m.predict_batch(x)
        assert np.mean(s.argmax(1) == y) >= 0.99

    def test_errors(self):
        m = tiny_model()
        with pytest.raises(EmptyDataset):
            train(m, np.zeros((0, 2, 32)), np.zeros(0, int))
        with pytest.raises(LabelOutOfRange):
            train(m, np.zeros((2, 2, 32)), np.array([0, 3]))
        with pytest.raises(ShapeMismatch):
            train(m, np.zeros((2, 2, 32)), np.array([0]))
        with pytest.raises(InvalidConfig):
            TrainConfig(epochs=0)
        with pytest.raises(InvalidConfig):
            TrainConfig(loss="mse")

    @pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
    def test_nonfinite_is_detected(self):
        x = np.random.default_rng(0).random((4, 2, 32))
        x[0, 0, 0] = np.inf
        with pytest.raises(NonFiniteError):
            train(tiny_model(), x, np.array([0, 1, 2, 0]), TrainConfig(epochs=1))

    @pytest.mark.parametrize("loss", ["cce", "cce_normalized", "bce"])
    def test_every_loss_trains(self, loss):
        x, y = blobs(64, 3)
        res = train(tiny_model(seed=1, n_cls=2), x, y, TrainConfig(epochs=3, batch_size=16, loss=loss))
        assert all(np.isfinite(res.losses))

    def test_epoch_callback(self):
        seen = []
        x, y = blobs(20, 4)
        train(tiny_model(n_cls=2), x, y, TrainConfig(epochs=3, batch_size=8),
              on_epoch=lambda e, loss: seen.append(e))
        assert seen == [0, 1, 2]


class TestPersistence:
    def test_round_trip(self, tmp_path):
        m = tiny_model(seed=7, names=["x", "y", "z"])
        path = tmp_path / "m.osrfm"
        save_model(m, path)
        back = load_model(path)
        x = np.random.default_rng(0).random((5, 2, 32))
        assert np.array_equal(back.predict_batch(x)[0], m.predict_batch(x)[0])
        assert back.class_names == ["x", "y", "z"]
        assert model_checksum(back) == model_checksum(m)
        assert path.read_bytes()[:8] == b"OSRFMDL1"

    def test_corruption(self, tmp_path):
        data = bytearray(model_to_bytes(tiny_model()))
        data[100] ^= 0xFF
        with pytest.raises(ChecksumMismatch):
            model_from_bytes(bytes(data))
        with pytest.raises(ChecksumMismatch):
            model_from_bytes(b"short")

    def test_future_version(self):
        data = bytearray(model_to_bytes(tiny_model()))[:-4]
        data[8:12] = struct.pack("<I", 99)
        data += struct.pack("<I", zlib.crc32(bytes(data)))
        with pytest.raises(VersionMismatch):
            model_from_bytes(bytes(data))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_model(tmp_path / "nope.osrfm")


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
class TestBackendsAgree:
    @settings(max_examples=30, deadline=None)
    @given(b=st.integers(1, 4), cin=st.integers(1, 4), cout=st.integers(1, 5), n=st.integers(3, 40),
           seed=st.integers(0, 2 ** 32 - 1))
    def test_conv(self, b, cin, cout, n, seed):
        rng = np.random.default_rng(seed)
        x, w, bias = rng.standard_normal((b, cin, n)), rng.standard_normal((cout, cin, 3)), rng.standard_normal(cout)
        assert np.allclose(K.conv1d_forward_np(x, w, bias), K.conv1d_forward_nb(x, w, bias), atol=1e-12)
        g = rng.standard_normal((b, cout, n - 2))
        for u, v in zip(K.conv1d_backward_np(g, x, w), K.conv1d_backward_nb(g, x, w)):
            assert np.allclose(u, v, atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(b=st.integers(1, 3), c=st.integers(1, 3), n=st.integers(1, 40), pool=st.integers(1, 5),
           stride=st.integers(1, 5), seed=st.integers(0, 2 ** 32 - 1))
    def test_pool(self, b, c, n, pool, stride, seed):
        if n < pool:
            return
        x = np.random.default_rng(seed).integers(0, 4, (b, c, n)).astype(float)  # ties on purpose
        o1, i1 = K.maxpool1d_forward_np(x, pool, stride)
        o2, i2 = K.maxpool1d_forward_nb(x, pool, stride)
        assert np.array_equal(o1, o2) and np.array_equal(i1, i2)
        g = np.random.default_rng(seed + 1).standard_normal(o1.shape)
        assert np.allclose(K.maxpool1d_backward_np(g, i1, n), K.maxpool1d_backward_nb(g, i2, n), atol=1e-12)
