import numpy as np
import pytest

from lorasound.edge import (ClassScores, EdgeModelConfig, SpectralEncodingBank,
                            init_edge_weights, low_features, multi_res_forward,
                            single_res_forward, spectral_encode)
from lorasound.errors import ShapeError
from lorasound.tensor import (Tensor, avg_pool2d, conv2d, linear, relu,
                              softmax)
from lorasound.wavelet import MultiResInput
from lorasound.weights import WeightStore

from conftest import zero_store

TINY = EdgeModelConfig(r_l=4, r_h=8, t_l=4, t_h=4, p=2, k=1, class_count=2,
                       enc_channels=(1, 1), cls_channels=(1, 1))


def edge_shapes(cfg: EdgeModelConfig) -> dict:
    ks = cfg.kernel_size
    c1, c2 = cfg.enc_channels
    g1, g2 = cfg.cls_channels
    shapes = {
        "low.conv1.weight": (c1, 1, ks, ks), "low.conv1.bias": (c1,),
        "low.conv2.weight": (c2, c1, ks, ks), "low.conv2.bias": (c2,),
        "high.conv1.weight": (c1, 2, ks, ks), "high.conv1.bias": (c1,),
        "high.conv2.weight": (c2, c1, ks, ks), "high.conv2.bias": (c2,),
        "cls.conv1.weight": (g1, 2 * c2, ks, ks), "cls.conv1.bias": (g1,),
        "cls.conv2.weight": (g2, g1, ks, ks), "cls.conv2.bias": (g2,),
        "cls.fc.weight": (cfg.class_count, g2), "cls.fc.bias": (cfg.class_count,),
        "single.conv1.weight": (g1, c2, ks, ks), "single.conv1.bias": (g1,),
        "single.conv2.weight": (g2, g1, ks, ks), "single.conv2.bias": (g2,),
        "single.fc.weight": (cfg.class_count, g2),
        "single.fc.bias": (cfg.class_count,),
    }
    for s in range(cfg.bank_size):
        shapes[f"spectral_encoding.{s}"] = (1, cfg.high_rows, cfg.t_h)
    return shapes


def tiny_input(rng, window_start=0) -> MultiResInput:
    return MultiResInput(
        low=rng.standard_normal((TINY.r_l, TINY.t_l)).astype(np.float32),
        high=rng.standard_normal((TINY.high_rows, TINY.t_h)).astype(np.float32),
        window_start=window_start)


class TestSpectralEncode:
    def test_zero_bank_channels(self, rng):
        inp = tiny_input(rng)
        bank = SpectralEncodingBank.from_store(zero_store(edge_shapes(TINY)), TINY)
        out = spectral_encode(inp, bank)
        assert out.dims == (2, TINY.high_rows, TINY.t_h)
        assert np.array_equal(out.data[0], inp.high)
        assert np.all(out.data[1] == 0.0)

    def test_window_start_selects_bank_entry(self, rng):
        weights = init_edge_weights(TINY, seed=4)
        bank = SpectralEncodingBank.from_store(weights, TINY)
        high = rng.standard_normal((TINY.high_rows, TINY.t_h)).astype(np.float32)
        low = rng.standard_normal((TINY.r_l, TINY.t_l)).astype(np.float32)
        a = spectral_encode(MultiResInput(low, high, 0), bank)
        b = spectral_encode(MultiResInput(low, high, 1), bank)
        assert np.array_equal(a.data[0], b.data[0])
        assert not np.array_equal(a.data[1], b.data[1])

    def test_shapes_for_stock_config(self, rng):
        cfg = EdgeModelConfig()  # p=8, k=2, R_h=64, T_h=16
        weights = init_edge_weights(cfg, seed=4)
        bank = SpectralEncodingBank.from_store(weights, cfg)
        assert len(bank) == 7
        inp = MultiResInput(
            low=rng.standard_normal((16, 16)).astype(np.float32),
            high=rng.standard_normal((16, 16)).astype(np.float32),
            window_start=5)
        assert spectral_encode(inp, bank).dims == (2, 16, 16)

    def test_window_out_of_range(self, rng):
        bank = SpectralEncodingBank.from_store(init_edge_weights(TINY, 4), TINY)
        with pytest.raises(ShapeError):
            spectral_encode(tiny_input(rng, window_start=5), bank)


class TestForwardPasses:
    def test_zero_weights_uniform_scores(self, rng):
        weights = zero_store(edge_shapes(TINY))
        inp = tiny_input(rng)
        multi = multi_res_forward(inp, weights, TINY)
        single = single_res_forward(inp.low, weights, TINY)
        assert np.allclose(multi.probs, 0.5)
        assert np.allclose(single.probs, 0.5)

    def test_deterministic(self, rng):
        weights = init_edge_weights(TINY, seed=8)
        inp = tiny_input(rng)
        a = multi_res_forward(inp, weights, TINY)
        b = multi_res_forward(inp, weights, TINY)
        assert np.array_equal(a.probs, b.probs)

    def test_scores_sum_to_one_and_open_interval(self, rng):
        weights = init_edge_weights(TINY, seed=9)
        for _ in range(25):
            inp = tiny_input(rng, window_start=int(rng.integers(0, 2)))
            for scores in (multi_res_forward(inp, weights, TINY),
                           single_res_forward(inp.low, weights, TINY)):
                assert abs(float(scores.probs.sum()) - 1.0) < 1e-6
                assert np.all(scores.probs > 0.0)
                assert np.all(scores.probs < 1.0)

    def test_single_res_ignores_high_path_weights(self, rng):
        base = init_edge_weights(TINY, seed=10)
        perturbed = WeightStore()
        for name, tensor in base.items():
            if name.startswith(("high.", "cls.", "spectral_encoding.")):
                perturbed.add(name, Tensor(tensor.data + 1.0))
            else:
                perturbed.add(name, tensor)
        low = rng.standard_normal((TINY.r_l, TINY.t_l)).astype(np.float32)
        assert np.array_equal(single_res_forward(low, base, TINY).probs,
                              single_res_forward(low, perturbed, TINY).probs)

    def test_multi_res_sees_bank_changes(self, rng):
        # seed chosen so the one-channel relu stack does not go dead
        base = init_edge_weights(TINY, seed=3)
        changed = WeightStore()
        for name, tensor in base.items():
            if name == "spectral_encoding.0":
                changed.add(name, Tensor(tensor.data + 1.0))
            else:
                changed.add(name, tensor)
        inp = tiny_input(rng, window_start=0)
        a = multi_res_forward(inp, base, TINY)
        b = multi_res_forward(inp, changed, TINY)
        assert not np.array_equal(a.probs, b.probs)

    def test_shared_low_encoder_features(self, rng):
        weights = init_edge_weights(TINY, seed=12)
        low = rng.standard_normal((TINY.r_l, TINY.t_l)).astype(np.float32)
        f1 = low_features(low, weights, TINY)
        f2 = low_features(low, weights, TINY)
        assert np.array_equal(f1.data, f2.data)

    def test_multi_res_matches_staged_composition(self, rng):
        weights = init_edge_weights(TINY, seed=13)
        inp = tiny_input(rng, window_start=1)
        got = multi_res_forward(inp, weights, TINY)

        def encode(x, prefix):
            y = relu(conv2d(x, weights[f"{prefix}.conv1.weight"],
                            weights[f"{prefix}.conv1.bias"], padding=1))
            y = avg_pool2d(y, 2)
            return relu(conv2d(y, weights[f"{prefix}.conv2.weight"],
                               weights[f"{prefix}.conv2.bias"], padding=1))

        lo = encode(Tensor(inp.low[None]), "low")
        enc = weights["spectral_encoding.1"].data[0]
        hi = encode(Tensor(np.stack([inp.high, enc])), "high")
        fused = Tensor(np.concatenate([lo.data, hi.data], axis=0))
        y = relu(conv2d(fused, weights["cls.conv1.weight"],
                        weights["cls.conv1.bias"], padding=1))
        y = avg_pool2d(y, 2)
        y = relu(conv2d(y, weights["cls.conv2.weight"],
                        weights["cls.conv2.bias"], padding=1))
        pooled = Tensor(y.data.mean(axis=(1, 2), dtype=np.float32))
        ref = softmax(linear(pooled, weights["cls.fc.weight"],
                             weights["cls.fc.bias"]))
        assert np.abs(got.probs - ref.data).max() < 1e-6

    def test_single_res_matches_staged_composition(self, rng):
        weights = init_edge_weights(TINY, seed=14)
        low = rng.standard_normal((TINY.r_l, TINY.t_l)).astype(np.float32)
        got = single_res_forward(low, weights, TINY)
        feats = low_features(low, weights, TINY)
        y = relu(conv2d(feats, weights["single.conv1.weight"],
                        weights["single.conv1.bias"], padding=1))
        if y.dims[1] >= 2 and y.dims[2] >= 2:
            y = avg_pool2d(y, 2)
        y = relu(conv2d(y, weights["single.conv2.weight"],
                        weights["single.conv2.bias"], padding=1))
        pooled = Tensor(y.data.mean(axis=(1, 2), dtype=np.float32))
        ref = softmax(linear(pooled, weights["single.fc.weight"],
                             weights["single.fc.bias"]))
        assert np.abs(got.probs - ref.data).max() < 1e-6

    def test_prediction_is_argmax(self):
        scores = ClassScores(np.array([0.2, 0.5, 0.3], dtype=np.float32))
        assert scores.predicted == 1
