"""Hashed bag-of-words featurizer and the encoder wrapper."""

import numpy as np
import pytest

from oosguard.errors import ConfigError, DataError
from oosguard.featurizer import (
    EncoderConfig,
    Featurizer,
    encode,
    featurize,
    featurize_batch,
)
from oosguard.nn import DenseNetwork, dense_network


class TestFeaturize:
    def test_empty_text_is_zero(self):
        f = Featurizer(dim=64)
        np.testing.assert_array_equal(featurize(f, ""), np.zeros(64, dtype=np.float32))
        np.testing.assert_array_equal(featurize(f, " ,!"), np.zeros(64, dtype=np.float32))

    def test_deterministic(self):
        f = Featurizer(dim=128, seed=3)
        a = featurize(f, "turn on the radio")
        b = featurize(f, "turn on the radio")
        np.testing.assert_array_equal(a, b)

    def test_normalization_rules(self):
        f = Featurizer(dim=128)
        a = featurize(f, "Turn on the radio")
        b = featurize(f, "turn ON the radio!")
        np.testing.assert_array_equal(a, b)

    def test_unit_norm(self):
        f = Featurizer(dim=256, seed=1)
        for text in ("hello", "what is the weather like", "a b c d e f g"):
            v = featurize(f, text)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-6

    def test_seed_changes_hashing(self):
        a = featurize(Featurizer(dim=128, seed=0), "hello world")
        b = featurize(Featurizer(dim=128, seed=1), "hello world")
        assert not np.array_equal(a, b)

    def test_passthrough_cannot_featurize(self):
        with pytest.raises(ConfigError):
            featurize(Featurizer(kind="passthrough", dim=8), "hello")

    def test_batch_matches_single(self):
        f = Featurizer(dim=64, seed=2)
        texts = ["set an alarm", "play some jazz", ""]
        batch = featurize_batch(f, texts)
        for i, t in enumerate(texts):
            np.testing.assert_array_equal(batch[i], featurize(f, t))


class TestEncoderConfig:
    def test_layer_dims_chain(self):
        cfg = EncoderConfig(
            featurizer=Featurizer(dim=512), hidden_dims=(256, 128), embedding_dim=64
        )
        assert cfg.layer_dims == (512, 256, 128, 64)

    def test_rejects_bad_dims(self):
        with pytest.raises(ConfigError):
            EncoderConfig(embedding_dim=0)


class TestEncode:
    def test_zero_weight_encoder(self):
        net = dense_network((8, 4), seed=0)
        for w in net.weights:
            w[:] = 0.0
        out = encode(net, np.ones((3, 8)))
        np.testing.assert_array_equal(out, np.zeros((3, 4)))

    def test_identity_encoder_passthrough(self):
        net = DenseNetwork(
            layer_dims=(4, 4), weights=[np.eye(4)], biases=[np.zeros(4)]
        )
        x = np.arange(8, dtype=np.float64).reshape(2, 4)
        np.testing.assert_array_equal(encode(net, x), x)

    def test_batch_equals_rowwise(self):
        net = dense_network((16, 12, 8), seed=9)
        rng = np.random.default_rng(9)
        x = rng.standard_normal((20, 16))
        batch = encode(net, x)
        for i in range(20):
            row = encode(net, x[i])
            np.testing.assert_allclose(batch[i], row[0], atol=1e-12)

    def test_dim_mismatch(self):
        net = dense_network((8, 4), seed=0)
        with pytest.raises(DataError):
            encode(net, np.ones((2, 5)))
