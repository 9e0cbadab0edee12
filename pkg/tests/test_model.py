import numpy as np
import pytest

from fmlprec.errors import InvalidArgumentError
from fmlprec.layers import embed_sequence
from fmlprec.model import FmlpModel, ModelConfig, expected_num_params
from fmlprec.rng import Rng


def tiny(**kw):
    base = dict(vocab_size=20, hidden_size=4, max_len=8, num_blocks=1, dropout=0.0, seed=3)
    base.update(kw)
    return FmlpModel(ModelConfig(**base))


class TestConfig:
    def test_defaults(self):
        cfg = ModelConfig(vocab_size=10)
        assert (cfg.hidden_size, cfg.max_len, cfg.num_blocks, cfg.d_ff, cfg.dropout) == (64, 50, 2, 256, 0.5)
        assert cfg.num_bins == 26

    @pytest.mark.parametrize("bad", [dict(vocab_size=0), dict(vocab_size=3, hidden_size=0),
                                     dict(vocab_size=3, dropout=1.0), dict(vocab_size=3, num_blocks=-1),
                                     dict(vocab_size=3, mixer="attention")])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ModelConfig(**bad)

    def test_dict_roundtrip(self):
        cfg = ModelConfig(vocab_size=7, hidden_size=8, d_ff=12, pre_filter="lowpass", mixer="none")
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestParameters:
    @pytest.mark.parametrize("cfg", [
        ModelConfig(vocab_size=20, hidden_size=4, max_len=8, num_blocks=1),
        ModelConfig(vocab_size=100),
        ModelConfig(vocab_size=5, hidden_size=3, max_len=7, num_blocks=3, d_ff=5),
    ])
    def test_count_formula(self, cfg):
        d, n, k, ff, L, v = cfg.hidden_size, cfg.max_len, cfg.max_len // 2 + 1, cfg.d_ff, cfg.num_blocks, cfg.vocab_size
        closed_form = (v + 1) * d + n * d + L * (2 * k * d + 2 * ff * d + ff + d + 4 * d) + 2 * d
        model = FmlpModel(cfg)
        assert model.num_params() == closed_form == expected_num_params(cfg)

    def test_filter_banks(self):
        model = tiny(num_blocks=2, max_len=9)
        assert len(model.blocks) == 2
        assert all(b.bank.num_bins == 5 for b in model.blocks)

    def test_initialization(self):
        model = FmlpModel(ModelConfig(vocab_size=500, seed=1))
        emb = model.embedding.weights.data
        assert abs(emb.std() - 0.02) < 0.001
        np.testing.assert_array_equal(model.blocks[0].ffn_norm.gamma.data, 1.0)
        np.testing.assert_array_equal(model.blocks[0].b1.data, 0.0)

    def test_seed_determines_parameters(self):
        a, b = tiny(seed=5).state_arrays(), tiny(seed=5).state_arrays()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        c = tiny(seed=6).state_arrays()
        assert not np.array_equal(a["item_embedding"], c["item_embedding"])

    def test_load_state_checks_names(self):
        model = tiny()
        state = model.state_arrays()
        state.pop("position_embedding")
        with pytest.raises(InvalidArgumentError):
            model.load_state_arrays(state)


class TestForward:
    def test_deterministic_eval(self):
        model = FmlpModel(ModelConfig(vocab_size=30, hidden_size=8, max_len=10))
        ids = np.random.default_rng(0).integers(0, 31, size=(3, 10))
        a = model.forward(ids, train=False).data
        b = model.forward(ids, train=False).data
        np.testing.assert_array_equal(a, b)

    def test_seeded_train_mode(self):
        model = FmlpModel(ModelConfig(vocab_size=30, hidden_size=8, max_len=10))
        ids = np.arange(10)
        a = model.forward(ids, train=True, rng=Rng(4)).data
        b = model.forward(ids, train=True, rng=Rng(4)).data
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, model.forward(ids, train=False).data)

    def test_empty_stack_is_embedding(self):
        model = tiny(num_blocks=0)
        ids = np.array([0, 0, 3, 1, 20, 7, 7, 2])
        expected = embed_sequence(ids, model.embedding, model.positions, model.embed_norm, 0.0, None, False)
        np.testing.assert_array_equal(model.forward(ids).data, expected.data)

    def test_default_config_finite(self):
        model = FmlpModel(ModelConfig(vocab_size=200))
        ids = np.random.default_rng(1).integers(0, 201, size=(4, 50))
        out = model.forward(ids, train=True, rng=Rng(0)).data
        assert out.shape == (4, 50, 64)
        assert np.all(np.isfinite(out))

    def test_wrong_length(self):
        with pytest.raises(InvalidArgumentError):
            tiny().forward(np.arange(7))

    def test_no_mixer_variant(self):
        model = tiny(mixer="none")
        assert model.blocks[0].bank is None
        assert model.forward(np.arange(8)).shape == (8, 4)


class TestScoring:
    def setup_method(self):
        self.model = tiny()
        self.emb = self.model.embedding.weights.data

    def test_self_dot(self):
        e = self.emb[5].copy()
        assert self.model.score(e, 5) == pytest.approx(float(e @ e), rel=1e-15)

    def test_zero_hidden(self):
        assert all(self.model.score(np.zeros(4), i) == 0 for i in range(1, 21))
        np.testing.assert_array_equal(self.model.score_all(np.zeros(4)), np.zeros(20))

    def test_score_all_matches_loop(self, rng):
        h = rng.standard_normal(4)
        loop = np.array([self.model.score(h, i) for i in range(1, 21)])
        np.testing.assert_array_equal(self.model.score_all(h), loop)
        np.testing.assert_allclose(self.model.score_all(h), self.emb[1:] @ h)

    def test_positive_scaling_keeps_argmax(self, rng):
        h = rng.standard_normal(4)
        assert np.argmax(self.model.score_all(h)) == np.argmax(self.model.score_all(3.7 * h))

    def test_size(self):
        assert self.model.score_all(np.ones(4)).shape == (20,)

    def test_padding_rejected(self):
        with pytest.raises(InvalidArgumentError):
            self.model.score(np.ones(4), 0)

    def test_candidates_use_last_position(self, rng):
        ids = rng.integers(1, 21, size=(2, 8))
        cands = np.array([[1, 2, 3], [20, 19, 18]])
        hidden = self.model.forward(ids).data[:, -1]
        expected = np.stack([self.emb[c] @ h for c, h in zip(cands, hidden)])
        np.testing.assert_allclose(self.model.score_candidates(ids, cands), expected, atol=1e-14)
        np.testing.assert_allclose(self.model.score_full(ids), hidden @ self.emb[1:].T, atol=1e-14)
