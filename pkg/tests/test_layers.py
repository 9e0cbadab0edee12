import numpy as np
import pytest

from fmlprec.errors import InvalidArgumentError
from fmlprec.gradcheck import grad_check
from fmlprec.layers import (
    EmbeddingTable,
    FilterBank,
    LayerNormParams,
    classical_filter_layer,
    dropout,
    embed_sequence,
    ffn,
    filter_layer,
    layernorm,
    spectral_filter,
)
from fmlprec.rng import Rng
from fmlprec.spectral import circular_convolve, irfft_along, make_mask
from fmlprec.tensor import Tensor, mul, sum as tsum


def param(gen, *shape, scale=1.0):
    return Tensor(scale * gen.standard_normal(shape), requires_grad=True)


def weighted_sum(out, gen):
    # a random linear readout makes every output coordinate matter to the gradient
    return tsum(mul(out, Tensor(gen.standard_normal(out.shape))))


def random_norm(gen, d):
    return LayerNormParams(param(gen, d), param(gen, d))


class TestLayerNorm:
    def test_constant_row(self):
        out = layernorm(Tensor([[5.0, 5.0, 5.0, 5.0]]), LayerNormParams.identity(4))
        np.testing.assert_array_equal(out.data, [[0, 0, 0, 0]])

    def test_two_features(self):
        p = LayerNormParams.identity(2)
        p.eps = 1e-300
        np.testing.assert_allclose(layernorm(Tensor([[1.0, 3.0]]), p).data, [[-1.0, 1.0]])

    def test_shift_only(self):
        p = LayerNormParams(Tensor(np.zeros(3)), Tensor(np.full(3, 7.0)))
        np.testing.assert_array_equal(layernorm(Tensor(np.arange(6.0).reshape(2, 3)), p).data, 7.0)

    def test_gradient(self, rng):
        x = param(rng, 2, 5, 6)
        p = random_norm(rng, 6)
        assert grad_check(lambda: weighted_sum(layernorm(x, p), np.random.default_rng(1)),
                          [x, p.gamma, p.beta]) < 1e-4

    def test_bad_epsilon(self):
        with pytest.raises(InvalidArgumentError):
            LayerNormParams(Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=0.0)


class TestDropout:
    def test_eval_identity(self, rng):
        x = Tensor(rng.standard_normal((3, 4)))
        assert dropout(x, 0.5, Rng(0), train=False) is x

    def test_inverted_expectation(self):
        x = Tensor(np.linspace(1.0, 2.0, 8))
        rng = Rng(0)
        total = np.zeros(8)
        trials = 20_000
        for _ in range(trials):
            total += dropout(x, 0.5, rng, train=True).data
        np.testing.assert_allclose(total / trials, x.data, rtol=0.02)

    def test_rate_range(self):
        with pytest.raises(InvalidArgumentError):
            dropout(Tensor([1.0]), 1.0, Rng(0), train=True)

    def test_seed_pinned(self, rng):
        x = Tensor(rng.standard_normal(50))
        a = dropout(x, 0.3, Rng(5), train=True).data
        b = dropout(x, 0.3, Rng(5), train=True).data
        np.testing.assert_array_equal(a, b)


class TestEmbedSequence:
    def setup_method(self):
        gen = np.random.default_rng(0)
        self.table = EmbeddingTable(param(gen, 11, 6, scale=0.1))
        self.pos = param(gen, 5, 6, scale=0.1)
        self.norm = LayerNormParams.identity(6)

    def test_standardized_rows(self):
        out = embed_sequence(np.full(5, 3), self.table, self.pos, self.norm, 0.0, None, False).data
        np.testing.assert_allclose(out.mean(axis=1), 0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=1), 1, atol=1e-6)

    def test_eval_mode_ignores_rate(self):
        ids = np.array([0, 1, 5, 10, 2])
        a = embed_sequence(ids, self.table, self.pos, self.norm, 0.0, None, False).data
        b = embed_sequence(ids, self.table, self.pos, self.norm, 0.7, Rng(1), False).data
        np.testing.assert_array_equal(a, b)

    def test_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            embed_sequence(np.array([0, 1, 2, 3, 11]), self.table, self.pos, self.norm, 0.0, None, False)
        with pytest.raises(InvalidArgumentError):
            embed_sequence(np.array([0, 1, -1, 3, 4]), self.table, self.pos, self.norm, 0.0, None, False)

    def test_gradient(self):
        ids = np.array([[1, 4, 4, 9, 0], [2, 3, 10, 1, 1]])
        gen = np.random.default_rng(2)
        norm = random_norm(gen, 6)
        err = grad_check(
            lambda: weighted_sum(embed_sequence(ids, self.table, self.pos, norm, 0.0, None, False),
                                 np.random.default_rng(3)),
            [self.table.weights, self.pos, norm.gamma, norm.beta],
        )
        assert err < 1e-4


class TestSpectralFilter:
    @pytest.mark.parametrize("n", [4, 8, 50])
    @pytest.mark.parametrize("d", [1, 4])
    def test_matches_circular_convolution(self, n, d):
        for seed in range(5):
            gen = np.random.default_rng(seed)
            x = Tensor(gen.standard_normal((n, d)))
            k = n // 2 + 1
            w_re, w_im = gen.standard_normal((k, d)), gen.standard_normal((k, d))
            out = spectral_filter(x, Tensor(w_re), Tensor(w_im)).data
            kernels = irfft_along(w_re + 1j * w_im, n, axis=0)
            for t in range(d):
                ref = circular_convolve(x.data[:, t], kernels[:, t])
                assert np.max(np.abs(out[:, t] - ref)) <= 1e-6 * max(1.0, np.max(np.abs(ref)))

    def test_identity_bank(self, rng):
        x = Tensor(rng.standard_normal((8, 3)))
        out = spectral_filter(x, Tensor(np.ones((5, 3))), Tensor(np.zeros((5, 3))))
        np.testing.assert_allclose(out.data, x.data, atol=1e-12)

    def test_low_pass_bank_equals_classical(self, rng):
        x = Tensor(rng.standard_normal((10, 4)))
        mask = np.tile(make_mask("lowpass", 6).weights[:, None], (1, 4))
        learnable = spectral_filter(x, Tensor(mask), Tensor(np.zeros((6, 4)))).data
        np.testing.assert_allclose(learnable, classical_filter_layer(x, "lowpass").data, atol=1e-12)

    @pytest.mark.parametrize("n", [5, 8])
    def test_gradient(self, n):
        gen = np.random.default_rng(n)
        k = n // 2 + 1
        x, w_re, w_im = param(gen, 2, n, 3), param(gen, k, 3), param(gen, k, 3)
        err = grad_check(lambda: weighted_sum(spectral_filter(x, w_re, w_im), np.random.default_rng(0)),
                         [x, w_re, w_im])
        assert err < 1e-4

    def test_wrong_bin_count(self, rng):
        with pytest.raises(InvalidArgumentError):
            spectral_filter(Tensor(rng.standard_normal((8, 2))), Tensor(np.ones((4, 2))), Tensor(np.ones((4, 2))))


class TestFilterLayer:
    def test_identity_bank_doubles_residual(self, rng):
        x = Tensor(rng.standard_normal((8, 4)))
        bank = FilterBank(Tensor(np.ones((5, 4))), Tensor(np.zeros((5, 4))))
        norm = LayerNormParams.identity(4)
        out = filter_layer(x, bank, norm, 0.0, None, False).data
        np.testing.assert_allclose(out, layernorm(Tensor(2 * x.data), norm).data, atol=1e-10)

    def test_gradient(self):
        gen = np.random.default_rng(9)
        x = param(gen, 2, 6, 4)
        bank = FilterBank(param(gen, 4, 4), param(gen, 4, 4))
        norm = random_norm(gen, 4)
        err = grad_check(
            lambda: weighted_sum(filter_layer(x, bank, norm, 0.0, None, False), np.random.default_rng(0)),
            [x, bank.w_re, bank.w_im, norm.gamma, norm.beta],
        )
        assert err < 1e-4

    def test_length_mismatch(self, rng):
        bank = FilterBank(Tensor(np.ones((5, 2))), Tensor(np.zeros((5, 2))))
        with pytest.raises(InvalidArgumentError):
            filter_layer(Tensor(rng.standard_normal((6, 2))), bank, LayerNormParams.identity(2), 0.0, None, False)

    def test_bank_shapes_must_agree(self):
        with pytest.raises(InvalidArgumentError):
            FilterBank(Tensor(np.ones((5, 2))), Tensor(np.ones((4, 2))))


class TestClassicalFilter:
    def test_all_pass(self, rng):
        x = Tensor(rng.standard_normal((7, 3)))
        np.testing.assert_allclose(classical_filter_layer(x, "allpass").data, x.data, atol=1e-10)

    def test_low_pass_removes_alternation(self):
        x = Tensor(np.tile(np.array([1.0, -1.0])[:, None], (4, 2)))
        np.testing.assert_allclose(classical_filter_layer(x, "lowpass").data, 0.0, atol=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 7, 8, 50])
    def test_low_plus_high_is_identity(self, rng, n):
        x = Tensor(rng.standard_normal((n, 3)))
        total = classical_filter_layer(x, "lowpass").data + classical_filter_layer(x, "highpass").data
        np.testing.assert_allclose(total, x.data, atol=1e-9)

    def test_gradient_flows_to_input(self, rng):
        x = param(rng, 8, 2)
        err = grad_check(lambda: weighted_sum(classical_filter_layer(x, "bandstop"), np.random.default_rng(4)), [x])
        assert err < 1e-4


class TestFfn:
    def setup_method(self):
        gen = np.random.default_rng(4)
        self.gen = gen
        self.x = param(gen, 2, 5, 4)
        self.w1, self.b1 = param(gen, 4, 8), param(gen, 8)
        self.w2, self.b2 = param(gen, 8, 4), param(gen, 4)
        self.norm = random_norm(gen, 4)

    def test_zero_branch(self):
        z = [Tensor(np.zeros(s)) for s in [(4, 8), (8,), (8, 4), (4,)]]
        norm = LayerNormParams.identity(4)
        out = ffn(self.x, *z, norm, 0.0, None, False)
        np.testing.assert_array_equal(out.data, layernorm(self.x, norm).data)

    def test_dead_relu_leaves_bias(self):
        norm = LayerNormParams.identity(4)
        b1 = Tensor(np.full(8, -1e6))
        out = ffn(self.x, self.w1, b1, self.w2, self.b2, norm, 0.0, None, False)
        expected = layernorm(Tensor(self.x.data + self.b2.data), norm)
        np.testing.assert_allclose(out.data, expected.data, atol=1e-12)

    def test_gradient(self):
        params = [self.x, self.w1, self.b1, self.w2, self.b2, self.norm.gamma, self.norm.beta]
        err = grad_check(
            lambda: weighted_sum(
                ffn(self.x, self.w1, self.b1, self.w2, self.b2, self.norm, 0.0, None, False),
                np.random.default_rng(0),
            ),
            params,
        )
        assert err < 1e-4

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            ffn(self.x, self.w2, self.b1, self.w2, self.b2, self.norm, 0.0, None, False)
