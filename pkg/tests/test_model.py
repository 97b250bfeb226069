import numpy as np
import pytest

import oracles
from nnpnn import autodiff as ad
from nnpnn.errors import ConfigError, ShapeError
from nnpnn.model import (
    NnpnnConfig,
    ProcessingBlock,
    SubBlock,
    block_forward,
    expected_param_count,
    nnpnn_forward,
    nnpnn_init,
    sub_block_forward,
)
from nnpnn.networks import DenseNetwork, NetSpec, NetTemplate, dense_forward, evaluate, generate_nn, random_input
from nnpnn.rng import Rng


def zero_net():
    spec = NetSpec(2, 2, 1, 5)
    return DenseNetwork(spec, [(np.zeros((o, i)), np.zeros(o)) for i, o in spec.layer_dims()])


class TestSubBlock:
    def test_zero_parameters(self):
        store = ad.ParamStore()
        sb = SubBlock(store, Rng(0), "sb", 2, 3, 3, 4)
        store.flat[:] = 0.0
        g = ad.Graph()
        np.testing.assert_array_equal(sub_block_forward(sb, g.input([4.0, -9.0]), g).value, np.zeros(4))

    def test_third_layer_width(self):
        sb = SubBlock(ad.ParamStore(), Rng(0), "sb", 2, 3, 3, 4)
        assert sb.d3[0].shape == (4, 8)

    def test_dimension_mismatch(self):
        sb = SubBlock(ad.ParamStore(), Rng(0), "sb", 2, 3, 3, 4)
        g = ad.Graph()
        with pytest.raises(ShapeError):
            sub_block_forward(sb, g.input([1.0]), g)

    @pytest.mark.parametrize("linear", [False, True])
    def test_matches_naive_oracle(self, linear):
        rng = Rng(7)
        for _ in range(100):
            sb = SubBlock(ad.ParamStore(), rng, "sb", 3, 5, 4, 6, linear_output=linear)
            x = rng.normal(3.0, 3)
            g = ad.Graph(record=False)
            got = sub_block_forward(sb, g.input(x), g).value
            np.testing.assert_allclose(got, oracles.sub_block(sb, x), rtol=0, atol=1e-12)


class TestProcessingBlock:
    def test_two_sub_blocks(self):
        pb = ProcessingBlock(ad.ParamStore(), Rng(0), "pb", 3, 8, 16)
        assert len(pb.sub_blocks) == 2
        assert pb.in_dim == 3 and pb.out_dim == 8
        assert pb.sub_blocks[1].linear_output and not pb.sub_blocks[0].linear_output

    def test_zero_parameters(self):
        store = ad.ParamStore()
        pb = ProcessingBlock(store, Rng(0), "pb", 3, 8, 16)
        store.flat[:] = 0.0
        g = ad.Graph()
        np.testing.assert_array_equal(block_forward(pb, g.input([1.0, 2.0, 3.0]), g).value, np.zeros(8))

    def test_is_composition_of_sub_blocks(self):
        pb = ProcessingBlock(ad.ParamStore(), Rng(3), "pb", 3, 8, 16)
        g = ad.Graph()
        x = g.input([0.5, -1.0, 2.0])
        direct = block_forward(pb, x, g).value
        twice = sub_block_forward(pb.sub_blocks[1], sub_block_forward(pb.sub_blocks[0], x, g), g).value
        assert direct.tobytes() == twice.tobytes()

    def test_parameter_gradient(self):
        rng = Rng(12)
        store = ad.ParamStore()
        pb = ProcessingBlock(store, rng, "pb", 3, 2, 4)
        x, target = rng.normal(1.0, 3), rng.normal(1.0, 2)

        def build(g):
            return ad.mse_loss(g, block_forward(pb, g.input(x), g), target)

        assert ad.finite_diff_check(ad.wrt_store(build, store), store.flat.copy()) < 1e-4


class TestInit:
    def test_zero_queries_rejected(self):
        with pytest.raises(ConfigError):
            NnpnnConfig(r=0)
        with pytest.raises(ConfigError):
            NnpnnConfig(l=0)

    def test_deterministic(self):
        a, b = nnpnn_init(Rng(5)), nnpnn_init(Rng(5))
        assert a.store.flat.tobytes() == b.store.flat.tobytes()

    def test_param_count_formula_l1_r4(self):
        cfg = NnpnnConfig(l=1, r=4, width=32)
        # phase block: 2 -> 8 queries; head: 4*(2+2)=16 -> 2
        sb = lambda i, a, b, c: i * a + a + a * b + b + (i + a + b) * c + c  # noqa: E731
        phase = sb(2, 32, 32, 32) + sb(32, 32, 32, 8)
        head = sb(16, 32, 32, 32) + sb(32, 32, 32, 2)
        assert nnpnn_init(Rng(0), cfg).param_count() == phase + head == expected_param_count(cfg)

    @pytest.mark.parametrize("cfg", [
        NnpnnConfig(),
        NnpnnConfig(l=3, r=2, width=5, carry_state=True),
        NnpnnConfig(l=2, r=1, width=4, output_dim=16, seed_input=True),
    ])
    def test_param_count_matches_closed_form(self, cfg):
        assert nnpnn_init(Rng(0), cfg).param_count() == expected_param_count(cfg)

    def test_seed_vector_zero_initialised(self):
        F = nnpnn_init(Rng(0), NnpnnConfig(seed_input=True))
        np.testing.assert_array_equal(F.seed_vector.value, np.zeros(2))


class TestForward:
    def test_zero_target_network(self):
        F = nnpnn_init(Rng(0), NnpnnConfig(l=1, r=1, width=8))
        g = ad.Graph()
        out, trace = nnpnn_forward(F, [1.0, -1.0], zero_net(), g)
        assert np.isfinite(out.value).all() and out.dim == 2
        np.testing.assert_array_equal(trace.states[0], np.concatenate([[0.0, 0.0], trace[0].query]))

    def test_phase_dims(self):
        cfg = NnpnnConfig(l=2, r=4)
        assert cfg.phase_input_dims() == [2, 16]
        F = nnpnn_init(Rng(0), cfg)
        _, trace = nnpnn_forward(F, [0.1, 0.2], generate_nn(Rng(1)), ad.Graph())
        assert [s.size for s in trace.states] == [16, 16]

    def test_carry_state_appends_previous(self):
        cfg = NnpnnConfig(l=2, r=1, width=4, carry_state=True)
        assert cfg.phase_input_dims() == [2, 6]
        F = nnpnn_init(Rng(0), cfg)
        x = np.array([0.1, 0.2])
        _, trace = nnpnn_forward(F, x, generate_nn(Rng(1)), ad.Graph())
        np.testing.assert_array_equal(trace.states[0][4:], x)
        np.testing.assert_array_equal(trace.states[1][4:], trace.states[0])

    def test_mismatched_target(self):
        F = nnpnn_init(Rng(0))
        G = generate_nn(Rng(1), NetTemplate(input_dim=3))
        with pytest.raises(ShapeError):
            nnpnn_forward(F, [0.0, 0.0], G, ad.Graph())

    def test_missing_input_without_seed(self):
        with pytest.raises(ShapeError):
            nnpnn_forward(nnpnn_init(Rng(0)), None, generate_nn(Rng(1)), ad.Graph())

    def test_wrong_input_dim(self):
        with pytest.raises(ShapeError):
            nnpnn_forward(nnpnn_init(Rng(0)), [1.0, 2.0, 3.0], generate_nn(Rng(1)), ad.Graph())

    def test_trace_counts_and_reads(self):
        rng = Rng(9)
        F = nnpnn_init(rng, NnpnnConfig(l=2, r=4, width=8))
        G = generate_nn(rng)
        _, trace = nnpnn_forward(F, rng.normal(1.0, 2), G, ad.Graph())
        assert len(trace) == 8
        assert [(t.phase, t.index) for t in trace] == [(k, n) for k in range(2) for n in range(4)]
        for t in trace:
            np.testing.assert_allclose(t.read, oracles.dense(G.layers, t.query), rtol=0, atol=1e-12)

    def test_interleaving_order(self):
        rng = Rng(10)
        F = nnpnn_init(rng, NnpnnConfig(l=2, r=4, width=8))
        G = generate_nn(rng)
        _, trace = nnpnn_forward(F, rng.normal(1.0, 2), G, ad.Graph())
        for k in range(2):
            recs = [t for t in trace if t.phase == k]
            expected = np.concatenate([np.concatenate([t.read, t.query]) for t in recs])
            assert trace.states[k].tobytes() == expected.tobytes()
            swapped = np.concatenate([np.concatenate([t.query, t.read]) for t in recs])
            assert not np.array_equal(trace.states[k], swapped)

    def test_target_is_only_queried(self):
        rng = Rng(11)
        F = nnpnn_init(rng, NnpnnConfig(l=2, r=4, width=8))
        G = generate_nn(rng)
        x = rng.normal(1.0, 2)
        out, trace = nnpnn_forward(F, x, G, ad.Graph())
        table = {t.query.tobytes(): t.read for t in trace}

        def lookup(g, xn):
            return g.input(table[xn.value.tobytes()])

        out2, _ = nnpnn_forward(F, x, lookup, ad.Graph())
        assert out.value.tobytes() == out2.value.tobytes()

    def test_seed_vector_input(self):
        rng = Rng(12)
        F = nnpnn_init(rng, NnpnnConfig(l=1, r=2, width=4, output_dim=16, seed_input=True))
        G = generate_nn(rng)
        g = ad.Graph()
        out, _ = nnpnn_forward(F, None, G, g)
        assert out.dim == 16
        grads = g.backward(ad.mse_loss(g, out, np.ones(16)))
        assert np.any(grads[F.seed_vector] != 0.0)

    @pytest.mark.parametrize("l", [1, 2])
    @pytest.mark.parametrize("r", [1, 4])
    def test_matches_naive_oracle(self, l, r):
        rng = Rng(100 + 10 * l + r)
        F = nnpnn_init(rng, NnpnnConfig(l=l, r=r, width=6))
        for _ in range(25):
            G = generate_nn(rng)
            x = evaluate(G, random_input(rng, 2))
            out, _ = nnpnn_forward(F, x, G, ad.Graph(record=False))
            np.testing.assert_allclose(out.value, oracles.nnpnn(F, x, G.layers), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("l", [1, 2])
    @pytest.mark.parametrize("r", [1, 4])
    def test_end_to_end_gradient(self, l, r):
        rng = Rng(200 + 10 * l + r)
        F = nnpnn_init(rng, NnpnnConfig(l=l, r=r, width=3))
        G = generate_nn(rng)
        x, target = rng.normal(1.0, 2), rng.normal(1.0, 2)

        def build(g):
            out, _ = nnpnn_forward(F, x, G, g)
            return ad.mse_loss(g, out, target)

        assert ad.finite_diff_check(ad.wrt_store(build, F.store), F.store.flat.copy()) < 1e-4

    def test_gradient_flows_through_reads(self):
        # a loss on G(output) must reach the first phase's parameters through both G evaluations
        rng = Rng(13)
        F = nnpnn_init(rng, NnpnnConfig(l=1, r=2, width=4))
        G = generate_nn(rng)
        g = ad.Graph()
        out, _ = nnpnn_forward(F, [0.3, 0.4], G, g)
        grads = g.backward(ad.mae_loss(g, dense_forward(G, out, g), [0.3, 0.4]))
        d1_W = F.phases[0].sub_blocks[0].d1[0]
        assert np.any(grads[d1_W] != 0.0)
