import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nnclass import nnet
from nnclass.errors import StructuralError, ValidationError
from nnclass.nnet import Architecture, Network, SieveSpec, Skip


def random_net(rng, dims, scale=1.0, bias=True):
    layers = []
    for a, b in zip(dims[:-1], dims[1:]):
        A = rng.uniform(-scale, scale, size=(b, a))
        v = rng.uniform(-scale, scale, size=b) if bias else np.zeros(b)
        layers.append((A, v))
    return Network(tuple(layers))


def hand_net():
    # d=2, N_1=2: h = relu([[1,-1],[2,1]] x + [0.5,-1]); out = [3,-2] h + 0.25
    return Network(
        (
            (np.array([[1.0, -1.0], [2.0, 1.0]]), np.array([0.5, -1.0])),
            (np.array([[3.0, -2.0]]), np.array([0.25])),
        )
    )


class TestRealize:
    def test_single_relu(self):
        net = Network(((np.array([[1.0]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0]))))
        assert net(0.3) == 0.3 and net(0.0) == 0.0
        assert np.array_equal(nnet.realize(net, np.array([[-0.5], [0.7]])), [0.0, 0.7])

    def test_zero_weights_constant(self):
        net = nnet.zeros((3, 4, 1), bias_out=-1.25)
        assert np.all(net(np.random.default_rng(0).random((5, 3))) == -1.25)

    def test_hand_computed(self):
        # x = (0.2, 0.6): pre = (0.1, 0.0) -> h = (0.1, 0) -> 0.3 + 0.25
        assert hand_net()([0.2, 0.6]) == pytest.approx(0.55, abs=1e-15)
        # x = (0.9, 0.4): pre = (1.0, 1.2) -> 3 - 2.4 + 0.25
        assert hand_net()([0.9, 0.4]) == pytest.approx(0.85, abs=1e-15)

    def test_matches_loop_oracle(self, rng):
        for dims in [(1, 3, 1), (2, 4, 3, 1), (3, 2, 2, 2, 1)]:
            net = random_net(rng, dims)
            x = rng.random((7, dims[0]))
            got = net(x)
            want = [oracles.forward_loop(net.layers, xi) for xi in x]
            assert np.allclose(got, want, rtol=0, atol=1e-13)

    def test_skip_connection(self):
        base = hand_net()
        skip = Skip(0, 2, np.array([[1.0, 10.0]]))
        net = Network(base.layers, skips=(skip,))
        x = np.array([0.2, 0.6])
        assert net(x) == pytest.approx(base(x) + 0.2 + 6.0, abs=1e-14)
        assert nnet.connectivity(net) == nnet.connectivity(base) + 2

    def test_periodic_activation(self):
        base = hand_net()
        net = Network(base.layers, activations=("periodic",))
        x = np.array([0.2, 0.6])
        # wave(0.1) = 0.2 and wave(0) = 0
        assert net(x) == pytest.approx(3 * 0.2 + 0.25, abs=1e-14)
        # pre = (1.0, 1.2): wave(1) = 0 and wave(1.2) = -0.4
        assert net([0.9, 0.4]) == pytest.approx(-2 * -0.4 + 0.25, abs=1e-14)

    @pytest.mark.parametrize(
        "build",
        [
            lambda: Network(((np.ones((2, 2)), np.ones(3)),)),
            lambda: Network(((np.ones((2, 2)), np.ones(2)), (np.ones((1, 3)), np.ones(1)))),
            lambda: Network(hand_net().layers, activations=("tanh",)),
            lambda: Network(hand_net().layers, skips=(Skip(1, 1, np.ones((2, 2))),)),
            lambda: Network(hand_net().layers, skips=(Skip(0, 2, np.ones((2, 2))),)),
            lambda: Architecture((2,)),
        ],
    )
    def test_structural_errors(self, build):
        with pytest.raises(StructuralError):
            build()

    def test_input_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            hand_net()(np.ones((3, 3)))


class TestTriangleWave:
    def test_sign_pattern_and_symmetry(self):
        t = np.linspace(0, 2, 20001)[1:-1]
        v = nnet.triangle_wave(t)
        assert np.all(v[t < 1] > 0) and np.all(v[t > 1] < 0)
        assert abs(v.max() + v.min()) <= 1e-9

    def test_periodic(self):
        t = np.linspace(-5, 5, 10001)
        assert np.max(np.abs(nnet.triangle_wave(t + nnet.PERIOD) - nnet.triangle_wave(t))) <= 1e-12


class TestMeasures:
    def test_zero_net(self):
        net = nnet.zeros((2, 3, 1))
        assert nnet.connectivity(net) == 0 and nnet.nn_norm(net) == 0.0 and nnet.weight_magnitude(net) == 0.0

    def test_dense_count(self, rng):
        net = random_net(rng, (2, 3, 1))
        assert nnet.connectivity(net) == 6 + 3 + 3 + 1

    def test_width_depth(self, rng):
        net = random_net(rng, (2, 5, 3, 1))
        assert nnet.width(net) == 5 and nnet.depth(net) == 2

    def test_weight_magnitude(self, rng):
        net = random_net(rng, (2, 3, 1), scale=0.5)
        A = net.layers[0][0].copy()
        A[1, 0] = 0.5
        net = Network(((A, net.layers[0][1]), net.layers[1]))
        assert nnet.weight_magnitude(net) == 0.5

    def test_nn_norm(self):
        net = Network(
            (
                (np.array([[1.0, -0.5]]), np.array([2.0])),
                (np.array([[3.0]]), np.array([-0.5])),
            )
        )
        assert nnet.nn_norm(net) == 5.0
        assert nnet.nn_norm(net.scaled(2.5)) == pytest.approx(12.5)


class TestArchOrder:
    def test_examples(self):
        s = Architecture((1, 3, 1))
        assert nnet.arch_leq(s, s)
        assert nnet.arch_leq(Architecture((1, 3, 1)), Architecture((1, 5, 1)))
        assert not nnet.arch_leq(Architecture((1, 2, 2, 1)), Architecture((1, 9, 1)))

    def test_partial_order_on_random_triples(self, rng):
        def draw():
            L = int(rng.integers(1, 4))
            return Architecture(tuple(int(v) for v in rng.integers(1, 3, size=L + 1)))

        for _ in range(500):
            a, b, c = draw(), draw(), draw()
            if nnet.arch_leq(a, b) and nnet.arch_leq(b, a):
                assert a == b
            if nnet.arch_leq(a, b) and nnet.arch_leq(b, c):
                assert nnet.arch_leq(a, c)


class TestSieve:
    def test_projection_identity_inside(self, rng):
        net = random_net(rng, (2, 3, 1), scale=0.5)
        sieve = SieveSpec(net.arch, conn_budget=13, weight_bound=1.0)
        assert nnet.in_sieve(net, sieve)
        out = nnet.project_to_sieve(net, sieve)
        assert all(np.array_equal(p, q) for p, q in zip(out.param_arrays(), net.param_arrays()))

    def test_clamp(self):
        net = Network(((np.array([[10.0]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0]))))
        out = nnet.project_to_sieve(net, SieveSpec(net.arch, 4, 1.0))
        assert out.layers[0][0][0, 0] == 1.0

    def test_sparsify_drops_smallest(self, rng):
        net = random_net(rng, (2, 3, 1))
        flat = np.concatenate([p.ravel() for p in net.param_arrays()])
        smallest = set(np.argsort(np.abs(flat))[:3])
        out = nnet.project_to_sieve(net, SieveSpec(net.arch, 10, 10.0))
        new = np.concatenate([p.ravel() for p in out.param_arrays()])
        assert nnet.connectivity(out) == 10
        assert set(np.flatnonzero(new == 0)) == smallest

    def test_tie_break_is_canonical(self):
        net = Network(((np.array([[1.0, 1.0]]), np.array([1.0])), (np.array([[1.0]]), np.array([1.0]))))
        out = nnet.project_to_sieve(net, SieveSpec(net.arch, 2, 5.0))
        assert [p.tolist() for p in out.param_arrays()] == [[[0.0, 0.0, 0.0]], [[1.0, 1.0]]]

    def test_boundary_violation(self):
        net = Network(((np.array([[1.0 + 1e-9]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0]))))
        assert not nnet.in_sieve(net, SieveSpec(net.arch, 4, 1.0))
        assert nnet.in_sieve(nnet.zeros(net.arch), SieveSpec(net.arch, 1, 1e-3))

    def test_arch_mismatch(self, rng):
        with pytest.raises(StructuralError):
            nnet.project_to_sieve(random_net(rng, (2, 3, 1)), SieveSpec(Architecture((2, 4, 1)), 5, 1.0))

    @pytest.mark.parametrize("kw", [dict(conn_budget=0, weight_bound=1.0), dict(conn_budget=3, weight_bound=0.0)])
    def test_invalid_sieve(self, kw):
        with pytest.raises(ValidationError):
            SieveSpec(Architecture((1, 1)), **kw)


class TestSerialisation:
    def test_bit_exact_roundtrip(self, rng, tmp_path):
        net = random_net(rng, (3, 4, 2, 1), scale=1e3)
        net = Network(net.layers, ("relu", "periodic"), (Skip(0, 3, rng.normal(size=(1, 3))),))
        nnet.save(net, tmp_path / "n.txt")
        back = nnet.load(tmp_path / "n.txt")
        assert back.activations == net.activations
        for p, q in zip(back.param_arrays(), net.param_arrays()):
            assert p.tobytes() == q.tobytes()

    def test_special_values(self):
        A = np.array([[5e-324, -0.0, 1.7976931348623157e308]])
        net = Network(((A, np.array([0.1])),))
        back = nnet.loads(nnet.dumps(net))
        assert back.layers[0][0].tobytes() == A.tobytes()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.01, 100.0))
def test_positive_homogeneity_without_biases(seed, lam):
    rng = np.random.default_rng(seed)
    net = random_net(rng, (2, 4, 3, 1), bias=False)
    x = rng.random((6, 2))
    assert np.allclose(net(lam * x), lam * net(x), rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), budget=st.integers(1, 30), bound=st.floats(0.05, 3.0))
def test_projection_lands_in_sieve(seed, budget, bound):
    rng = np.random.default_rng(seed)
    net = random_net(rng, (2, 4, 3, 1), scale=4.0)
    sieve = SieveSpec(net.arch, budget, bound)
    out = nnet.project_to_sieve(net, sieve)
    assert nnet.in_sieve(out, sieve)
    assert nnet.connectivity(out) <= budget and nnet.weight_magnitude(out) <= bound
