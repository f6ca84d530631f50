import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nnclass import kdrate
from nnclass.errors import DecodeError, InfeasibleBudgetError, ValidationError
from nnclass.kdrate import DyadicPiecewiseConstant, HaarDictionary, PiecewisePolynomial

IDENTITY = PiecewisePolynomial.polynomial([0.0, 1.0])


def element(dictionary, index):
    """The dictionary element itself as an exact piecewise-constant descriptor."""
    cells = dictionary.cells
    t = (np.arange(cells) + 0.5) / cells
    if dictionary.dim == 1:
        return DyadicPiecewiseConstant(dictionary.evaluate(index, t[:, None]))
    g = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
    return DyadicPiecewiseConstant(dictionary.evaluate(index, g).reshape(cells, cells))


def random_piecewise_constant(rng, dim, level):
    shape = (2**level,) * dim
    return DyadicPiecewiseConstant(rng.normal(size=shape))


class TestDictionary:
    @pytest.mark.parametrize("dim,level", [(1, 4), (2, 3)])
    def test_gram_matrix(self, dim, level):
        d = HaarDictionary(dim, level)
        cells = d.cells * 2
        t = (np.arange(cells) + 0.5) / cells
        pts = t[:, None] if dim == 1 else np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
        V = np.array([d.evaluate(i, pts) for i in range(1, d.size + 1)])
        G = V @ V.T / len(pts)
        assert np.max(np.abs(G - np.eye(d.size))) < 1e-10

    def test_enumeration_roundtrip(self):
        for dim, level in [(1, 6), (2, 4)]:
            d = HaarDictionary(dim, level)
            for i in range(1, d.size + 1):
                assert d.index_of(*d.describe(i)) == i

    def test_canonical_examples(self):
        d1 = HaarDictionary(1, 3)
        assert d1.describe(1) == (-1, 0) and d1.describe(2) == (0, 0) and d1.describe(8) == (2, 3)
        d2 = HaarDictionary(2, 2)
        assert d2.describe(2) == (0, (0, 0), 0) and d2.describe(5) == (1, (0, 0), 0)
        assert d2.kind == "haar-tensor-2d" and d2.size == 16

    def test_matches_independent_wavelets(self):
        d = HaarDictionary(1, 5)
        t = np.linspace(0, 1, 1001)
        for i in range(1, d.size + 1):
            assert np.array_equal(d.evaluate(i, t[:, None]), oracles.haar_element_1d(i, t))

    @pytest.mark.parametrize("dim,level", [(3, 1), (1, 15), (2, 8), (1, -1)])
    def test_limits(self, dim, level):
        with pytest.raises(ValidationError):
            HaarDictionary(dim, level)


class TestAnalyze:
    def test_element_maps_to_unit_vector(self):
        d = HaarDictionary(1, 4)
        c = kdrate.analyze(element(d, 3), d)
        assert np.max(np.abs(c - np.eye(d.size)[2])) < 1e-14

    def test_zero(self):
        d = HaarDictionary(2, 3)
        assert not np.any(kdrate.analyze(DyadicPiecewiseConstant(np.zeros((8, 8))), d))

    def test_identity_details_closed_form(self):
        d = HaarDictionary(1, 8)
        c = kdrate.analyze(IDENTITY, d)
        assert c[0] == pytest.approx(0.5, abs=1e-15)
        for j in range(8):
            for k in (0, 2**j - 1):
                got = c[d.index_of(j, k) - 1]
                assert got == pytest.approx(-(2.0 ** (-1.5 * j - 2)), rel=1e-12, abs=1e-18)

    def test_against_adaptive_quadrature(self):
        f = PiecewisePolynomial((0.0, 0.3, 1.0), ((1.0, -2.0, 3.0), (0.5, 0.0, 0.0, 1.0)))
        d = HaarDictionary(1, 5)
        c = kdrate.analyze(f, d)
        for i in (2, 3, 7, 20, 32):
            j, k = d.describe(i)
            assert c[i - 1] == pytest.approx(oracles.haar_coefficient_quad(lambda t: float(f(np.array([t]))[0]), j, k), abs=1e-12)

    def test_generic_callable_by_quadrature(self):
        d = HaarDictionary(1, 6)
        c = kdrate.analyze(lambda x: np.sin(3 * x[:, 0]), d)
        for i in (2, 9, 40):
            j, k = d.describe(i)
            assert c[i - 1] == pytest.approx(oracles.haar_coefficient_quad(lambda t: math.sin(3 * t), j, k), abs=1e-10)

    def test_parseval_and_inverse(self, rng):
        for dim, level in [(1, 7), (2, 4)]:
            f = random_piecewise_constant(rng, dim, level)
            d = HaarDictionary(dim, level)
            c = kdrate.analyze(f, d)
            assert np.sum(c**2) == pytest.approx(kdrate.norm_sq(f, d), abs=1e-8)
            assert np.allclose(kdrate.haar_inverse(c, dim), f.values, atol=1e-12)


class TestBestMTerm:
    def test_single_element(self):
        d = HaarDictionary(1, 4)
        assert kdrate.best_m_term(element(d, 1), d, 1).l2_error == pytest.approx(0.0, abs=1e-12)

    def test_pythagoras(self):
        d = HaarDictionary(1, 4)
        vals = 0.6 * element(d, 1).values + 0.3 * element(d, 2).values
        a = kdrate.best_m_term(DyadicPiecewiseConstant(vals), d, 1)
        assert a.indices == (1,) and a.l2_error == pytest.approx(0.3, abs=1e-12)

    def test_clamp_enters_error(self):
        d = HaarDictionary(1, 2)
        f = DyadicPiecewiseConstant(np.full(4, 5.0))
        a = kdrate.best_m_term(f, d, 1, pi_degree=2)
        assert a.coeffs == (1.0,) and a.l2_error == pytest.approx(4.0)

    def test_infeasible(self):
        d = HaarDictionary(1, 1)
        with pytest.raises(InfeasibleBudgetError):
            kdrate.best_m_term(IDENTITY, d, 3)
        with pytest.raises(ValidationError):
            kdrate.best_m_term(IDENTITY, d, 0)

    @pytest.mark.parametrize("M", [1, 2, 3, 4])
    def test_greedy_equals_brute_force_identity(self, M):
        d = HaarDictionary(1, 4)
        greedy = kdrate.best_m_term(IDENTITY, d, M).l2_error
        assert greedy == pytest.approx(oracles.brute_force_m_term_1d(lambda t: t, 4, M, 2), abs=1e-12)

    def test_nonincreasing_in_M(self):
        d = HaarDictionary(1, 8)
        errs = [e for _, e in kdrate.m_term_curve(IDENTITY, d, range(1, 33))]
        assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))

    def test_error_matches_direct_quadrature(self):
        d = HaarDictionary(1, 6)
        a = kdrate.best_m_term(IDENTITY, d, 5)
        g = a.expansion(d).cell_values()
        assert a.l2_error == pytest.approx(oracles.l2_error_on_cells(lambda t: t, g, d.cells), abs=1e-12)


class TestFitGamma:
    def test_exact_power_laws(self):
        Ms = range(1, 33)
        assert kdrate.fit_gamma([(M, M**-1.0) for M in Ms]).gamma_hat == pytest.approx(1.0, abs=1e-9)
        assert kdrate.fit_gamma([(M, 3 * M**-2.5) for M in Ms]).gamma_hat == pytest.approx(2.5, abs=1e-9)

    def test_identity_near_brute_force_slope(self):
        brute = [oracles.brute_force_m_term_1d(lambda t: t, 4, M, 2) for M in range(1, 5)]
        reference = -oracles.loglog_slope(range(1, 5), brute)
        fit = kdrate.fit_gamma(kdrate.m_term_curve(IDENTITY, HaarDictionary(1, 8), range(1, 33)))
        assert fit.gamma_hat == pytest.approx(reference, rel=0.2)

    @pytest.mark.parametrize("pts", [[(1, 1.0), (2, 0.5), (3, 0.3)], [(1, 1.0), (2, 0.0), (3, 0.3), (4, 0.2)]])
    def test_invalid(self, pts):
        with pytest.raises(ValidationError):
            kdrate.fit_gamma(pts)


class TestCodec:
    def test_single_coefficient(self):
        d = HaarDictionary(1, 4)
        f = element(d, 1)
        c, n2 = kdrate.analyze(f, d), kdrate.norm_sq(f, d)
        bits = kdrate.encode(f, d, 1, 32)
        assert len(bits) == kdrate.code_length(1, 32, 2, d)
        assert kdrate.roundtrip_error(c, n2, kdrate.decode(bits, d)) <= 1e-6

    def test_zero_function(self):
        d = HaarDictionary(1, 3)
        bits = kdrate.encode(None, d, 0, 8)
        assert len(bits) == kdrate.HEADER_BITS
        dec = kdrate.decode(bits, d)
        assert dec.indices == () and not np.any(dec.cell_values())

    def test_layout_is_msb_first(self):
        d = HaarDictionary(1, 2)
        f = DyadicPiecewiseConstant(np.array([1.0, 1.0, 1.0, 1.0]) * 0.5)
        bits = kdrate.encode(f, d, 1, 4, pi_degree=1)
        assert bits[:32] == "0" * 31 + "1" and bits[32:38] == "000100" and bits[38:42] == "0001"
        # pi(1) = 1: one bitmap slot, then coefficient 0.5 on [-1, 1] with 16 cells -> cell 12
        assert bits[42:] == "1" + "1100"

    def test_roundtrip_within_bound_random(self, rng):
        for _ in range(100):
            dim = int(rng.integers(1, 3))
            level = int(rng.integers(1, 5 if dim == 1 else 4))
            d = HaarDictionary(dim, level)
            f = random_piecewise_constant(rng, dim, level)
            M = int(rng.integers(1, d.size + 1))
            q = int(rng.integers(4, 17))
            c, n2 = kdrate.analyze(f, d), kdrate.norm_sq(f, d)
            approx = kdrate.best_m_term(f, d, M, 2, c, n2)
            dec = kdrate.decode(kdrate.encode(f, d, M, q, 2, approx), d)
            err = kdrate.roundtrip_error(c, n2, dec)
            direct = math.sqrt(np.mean((dec.cell_values() - f.values) ** 2))
            assert err == pytest.approx(direct, abs=1e-9)
            assert err <= approx.l2_error + kdrate.quantisation_bound(M, q, 2) + 1e-12

    @pytest.mark.parametrize(
        "mutate,offset",
        [
            (lambda b: b[:20], 20),
            (lambda b: b[:-1], None),
            (lambda b: b + "0", None),
            (lambda b: b[:5] + "2" + b[6:], 5),
            (lambda b: b[:32] + "000001" + b[38:], 32),
        ],
    )
    def test_malformed(self, mutate, offset):
        d = HaarDictionary(1, 4)
        bits = kdrate.encode(IDENTITY, d, 3, 8)
        with pytest.raises(DecodeError) as info:
            kdrate.decode(mutate(bits), d)
        if offset is not None:
            assert info.value.offset == offset

    def test_q_range(self):
        with pytest.raises(ValidationError):
            kdrate.encode(IDENTITY, HaarDictionary(1, 3), 2, 3)

    def test_min_code_length_meets_target(self):
        d = HaarDictionary(1, 10)
        for eps in (0.1, 0.03, 0.01):
            rec = kdrate.min_code_length(IDENTITY, d, eps)
            assert rec.error <= eps and rec.bits == kdrate.code_length(rec.M, rec.q, 1, d)

    def test_code_growth_exponent(self):
        d = HaarDictionary(1, 12)
        eps = [2.0**-k for k in range(3, 9)]
        bits = [kdrate.min_code_length(IDENTITY, d, e).bits for e in eps]
        gamma_code = 1.0 / oracles.loglog_slope([1 / e for e in eps], bits)
        gamma_fit = kdrate.fit_gamma(kdrate.m_term_curve(IDENTITY, HaarDictionary(1, 8), range(1, 33))).gamma_hat
        assert gamma_code == pytest.approx(gamma_fit, rel=0.25)


class TestNetworkApproximation:
    def test_zero(self):
        assert kdrate.nn_mweight_error(lambda x: np.zeros(len(x)), 6) <= 1e-6

    def test_identity(self):
        assert kdrate.nn_mweight_error(lambda x: x[:, 0], 6) <= 1e-3

    def test_single_relu_target(self):
        assert kdrate.nn_mweight_error(lambda x: 2.0 * np.maximum(x[:, 0] - 0.4, 0.0), 7) <= 1e-3

    def test_budget_floor(self):
        with pytest.raises(ValidationError):
            kdrate.nn_mweight_error(lambda x: x[:, 0], 2)

    @pytest.mark.slow
    def test_transference_direction(self):
        f = lambda x: np.sin(2 * np.pi * x[:, 0])
        Ms = [7, 13, 19, 25, 31]
        nn = [(M, kdrate.nn_mweight_error(f, M)) for M in Ms]
        haar = kdrate.m_term_curve(f, HaarDictionary(1, 8), Ms)
        assert kdrate.fit_gamma(nn).gamma_hat >= kdrate.fit_gamma(haar).gamma_hat - 0.3


@settings(max_examples=25, deadline=None)
@given(values=st.lists(st.floats(-10, 10), min_size=16, max_size=16), M=st.integers(1, 16), q=st.integers(4, 20))
def test_codec_bound_property(values, M, q):
    d = HaarDictionary(1, 4)
    f = DyadicPiecewiseConstant(np.array(values))
    c, n2 = kdrate.analyze(f, d), kdrate.norm_sq(f, d)
    approx = kdrate.best_m_term(f, d, M, 2, c, n2)
    err = kdrate.roundtrip_error(c, n2, kdrate.decode(kdrate.encode(f, d, M, q, 2, approx), d))
    assert err <= approx.l2_error + kdrate.quantisation_bound(M, q, 2) + 1e-9
