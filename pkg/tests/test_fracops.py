import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fracdivcurl import fracops as fo
from fracdivcurl.domain import Ball, build_domain

F_SPIKE = np.array([1.0, 0.0, 0.0])


def random_offdiag(rng, M, c=None):
    shape = (M, M) if c is None else (M, M, c)
    F = rng.standard_normal(shape)
    idx = np.arange(M)
    F[idx, idx] = 0.0
    return F


class TestSGradient:
    def test_constant_vanishes(self, torus16):
        assert np.all(fo.s_gradient(torus16, np.full(16, 3.0), 0.5) == 0)

    def test_two_point_hand_value(self):
        dom = oracles.two_point_domain(0.5)
        G = fo.s_gradient(dom, np.array([0.0, 1.0]), 0.5)
        assert G[0, 1] == pytest.approx(-np.sqrt(2), rel=1e-15)
        assert G[1, 0] == pytest.approx(np.sqrt(2), rel=1e-15)
        assert G[0, 0] == G[1, 1] == 0

    def test_antisymmetric(self, torus16, rng):
        G = fo.s_gradient(torus16, rng.standard_normal(16), 0.3)
        assert np.allclose(G, -G.T, atol=0, rtol=0)

    def test_vector_components(self, torus16, rng):
        u = rng.standard_normal((16, 3))
        G = fo.s_gradient(torus16, u, 0.4)
        assert G.shape == (16, 16, 3)
        assert np.allclose(G, oracles.s_gradient(torus16, u, 0.4), rtol=1e-14, atol=0)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_s(self, torus16, s):
        with pytest.raises(ValueError):
            fo.s_gradient(torus16, np.zeros(16), s)

    def test_rejects_wrong_length(self, torus16):
        with pytest.raises(ValueError):
            fo.s_gradient(torus16, np.zeros(15), 0.5)


class TestPairing:
    def test_zero(self, torus16, rng):
        F = random_offdiag(rng, 16)
        assert np.all(fo.pairing(torus16, F, np.zeros_like(F)) == 0)

    def test_nonnegative_square(self, torus16, rng):
        F = random_offdiag(rng, 16, 2)
        assert np.all(fo.pairing(torus16, F, F) >= 0)

    def test_three_point_hand_sum(self, torus3):
        # every pair: d = mu = 1/3, so <F,F>_i = 3 * sum_j (f_i - f_j)^2
        G = fo.s_gradient(torus3, F_SPIKE, 0.5)
        assert fo.pairing(torus3, G, G) == pytest.approx([6.0, 3.0, 3.0], rel=1e-14)
        assert fo.pairing(torus3, G, G) == pytest.approx(oracles.pairing(torus3, G, G), rel=1e-14)

    def test_mismatch(self, torus16, rng):
        with pytest.raises(ValueError):
            fo.pairing(torus16, random_offdiag(rng, 16), random_offdiag(rng, 16, 2))
        with pytest.raises(ValueError):
            fo.pairing(torus16, random_offdiag(rng, 16), random_offdiag(rng, 15))


class TestNorms:
    def test_local_norm_zero(self, torus16):
        assert np.all(fo.local_p_norm(torus16, np.zeros((16, 16)), 3) == 0)

    def test_local_norm_p2_matches_pairing(self, torus16, rng):
        F = random_offdiag(rng, 16)
        assert np.allclose(fo.local_p_norm(torus16, F, 2) ** 2, fo.pairing(torus16, F, F), rtol=1e-12, atol=0)

    @pytest.mark.parametrize("p", [1, 1.5, 2, 4])
    def test_local_norm_homogeneous(self, torus16, rng, p):
        F = random_offdiag(rng, 16)
        assert np.allclose(fo.local_p_norm(torus16, -2.5 * F, p), 2.5 * fo.local_p_norm(torus16, F, p), rtol=1e-12)

    def test_p_below_one(self, torus16):
        with pytest.raises(ValueError):
            fo.local_p_norm(torus16, np.zeros((16, 16)), 0.5)
        with pytest.raises(ValueError):
            fo.offdiag_lp_norm(torus16, np.zeros((16, 16)), 0.5)

    def test_global_norm_zero(self, torus16):
        assert fo.offdiag_lp_norm(torus16, np.zeros((16, 16)), 2) == 0

    def test_restriction_to_everything(self, torus16, rng):
        F = random_offdiag(rng, 16)
        full = fo.offdiag_lp_norm(torus16, F, 3)
        assert fo.offdiag_lp_norm(torus16, F, 3, Ball(4, 10.0)) == pytest.approx(full, rel=1e-12)

    def test_restriction_counts_union_of_products(self, torus16, rng):
        F = random_offdiag(rng, 16)
        ball = Ball(2, 0.2)
        inside = set(np.flatnonzero(torus16.distances[2] < 0.2))
        total = 0.0
        for i, j in oracles.offdiag_pairs(16):
            if i in inside or j in inside:
                total += F[i, j] ** 2 * torus16.weights[i] * torus16.weights[j] / torus16.distances[i, j]
        assert fo.offdiag_lp_norm(torus16, F, 2, ball) == pytest.approx(np.sqrt(total), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 15), st.floats(0.05, 0.6), st.floats(1, 5))
    def test_restriction_monotone(self, seed, center, radius, p):
        dom = build_domain(1, "periodic", 16)
        F = random_offdiag(np.random.default_rng(seed), 16)
        assert fo.offdiag_lp_norm(dom, F, p, Ball(center, radius)) <= fo.offdiag_lp_norm(dom, F, p) * (1 + 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1, 6))
    def test_triangle_and_homogeneity(self, seed, p):
        dom = build_domain(1, "periodic", 12)
        rng = np.random.default_rng(seed)
        F, G = random_offdiag(rng, 12), random_offdiag(rng, 12)
        nF, nG = fo.offdiag_lp_norm(dom, F, p), fo.offdiag_lp_norm(dom, G, p)
        assert fo.offdiag_lp_norm(dom, F + G, p) <= (nF + nG) * (1 + 1e-12)
        assert fo.offdiag_lp_norm(dom, -3 * F, p) == pytest.approx(3 * nF, rel=1e-12)
        lF, lG = fo.local_p_norm(dom, F, p), fo.local_p_norm(dom, G, p)
        assert np.all(fo.local_p_norm(dom, F + G, p) <= (lF + lG) * (1 + 1e-12))


class TestGagliardo:
    def test_constant(self, torus16):
        assert fo.gagliardo_seminorm(torus16, np.ones(16), 0.5, 2) == 0

    def test_shift_invariant(self, torus16, rng):
        f = rng.standard_normal(16)
        assert fo.gagliardo_seminorm(torus16, f + 7, 0.3, 3) == pytest.approx(fo.gagliardo_seminorm(torus16, f, 0.3, 3), rel=1e-12)

    def test_three_point_hand_value(self, torus3):
        # sum_i mu_i <d f, d f>_i = (6 + 3 + 3) / 3 = 4
        assert fo.gagliardo_seminorm(torus3, F_SPIKE, 0.5, 2) == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize("s,p", [(0.25, 1.5), (0.5, 2), (0.75, 3)])
    def test_brute_force(self, torus16, rng, s, p):
        f = rng.standard_normal(16)
        assert fo.gagliardo_seminorm(torus16, f, s, p) == pytest.approx(oracles.gagliardo(torus16, f, s, p), rel=1e-12)


class TestDivergence:
    def test_symmetric_field_is_divergence_free(self, torus16, rng):
        F = random_offdiag(rng, 16)
        assert np.max(np.abs(fo.s_divergence(torus16, F + F.T, 0.5))) < 1e-12

    @pytest.mark.parametrize("dom", [build_domain(1, "periodic", 16), build_domain(2, "box", 4)])
    def test_adjointness(self, dom, rng):
        for _ in range(20):
            F = random_offdiag(rng, dom.size)
            phi = rng.standard_normal(dom.size)
            lhs = np.sum(fo.s_divergence(dom, F, 0.4) * phi * dom.weights)
            rhs = oracles.pair_integral(dom, F, oracles.s_gradient(dom, phi, 0.4))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_composition(self, torus16, rng):
        f = rng.standard_normal(16)
        lap = fo.fractional_laplacian(torus16, f, 0.6)
        div = fo.s_divergence(torus16, fo.s_gradient(torus16, f, 0.6), 0.6)
        assert np.allclose(div, 2 * lap, rtol=1e-12, atol=1e-12 * np.abs(lap).max())

    def test_multicomponent(self, torus16, rng):
        F = random_offdiag(rng, 16, 3)
        out = fo.s_divergence(torus16, F, 0.5)
        for c in range(3):
            assert np.allclose(out[:, c], fo.s_divergence(torus16, F[..., c], 0.5))


class TestFractionalLaplacian:
    def test_constant(self, torus16):
        assert np.all(fo.fractional_laplacian(torus16, np.full(16, 2.0), 0.5) == 0)

    def test_zero_weighted_mean(self, rng):
        for dom in (build_domain(1, "periodic", 16), build_domain(2, "periodic", 5)):
            lap = fo.fractional_laplacian(dom, rng.standard_normal(dom.size), 0.3)
            assert abs(np.sum(lap * dom.weights)) < 1e-12 * np.sum(np.abs(lap) * dom.weights)

    def test_three_point_hand_value(self, torus3):
        # 3 * sum_j (f_k - f_j)
        assert fo.fractional_laplacian(torus3, F_SPIKE, 0.5) == pytest.approx([6.0, -3.0, -3.0], rel=1e-14)

    def test_brute_force_and_matrix(self, torus16, rng):
        f = rng.standard_normal(16)
        ref = oracles.fractional_laplacian(torus16, f, 0.7)
        assert np.allclose(fo.fractional_laplacian(torus16, f, 0.7), ref, rtol=1e-12)
        assert np.allclose(fo.laplacian_matrix(torus16, 0.7) @ f, ref, rtol=1e-12)

    def test_energy_identity(self, torus16, rng):
        f, g = rng.standard_normal((2, 16))
        s = 0.5
        lhs = np.sum(fo.pairing(torus16, fo.s_gradient(torus16, f, s), fo.s_gradient(torus16, g, s)) * torus16.weights)
        rhs = 2 * np.sum(fo.fractional_laplacian(torus16, f, s) * g * torus16.weights)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestXspq:
    def test_constant(self, torus16):
        assert fo.xspq_seminorm(torus16, np.ones(16), 0.5, 2, 3) == 0

    def test_q_equals_p(self, torus16, rng):
        f = rng.standard_normal(16)
        assert fo.xspq_seminorm(torus16, f, 0.4, 3, 3) == pytest.approx(fo.gagliardo_seminorm(torus16, f, 0.4, 3), rel=1e-12)

    def test_three_point_hand_value(self, torus3):
        # inner sums 2 * 3^1.5 and 3^1.5; result sqrt(2 + 2^(2/3))
        expected = np.sqrt(2 + 2 ** (2 / 3))
        assert fo.xspq_seminorm(torus3, F_SPIKE, 0.5, 2, 3) == pytest.approx(expected, rel=1e-14)
        assert fo.xspq_seminorm(torus3, F_SPIKE, 0.5, 2, 3) == pytest.approx(oracles.xspq(torus3, F_SPIKE, 0.5, 2, 3), rel=1e-14)

    @pytest.mark.parametrize("p,q", [(1, 2), (2, 1), (np.inf, 2)])
    def test_rejects_exponents(self, torus16, p, q):
        with pytest.raises(ValueError):
            fo.xspq_seminorm(torus16, np.zeros(16), 0.5, p, q)
