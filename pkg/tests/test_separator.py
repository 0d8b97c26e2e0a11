import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import halfspace_projection, phi_brute
from projsplit import linmap
from projsplit.product import GammaGeometry, ProductPoint, inner_gamma
from projsplit.separator import (
    GraphPair,
    SeparatorError,
    build_sample,
    descent_constant,
    error_bound_sq,
    error_criterion_holds,
    gradient,
    lower_bound_certificate,
    phi_eval,
    theta,
)


def scalar_pairs(x1, y1, x2, y2):
    return (
        GraphPair(np.array([x1]), np.array([y1]), np.zeros(1), 1.0),
        GraphPair(np.array([x2]), np.array([y2]), np.zeros(1), 1.0),
    )


def random_setup(rng, dims=(3, 2, 4), gamma=1.7):
    """Random pairs for n = len(dims) blocks with matrix maps G_1..G_{n-1}."""
    d0 = dims[0]
    mats = [rng.normal(size=(di, d0)) for di in dims[1:]]
    maps = [linmap.from_matrix(M) for M in mats] + [linmap.identity(d0)]
    out_dims = list(dims[1:]) + [d0]
    pairs = tuple(
        GraphPair(rng.normal(size=di), rng.normal(size=di), np.zeros(di), 1.0) for di in out_dims
    )
    geom = GammaGeometry(gamma, dims)
    return mats, maps, pairs, geom


def random_point(rng, dims):
    return ProductPoint(rng.normal(size=dims[0]), [rng.normal(size=d) for d in dims[1:]])


class TestPhiEval:
    def test_vanishes_when_primal_matches(self, rng):
        mats, maps, pairs, geom = random_setup(rng)
        z = rng.normal(size=3)
        pairs = tuple(
            GraphPair(G(z), pr.y, pr.e, pr.rho) for G, pr in zip(maps, pairs)
        )
        p = ProductPoint(z, [rng.normal(size=d) for d in geom.dims[1:]])
        assert phi_eval(pairs, p, maps) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_hand_value(self):
        pairs = scalar_pairs(0.0, 1.0, 0.0, 1.0)
        maps = [linmap.identity(1)] * 2
        assert phi_eval(pairs, ProductPoint([1.0], [[0.0]]), maps) == 2.0

    def test_matches_brute_force(self, rng):
        mats, maps, pairs, geom = random_setup(rng)
        p = random_point(rng, geom.dims)
        ref = phi_brute([pr.x for pr in pairs], [pr.y for pr in pairs], p.z, list(p.w), mats)
        assert phi_eval(pairs, p, maps) == pytest.approx(ref, rel=1e-12)

    @given(st.integers(0, 2**31), st.floats(-3.0, 3.0))
    def test_affine(self, seed, t):
        rng = np.random.default_rng(seed)
        _, maps, pairs, geom = random_setup(rng)
        p, q = random_point(rng, geom.dims), random_point(rng, geom.dims)
        lhs = phi_eval(pairs, t * p + (1 - t) * q, maps)
        rhs = t * phi_eval(pairs, p, maps) + (1 - t) * phi_eval(pairs, q, maps)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_block_count_mismatch(self, rng):
        _, maps, pairs, _ = random_setup(rng)
        with pytest.raises(ValueError):
            phi_eval(pairs, ProductPoint(np.zeros(3)), maps)


class TestGradient:
    def test_zero_case(self, rng):
        xn = rng.normal(size=2)
        pairs = (
            GraphPair(xn.copy(), np.zeros(2), np.zeros(2), 1.0),
            GraphPair(xn.copy(), np.zeros(2), np.zeros(2), 1.0),
        )
        gz, gw, nsq = gradient(pairs, GammaGeometry(1.0, (2, 2)), [linmap.identity(2)] * 2)
        assert nsq == 0.0
        assert not gz.any() and not gw[0].any()

    def test_scalar_cancellation(self):
        pairs = scalar_pairs(0.3, 1.0, 0.3, -1.0)
        gz, gw, nsq = gradient(pairs, GammaGeometry(1.0, (1, 1)), [linmap.identity(1)] * 2)
        assert gz[0] == 0.0 and gw[0][0] == 0.0 and nsq == 0.0

    def test_norm_recomputed(self, rng):
        mats, maps, pairs, geom = random_setup(rng)
        gz, gw, nsq = gradient(pairs, geom, maps)
        u = sum(M.T @ pr.y for M, pr in zip(mats, pairs[:-1])) + pairs[-1].y
        ref = u @ u / geom.gamma + sum(
            np.sum((pr.x - M @ pairs[-1].x) ** 2) for M, pr in zip(mats, pairs[:-1])
        )
        assert nsq == pytest.approx(ref, rel=1e-12)

    @given(st.integers(0, 2**31))
    def test_directional_consistency(self, seed):
        rng = np.random.default_rng(seed)
        _, maps, pairs, geom = random_setup(rng)
        gz, gw, _ = gradient(pairs, geom, maps)
        grad = ProductPoint(gz, gw)
        p, q = random_point(rng, geom.dims), random_point(rng, geom.dims)
        lhs = inner_gamma(grad, p - q, geom)
        rhs = phi_eval(pairs, p, maps) - phi_eval(pairs, q, maps)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_needs_two_blocks(self):
        with pytest.raises(ValueError):
            gradient(scalar_pairs(0, 0, 0, 0)[:1], GammaGeometry(1.0, (1,)), [linmap.identity(1)])


class TestTheta:
    def _sample(self, pairs, p_hat, gamma=1.0):
        maps = [linmap.identity(1)] * 2
        return build_sample(pairs, p_hat, GammaGeometry(gamma, (1, 1)), maps), maps

    def test_formula(self):
        s, _ = self._sample(scalar_pairs(0.0, 1.0, 0.0, 1.0), ProductPoint([1.0], [[0.0]]))
        assert s.phi_at_hat == 2.0 and s.grad_norm_sq_gamma == 4.0
        assert theta(s) == 0.5

    def test_matches_brute_projection(self):
        p_hat = ProductPoint([1.0], [[0.0]])
        s, maps = self._sample(scalar_pairs(0.0, 1.0, 0.0, 1.0), p_hat)
        # phi(p) = <a, p> + c in R^2 with gamma = 1
        a = np.concatenate([s.grad_z, s.grad_w[0]])
        c = s.phi_at_hat - a @ np.array([1.0, 0.0])
        proj = halfspace_projection(np.array([1.0, 0.0]), a, -c)
        disp = np.array([1.0, 0.0]) - proj
        np.testing.assert_allclose(disp, theta(s) * a, atol=1e-15)
        p_t = ProductPoint(proj[:1], [proj[1:]])
        assert phi_eval(s, p_t, maps) == pytest.approx(0.0, abs=1e-15)

    def test_nonpositive_phi_gives_zero(self, rng):
        # pairs with phi < 0 at p_hat but flagged non-strict, so no error is raised
        pairs = tuple(
            GraphPair(np.array([1.0]), np.array([1.0]), np.zeros(1), 1.0, strict=False)
            for _ in range(2)
        )
        s, _ = self._sample(pairs, ProductPoint([0.0], [[2.0]]))
        assert s.phi_at_hat < 0
        assert theta(s) == 0.0

    def test_zero_gradient_raises(self):
        s, _ = self._sample(scalar_pairs(0.5, 1.0, 0.5, -1.0), ProductPoint([0.5], [[1.0]]))
        with pytest.raises(SeparatorError):
            theta(s)


class TestBuildSample:
    def test_negative_phi_with_valid_pairs_raises(self):
        pairs = scalar_pairs(1.0, 1.0, 1.0, 1.0)
        with pytest.raises(SeparatorError, match="separator value"):
            build_sample(pairs, ProductPoint([0.0], [[2.0]]), GammaGeometry(1.0, (1, 1)), [linmap.identity(1)] * 2)

    def test_tiny_negative_clamped(self):
        # phi = <z - x1, y1 - w> + <z - x2, y2 + w> = -(one ulp of 1.0)
        pairs = scalar_pairs(1.0, 0.0, np.nextafter(1.0, 2.0), 0.0)
        p_hat = ProductPoint([1.0], [[1.0]])
        maps = [linmap.identity(1)] * 2
        assert phi_eval(pairs, p_hat, maps) < 0
        s = build_sample(pairs, p_hat, GammaGeometry(1.0, (1, 1)), maps)
        assert s.phi_at_hat == 0.0


class TestErrorCriterion:
    def test_bound_formula(self):
        pr = GraphPair(np.array([1.0]), np.array([2.0]), np.array([0.1]), 2.0)
        # sigma^2 (|0 - 1|^2 + |2 (0.5 - 2)|^2) = 0.25 * (1 + 9)
        assert error_bound_sq(pr, np.array([0.0]), np.array([0.5]), 0.5) == pytest.approx(2.5)
        assert error_criterion_holds(pr, np.array([0.0]), np.array([0.5]), 0.5)

    def test_sigma_zero_requires_exact(self):
        pr = GraphPair(np.array([1.0]), np.array([2.0]), np.array([1e-30]), 1.0)
        assert not error_criterion_holds(pr, np.array([0.0]), np.array([0.0]), 0.0)


class TestCertificate:
    def test_exact_solution_gives_zero(self):
        # z = x_i and w_i = y_i everywhere: phi and certificate both vanish
        pairs = scalar_pairs(0.9, -0.1, 0.9, 0.1)
        p_hat = ProductPoint([0.9], [[-0.1]])
        maps = [linmap.identity(1)] * 2
        s = build_sample(pairs, p_hat, GammaGeometry(1.0, (1, 1)), maps)
        cert = lower_bound_certificate(s, 0.0, 1.0, 1.0, p_hat.z, p_hat.w, maps)
        assert cert == 0.0 and s.phi_at_hat == 0.0

    def test_multiplier(self):
        pairs = scalar_pairs(0.0, 0.0, 0.0, 0.0)
        maps = [linmap.identity(1)] * 2
        s = build_sample(pairs, ProductPoint([1.0], [[0.0]]), GammaGeometry(1.0, (1, 1)), maps)
        # sum of squared gaps = 1 + 0 + 1 + 0 = 2
        cert = lower_bound_certificate(s, 0.99, 0.5, 4.0, np.array([1.0]), [np.array([0.0])], maps)
        assert cert == pytest.approx((1 - 0.9801) / 2 * min(1 / 4.0, 0.5) * 2, rel=1e-14)

    def test_descent_constant_positive(self):
        c = descent_constant(3, 2.0, 0.99, 0.5, 2.0, 1.0)
        assert c > 0
        assert descent_constant(3, 2.0, 0.0, 0.5, 2.0, 1.0) > c
