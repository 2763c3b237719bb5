import itertools
from math import comb, factorial

import numpy as np
import pytest

from conftest import random_hermitian, random_matrix, random_trigpoly, random_unitary, rel
from unitary_moi import (
    ClosureFunction,
    Composition,
    ExponentialPath,
    GeneralPath,
    TrigPoly,
    enumerate_compositions,
    expm_hermitian,
    finite_difference_oracle,
    frechet_derivative,
    frechet_residual_check,
    func_calculus,
    gateaux_derivative,
    gateaux_exponential,
    moi_continuity_check,
    product_rule_check,
    schatten_norm,
    two_sided_path,
)
from unitary_moi.calculus import richardson_derivative
from unitary_moi.harness import unit_derivative_scale

Z = TrigPoly.monomial(1)
SIGMA_Z = np.diag([1.0, -1.0])


def brute_compositions(k):
    out = set()
    for m in range(1, k + 1):
        for parts in itertools.product(range(1, k + 1), repeat=m):
            if sum(parts) == k:
                out.add(parts)
    return out


def surjections(k, m):
    return sum((-1) ** j * comb(m, j) * (m - j) ** k for j in range(m + 1))


class TestCompositions:
    def test_one(self):
        assert [(c.parts, c.weight) for c in enumerate_compositions(1)] == [((1,), 1)]

    def test_two(self):
        assert {c.parts: c.weight for c in enumerate_compositions(2)} == {(2,): 1, (1, 1): 2}

    def test_three(self):
        got = {c.parts: c.weight for c in enumerate_compositions(3)}
        assert got == {(3,): 1, (1, 2): 3, (2, 1): 3, (1, 1, 1): 6}

    @pytest.mark.parametrize("k", range(1, 9))
    def test_complete_and_duplicate_free(self, k):
        comps = enumerate_compositions(k)
        parts = [c.parts for c in comps]
        assert len(parts) == 2 ** (k - 1) == len(set(parts))
        assert set(parts) == brute_compositions(k)
        assert all(c.k == k for c in comps)

    @pytest.mark.parametrize("k", range(1, 7))
    def test_weights_count_surjections(self, k):
        comps = enumerate_compositions(k)
        for m in range(1, k + 1):
            assert sum(c.weight for c in comps if len(c) == m) == surjections(k, m)

    @pytest.mark.parametrize("k", [0, 9])
    def test_range(self, k):
        with pytest.raises(ValueError):
            enumerate_compositions(k)

    def test_invalid_parts(self):
        with pytest.raises(ValueError):
            Composition((2, 0))


class TestFrechet:
    def test_identity_function(self, rng):
        u, x = random_unitary(rng, 3), random_matrix(rng, 3)
        assert rel(frechet_derivative(Z, u, [x]), x) <= 1e-12

    def test_square_first(self, rng):
        u, x = random_unitary(rng, 3), random_matrix(rng, 3)
        assert rel(frechet_derivative(TrigPoly.monomial(2), u, [x]), u.matrix @ x + x @ u.matrix) <= 1e-12

    def test_square_second(self, rng):
        u = random_unitary(rng, 3)
        x1, x2 = random_matrix(rng, 3), random_matrix(rng, 3)
        assert rel(frechet_derivative(TrigPoly.monomial(2), u, [x1, x2]), x1 @ x2 + x2 @ x1) <= 1e-12

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_symmetric(self, rng, k):
        f, u = random_trigpoly(rng, 6), random_unitary(rng, 3)
        xs = [random_matrix(rng, 3) for _ in range(k)]
        ref = frechet_derivative(f, u, xs)
        for perm in itertools.permutations(xs):
            assert np.linalg.norm(frechet_derivative(f, u, list(perm)) - ref) <= 1e-12 * np.linalg.norm(ref)

    def test_order_zero(self, rng):
        f, u = random_trigpoly(rng, 3), random_unitary(rng, 3)
        np.testing.assert_allclose(frechet_derivative(f, u, []), func_calculus(f, u))

    def test_caps(self, rng):
        u = random_unitary(rng, 2)
        with pytest.raises(ValueError, match="cap"):
            frechet_derivative(TrigPoly.monomial(6), u, [np.eye(2)] * 5)
        with pytest.raises(ValueError, match="cap"):
            frechet_derivative(Z, random_unitary(rng, 9), [np.eye(9)])
        frechet_derivative(Z, random_unitary(rng, 9), [np.eye(9)], allow_large=True)

    def test_residual_linear_exact(self, rng):
        rep = frechet_residual_check(Z, random_unitary(rng, 3), random_hermitian(rng, 3), [])
        assert rep.passed and np.isnan(rep.details["slope"])

    def test_residual_cube_slope_two(self, rng):
        rep = frechet_residual_check(TrigPoly.monomial(3), random_unitary(rng, 3),
                                     random_hermitian(rng, 3, op_norm=1.0), [])
        assert rep.details["slope"] == pytest.approx(2.0, abs=0.2)

    def test_residual_inverse_square_second_order(self, rng):
        rep = frechet_residual_check(TrigPoly.monomial(-2), random_unitary(rng, 3),
                                     random_hermitian(rng, 3, op_norm=1.0), [random_matrix(rng, 3)])
        assert rep.passed and rep.details["slope"] >= 1.8


class TestPaths:
    def test_exponential_derivatives(self, rng):
        a, u0 = random_hermitian(rng, 3), random_unitary(rng, 3)
        path = ExponentialPath(a, u0.matrix)
        t = 0.37
        for l in range(1, 5):
            expected = np.linalg.matrix_power(1j * a, l) @ path.matrix(t)
            assert rel(path.derivative(t, l), expected) <= 1e-10
        assert np.linalg.norm(path.tilde(0.0)) == 0
        assert np.linalg.norm(path.derivative(t, 0) - path.tilde(t)) == 0

    def test_exponential_rejects_non_hermitian(self, rng):
        with pytest.raises(ValueError):
            ExponentialPath(random_matrix(rng, 2), np.eye(2))

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_two_sided_derivatives_match_finite_differences(self, rng, l):
        a, b, u0 = random_hermitian(rng, 3, 1.0), random_hermitian(rng, 3, 0.5), random_unitary(rng, 3)
        path = two_sided_path(a, u0.matrix, b)
        fd = richardson_derivative(path.matrix, 0.2, l, 1e-2)
        assert rel(fd, path.derivative(0.2, l)) <= 1e-7

    def test_path_unitary(self, rng):
        path = two_sided_path(random_hermitian(rng, 3), random_unitary(rng, 3).matrix, random_hermitian(rng, 3))
        for t in (-1.0, 0.0, 0.5, 2.0):
            m = path.matrix(t)
            assert np.linalg.norm(m.conj().T @ m - np.eye(3), 2) <= 1e-10

    def test_general_path_order_limit(self, rng):
        u = random_unitary(rng, 2).matrix
        path = GeneralPath(lambda t: u, [lambda t: 0 * u])
        assert path.n_max == 1
        with pytest.raises(ValueError, match="differentiable"):
            path.derivative(0.0, 2)
        with pytest.raises(ValueError, match="differentiable"):
            gateaux_derivative(path, Z, 0.0, 2)


class TestGateaux:
    def test_linear_any_path(self, rng):
        path = two_sided_path(random_hermitian(rng, 3), random_unitary(rng, 3).matrix, random_hermitian(rng, 3))
        assert rel(gateaux_derivative(path, Z, 0.4, 1), path.derivative(0.4, 1)) <= 1e-12

    def test_square_closed_form(self):
        path = ExponentialPath(SIGMA_Z, np.eye(2))
        np.testing.assert_allclose(gateaux_derivative(path, TrigPoly.monomial(2), 0.0, 1), 2j * SIGMA_Z,
                                   atol=1e-14)

    def test_linear_second_derivative(self, rng):
        a, u0 = random_hermitian(rng, 3), random_unitary(rng, 3)
        path = ExponentialPath(a, u0.matrix)
        assert rel(gateaux_derivative(path, Z, 0.3, 2), (1j * a) @ (1j * a) @ path.matrix(0.3)) <= 1e-12

    def test_smoothness(self, rng):
        f = ClosureFunction(lambda z: z, [lambda z: 1 + 0 * z])
        path = ExponentialPath(random_hermitian(rng, 2), np.eye(2))
        with pytest.raises(ValueError, match="C\\^1"):
            gateaux_derivative(path, f, 0.0, 2)
        with pytest.raises(ValueError, match="C\\^1"):
            gateaux_exponential(f, np.eye(2), random_hermitian(rng, 2), 0.0, 2)

    def test_exponential_linear(self, rng):
        a, u = random_hermitian(rng, 3), random_unitary(rng, 3)
        t = 0.8
        expected = 1j * a @ expm_hermitian(a, t) @ u.matrix
        assert rel(gateaux_exponential(Z, u, a, t, 1), expected) <= 1e-12

    def test_exponential_square_closed_form(self):
        np.testing.assert_allclose(gateaux_exponential(TrigPoly.monomial(2), np.eye(2), SIGMA_Z, 0.0, 1),
                                   2j * SIGMA_Z, atol=1e-14)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_exponential_matches_general(self, rng, k):
        f, a, u = random_trigpoly(rng, 6), random_hermitian(rng, 3), random_unitary(rng, 3)
        t = 0.6
        general = gateaux_derivative(ExponentialPath(a, u.matrix), f, t, k)
        assert rel(gateaux_exponential(f, u, a, t, k), general) <= 1e-10

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_oracle_agreement(self, rng, k, d):
        for _ in range(3):
            f = random_trigpoly(rng, 6)
            path = ExponentialPath(random_hermitian(rng, d), random_unitary(rng, d).matrix)
            g = gateaux_derivative(path, f, 0.1, k)
            fd = finite_difference_oracle(path, f, 0.1, k)
            assert np.linalg.norm(g - fd) / (1 + np.linalg.norm(g)) <= 1e-4

    def test_chain_consistency(self, rng):
        f = random_trigpoly(rng, 6)
        path = two_sided_path(random_hermitian(rng, 3), random_unitary(rng, 3).matrix, random_hermitian(rng, 3))
        t = -0.3
        lhs = gateaux_derivative(path, f, t, 1)
        rhs = frechet_derivative(f, path.at(t), [path.derivative(t, 1)])
        assert rel(lhs, rhs) <= 1e-10

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_continuous_along_path(self, rng, k):
        f = random_trigpoly(rng, 5)
        path = ExponentialPath(random_hermitian(rng, 3), random_unitary(rng, 3).matrix)
        base = gateaux_derivative(path, f, 0.5, k)
        moduli = [np.linalg.norm(gateaux_derivative(path, f, 0.5 + h, k) - base) for h in (1e-1, 1e-2, 1e-3)]
        assert moduli[0] > moduli[1] > moduli[2]


class TestFiniteDifference:
    def test_linear(self, rng):
        path = two_sided_path(random_hermitian(rng, 3), random_unitary(rng, 3).matrix, random_hermitian(rng, 3))
        assert rel(finite_difference_oracle(path, Z, 0.2, 1), path.derivative(0.2, 1)) <= 1e-9

    def test_square_closed_form(self):
        path = ExponentialPath(SIGMA_Z, np.eye(2))
        fd = finite_difference_oracle(path, TrigPoly.monomial(2), 0.0, 1, h=1e-3)
        assert np.linalg.norm(fd - 2j * SIGMA_Z) <= 1e-6

    def test_quartic_third_order(self, rng):
        f = TrigPoly.monomial(4)
        path = ExponentialPath(random_hermitian(rng, 3), random_unitary(rng, 3).matrix)
        assert rel(finite_difference_oracle(path, f, 0.0, 3), gateaux_derivative(path, f, 0.0, 3)) <= 1e-4

    def test_step_underflow(self, rng):
        path = ExponentialPath(random_hermitian(rng, 2), np.eye(2))
        with pytest.raises(ValueError, match="underflow"):
            finite_difference_oracle(path, Z, 0.0, 1, h=1e-12)

    def test_unsupported_order(self):
        with pytest.raises(ValueError, match="orders"):
            richardson_derivative(np.sin, 0.0, 5, 1e-2)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_scalar_sine(self, k):
        exact = np.sin(0.3 + k * np.pi / 2)
        assert richardson_derivative(np.sin, 0.3, k, 2e-2) == pytest.approx(exact, abs=1e-7)


def moving(rng, d):
    b, k = random_hermitian(rng, d, 1.0), random_matrix(rng, d, 1.0)
    return (lambda s: expm_hermitian(b, s) @ k, lambda s: 1j * b @ expm_hermitian(b, s) @ k)


class TestProductRule:
    def test_constant_everything(self, rng):
        u = random_unitary(rng, 3).matrix
        k = random_matrix(rng, 3)
        path = GeneralPath(lambda t: u, [lambda t: 0 * u])
        rep = product_rule_check(path, random_trigpoly(rng, 4), [(lambda s: k, lambda s: 0 * k)], 0.0)
        assert rep.residual_abs <= 1e-12 and rep.passed

    def test_cube_linear_argument(self, rng):
        k = random_matrix(rng, 3)
        path = ExponentialPath(random_hermitian(rng, 3), random_unitary(rng, 3).matrix)
        rep = product_rule_check(path, TrigPoly.monomial(3), [(lambda s: s * k, lambda s: k)], 0.4)
        assert rep.residual_rel <= 1e-6

    def test_quartic_two_arguments(self, rng):
        path = two_sided_path(random_hermitian(rng, 3), random_unitary(rng, 3).matrix, random_hermitian(rng, 3))
        rep = product_rule_check(path, TrigPoly.monomial(4), [moving(rng, 3), moving(rng, 3)], 0.1)
        assert rep.passed and rep.residual_rel <= 1e-5

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_random(self, rng, m):
        path = ExponentialPath(random_hermitian(rng, 3, 1.0), random_unitary(rng, 3).matrix)
        rep = product_rule_check(path, random_trigpoly(rng, 6), [moving(rng, 3) for _ in range(m)], -0.2)
        assert rep.passed, rep.to_json()


class TestContinuity:
    def test_zero_delta(self, rng):
        us = [random_unitary(rng, 3) for _ in range(2)]
        rep = moi_continuity_check(random_trigpoly(rng, 3), us, [random_hermitian(rng, 3)] * 2,
                                   [random_matrix(rng, 3)], deltas=(0.0,))
        # exp(0 A) rebuilt through the eigenbasis is I only up to rounding
        assert rep.residual_abs <= 1e-12

    def test_square_envelope(self, rng):
        us = [random_unitary(rng, 3) for _ in range(2)]
        gens = [random_hermitian(rng, 3) for _ in range(2)]
        x = random_matrix(rng, 3)
        deltas = (1e-1, 1e-2, 1e-3)
        rep = moi_continuity_check(TrigPoly.monomial(2), us, gens, [x], p=2.0, deltas=deltas)
        a_norm = max(np.linalg.norm(a, 2) for a in gens)
        for delta, diff in zip(deltas, rep.details["normalized_differences"]):
            # normalization is ||X||_2 for n = 1
            assert diff <= 2 * delta * a_norm * (1 + delta * a_norm)

    def test_decreasing_below_threshold(self, rng):
        n = 2
        f = unit_derivative_scale(random_trigpoly(rng, 5), n + 1)
        us = [random_unitary(rng, 3) for _ in range(n + 1)]
        gens = [random_hermitian(rng, 3, op_norm=0.25) for _ in range(n + 1)]
        rep = moi_continuity_check(f, us, gens, [random_matrix(rng, 3, fro=1.0) for _ in range(n)])
        diffs = rep.details["normalized_differences"]
        assert rep.passed and diffs[-1] < 1e-6
