import math

import numpy as np
import pytest

from attenuspec.bounds import (
    BoundsError,
    TaylorBoundInputs,
    block_diagonal_tails,
    brute_spectrum,
    constant_kernel,
    exp_decay_bound,
    exp_decay_constants,
    feasible_orders,
    fit_kernel_growth,
    gaussian_kernel,
    kernel_by_name,
    min_kernel,
    noise_floor,
    numerical_rank,
    polynomial_kernel,
    rank_one_kernel,
    sup_difference,
    tail_sum_bound,
    taylor_approximant,
    taylor_eigen_bound,
    taylor_sup_coefficients,
    zero_eigenvalue_threshold,
)
from attenuspec.spectra import STRETCH_DIMENSION

GAUSS = gaussian_kernel()


@pytest.fixture(scope="module")
def gauss_brute():
    return brute_spectrum(GAUSS, 512).eigenvalues


@pytest.fixture(scope="module")
def gauss_M():
    return taylor_sup_coefficients(GAUSS, 64)


def test_constant_kernel():
    lam = brute_spectrum(constant_kernel(), 256).eigenvalues
    assert lam[0] == pytest.approx(1.0, rel=1e-13)
    assert np.all(lam[1:] < 1e-13)


def test_min_kernel_analytic():
    lam = brute_spectrum(min_kernel(), 512).eigenvalues
    exact = 4 / (math.pi**2 * (2 * np.arange(1, 6) - 1) ** 2)
    assert lam[0] == pytest.approx(0.405285, abs=1e-6)
    assert np.allclose(lam[:5], exact, rtol=1e-4)


def test_brute_minimum_size():
    with pytest.raises(BoundsError):
        brute_spectrum(GAUSS, 64)


def test_gaussian_refinement_stability():
    # uniform midpoint Nystrom converges at O(h^2); 512 -> 1024 moves lambda_1 by about 2.6e-7
    a = brute_spectrum(GAUSS, 512).eigenvalues[:8]
    b = brute_spectrum(GAUSS, 1024).eigenvalues[:8]
    assert np.max(np.abs(a - b)) <= 1e-8


def test_gaussian_refinement_second_order():
    a = brute_spectrum(GAUSS, 256).eigenvalues[0]
    b = brute_spectrum(GAUSS, 512).eigenvalues[0]
    c = brute_spectrum(GAUSS, 1024).eigenvalues[0]
    assert (a - b) / (b - c) == pytest.approx(4.0, rel=0.01)


def test_kernel_lookup():
    assert kernel_by_name("poly3").degree == 3
    with pytest.raises(BoundsError):
        kernel_by_name("nope")


def test_gaussian_partials_match_finite_differences():
    x, y, h = 0.3, 0.7, 1e-3
    for i, k in [(1, 0), (0, 1), (1, 1), (2, 0), (0, 3)]:
        fd = 0.0
        # tensor central differences
        wi = {0: [(0, 1)], 1: [(1, 0.5), (-1, -0.5)], 2: [(1, 1), (0, -2), (-1, 1)],
              3: [(2, 0.5), (1, -1), (-1, 1), (-2, -0.5)]}
        for si, ci in wi[i]:
            for sk, ck in wi[k]:
                fd += ci * ck * GAUSS(x + si * h, y + sk * h)
        fd /= h ** (i + k)
        assert float(GAUSS.partial(i, k, np.array(x), np.array(y))) == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_polynomial_partials():
    K = polynomial_kernel(3)
    x, y = np.array(0.4), np.array(0.9)
    # d_x d_y (1 + xy)^3 = 3 (1 + xy)^2 + 6 xy (1 + xy)
    assert float(K.partial(1, 1, x, y)) == pytest.approx(3 * 1.36**2 + 6 * 0.36 * 1.36, rel=1e-14)
    assert float(K.partial(4, 0, x, y)) == 0.0


# ---------------------------------------------------------------- finite-rank perturbation


def test_taylor_rank():
    for r in range(0, 8):
        assert numerical_rank(taylor_approximant(GAUSS, r)) <= r


def test_tail_rank_one_identical():
    k = rank_one_kernel()
    chk = tail_sum_bound(k, k, 1)
    assert chk.lhs == 0.0 and chk.rhs == 0.0 and chk.ok


def test_tail_zero_approximant_is_trace():
    chk = tail_sum_bound(GAUSS, taylor_approximant(GAUSS, 0), 0)
    assert chk.lhs == pytest.approx(1.0, rel=1e-12)  # integral of F(x, x) = 1
    assert chk.rhs == pytest.approx(1.0, rel=1e-12)  # |U| sup F = 1
    assert chk.ok


@pytest.mark.parametrize("r", range(1, 11))
def test_tail_gaussian_taylor(r):
    chk = tail_sum_bound(GAUSS, taylor_approximant(GAUSS, r), r)
    assert chk.ok, chk


def test_tail_rank_guard():
    with pytest.raises(BoundsError):
        tail_sum_bound(GAUSS, taylor_approximant(GAUSS, 4), 2)


def test_sup_difference_closed_grid():
    assert sup_difference(GAUSS, taylor_approximant(GAUSS, 0)) == 1.0


# ---------------------------------------------------------------- diagonal blocks


def test_blocks_trivial_partition():
    rep = block_diagonal_tails(GAUSS, [0.0, 1.0])
    assert np.array_equal(rep.tails_full, rep.tails_blocks)


@pytest.mark.parametrize("n_blocks", [2, 4, 8])
def test_blocks_gaussian(n_blocks):
    rep = block_diagonal_tails(GAUSS, np.linspace(0, 1, n_blocks + 1), r_max=32)
    assert rep.dominance
    assert rep.trace_error <= 1e-8


def test_blocks_rank_one():
    rep = block_diagonal_tails(rank_one_kernel(), [0.0, 0.5, 1.0])
    assert rep.lambda_blocks[0] <= rep.lambda_full[0]
    assert rep.trace_error <= 1e-12


def test_blocks_bad_partition():
    with pytest.raises(BoundsError):
        block_diagonal_tails(GAUSS, [0.0, 0.6, 0.5, 1.0])
    with pytest.raises(BoundsError):
        block_diagonal_tails(GAUSS, [0.0, 0.5])


# ---------------------------------------------------------------- Taylor bound


def test_feasible_orders():
    assert feasible_orders(20, 10) == [1, 2, 3, 4]
    assert feasible_orders(8, 10) == [1]
    assert feasible_orders(4, 10) == []


def test_polynomial_zero_bound():
    K = polynomial_kernel(3)
    M = taylor_sup_coefficients(K, 8)
    assert np.all(M[4:] == 0)
    assert zero_eigenvalue_threshold(3) == 20
    inputs = TaylorBoundInputs(M)
    for n in (20, 21, 40, 128):
        assert taylor_eigen_bound(inputs, n)[0] == 0.0
    assert taylor_eigen_bound(inputs, 19)[0] > 0
    lam = brute_spectrum(K, 512).eigenvalues
    assert np.all(lam[4:] <= 1e-12)


def test_empty_feasible_set():
    bound, j = taylor_eigen_bound(TaylorBoundInputs(np.ones(5)), 4)
    assert bound == math.inf and j is None


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128])
def test_taylor_bound_dominates(n, gauss_M, gauss_brute):
    bound, _ = taylor_eigen_bound(TaylorBoundInputs(gauss_M), n)
    assert 0 < bound < math.inf
    assert bound >= gauss_brute[n - 1]


def test_taylor_bound_monotone_in_n(gauss_M):
    inputs = TaylorBoundInputs(gauss_M)
    for n in (16, 32, 64):
        b1, j = taylor_eigen_bound(inputs, n)
        b4 = taylor_eigen_bound(TaylorBoundInputs(gauss_M[: j + 1]), 4 * n)[0]
        assert b4 < b1


# ---------------------------------------------------------------- stretched-exponential bound


def test_exp_bound_grows_with_mu():
    vals = [exp_decay_bound(10, 0.5, mu, 1, 100) for mu in (0.1, 0.5, 1, 2, 4)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_exp_bound_exponent_strong_model():
    # beta = 1/2, N = 1  ->  mu = N / beta - 1 = 1
    eb = exp_decay_constants(1.0, 1.0, 1.0, STRETCH_DIMENSION)
    assert eb.exponent == pytest.approx(1 / 6)


def test_exp_bound_rejects_nonpositive():
    with pytest.raises(BoundsError):
        exp_decay_constants(1.0, -1.0, 1.0, 1)


def test_growth_fit_dominates(gauss_M):
    B, b, mu = fit_kernel_growth(gauss_M)
    j = np.arange(1, len(gauss_M))
    assert np.all(gauss_M[1:] <= B * b**j * j ** (mu * j) * (1 + 1e-12))
    assert mu >= 0.05


def test_exp_bound_dominates_brute(gauss_M, gauss_brute):
    B, b, mu = fit_kernel_growth(gauss_M)
    ns = np.array([8, 16, 32, 64, 128, 256])
    bound = exp_decay_bound(B, b, mu, 1, ns)
    # brute values under the solver's roundoff level carry no information; treat them as 0
    brute = gauss_brute[ns - 1]
    brute = np.where(brute > noise_floor(gauss_brute, 512), brute, 0.0)
    assert np.all(bound >= brute)


def test_bound_chain(gauss_M, gauss_brute):
    B, b, mu = fit_kernel_growth(gauss_M)
    eb = exp_decay_constants(B, b, mu, 1)
    inputs = TaylorBoundInputs(gauss_M)
    for n in (8, 16, 32, 64, 128):
        taylor, _ = taylor_eigen_bound(inputs, n)
        assert eb(n) >= taylor >= gauss_brute[n - 1]
