"""Eigenvalue upper bounds for smooth Hermitian kernels, checked against Nyström spectra.

Everything here works on one-dimensional kernels on an interval, where a
brute-force spectrum is cheap.  The bounds themselves are stated for a
general dimension ``m`` and only the exponent arithmetic is exercised for
``m > 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermval

from .spectra import SpectrumReport, spectrum_from_values
from .wavekernel import fit_frequency_growth

__all__ = [
    "BoundsError",
    "SyntheticKernel1D",
    "TaylorBoundInputs",
    "TailCheck",
    "BlockReport",
    "ExpBound",
    "constant_kernel",
    "rank_one_kernel",
    "min_kernel",
    "gaussian_kernel",
    "polynomial_kernel",
    "kernel_by_name",
    "brute_spectrum",
    "noise_floor",
    "taylor_approximant",
    "sup_difference",
    "tail_sum_bound",
    "block_diagonal_tails",
    "taylor_sup_coefficients",
    "taylor_eigen_bound",
    "feasible_orders",
    "exp_decay_bound",
    "exp_decay_constants",
    "fit_kernel_growth",
    "zero_eigenvalue_threshold",
]

Partial = Callable[[int, int, np.ndarray, np.ndarray], np.ndarray]


class BoundsError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticKernel1D:
    """Real symmetric kernel on ``(lo, hi)``.

    ``partial(i, k, x, y)`` returns ``d^i/dx^i d^k/dy^k F(x, y)`` when the
    kernel has closed-form derivatives; ``degree`` is set for polynomial kernels.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    domain: tuple[float, float] = (0.0, 1.0)
    name: str = "kernel"
    partial: Partial | None = None
    degree: int | None = None
    m: int = 1

    def __call__(self, x, y):
        return self.evaluator(np.asarray(x, float), np.asarray(y, float))

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def nodes(self, n: int) -> np.ndarray:
        lo, hi = self.domain
        return lo + (hi - lo) * (np.arange(n) + 0.5) / n

    def matrix(self, n: int) -> np.ndarray:
        x = self.nodes(n)
        return self(x[:, None], x[None, :])


def _gauss_derivative(n: int, t):
    """``d^n/dt^n exp(-t^2) = (-1)^n H_n(t) exp(-t^2)``."""
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return (-1) ** n * hermval(t, coef) * np.exp(-t * t)


def constant_kernel(value: float = 1.0, domain=(0.0, 1.0)) -> SyntheticKernel1D:
    def partial(i, k, x, y):
        base = value if i == k == 0 else 0.0
        return np.full(np.broadcast(x, y).shape, base)

    return SyntheticKernel1D(lambda x, y: np.full(np.broadcast(x, y).shape, float(value)),
                             domain, "constant", partial, degree=0)


def rank_one_kernel(phi: Callable[[np.ndarray], np.ndarray] = np.sin, domain=(0.0, 1.0), name="rank_one"):
    return SyntheticKernel1D(lambda x, y: phi(x) * phi(y), domain, name)


def min_kernel(domain=(0.0, 1.0)) -> SyntheticKernel1D:
    """Brownian covariance; eigenvalues ``4 / (pi^2 (2n - 1)^2)`` on ``(0, 1)``."""
    return SyntheticKernel1D(np.minimum, domain, "min")


def gaussian_kernel(domain=(0.0, 1.0)) -> SyntheticKernel1D:
    def partial(i, k, x, y):
        return (-1) ** k * _gauss_derivative(i + k, x - y)

    return SyntheticKernel1D(lambda x, y: np.exp(-((x - y) ** 2)), domain, "gaussian", partial)


def polynomial_kernel(degree: int = 3, domain=(0.0, 1.0)) -> SyntheticKernel1D:
    """``(1 + x y)^degree``: positive semi-definite of rank ``degree + 1``."""

    def partial(i, k, x, y):
        # expand (1 + xy)^K = sum_l C(K,l) x^l y^l and differentiate termwise
        out = np.zeros(np.broadcast(x, y).shape)
        for ell in range(max(i, k), degree + 1):
            fx = math.perm(ell, i) * x ** (ell - i)
            fy = math.perm(ell, k) * y ** (ell - k)
            out = out + math.comb(degree, ell) * fx * fy
        return out

    return SyntheticKernel1D(lambda x, y: (1 + x * y) ** degree, domain, f"poly{degree}", partial, degree)


def kernel_by_name(name: str) -> SyntheticKernel1D:
    table = {"gaussian": gaussian_kernel, "min": min_kernel, "constant": constant_kernel,
             "poly3": polynomial_kernel, "polynomial": polynomial_kernel}
    try:
        return table[name]()
    except KeyError:
        raise BoundsError(f"unknown kernel {name!r}; choose from {sorted(table)}") from None


def noise_floor(lam, n_disc: int) -> float:
    """Roundoff level ``n_disc * eps * lambda_1`` of a dense symmetric eigensolve."""
    return float(n_disc * np.finfo(float).eps * (lam[0] if len(lam) else 0.0))


def brute_spectrum(kernel: SyntheticKernel1D, n_disc: int, tol: float = 1e-10) -> SpectrumReport:
    """Nyström eigenvalues on ``n_disc`` midpoints with uniform weights."""
    if n_disc < 128:
        raise BoundsError(f"n_disc must be at least 128, got {n_disc}")
    K = kernel.matrix(n_disc) * (kernel.length / n_disc)
    K = 0.5 * (K + K.T)
    return spectrum_from_values(np.linalg.eigvalsh(K), {"kernel": kernel.name, "n_disc": n_disc}, tol)


# ---------------------------------------------------------------------------
# finite-rank perturbation


def taylor_approximant(kernel: SyntheticKernel1D, r: int, center: float | None = None) -> SyntheticKernel1D:
    """Tensor Taylor truncation ``sum_{i,k<r} d_x^i d_y^k F(z,z) (x-z)^i (y-z)^k / (i! k!)``.

    The coefficient matrix is symmetric for a symmetric kernel, so the
    approximant is Hermitian with rank at most ``r``.  ``r = 0`` gives the
    zero kernel.
    """
    if kernel.partial is None:
        raise BoundsError(f"kernel {kernel.name} has no closed-form derivatives")
    z = 0.5 * sum(kernel.domain) if center is None else float(center)
    coef = np.array([[float(kernel.partial(i, k, np.array(z), np.array(z))) / (math.factorial(i) * math.factorial(k))
                      for k in range(r)] for i in range(r)]).reshape(r, r)
    coef = 0.5 * (coef + coef.T)

    def ev(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if r == 0:
            return np.zeros(x.shape)
        px = np.stack([(x - z) ** i for i in range(r)])
        py = np.stack([(y - z) ** k for k in range(r)])
        return np.einsum("i...,ik,k...->...", px, coef, py)

    return SyntheticKernel1D(ev, kernel.domain, f"{kernel.name}_taylor{r}", degree=max(r - 1, 0))


def numerical_rank(kernel: SyntheticKernel1D, n: int = 256, rtol: float = 1e-11) -> int:
    s = np.linalg.svd(kernel.matrix(n), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def sup_difference(f1: SyntheticKernel1D, f2: SyntheticKernel1D, n_grid: int = 1025) -> float:
    """``sup |F1 - F2|`` over a closed tensor grid (endpoints included)."""
    lo, hi = f1.domain
    g = np.linspace(lo, hi, n_grid)
    return float(np.max(np.abs(f1(g[:, None], g[None, :]) - f2(g[:, None], g[None, :]))))


@dataclass(frozen=True)
class TailCheck:
    r: int
    lhs: float   # sum_{n > r} lambda_n(F1)
    rhs: float   # (2r + 1) |U| sup |F1 - F2|
    ok: bool


def tail_sum_bound(f1: SyntheticKernel1D, f2: SyntheticKernel1D, r: int, n_disc: int = 512,
                   rtol: float = 1e-6, n_grid: int = 1025) -> TailCheck:
    """Tail of the spectrum of ``F1`` against the sup distance to a rank-``r`` kernel ``F2``."""
    rank = numerical_rank(f2)
    if rank > r:
        raise BoundsError(f"approximant has numerical rank {rank} > r = {r}")
    lam = brute_spectrum(f1, n_disc).eigenvalues
    # eigenvalues below the roundoff level of the dense solver are numerically zero
    lam = np.where(lam > noise_floor(lam, n_disc), lam, 0.0)
    lhs = float(np.sum(lam[r:]))
    rhs = (2 * r + 1) * f1.length * sup_difference(f1, f2, n_grid)
    return TailCheck(r, lhs, rhs, lhs <= rhs * (1 + rtol))


# ---------------------------------------------------------------------------
# diagonal blocks


@dataclass(frozen=True)
class BlockReport:
    n_blocks: int
    tails_full: np.ndarray    # tails_full[r] = sum_{n > r} lambda_n(T1)
    tails_blocks: np.ndarray  # same for the block-restricted kernel
    trace_full: float
    trace_blocks: float
    r_max: int
    lambda_full: np.ndarray = field(repr=False)
    lambda_blocks: np.ndarray = field(repr=False)

    @property
    def dominance(self) -> bool:
        slack = 64 * np.finfo(float).eps * self.trace_full
        return bool(np.all(self.tails_full[: self.r_max + 1] <= self.tails_blocks[: self.r_max + 1] + slack))

    @property
    def trace_error(self) -> float:
        return abs(self.trace_full - self.trace_blocks) / abs(self.trace_full)


def _tails(lam):
    # tails[r] = sum_{n>r} lambda_n, computed from the small end for accuracy
    rev = np.cumsum(lam[::-1])[::-1]
    return np.append(rev, 0.0)[1:]


def block_diagonal_tails(kernel: SyntheticKernel1D, edges, n_disc: int = 512, r_max: int = 32) -> BlockReport:
    """Compare the spectrum of ``F`` with that of ``F`` restricted to diagonal blocks.

    ``edges`` is the increasing list of interval endpoints, covering the domain.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = kernel.domain
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise BoundsError("partition edges must be strictly increasing (intervals may not overlap)")
    if not (np.isclose(edges[0], lo) and np.isclose(edges[-1], hi)):
        raise BoundsError("partition must cover the kernel domain")
    x = kernel.nodes(n_disc)
    label = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    K = kernel.matrix(n_disc) * (kernel.length / n_disc)
    K = 0.5 * (K + K.T)
    K2 = np.where(label[:, None] == label[None, :], K, 0.0)
    lam1 = np.sort(np.linalg.eigvalsh(K))[::-1]
    lam2 = np.sort(np.linalg.eigvalsh(K2))[::-1]
    return BlockReport(len(edges) - 1, _tails(lam1), _tails(lam2), float(np.trace(K)), float(np.sum(lam2)),
                       r_max, lam1, lam2)


# ---------------------------------------------------------------------------
# Taylor-coefficient bound


@dataclass(frozen=True)
class TaylorBoundInputs:
    M: np.ndarray   # M[j] for j = 0..k
    m: int = 1
    a: float = 2.0
    A: float = 4.0

    @property
    def k(self) -> int:
        return len(self.M) - 1


def taylor_sup_coefficients(kernel: SyntheticKernel1D, k: int, n_grid: int = 512) -> np.ndarray:
    """``M_j = sup_{x,y} |d^j/ds^j F(x, y + s v)| / j!`` over ``v = +-1`` on a ``n_grid^2`` grid.

    In one dimension both directions give the same modulus, so the sup is
    over ``|d_y^j F|``.
    """
    if kernel.partial is None:
        raise BoundsError(f"kernel {kernel.name} has no closed-form derivatives")
    lo, hi = kernel.domain
    g = np.linspace(lo, hi, n_grid)
    X, Y = g[:, None], g[None, :]
    return np.array([float(np.max(np.abs(kernel.partial(0, j, X, Y)))) / math.factorial(j) for j in range(k + 1)])


def feasible_orders(n: int, k: int, m: int = 1, a: float = 2.0) -> list[int]:
    """``{1 <= j <= k : a (j + m) <= (n/2)^(1/m)}``."""
    top = (n / 2) ** (1 / m)
    # small relative slack so exact boundary cases like 2*(4+1) = 20/2 survive rounding
    return [j for j in range(1, k + 1) if a * (j + m) <= top * (1 + 1e-12)]


def taylor_eigen_bound(inputs: TaylorBoundInputs, n: int, k: int | None = None) -> tuple[float, int | None]:
    """``A min_j M_j (a (2/n)^(1/m))^j (j + m)^(j + m)`` over the feasible orders.

    Returns ``(bound, argmin j)``; an empty feasible set gives ``(inf, None)``.
    """
    k = inputs.k if k is None else min(k, inputs.k)
    js = feasible_orders(n, k, inputs.m, inputs.a)
    if not js:
        return math.inf, None
    step = inputs.a * (2 / n) ** (1 / inputs.m)
    vals = []
    for j in js:
        if inputs.M[j] == 0:
            vals.append(0.0)
            continue
        logv = math.log(inputs.M[j]) + j * math.log(step) + (j + inputs.m) * math.log(j + inputs.m)
        vals.append(inputs.A * math.exp(logv))
    i = int(np.argmin(vals))
    return float(vals[i]), js[i]


def zero_eigenvalue_threshold(degree: int, m: int = 1, a: float = 2.0) -> int:
    """Smallest ``n`` from which a degree-``K`` polynomial kernel has a zero bound."""
    return math.ceil(2 * (a * (degree + m + 1)) ** m)


# ---------------------------------------------------------------------------
# stretched-exponential bound


@dataclass(frozen=True)
class ExpBound:
    C: float
    c: float
    m: int
    mu: float
    n0: int  # from here on both conditions of the construction hold

    @property
    def exponent(self) -> float:
        return 1 / (self.m * (1 + self.mu))

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return self.C * n ** (1 + 1 / self.m) * np.exp(-self.c * n**self.exponent)


def exp_decay_constants(B: float, b: float, mu: float, m: int, a: float = 2.0, A: float = 4.0) -> ExpBound:
    """Constants of ``lambda_n <= C n n^(1/m) exp(-c n^(1/(m(1+mu))))``.

    With ``alpha_n = a b (2/n)^(1/m)`` and ``zeta_n = alpha_n^(-1/(1+mu)) / e``
    the minimum over Taylor orders is bounded by its value at ``floor(zeta_n)``,
    which gives

        C = A B / (2 (a b)^(m+1) 2^(1/m)),
        c = (1 + mu) e^-1 (a b)^(-1/(1+mu)) 2^(-1/(m (1+mu))).

    ``n0`` is the first ``n`` with ``alpha_n < e^-(1+mu)`` and ``alpha_n^(mu/(1+mu)) < b e``.
    """
    for name, v in (("B", B), ("b", b), ("mu", mu), ("m", m), ("a", a), ("A", A)):
        if not v > 0:
            raise BoundsError(f"{name} must be positive, got {v}")
    ab = a * b
    C = A * B / (2 * ab ** (m + 1) * 2 ** (1 / m))
    c = (1 + mu) / math.e * ab ** (-1 / (1 + mu)) * 2 ** (-1 / (m * (1 + mu)))
    # alpha_n < e^-(1+mu)  <=>  n > 2 (ab e^(1+mu))^m ; second condition <=> n > 2 (ab / (be)^((1+mu)/mu))^m
    n_a = 2 * (ab * math.exp(1 + mu)) ** m
    n_b = 2 * (ab / (b * math.e) ** ((1 + mu) / mu)) ** m
    n0 = int(math.floor(max(n_a, n_b))) + 1
    return ExpBound(C, c, m, mu, n0)


def exp_decay_bound(B: float, b: float, mu: float, m: int, n, a: float = 2.0, A: float = 4.0):
    """Evaluate the stretched-exponential eigenvalue bound at ``n``."""
    return exp_decay_constants(B, b, mu, m, a, A)(n)


def fit_kernel_growth(M, mu_min: float = 0.05):
    """Dominating ``(B, b, mu)`` with ``M_j <= B b^j j^(mu j)`` for ``j >= 1``.

    The free exponent of a smooth kernel can come out negative (the Gaussian
    has super-factorial decay); it is clipped at ``mu_min`` because the bound
    needs ``mu > 0``, which only loosens the envelope.
    """
    M = np.asarray(M, dtype=float)
    j = np.arange(1, len(M))
    q = M[1:]
    if np.any(q <= 0):
        raise BoundsError("growth fit needs positive M_j")
    # fit on j >= 1 by shifting the moment index: q_i = M_{i+1}
    free = fit_frequency_growth(q).slope
    mu = max(free, mu_min)
    y = np.log(q)
    jl = j * np.log(j)
    A2 = np.column_stack([np.ones_like(j, dtype=float), j])
    logB, logb = np.linalg.lstsq(A2, y - mu * jl, rcond=None)[0]
    logB += float(np.max(y - (logB + j * logb + mu * jl)))
    return float(np.exp(logB)), float(np.exp(logb)), float(mu)
