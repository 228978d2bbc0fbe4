"""Green's kernel of the attenuated wave equation and its exact derivatives.

The frequency-domain kernel is

    G(omega, x) = -i omega / (4 pi sqrt(2 pi)) * exp(i kappa(omega) |x|) / |x|.

It is radial: ``G = g(|x|^2 / 2)`` with ``g(rho) ∝ gamma_a(rho)``, where
``gamma_a(rho) = exp(a sqrt(2 rho)) / sqrt(2 rho)`` and ``a = i kappa``.
Derivatives of ``gamma_a`` come from Faà di Bruno's formula, a sum over
integer partitions.  Directional derivatives of a radial function then
follow from a short binomial-type sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .attenuation import AttenuationModel, StrongParams, WeakSplit, classify, eval_kappa

__all__ = [
    "PREFACTOR",
    "J_MAX",
    "SingularityError",
    "WrongClassError",
    "greens",
    "gamma_derivatives",
    "radial_derivatives",
    "directional_derivative",
    "gamma_derivative_bound",
    "DerivativeBoundReport",
    "derivative_bound_check",
    "frequency_integral",
    "GrowthFit",
    "fit_frequency_growth",
]

PREFACTOR = 1.0 / (4 * math.pi * math.sqrt(2 * math.pi))
J_MAX = 12


class SingularityError(ValueError):
    """Kernel evaluated at the source point."""


class WrongClassError(ValueError):
    """Operation needs a strong (or weak) attenuation model."""


def greens(model: AttenuationModel, omega, x):
    """Kernel values for real ``omega`` and points ``x`` of shape ``(..., 3)``."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0):
        raise SingularityError("greens kernel is singular at |x| = 0")
    omega = np.asarray(omega, dtype=float)
    k = np.asarray(eval_kappa(model, omega))
    return -1j * omega * PREFACTOR * np.exp(1j * k * r) / r


def _partitions(n: int, largest: int | None = None):
    """Integer partitions of ``n`` as non-increasing tuples."""
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def _double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * _double_factorial(n - 2)


@lru_cache(maxsize=None)
def _faa_di_bruno_table(j: int) -> tuple[float, ...]:
    """Coefficients ``C[l]``, l = 1..j+1, with

        gamma_a^(j)(rho) = exp(a s) * sum_l C[l] s^(l - 2j - 2) a^(l - 1),  s = sqrt(2 rho).

    ``C[l]`` collects all partitions of ``j + 1`` with ``l`` parts; each
    partition ``alpha`` contributes ``(j+1)!/alpha! * prod_k c_k^alpha_k`` with
    ``c_k = (-1)^(k+1) (2k-3)!! / k!`` (and ``(-1)!! = 1``).
    """
    n = j + 1
    table = [Fraction(0)] * (n + 1)
    for part in _partitions(n):
        counts: dict[int, int] = {}
        for k in part:
            counts[k] = counts.get(k, 0) + 1
        term = Fraction(math.factorial(n))
        for k, a_k in counts.items():
            c_k = Fraction((-1) ** (k + 1) * _double_factorial(2 * k - 3), math.factorial(k))
            term *= c_k**a_k / math.factorial(a_k)
        table[len(part)] += term
    return tuple(float(t) for t in table)


def gamma_derivatives(a, rho, j_max: int) -> np.ndarray:
    """``gamma_a^(j)(rho)`` for ``j = 0..j_max``; ``a`` and ``rho`` broadcast.

    The result has shape ``(j_max + 1, *broadcast_shape)``.
    """
    if j_max > J_MAX:
        raise ValueError(f"j_max={j_max} exceeds the partition-sum guard {J_MAX}")
    a = np.asarray(a, dtype=complex)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise SingularityError("rho must be positive")
    a, rho = np.broadcast_arrays(a, rho)
    s = np.sqrt(2 * rho)
    e = np.exp(a * s)
    out = np.empty((j_max + 1,) + a.shape, dtype=complex)
    for j in range(j_max + 1):
        table = _faa_di_bruno_table(j)
        acc = np.zeros(a.shape, dtype=complex)
        for ell in range(1, j + 2):
            acc += table[ell] * s ** (ell - 2 * j - 2) * a ** (ell - 1)
        out[j] = e * acc
    return out


def radial_derivatives(model: AttenuationModel, omega: float, rho, j_max: int) -> np.ndarray:
    """``gamma_a^(j)(rho)`` with ``a = i kappa(omega)``."""
    return gamma_derivatives(1j * eval_kappa(model, omega), rho, j_max)


def directional_derivative(model: AttenuationModel, omega, x, v, j: int):
    """``d^j/ds^j G(omega, x + s v)`` at ``s = 0``.

    ``x`` and ``v`` have shape ``(..., 3)``; ``omega`` broadcasts against the
    leading axes.  For a radial ``g(|x|^2/2)`` the derivative equals
    ``sum_k j!/(2^k k! (j-2k)!) <v,x>^(j-2k) g^(j-k)(|x|^2/2)``.
    """
    if not 0 <= j <= J_MAX:
        raise ValueError(f"j must lie in 0..{J_MAX}")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    rho = 0.5 * np.sum(x * x, axis=-1)
    if np.any(rho == 0):
        raise SingularityError("directional derivative at |x| = 0")
    vx = np.sum(v * x, axis=-1)
    omega = np.asarray(omega, dtype=float)
    a = 1j * np.asarray(eval_kappa(model, omega))
    g = gamma_derivatives(a, rho, j)
    total = 0j
    for k in range(j // 2 + 1):
        coef = math.factorial(j) / (2**k * math.factorial(k) * math.factorial(j - 2 * k))
        total = total + coef * vx ** (j - 2 * k) * g[j - k]
    return -1j * omega * PREFACTOR * total


def gamma_derivative_bound(a, rho, j: int):
    """Right-hand side ``2^j (j+1)! (e^(j+1) + (rho/2)^(j/2) |a|^j / j!) |gamma_a(rho)| / rho^j``."""
    a = np.asarray(a, dtype=complex)
    rho = np.asarray(rho, dtype=float)
    s = np.sqrt(2 * rho)
    gam = np.abs(np.exp(a * s) / s)
    bracket = math.e ** (j + 1) + (rho / 2) ** (j / 2) * np.abs(a) ** j / math.factorial(j)
    return 2**j * math.factorial(j + 1) * bracket * gam / rho**j


@dataclass(frozen=True)
class DerivativeBoundReport:
    C: float
    worst_ratio: float  # max of lhs / rhs at the fitted C
    n_samples: int


def derivative_bound_check(model: AttenuationModel, eps: float, omega, x, v, j_max: int) -> DerivativeBoundReport:
    """Smallest ``C`` with ``|d^j G| / j! <= |G| C^j (|x|^-j + |kappa|^j / j!)`` on the samples.

    ``omega``, ``x`` (n, 3) and ``v`` (n, 3) are paired sample arrays; every
    ``j`` in ``0..j_max`` is tested at each sample.  A grid with only ``j = 0``
    gives ``C = 1``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < eps * (1 - 1e-12)):
        raise ValueError("all sample points need |x| >= eps")
    omega = np.broadcast_to(np.asarray(omega, float), r.shape)
    keep = omega != 0  # G vanishes identically at omega = 0
    omega, x, r = omega[keep], x[keep], r[keep]
    v = np.broadcast_to(np.asarray(v, float), (len(keep), 3))[keep]
    g0 = np.abs(greens(model, omega, x))
    k = np.abs(np.asarray(eval_kappa(model, omega)))
    C = 0.0
    needed = []
    for j in range(1, j_max + 1):
        lhs = np.abs(directional_derivative(model, omega, x, v, j)) / math.factorial(j)
        base = g0 * (r ** (-j) + k**j / math.factorial(j))
        ratio = (lhs / base) ** (1.0 / j)
        needed.append((j, lhs, base))
        C = max(C, float(np.max(ratio, initial=0.0)))
    if not needed:
        C = 1.0
    worst = 0.0
    for j, lhs, base in needed:
        worst = max(worst, float(np.max(lhs / (base * C**j), initial=0.0)))
    if not needed:
        worst = float(np.max(g0 / (2 * g0), initial=0.0))
    return DerivativeBoundReport(C, worst, int(keep.sum()))


# ---------------------------------------------------------------------------
# frequency moments


_GL_NODES = {n: np.polynomial.legendre.leggauss(n) for n in (10, 20)}


def _panel(f, a, b, n):
    x, w = _GL_NODES[n]
    half = 0.5 * (b - a)
    return half * np.dot(w, f(0.5 * (a + b) + half * x))


def _adaptive_gl(f, a, b, scale, rtol=1e-12, max_depth=30):
    """Composite Gauss-Legendre with bisection.  A panel is accepted once its
    10- and 20-point rules agree to ``rtol * scale``, where ``scale`` is the
    size of the whole integral (so negligible panels are not refined)."""
    total = 0.0
    queue = [(a, b, 0)]
    while queue:
        lo, hi, depth = queue.pop()
        fine = _panel(f, lo, hi, 20)
        if depth >= max_depth or abs(fine - _panel(f, lo, hi, 10)) <= rtol * scale:
            total += fine
        else:
            mid = 0.5 * (lo + hi)
            queue += [(lo, mid, depth + 1), (mid, hi, depth + 1)]
    return total


def frequency_integral(model: AttenuationModel, eps: float, j: int, omega_cut: float | None = None,
                       params: StrongParams | None = None) -> float:
    """``(1/j!) * integral of |kappa|^j exp(-2 eps Im kappa)`` over ``[-omega_cut, omega_cut]``.

    The default cut solves ``kappa0 omega_cut^beta = 35 / (2 eps)`` and is
    enlarged until the integrand at the cut is negligible for this ``j``.
    """
    params = params if params is not None else classify(model)
    if isinstance(params, WeakSplit):
        raise WrongClassError("frequency moments diverge for weak attenuation")

    def f(w):
        k = np.asarray(eval_kappa(model, w))
        logv = j * np.log(np.maximum(np.abs(k), 1e-300)) - 2 * eps * k.imag - math.lgamma(j + 1)
        return np.exp(logv)

    if omega_cut is None:
        omega_cut = params.omega_cut(eps)
        peak = max(float(f(np.array([w]))[0]) for w in np.geomspace(1e-3, omega_cut, 200))
        while float(f(np.array([omega_cut]))[0]) * omega_cut > 1e-16 * peak:
            omega_cut *= 2

    # split at the origin and geometrically so panels follow the integrand's scale
    edges = np.concatenate([[0.0], np.geomspace(min(1e-3, omega_cut / 10), omega_cut, 24)])
    brackets = [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    brackets += [(-hi, -lo) for lo, hi in brackets]
    scale = abs(sum(_panel(f, lo, hi, 20) for lo, hi in brackets))
    return float(sum(_adaptive_gl(f, lo, hi, scale) for lo, hi in brackets))


@dataclass(frozen=True)
class GrowthFit:
    """Envelope ``q_j <= B b^j j^(mu j)`` plus the free regression exponent.

    ``slope`` comes from regressing ``log q_j`` on ``1, j, (j+1) log(j+1)`` and
    ``log(j+1)``.  The last column soaks up the polynomial prefactors that
    Stirling's formula attaches to quotients of factorials, so ``slope``
    estimates the growth exponent even over a short range of ``j``.
    """

    B: float
    b: float
    mu: float
    slope: float

    def envelope(self, j):
        j = np.asarray(j, dtype=float)
        jj = np.where(j > 0, j, 1.0)
        return self.B * self.b**j * jj ** (self.mu * j)


def fit_frequency_growth(q, mu: float | None = None) -> GrowthFit:
    """Fit the moment sequence ``q_0, q_1, ...``.

    ``mu`` fixes the exponent of the envelope (default: the regression
    slope).  ``b`` is fitted by least squares and ``B`` then raised until the
    envelope dominates every sample.
    """
    q = np.asarray(q, dtype=float)
    j = np.arange(len(q), dtype=float)
    y = np.log(q)
    L = np.log(j + 1)
    A = np.column_stack([np.ones_like(j), j, (j + 1) * L, L])
    slope = float(np.linalg.lstsq(A, y, rcond=None)[0][2])
    mu = slope if mu is None else float(mu)
    jlogj = np.where(j > 0, j * np.log(np.where(j > 0, j, 1.0)), 0.0)
    A2 = np.column_stack([np.ones_like(j), j])
    logB, logb = np.linalg.lstsq(A2, y - mu * jlogj, rcond=None)[0]
    logB += float(np.max(y - (logB + j * logb + mu * jlogj)))
    return GrowthFit(float(np.exp(logB)), float(np.exp(logb)), mu, slope)
