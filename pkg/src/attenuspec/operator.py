"""Discretised photoacoustic operator and its Gram kernel.

The frequency-domain operator maps an interior source ``h`` to boundary data

    (P h)(omega, xi) = 1/(4 pi sqrt(2 pi)) * int exp(i kappa |xi - y|) / |xi - y| h(y) dy,

and ``P^* P`` is the integral operator with kernel

    F(x, y) = 1/(32 pi^3) int int exp(i kappa |xi-y| - i conj(kappa) |xi-x|) / (|xi-y| |xi-x|) dS(xi) d omega.

For strong attenuation the frequency integral converges absolutely and is
summed directly.  For weak attenuation ``kappa = omega/c + i kinf + kappa_star``
the integral is only conditionally convergent.  There ``F = F0 + F1 + F2``
is assembled instead: ``F0`` reduces to a line integral over the circle
where the sphere meets the bisection plane of ``x`` and ``y``, ``F1`` to
the inverse transform of ``kappa_star`` and ``F2`` to an absolutely
convergent remainder.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dsyrk

from .attenuation import AttenuationModel, ModelKind, StrongParams, WeakSplit, classify, eval_kappa
from .geometry import (
    BallGeometry,
    BoundaryQuadrature,
    GeometryError,
    InteriorGrid,
    interior_grid,
    pairwise_distances,
    sphere_quadrature,
)
from .wavekernel import PREFACTOR, WrongClassError

__all__ = [
    "GRAM_PREFACTOR",
    "CELL_INVERSE_DISTANCE",
    "Discretization",
    "discretize",
    "FrequencyGrid",
    "strong_frequency_grid",
    "band_frequency_grid",
    "default_band",
    "OperatorMatrix",
    "assemble_forward",
    "GramKernel",
    "gram_direct",
    "gram_from_forward",
    "KappaStarTransform",
    "kappa_star_transform",
    "f0_matrix",
    "f1_matrix",
    "f2_matrix",
    "f0_band_diagonal",
    "gram_weak_F0",
    "gram_weak_F1",
    "gram_weak_F2",
    "gram_weak",
    "gram",
]

log = logging.getLogger(__name__)

GRAM_PREFACTOR = 1.0 / (32 * math.pi**3)

# integral of 1/|y| over the unit cube centred at the origin
CELL_INVERSE_DISTANCE = 2.380077363979553

# models whose kappa is analytic at omega = 0 (no graded panels needed there)
_SMOOTH_AT_ZERO = {ModelKind.THERMO_VISCOUS, ModelKind.NACHMAN_SMITH_WAAG, ModelKind.LINEAR}


@dataclass(frozen=True)
class Discretization:
    geom: BallGeometry
    boundary: BoundaryQuadrature
    interior: InteriorGrid

    @property
    def n_boundary(self) -> int:
        return len(self.boundary.weights)

    @property
    def n_interior(self) -> int:
        return len(self.interior.weights)

    def distances(self) -> np.ndarray:
        """``|xi_j - y_k|`` with shape ``(n_boundary, n_interior)``."""
        d = pairwise_distances(self.boundary.points, self.interior.points)
        if d.min() < self.geom.eps / 2:
            raise GeometryError("an interior point lies closer than eps/2 to the sphere")
        return d

    def describe(self) -> dict:
        g = self.geom
        return {"R": g.R, "eps": g.eps, "center": list(g.center), "n_boundary": self.n_boundary,
                "h": self.interior.h, "n_interior": self.n_interior}


def discretize(geom: BallGeometry, n_boundary: int, h: float) -> Discretization:
    return Discretization(geom, sphere_quadrature(geom, n_boundary), interior_grid(geom, h))


# ---------------------------------------------------------------------------
# frequency grids


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric quadrature nodes on ``[-omega_cut, omega_cut]``, ascending."""

    omega: np.ndarray
    weights: np.ndarray
    omega_cut: float

    def __post_init__(self):
        w = np.asarray(self.omega, float)
        if not np.allclose(w, -w[::-1], rtol=0, atol=1e-12 * max(1.0, self.omega_cut)):
            raise ValueError("frequency grid must be symmetric about 0")
        if np.any(np.asarray(self.weights) <= 0):
            raise ValueError("frequency weights must be positive")

    @classmethod
    def from_half(cls, omega, weights, omega_cut):
        """Mirror a grid on ``(0, omega_cut]`` to the full line."""
        omega = np.asarray(omega, float)
        weights = np.asarray(weights, float)
        return cls(np.concatenate([-omega[::-1], omega]), np.concatenate([weights[::-1], weights]),
                   float(omega_cut))

    @property
    def half(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights with ``omega > 0``."""
        pos = self.omega > 0
        return self.omega[pos], self.weights[pos]

    def __len__(self):
        return len(self.omega)

    def describe(self) -> dict:
        return {"omega_cut": self.omega_cut, "n_omega": len(self.omega)}


def _gl_on_edges(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return ((lo + hi) / 2 + half * x).ravel(), (half * w).ravel()


def _graded(first_edge, levels):
    return first_edge * 2.0 ** -np.arange(levels, 0, -1)


def strong_frequency_grid(model: AttenuationModel, disc: Discretization, params: StrongParams | None = None,
                          omega_cut: float | None = None, order: int = 16, max_phase: float = 12.0,
                          max_decay: float = 8.0, grading: int | None = None,
                          low_scale: float = 0.25) -> FrequencyGrid:
    """Composite Gauss-Legendre grid for the direct Gram sum.

    Panels are placed so that across each one the phase ``Re kappa * L``
    (``L`` the largest path difference) changes by at most ``max_phase``.
    The damping ``2 eps Im kappa`` of the slowest decaying entries changes by
    at most ``max_decay``.  Above ``low_scale`` no panel spans more than an
    octave, which keeps complex singularities of ``kappa`` near the real axis
    (e.g. the branch point at ``-i/tau``) resolved.  ``omega_cut`` defaults to the frequency where
    ``exp(-2 eps Im kappa)`` reaches ``exp(-35)``.  ``grading`` geometric levels
    resolve non-analytic behaviour at ``omega = 0``.
    """
    params = params if params is not None else classify(model)
    if isinstance(params, WeakSplit):
        raise WrongClassError("direct frequency quadrature needs strong attenuation; use gram_weak")
    eps = disc.geom.eps
    wc = float(omega_cut) if omega_cut is not None else params.omega_cut(eps)
    L = 2 * disc.geom.inner_radius
    w = np.linspace(0, wc, 40001)
    k = np.asarray(eval_kappa(model, w))
    phase = L * np.maximum.accumulate(np.abs(k.real))
    decay = 2 * eps * np.maximum.accumulate(np.maximum(k.imag, 0))
    s = phase / max_phase + decay / max_decay + np.log2(1 + w / low_scale)
    n_panels = max(2, int(math.ceil(s[-1])))
    edges = np.interp(np.linspace(0, s[-1], n_panels + 1), s, w)
    if grading is None:
        grading = 0 if model.kind in _SMOOTH_AT_ZERO else 12
    omega, weights = _gl_on_edges(edges[1:], order)
    low = np.concatenate([[0.0], _graded(edges[1], grading), [edges[1]]]) if grading else edges[:2]
    w_lo, q_lo = _gl_on_edges(low, order if not grading else max(8, order // 2))
    return FrequencyGrid.from_half(np.concatenate([w_lo, omega]), np.concatenate([q_lo, weights]), wc)


def default_band(c: float, h: float) -> float:
    """Band limit that makes the regularised diagonal of the lossless kernel
    equal to its average over one lattice cell.

    With band ``W`` the diagonal is ``W / (4 pi^2)`` near the centre while
    the cell average of ``c / (8 pi |x - y|)`` is ``CELL_INVERSE_DISTANCE * c / (8 pi h)``.
    """
    return CELL_INVERSE_DISTANCE * math.pi * c / (2 * h)


def band_frequency_grid(omega_band: float, path_scale: float, order: int = 16, max_phase: float = 12.0,
                        first: float = 0.25) -> FrequencyGrid:
    """Gauss-Legendre grid on ``[-omega_band, omega_band]`` for weak models.

    Panels double in width from ``first`` (to follow the low-frequency
    structure of ``kappa_star``) and are split so the phase
    ``omega * path_scale`` changes by at most ``max_phase`` per panel.
    """
    if omega_band <= 0:
        raise ValueError("band limit must be positive")
    edges = [0.0]
    width = first
    while edges[-1] < omega_band:
        step = min(width, max_phase / max(path_scale, 1e-300), omega_band - edges[-1])
        edges.append(edges[-1] + step)
        width *= 2
    omega, weights = _gl_on_edges(np.asarray(edges), order)
    return FrequencyGrid.from_half(omega, weights, omega_band)


# ---------------------------------------------------------------------------
# forward operator


@dataclass(frozen=True)
class OperatorMatrix:
    """Kernel samples ``exp(i kappa d)/(4 pi sqrt(2 pi) d)``; rows run over
    ``(omega_i, xi_j)`` with ``xi`` fastest, columns over interior points."""

    matrix: np.ndarray
    omega: np.ndarray        # per row
    xi_index: np.ndarray     # per row
    row_weights: np.ndarray  # w_omega * w_xi
    col_weights: np.ndarray  # interior volume weights

    def apply(self, h) -> np.ndarray:
        return self.matrix @ (self.col_weights * np.asarray(h))

    def adjoint_apply(self, g) -> np.ndarray:
        """Discrete adjoint in the weighted inner products (returns values at interior points)."""
        return self.matrix.conj().T @ (self.row_weights * np.asarray(g))


def _row_block(model, omega, dist):
    k = np.asarray(eval_kappa(model, omega))
    return np.exp(1j * k[:, None, None] * dist[None]) / dist[None]


def _forward_block(model, d, omega, weights, wxi):
    nb, ny = d.shape
    blocks = PREFACTOR * _row_block(model, omega, d)
    row_w = (weights[:, None] * wxi[None, :]).ravel()
    return blocks.reshape(len(omega) * nb, ny), row_w


def assemble_forward(model: AttenuationModel, disc: Discretization, freq: FrequencyGrid) -> OperatorMatrix:
    d = disc.distances()
    nb = d.shape[0]
    matrix, row_w = _forward_block(model, d, freq.omega, freq.weights, disc.boundary.weights)
    return OperatorMatrix(
        matrix,
        np.repeat(freq.omega, nb),
        np.tile(np.arange(nb), len(freq.omega)),
        row_w,
        disc.interior.weights.copy(),
    )


# ---------------------------------------------------------------------------
# Gram kernels


@dataclass(frozen=True)
class GramKernel:
    values: np.ndarray
    weights: np.ndarray
    hermitian_defect: float
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.weights)

    def weighted(self) -> np.ndarray:
        """``W^(1/2) F W^(1/2)``, the matrix whose eigenvalues approximate the operator's."""
        s = np.sqrt(self.weights)
        return s[:, None] * self.values * s[None, :]

    def relative_difference(self, other: "GramKernel") -> float:
        return float(np.max(np.abs(self.values - other.values)) / np.max(np.abs(self.values)))


def _hermitian_defect(values) -> float:
    scale = np.max(np.abs(values))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(values - values.conj().T)) / scale)


def _finish(values, weights, meta) -> GramKernel:
    defect = _hermitian_defect(values)
    # store the Hermitian part; the defect records what was removed
    values = 0.5 * (values + values.conj().T)
    if np.iscomplexobj(values) and not np.any(values.imag):
        values = values.real
    return GramKernel(values, np.asarray(weights, float), defect, meta)


def _gram_accumulator(n):
    """Fortran-ordered buffer for :func:`_add_gram`; only its upper triangle is meaningful."""
    return np.zeros((n, n), order="F")


def _add_gram(F, S, alpha=1.0):
    """``F += alpha S^T S`` on the upper triangle via BLAS syrk."""
    dsyrk(alpha, S, trans=1, beta=1.0, c=F, lower=0, overwrite_c=1)


def _symmetric(F):
    return np.triu(F) + np.triu(F, 1).T


def _chunks(n, size):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def gram_direct(model: AttenuationModel, disc: Discretization, freq: FrequencyGrid,
                params: StrongParams | None = None, nodes_per_chunk: int = 8) -> GramKernel:
    """Direct quadrature of the Gram integral for strong attenuation.

    Uses ``kappa(-omega) = -conj(kappa(omega))``: the terms at ``+-omega``
    are complex conjugates, so only ``omega > 0`` is summed and twice the
    real part kept.  Each chunk of nodes contributes ``S^T S`` with ``S``
    stacking the scaled real and imaginary parts of ``exp(i kappa d)/d``.
    """
    params = params if params is not None else classify(model)
    if isinstance(params, WeakSplit):
        raise WrongClassError(f"{model.name} is weakly attenuating; use gram_weak")
    d = disc.distances()
    nb, ny = d.shape
    omega, wts = freq.half
    F = _gram_accumulator(ny)
    wxi = disc.boundary.weights
    for sl in _chunks(len(omega), nodes_per_chunk):
        E = _row_block(model, omega[sl], d)  # (c, nb, ny)
        scale = np.sqrt(2 * GRAM_PREFACTOR * wts[sl, None, None] * wxi[None, :, None])
        E *= scale
        _add_gram(F, np.concatenate([E.real.reshape(-1, ny), E.imag.reshape(-1, ny)]))
    F = _symmetric(F)
    meta = {"path": "direct", "model": model.describe(), **disc.describe(), **freq.describe()}
    return _finish(F, disc.interior.weights, meta)


def gram_from_forward(model: AttenuationModel, disc: Discretization, freq: FrequencyGrid,
                      nodes_per_chunk: int = 4) -> GramKernel:
    """``P^H diag(row weights) P`` accumulated over blocks of frequency rows.

    Summing the block products over the full symmetric grid equals the
    product of the stacked operator matrix.  This is an independent check on
    :func:`gram_direct`, which folds the grid onto ``omega > 0``.
    """
    d = disc.distances()
    ny = d.shape[1]
    # P^H W P split into real gemms: Re = Pr'WPr + Pi'WPi, Im = X - X' with X = Pr'WPi
    Fr = _gram_accumulator(ny)
    X = np.zeros((ny, ny))
    for sl in _chunks(len(freq.omega), nodes_per_chunk):
        P, row_w = _forward_block(model, d, freq.omega[sl], freq.weights[sl], disc.boundary.weights)
        sq = np.sqrt(row_w)[:, None]
        Pr = P.real * sq
        Pi = P.imag * sq
        _add_gram(Fr, np.concatenate([Pr, Pi]))
        X += Pr.T @ Pi
    F = _symmetric(Fr) + 1j * (X - X.T)
    meta = {"path": "forward", "model": model.describe(), **disc.describe(), **freq.describe()}
    return _finish(F, disc.interior.weights, meta)


# ---------------------------------------------------------------------------
# weak attenuation: F0


def _weak(model_or_split) -> WeakSplit:
    if isinstance(model_or_split, WeakSplit):
        return model_or_split
    split = classify(model_or_split)
    if not isinstance(split, WeakSplit):
        raise WrongClassError(f"{model_or_split.name} is strongly attenuating; use gram_direct")
    return split


def _circle_terms(geom: BallGeometry, x: np.ndarray, y: np.ndarray):
    """Per pair: |x - y| and the coefficients A, B with |xi - x|^2 = A + B cos(phi) on the circle."""
    diff = x - y
    sep = np.linalg.norm(diff, axis=-1)
    e = diff / sep[..., None]
    mid = 0.5 * (x + y) - geom.c
    d0 = np.sum(mid * e, axis=-1)
    r2 = geom.R**2 - d0**2
    q2 = np.maximum(np.sum(mid * mid, axis=-1) - d0**2, 0.0)
    A = r2 + q2 + 0.25 * sep**2
    B = 2 * np.sqrt(r2 * q2)
    return sep, A, B


def _f0_pairs(split: WeakSplit, geom: BallGeometry, x, y, rtol=1e-10, m0=32, m_max=4096):
    """F0 for paired rows of ``x`` and ``y`` (all ``x != y``).

    On the ball ``<e, nu>`` is constant along the circle, so the projection
    factor is ``R / r`` and the line element ``r dphi``.  The periodic
    integrand is summed by the trapezoidal rule on ``[0, pi]`` (it is even
    in ``phi``) with ``m`` doubled until the relative change is below ``rtol``.
    """
    sep, A, B = _circle_terms(geom, x, y)
    if np.any(sep == 0):
        raise GeometryError("F0 is singular for x = y; use the band-limited diagonal")
    k2 = 2 * split.kappa_inf

    def trap(m):
        phi = np.pi * (np.arange(m + 1) / m)
        w = np.full(m + 1, np.pi / m)
        w[[0, -1]] *= 0.5
        d = np.sqrt(A[:, None] + B[:, None] * np.cos(phi)[None, :])
        return 2 * (np.exp(-k2 * d) / d) @ w

    m = m0
    old = trap(m)
    while True:
        m *= 2
        new = trap(m)
        if np.max(np.abs(new - old) / np.abs(new)) < rtol or m >= m_max:
            break
        old = new
    return split.c * geom.R / (16 * math.pi**2 * sep) * new


def gram_weak_F0(model, geom: BallGeometry, x, y) -> float:
    """Closed-form part of the weak Gram kernel at a pair ``x != y``."""
    x = np.asarray(x, float)[None]
    y = np.asarray(y, float)[None]
    if np.allclose(x, y, rtol=0, atol=0):
        raise GeometryError("x = y: the diagonal uses the band-limited rule (f0_band_diagonal)")
    return float(_f0_pairs(_weak(model), geom, x, y)[0])


def f0_matrix(model, geom: BallGeometry, points, block: int = 20000) -> np.ndarray:
    """Off-diagonal ``F0`` on all pairs of ``points``; the diagonal is left at 0."""
    split = _weak(model)
    pts = np.asarray(points, float)
    n = len(pts)
    ia, ib = np.triu_indices(n, 1)
    out = np.zeros((n, n))
    for sl in _chunks(len(ia), block):
        vals = _f0_pairs(split, geom, pts[ia[sl]], pts[ib[sl]])
        out[ia[sl], ib[sl]] = vals
        out[ib[sl], ia[sl]] = vals
    return out


def f0_band_diagonal(model, disc: Discretization, omega_band: float) -> np.ndarray:
    """Diagonal of the band-limited ``F0``: ``2 W/(32 pi^3) * sum_xi w exp(-2 kinf d)/d^2``."""
    split = _weak(model)
    d = disc.distances()
    vals = (disc.boundary.weights[:, None] * np.exp(-2 * split.kappa_inf * d) / d**2).sum(0)
    return 2 * omega_band * GRAM_PREFACTOR * vals


# ---------------------------------------------------------------------------
# weak attenuation: F1


@dataclass(frozen=True)
class KappaStarTransform:
    """Inverse transform ``(1/sqrt(2 pi)) int kappa_star(omega) exp(i omega t) d omega`` on a uniform t-grid.

    A tail ``a/omega`` of ``kappa_star`` is split off as ``a omega/(omega^2+1)``
    whose transform ``i a sqrt(pi/2) sign(t) exp(-|t|)`` is added exactly;
    the absolutely integrable remainder goes through the FFT.
    """

    t: np.ndarray
    values: np.ndarray
    tail: float
    omega_band: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        im = np.interp(t, self.t, self.values.imag, left=0.0, right=0.0)
        if self.imaginary:
            return 1j * im
        return np.interp(t, self.t, self.values.real, left=0.0, right=0.0) + 1j * im

    @property
    def imaginary(self) -> bool:
        """True for symmetric ``kappa_star``, whose transform is purely imaginary."""
        return bool(np.all(np.abs(self.values.real) <= 1e-13 * max(np.max(np.abs(self.values)), 1e-300)))

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def l2_norm(self) -> float:
        return float(np.sqrt(np.trapezoid(np.abs(self.values) ** 2, self.t)))


def kappa_star_transform(model, t_max: float, pad: int = 8, period: float | None = None,
                         rel_floor: float = 1e-6) -> KappaStarTransform:
    """Tabulate the inverse transform of ``kappa_star`` on ``[-t_max, t_max]``.

    The remainder is sampled uniformly up to the band where it falls below
    ``rel_floor`` of ``max |kappa_star|``, zero-padded by ``pad`` and
    transformed with one FFT.
    """
    split = _weak(model)
    ks = split.kappa_star
    if split.trivial:
        t = np.linspace(-t_max, t_max, 3)
        return KappaStarTransform(t, np.zeros(3, complex), 0.0, 0.0)
    w_probe = 1e4
    tail = float(w_probe * np.real(ks(np.array([w_probe]))[0]))

    def rem(w):
        return ks(w) - tail * w / (w * w + 1)

    probe = np.geomspace(1e-3, 1e7, 2000)
    peak = float(np.max(np.abs(ks(probe))))
    big = probe[np.abs(rem(probe)) >= rel_floor * peak]
    band = float(big.max() * 1.5) if big.size else 10.0
    period = period if period is not None else max(64 * t_max, 200.0)
    dw = 2 * math.pi / period
    n = int(2 ** math.ceil(math.log2(2 * band / dw)))
    k = np.arange(-n // 2, n // 2)
    samples = rem(dw * k)
    ntot = pad * n
    spec = np.zeros(ntot, dtype=complex)
    spec[:n // 2] = samples[n // 2:]
    spec[-(n // 2):] = samples[: n // 2]
    # sum_k r_k exp(i w_k t_m) dw / sqrt(2 pi), t_m = m * 2 pi / (ntot dw)
    vals = np.fft.ifft(spec) * ntot * dw / math.sqrt(2 * math.pi)
    vals = np.fft.fftshift(vals)
    t = (np.arange(ntot) - ntot // 2) * (2 * math.pi / (ntot * dw))
    keep = np.abs(t) <= t_max * 1.05
    t, vals = t[keep], vals[keep]
    vals = vals + 1j * tail * math.sqrt(math.pi / 2) * np.sign(t) * np.exp(-np.abs(t))
    return KappaStarTransform(t, vals, tail, band)


def _f1_rows(split, transform, d_rows, d_all, wxi):
    """``sum_xi w exp(-kinf (d_a + d_b)) kcheck((d_b - d_a)/c) / d_a`` for a block of rows a."""
    da = d_rows.T[:, :, None]   # (ra, nb, 1)
    db = d_all[None, :, :]      # (1, nb, ny)
    delta = (db - da) / split.c
    kc = transform(delta)
    damp = np.exp(-split.kappa_inf * (da + db))
    return np.einsum("anb,n->ab", damp * kc / da, wxi)


def f1_matrix(model, disc: Discretization, transform: KappaStarTransform | None = None,
              rows_per_block: int = 8) -> np.ndarray:
    """First-order correction on all pairs (diagonal included, it is finite)."""
    split = _weak(model)
    if split.trivial:
        return np.zeros((disc.n_interior,) * 2)
    d = disc.distances()
    if transform is None:
        transform = kappa_star_transform(split, 2 * disc.geom.inner_radius / split.c)
    if np.ptp(d) / split.c > transform.t_max * 1.0001:
        log.warning("kappa_star transform table shorter than the path differences; tail treated as 0")
    wxi = disc.boundary.weights
    ny = disc.n_interior
    G = np.empty((ny, ny), dtype=complex)
    for sl in _chunks(ny, rows_per_block):
        G[sl] = _f1_rows(split, transform, d[:, sl], d, wxi)
    # F1[a,b] = i/(16 pi^2 sqrt(2 pi)) (G[a,b] - conj(G[b,a])) with G[a,b] = sum kcheck((d_b-d_a)/c)/d_a
    pref = 1 / (16 * math.pi**2 * math.sqrt(2 * math.pi))
    F1 = 1j * pref * (G - G.conj().T)
    if not np.any(np.abs(F1.imag) > 1e-14 * np.max(np.abs(F1))):
        F1 = F1.real
    return F1


def gram_weak_F1(model, disc: Discretization, x, y, transform: KappaStarTransform | None = None):
    """First-order correction at a single pair (``x = y`` allowed)."""
    split = _weak(model)
    if split.trivial:
        return 0j
    if transform is None:
        transform = kappa_star_transform(split, 2 * disc.geom.inner_radius / split.c)
    xi = disc.boundary.points
    da = np.linalg.norm(xi - np.asarray(x, float), axis=1)
    db = np.linalg.norm(xi - np.asarray(y, float), axis=1)
    w = disc.boundary.weights
    damp = np.exp(-split.kappa_inf * (da + db))
    vals = 1j * damp * (transform((db - da) / split.c) / da - np.conj(transform((da - db) / split.c)) / db)
    return complex(np.dot(w, vals) / (16 * math.pi**2 * math.sqrt(2 * math.pi)))


# ---------------------------------------------------------------------------
# weak attenuation: F2


def f2_matrix(model, disc: Discretization, freq: FrequencyGrid, nodes_per_chunk: int = 4) -> np.ndarray:
    """Second-order remainder, summed over the band grid ``freq``.

    With ``E = exp(i kappa d)/d`` and ``E0 = exp(i (omega/c + i kinf) d)/d`` the
    boundary sum of ``f2`` at one frequency is

        E^H W E - E0^H W E0 - (X + X^H),   X = i kappa_star E0^H W (d E0),

    and the nodes at ``+-omega`` are conjugate, so twice the real part of the
    ``omega > 0`` sum is kept.
    """
    split = _weak(model)
    ny = disc.n_interior
    if split.trivial:
        return np.zeros((ny, ny))
    d = disc.distances()
    omega, wts = freq.half
    wxi = disc.boundary.weights
    F2 = _gram_accumulator(ny)
    cross = np.zeros((ny, ny))
    for sl in _chunks(len(omega), nodes_per_chunk):
        om = omega[sl]
        scale = np.sqrt(2 * GRAM_PREFACTOR * wts[sl, None, None] * wxi[None, :, None])
        E = _row_block(split_model(split, model), om, d) * scale
        k0 = om / split.c + 1j * split.kappa_inf
        E0 = np.exp(1j * k0[:, None, None] * d[None]) / d[None] * scale
        kst = np.asarray(split.kappa_star(om))
        _add_gram(F2, np.concatenate([E.real.reshape(-1, ny), E.imag.reshape(-1, ny)]))
        _add_gram(F2, np.concatenate([E0.real.reshape(-1, ny), E0.imag.reshape(-1, ny)]), -1.0)
        DE0 = (1j * kst[:, None, None]) * d[None] * E0
        cross += (E0.conj().reshape(-1, ny).T @ DE0.reshape(-1, ny)).real
    return _symmetric(F2) - (cross + cross.T)


def split_model(split: WeakSplit, model):
    """The model a split came from, or a custom model rebuilt from the split."""
    if isinstance(model, AttenuationModel):
        return model
    c, kinf, ks = split.c, split.kappa_inf, split.kappa_star
    from .attenuation import custom

    return custom(lambda w: w / c + 1j * kinf + ks(w), name="from_split")


def gram_weak_F2(model, disc: Discretization, x, y, freq: FrequencyGrid) -> float:
    """Second-order remainder at a single pair, by the same quadrature as :func:`f2_matrix`."""
    pts = np.array([x, y], float)
    sub = Discretization(disc.geom, disc.boundary, InteriorGrid(pts, np.ones(2), disc.interior.h))
    return float(f2_matrix(model, sub, freq)[0, 1])


def gram_weak(model: AttenuationModel, disc: Discretization, omega_band: float | None = None,
              freq: FrequencyGrid | None = None, transform: KappaStarTransform | None = None) -> GramKernel:
    """Weak Gram kernel ``F0 + F1 + F2``.

    Off the diagonal ``F0`` is the closed-form circle integral.  On the
    diagonal it is replaced by the band-limited value, with the band
    ``omega_band`` (default :func:`default_band`) shared by the ``F2``
    quadrature.
    """
    split = _weak(model)
    band = omega_band if omega_band is not None else default_band(split.c, disc.interior.h)
    if freq is None:
        freq = band_frequency_grid(band, 2 * disc.geom.inner_radius / split.c)
    pts = disc.interior.points
    F = f0_matrix(split, disc.geom, pts)
    F[np.diag_indices_from(F)] = f0_band_diagonal(split, disc, band)
    lossless = split.trivial
    if not lossless:
        F = F + f1_matrix(split, disc, transform)
        F = F + f2_matrix(model, disc, freq)
    meta = {"path": "weak", "model": model.describe(), **disc.describe(), "omega_band": band,
            "c": split.c, "kappa_inf": split.kappa_inf, "n_omega": len(freq)}
    return _finish(F, disc.interior.weights, meta)


def gram(model: AttenuationModel, disc: Discretization, **kwargs) -> GramKernel:
    """Dispatch on the attenuation class."""
    params = classify(model)
    if isinstance(params, WeakSplit):
        return gram_weak(model, disc, **kwargs)
    freq = kwargs.pop("freq", None) or strong_frequency_grid(model, disc, params, **kwargs)
    return gram_direct(model, disc, freq, params)
