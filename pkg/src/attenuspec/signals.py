"""Pressure traces from the frequency-domain solution, with causality and arrival-time checks.

A source density ``h`` sampled at interior points gives the boundary
spectrum ``p(omega, xi) = sum_y G(omega, xi - y) h(y) w(y)``; an inverse
FFT with a raised-cosine taper turns it into a real time trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attenuation import AttenuationModel, eval_kappa
from .geometry import BallGeometry, InteriorGrid, interior_grid
from .wavekernel import PREFACTOR

__all__ = [
    "SynthesisGrid",
    "TimeTrace",
    "Source",
    "FrontReport",
    "point_source",
    "ball_source",
    "parse_source",
    "synthesize",
    "causality_check",
    "window_allowance",
    "front_time",
    "front_speed_check",
    "fwhm",
]


@dataclass(frozen=True)
class SynthesisGrid:
    """``n_t`` frequencies ``k dw``, ``k = -n_t/2 .. n_t/2 - 1`` with ``dw = 2 omega_cut / n_t``.

    The matching time grid has step ``pi / omega_cut`` and is centred on 0.
    """

    omega_cut: float = 128.0
    n_t: int = 4096
    taper: float = 0.1  # fraction of the band covered by the raised cosine

    def __post_init__(self):
        if self.n_t < 8 or self.n_t & (self.n_t - 1):
            raise ValueError(f"n_t must be a power of two >= 8, got {self.n_t}")
        if not self.omega_cut > 0:
            raise ValueError("omega_cut must be positive")
        if not 0 <= self.taper < 1:
            raise ValueError("taper fraction must lie in [0, 1)")

    @property
    def d_omega(self) -> float:
        return 2 * self.omega_cut / self.n_t

    @property
    def dt(self) -> float:
        return math.pi / self.omega_cut

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.n_t // 2, self.n_t // 2)

    @property
    def omega(self) -> np.ndarray:
        return self.k * self.d_omega

    @property
    def t(self) -> np.ndarray:
        return self.k * self.dt

    def window(self) -> np.ndarray:
        """Raised cosine on the top ``taper`` fraction of ``|omega|``; 0 at DC and at the unpaired Nyquist bin."""
        a = np.abs(self.omega) / self.omega_cut
        edge = 1 - self.taper
        win = np.ones_like(a)
        if self.taper > 0:
            top = a > edge
            win[top] = 0.5 * (1 + np.cos(math.pi * (a[top] - edge) / self.taper))
        win[self.k == 0] = 0.0
        win[self.k == -self.n_t // 2] = 0.0
        return win

    def describe(self) -> dict:
        return {"omega_cut": self.omega_cut, "n_t": self.n_t, "taper": self.taper, "dt": self.dt}


@dataclass(frozen=True)
class TimeTrace:
    t: np.ndarray
    values: np.ndarray
    detector: np.ndarray
    imag_residue: float  # max |Im| / max |Re| before the real part was taken

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def energy(self) -> float:
        return float(np.sum(self.values**2) * self.dt)


@dataclass(frozen=True)
class Source:
    points: np.ndarray   # (n, 3)
    weights: np.ndarray  # quadrature weights (volume units)
    values: np.ndarray   # h at the points

    def __add__(self, other: "Source") -> "Source":
        if not (np.array_equal(self.points, other.points) and np.array_equal(self.weights, other.weights)):
            raise ValueError("sources must share their points to be added")
        return Source(self.points, self.weights, self.values + other.values)

    def scaled(self, s: float) -> "Source":
        return Source(self.points, self.weights, s * self.values)


def point_source(at=(0.0, 0.0, 0.0), strength: float = 1.0) -> Source:
    return Source(np.asarray([at], float), np.ones(1), np.array([float(strength)]))


def ball_source(radius: float, center=(0.0, 0.0, 0.0), h: float | None = None) -> Source:
    """Indicator of a ball sampled on a cubic lattice (spacing ``radius/5`` by default)."""
    h = radius / 5 if h is None else h
    # the lattice helper clips at R - eps, so any eps in (0, R) with R - eps = radius works
    g: InteriorGrid = interior_grid(BallGeometry(2 * radius, radius, tuple(center)), h)
    return Source(g.points, g.weights, np.ones(len(g)))


def parse_source(text: str) -> Source:
    """``point``, ``point:x,y,z`` or ``ball:radius``."""
    kind, _, arg = text.partition(":")
    if kind == "point":
        return point_source(tuple(float(v) for v in arg.split(",")) if arg else (0.0, 0.0, 0.0))
    if kind == "ball" and arg:
        return ball_source(float(arg))
    raise ValueError(f"source must be 'point', 'point:x,y,z' or 'ball:r', got {text!r}")


def _spectrum(model, source: Source, detector, omega):
    d = np.linalg.norm(source.points - np.asarray(detector, float), axis=1)
    if np.any(d == 0):
        raise ValueError("detector coincides with a source point")
    k = np.asarray(eval_kappa(model, omega))
    amp = source.weights * source.values / d
    return -1j * omega * PREFACTOR * (np.exp(1j * k[:, None] * d[None, :]) @ amp)


def _centred_sum(spec):
    # sum_k spec_k exp(-2 pi i k m / n) for centred k and m (w_k t_m = 2 pi k m / n)
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(spec)))


def synthesize(model: AttenuationModel, source: Source, detector, grid: SynthesisGrid = SynthesisGrid(),
               geom: BallGeometry | None = None) -> TimeTrace:
    """Real time trace at ``detector`` for the source density ``source``.

    ``p(t) = (1/sqrt(2 pi)) sum_k p(omega_k) window_k exp(-i omega_k t) dw`` on
    the grid's time samples.  ``geom`` (optional) checks that the detector
    sits on the measurement sphere.
    """
    detector = np.asarray(detector, float)
    if geom is not None and abs(np.linalg.norm(detector - geom.c) - geom.R) > 1e-9 * geom.R:
        raise ValueError("detector is not on the measurement sphere")
    omega = grid.omega
    win = grid.window()
    spec = np.zeros(grid.n_t, dtype=complex)
    live = win > 0
    spec[live] = _spectrum(model, source, detector, omega[live]) * win[live]
    vals = _centred_sum(spec) * grid.d_omega / math.sqrt(2 * math.pi)
    peak = float(np.max(np.abs(vals.real)))
    residue = float(np.max(np.abs(vals.imag)) / peak) if peak > 0 else 0.0
    return TimeTrace(grid.t, vals.real.copy(), detector, residue)


def causality_check(trace: TimeTrace) -> float:
    """Share of the trace energy at negative times (0 for a zero trace)."""
    total = float(np.sum(trace.values**2))
    if total == 0:
        return 0.0
    return float(np.sum(trace.values[trace.t < 0] ** 2) / total)


def front_time(trace: TimeTrace, level: float = 1e-3) -> float:
    """First sample time at which the running energy exceeds ``level`` of the total."""
    e = np.cumsum(trace.values**2)
    if e[-1] == 0:
        return math.nan
    return float(trace.t[int(np.argmax(e > level * e[-1]))])


def window_allowance(grid: SynthesisGrid = SynthesisGrid(), level: float = 1e-3) -> float:
    """How far ahead of its centre the windowed band-limited ``delta'`` pulse reaches ``level``.

    This is the arrival blur that the taper and the band limit alone introduce.
    """
    win = grid.window()
    spec = -1j * grid.omega * win
    vals = _centred_sum(spec)
    pulse = TimeTrace(grid.t, vals.real, np.zeros(3), 0.0)
    return -front_time(pulse, level)


@dataclass(frozen=True)
class FrontReport:
    arrival: float
    earliest: float        # dist / c - 3 dt - allowance
    allowance: float
    ok: bool
    skipped: bool = False
    notice: str = ""


def front_speed_check(trace: TimeTrace, dist: float, c_claim: float, grid: SynthesisGrid | None = None,
                      level: float = 1e-3) -> FrontReport:
    """Check that nothing arrives meaningfully before ``dist / c_claim``."""
    arrival = front_time(trace, level)
    if not math.isfinite(c_claim):
        return FrontReport(arrival, -math.inf, 0.0, True, True,
                           "propagation speed is infinite; the arrival-time check does not apply")
    if grid is None:
        n = len(trace.t)
        grid = SynthesisGrid(math.pi / trace.dt, n)
    allowance = window_allowance(grid, level)
    earliest = dist / c_claim - 3 * trace.dt - allowance
    return FrontReport(arrival, earliest, allowance, arrival >= earliest)


def fwhm(trace: TimeTrace) -> float:
    """Width of the connected region around the peak where ``|p| >= max|p| / 2``."""
    a = np.abs(trace.values)
    i = int(np.argmax(a))
    half = a[i] / 2
    lo = i
    while lo > 0 and a[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < len(a) - 1 and a[hi + 1] >= half:
        hi += 1
    return float((hi - lo + 1) * trace.dt)
