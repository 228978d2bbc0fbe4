"""Eigenvalues of weighted Gram matrices and fits of power and stretched-exponential decay."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AssemblyDefectError",
    "FitError",
    "SpectrumReport",
    "DecayLaw",
    "DecayFit",
    "CrossoverReport",
    "eigen_spectrum",
    "spectrum_from_values",
    "fit_power",
    "fit_stretched",
    "compare_decay",
    "default_range",
    "parse_range",
    "STRETCH_DIMENSION",
]

#: spatial dimension entering the stretched exponent ``s = beta / (N m)``
STRETCH_DIMENSION = 3
NEGATIVE_TOL = 1e-6
FIT_FLOOR = 1e-14


class AssemblyDefectError(ValueError):
    """A weighted Gram matrix has an eigenvalue well below zero."""


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray  # descending, clamped at 0
    meta: dict = field(default_factory=dict)
    min_raw: float = 0.0     # most negative eigenvalue before clamping

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    def __len__(self):
        return self.n_modes


def spectrum_from_values(values, meta: dict | None = None, tol: float = NEGATIVE_TOL) -> SpectrumReport:
    """Sort raw eigenvalues descending and clamp the small negative ones."""
    lam = np.sort(np.asarray(values, dtype=float))[::-1]
    top = lam[0] if lam.size else 0.0
    low = float(lam[-1]) if lam.size else 0.0
    if lam.size and low < -tol * max(top, 0.0):
        raise AssemblyDefectError(f"eigenvalue {low:.3e} below -{tol:g} * lambda_1 = {-tol * top:.3e}")
    return SpectrumReport(np.maximum(lam, 0.0), dict(meta or {}), min(low, 0.0))


def eigen_spectrum(gram, tol: float = NEGATIVE_TOL) -> SpectrumReport:
    """Spectrum of ``W^(1/2) F W^(1/2)``.

    ``gram`` is a :class:`~attenuspec.operator.GramKernel` or a plain square
    matrix (unit weights).
    """
    if hasattr(gram, "weighted"):
        M, meta = gram.weighted(), dict(gram.meta)
    else:
        M, meta = np.asarray(gram), {}
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return spectrum_from_values(np.linalg.eigvalsh(M), meta, tol)


class DecayLaw(str, enum.Enum):
    POWER = "power"
    STRETCHED = "stretched"


@dataclass(frozen=True)
class DecayFit:
    """``log lambda_n ~ intercept - rate * g(n)`` with ``g = log n`` or ``n^s``.

    For the power law ``rate`` is the exponent ``p`` and ``prefactor = exp(intercept)``
    is ``C``; for the stretched law ``rate`` is ``c``.
    """

    law: DecayLaw
    rate: float
    prefactor: float
    r_squared: float
    fit_range: tuple[int, int]
    s: float | None = None

    @property
    def p(self) -> float:
        return self.rate

    @property
    def c(self) -> float:
        return self.rate

    def predict(self, n):
        n = np.asarray(n, dtype=float)
        g = np.log(n) if self.law is DecayLaw.POWER else n**self.s
        return self.prefactor * np.exp(-self.rate * g)

    def as_dict(self) -> dict:
        return {"law": self.law.value, "rate": self.rate, "prefactor": self.prefactor,
                "r_squared": self.r_squared, "n_lo": self.fit_range[0], "n_hi": self.fit_range[1],
                "s": self.s}


def _values(spectrum) -> np.ndarray:
    if isinstance(spectrum, SpectrumReport):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=float)


def default_range(n_modes: int) -> tuple[int, int]:
    return 5, max(n_modes // 4, 5)


def parse_range(text: str) -> tuple[int, int]:
    """``"5:64"`` -> ``(5, 64)``; both ends are 1-based and inclusive."""
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"range must look like lo:hi, got {text!r}")
    return int(lo), int(hi)


def _window(lam, fit_range, floor):
    n_lo, n_hi = fit_range if fit_range is not None else default_range(len(lam))
    if not 1 <= n_lo < n_hi <= len(lam):
        raise FitError(f"fit range {n_lo}:{n_hi} outside 1:{len(lam)}")
    n = np.arange(n_lo, n_hi + 1)
    vals = lam[n_lo - 1:n_hi]
    if np.any(vals <= 0):
        raise FitError("nonpositive eigenvalue inside the fit range")
    keep = vals >= floor * lam[0]
    if keep.sum() < 10:
        raise FitError(f"need at least 10 eigenvalues above the floor, have {int(keep.sum())}")
    return n[keep].astype(float), np.log(vals[keep]), (int(n_lo), int(n_hi))


def _linear_fit(g, y):
    A = np.column_stack([np.ones_like(g), -g])
    (intercept, rate), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([intercept, rate])
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(rate), float(intercept), min(max(r2, 0.0), 1.0)


def fit_power(spectrum, fit_range: tuple[int, int] | None = None, floor: float = FIT_FLOOR) -> DecayFit:
    """Least squares ``log lambda_n = log C - p log n`` over the 1-based inclusive range."""
    n, y, rng = _window(_values(spectrum), fit_range, floor)
    p, intercept, r2 = _linear_fit(np.log(n), y)
    return DecayFit(DecayLaw.POWER, p, float(np.exp(intercept)), r2, rng)


def fit_stretched(spectrum, s: float, fit_range: tuple[int, int] | None = None,
                  floor: float = FIT_FLOOR) -> DecayFit:
    """Least squares ``log lambda_n = a - c n^s``."""
    if not s > 0:
        raise FitError("stretch exponent s must be positive")
    n, y, rng = _window(_values(spectrum), fit_range, floor)
    c, a, r2 = _linear_fit(n**s, y)
    return DecayFit(DecayLaw.STRETCHED, c, float(np.exp(a)), r2, rng, float(s))


@dataclass(frozen=True)
class CrossoverReport:
    ratio: np.ndarray          # strong / weak, mode by mode
    crossover: int | None      # 1-based index from which strong < weak for good

    def as_dict(self) -> dict:
        return {"crossover": self.crossover, "n_compared": len(self.ratio)}


def compare_decay(weak_spec, strong_spec, floor: float = FIT_FLOOR) -> CrossoverReport:
    """Mode-wise ratio and the index beyond which the strong spectrum stays below the weak one.

    Only modes where both spectra sit above ``floor * lambda_1`` are compared,
    so the double-precision noise tail does not decide the answer.
    """
    w, s = _values(weak_spec), _values(strong_spec)
    n = min(len(w), len(s))
    w, s = w[:n], s[:n]
    valid = (w > floor * w[0]) & (s > floor * s[0]) if n else np.zeros(0, bool)
    m = int(np.argmin(valid)) if not valid.all() else n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(w[:m] > 0, s[:m] / w[:m], np.nan)
    below = ratio < 1
    if m == 0 or not below[-1]:
        return CrossoverReport(ratio, None)
    above = np.flatnonzero(~below)
    start = int(above[-1]) + 1 if above.size else 0
    return CrossoverReport(ratio, start + 1)
