"""Attenuation coefficients and their holomorphic extensions.

An attenuation coefficient replaces the wavenumber ``omega / c`` of the
lossless wave equation by a complex ``kappa(omega)``; its imaginary part
damps the wave.  Every catalog model is given by one closed-form
expression in a complex frequency ``z``.  On the real axis it is the
coefficient itself and in the closed upper half-plane it is the extension
used for causality and the propagation speed.

Fractional powers use the principal branch, ``arg`` in ``(-pi, pi]``,
which is what ``numpy`` does for complex arguments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "ModelKind",
    "AttenuationModel",
    "StrongParams",
    "WeakSplit",
    "ParameterError",
    "DomainError",
    "ClassificationError",
    "NoLimitError",
    "thermo_viscous",
    "ksb",
    "power_law",
    "modified_szabo",
    "nachman_smith_waag",
    "linear",
    "custom",
    "model_from_config",
    "eval_kappa",
    "eval_kappa_tilde",
    "propagation_speed",
    "classify",
    "validate_symmetry",
    "range_grid",
    "RangeSample",
    "default_classification_grid",
]


class ParameterError(ValueError):
    """A model parameter lies outside its admissible range."""


class DomainError(ValueError):
    """An argument lies outside the domain of an evaluation."""


class ClassificationError(ValueError):
    """Samples fit neither the strong nor the weak attenuation class."""


class NoLimitError(ArithmeticError):
    """The speed ladder neither converged nor diverged monotonically."""


class ModelKind(str, enum.Enum):
    THERMO_VISCOUS = "thermo_viscous"
    KSB = "ksb"
    POWER_LAW = "power_law"
    MODIFIED_SZABO = "modified_szabo"
    NACHMAN_SMITH_WAAG = "nachman_smith_waag"
    LINEAR = "linear"
    CUSTOM = "custom"


_ALIASES = {
    "thermoviscous": ModelKind.THERMO_VISCOUS,
    "tv": ModelKind.THERMO_VISCOUS,
    "nsw": ModelKind.NACHMAN_SMITH_WAAG,
    "szabo": ModelKind.MODIFIED_SZABO,
    "powerlaw": ModelKind.POWER_LAW,
    "linear_non_attenuating": ModelKind.LINEAR,
    "non_attenuating": ModelKind.LINEAR,
}

# required parameter names per kind
_PARAMS = {
    ModelKind.THERMO_VISCOUS: ("tau",),
    ModelKind.KSB: ("alpha", "gamma", "tau"),
    ModelKind.POWER_LAW: ("alpha", "gamma"),
    ModelKind.MODIFIED_SZABO: ("alpha", "gamma"),
    ModelKind.NACHMAN_SMITH_WAAG: ("c0", "tau", "tau_tilde"),
    ModelKind.LINEAR: ("c",),
    ModelKind.CUSTOM: (),
}


def _check_params(kind: ModelKind, params: Mapping[str, float]) -> None:
    missing = [p for p in _PARAMS[kind] if p not in params]
    if missing:
        raise ParameterError(f"{kind.value}: missing parameters {missing}")
    for name, value in params.items():
        if not math.isfinite(value):
            raise ParameterError(f"{kind.value}: parameter {name}={value} is not finite")
    positive = {"tau", "alpha", "c0", "c", "tau_tilde"}
    for name in positive & params.keys():
        if params[name] <= 0:
            raise ParameterError(f"{kind.value}: {name} must be > 0, got {params[name]}")
    if "gamma" in params and not 0 < params["gamma"] < 1:
        raise ParameterError(f"{kind.value}: gamma must lie in (0, 1), got {params['gamma']}")
    if kind is ModelKind.NACHMAN_SMITH_WAAG and not params["tau_tilde"] < params["tau"]:
        raise ParameterError("nachman_smith_waag: need 0 < tau_tilde < tau")


@dataclass(frozen=True)
class AttenuationModel:
    """An attenuation law ``kappa`` with its parameters.

    Use the factory functions (:func:`power_law`, :func:`thermo_viscous`, ...)
    rather than constructing this directly.  For ``CUSTOM`` models the
    callables ``kappa_fn`` and optionally ``kappa_tilde_fn`` supply the law.
    """

    kind: ModelKind
    params: Mapping[str, float] = field(default_factory=dict)
    kappa_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    kappa_tilde_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = {k: float(v) for k, v in dict(self.params).items()}
        _check_params(kind, params)
        object.__setattr__(self, "params", MappingProxyType(params))
        if kind is ModelKind.CUSTOM and self.kappa_fn is None:
            raise ParameterError("custom model needs kappa_fn")
        if not self.name:
            object.__setattr__(self, "name", kind.value)

    def __getattr__(self, item):
        # expose parameters as attributes: model.tau, model.alpha, ...
        params = object.__getattribute__(self, "params")
        if item in params:
            return params[item]
        raise AttributeError(item)

    @property
    def has_extension(self) -> bool:
        return self.kind is not ModelKind.CUSTOM or self.kappa_tilde_fn is not None

    def kappa(self, omega):
        return eval_kappa(self, omega)

    def kappa_tilde(self, z):
        return eval_kappa_tilde(self, z)

    def describe(self) -> dict:
        return {"model": self.kind.value, **dict(self.params)}


def thermo_viscous(tau: float = 1.0) -> AttenuationModel:
    """``kappa = omega / sqrt(1 - i tau omega)``."""
    return AttenuationModel(ModelKind.THERMO_VISCOUS, {"tau": tau})


def ksb(alpha: float = 1.0, gamma: float = 0.5, tau: float = 1.0) -> AttenuationModel:
    """KSB relaxation law ``kappa = omega (1 + alpha / sqrt(1 + (-i tau omega)^gamma))``."""
    return AttenuationModel(ModelKind.KSB, {"alpha": alpha, "gamma": gamma, "tau": tau})


def power_law(alpha: float = 1.0, gamma: float = 0.5) -> AttenuationModel:
    """``kappa = omega + i alpha (-i omega)^gamma``."""
    return AttenuationModel(ModelKind.POWER_LAW, {"alpha": alpha, "gamma": gamma})


def modified_szabo(alpha: float = 1.0, gamma: float = 0.5) -> AttenuationModel:
    """``kappa = omega sqrt(1 + alpha (-i omega)^(gamma - 1))``."""
    return AttenuationModel(ModelKind.MODIFIED_SZABO, {"alpha": alpha, "gamma": gamma})


def nachman_smith_waag(c0: float = 1.0, tau: float = 2.0, tau_tilde: float = 1.0) -> AttenuationModel:
    """Single relaxation process, ``kappa = omega/c0 sqrt((1 - i tt omega)/(1 - i tau omega))``."""
    return AttenuationModel(ModelKind.NACHMAN_SMITH_WAAG, {"c0": c0, "tau": tau, "tau_tilde": tau_tilde})


def linear(c: float = 1.0) -> AttenuationModel:
    """Lossless medium, ``kappa = omega / c``."""
    return AttenuationModel(ModelKind.LINEAR, {"c": c})


def custom(kappa_fn, kappa_tilde_fn=None, name: str = "custom") -> AttenuationModel:
    """Wrap a user supplied vectorised ``kappa`` (and optionally its extension)."""
    return AttenuationModel(ModelKind.CUSTOM, {}, kappa_fn, kappa_tilde_fn, name)


def model_from_config(block: Mapping) -> AttenuationModel:
    """Build a model from a config block such as ``{"model": "power_law", "alpha": 1, "gamma": 0.5}``."""
    if "model" not in block:
        raise ParameterError("model block needs a 'model' key")
    raw = str(block["model"]).lower().replace("-", "_")
    try:
        kind = _ALIASES.get(raw) or ModelKind(raw)
    except ValueError:
        known = sorted({k.value for k in ModelKind} | _ALIASES.keys())
        raise ParameterError(f"unknown model {block['model']!r}; known: {known}") from None
    if kind is ModelKind.CUSTOM:
        raise ParameterError("custom models cannot be built from a config block")
    params = {k: v for k, v in block.items() if k != "model"}
    unknown = set(params) - set(_PARAMS[kind])
    if unknown:
        raise ParameterError(f"{kind.value}: unexpected parameters {sorted(unknown)}")
    return AttenuationModel(kind, params)


# ---------------------------------------------------------------------------
# evaluation


def _formula(model: AttenuationModel, z: np.ndarray) -> np.ndarray:
    p = model.params
    kind = model.kind
    if kind is ModelKind.THERMO_VISCOUS:
        return z / np.sqrt(1 - 1j * p["tau"] * z)
    if kind is ModelKind.KSB:
        return z * (1 + p["alpha"] / np.sqrt(1 + (-1j * p["tau"] * z) ** p["gamma"]))
    if kind is ModelKind.POWER_LAW:
        return z + 1j * p["alpha"] * (-1j * z) ** p["gamma"]
    if kind is ModelKind.MODIFIED_SZABO:
        return z * np.sqrt(1 + p["alpha"] * (-1j * z) ** (p["gamma"] - 1))
    if kind is ModelKind.NACHMAN_SMITH_WAAG:
        return z / p["c0"] * np.sqrt((1 - 1j * p["tau_tilde"] * z) / (1 - 1j * p["tau"] * z))
    if kind is ModelKind.LINEAR:
        return z / p["c"]
    raise AssertionError(kind)


def _evaluate(model, z, fn):
    z = np.asarray(z, dtype=complex)
    zero = z == 0
    safe = np.where(zero, 1.0, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(fn(safe), dtype=complex)
    out = np.where(zero, 0j, out)
    return out if out.ndim else complex(out)


def eval_kappa(model: AttenuationModel, omega):
    """Attenuation coefficient at real frequencies (scalar or array)."""
    omega = np.asarray(omega)
    if np.iscomplexobj(omega) or not np.all(np.isfinite(omega)):
        raise DomainError("omega must be real and finite")
    if model.kind is ModelKind.CUSTOM:
        return _evaluate(model, omega.astype(float), lambda w: model.kappa_fn(w.real))
    return _evaluate(model, omega, lambda w: _formula(model, w))


def eval_kappa_tilde(model: AttenuationModel, z):
    """Holomorphic extension at ``Im z >= 0``; on the real axis this is :func:`eval_kappa`."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise DomainError("kappa_tilde is only defined for Im z >= 0")
    if model.kind is ModelKind.CUSTOM:
        if model.kappa_tilde_fn is None:
            if np.any(z.imag != 0):
                raise DomainError(f"{model.name}: no holomorphic extension supplied")
            return eval_kappa(model, z.real)
        def fn(w):
            return np.where(w.imag == 0, model.kappa_fn(w.real), model.kappa_tilde_fn(w))

        return _evaluate(model, z, fn)
    return _evaluate(model, z, lambda w: _formula(model, w))


def validate_symmetry(model: AttenuationModel, grid) -> float:
    """Largest ``|kappa(-omega) + conj(kappa(omega))|`` over the grid."""
    w = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(eval_kappa(model, -w) + np.conj(eval_kappa(model, w))), initial=0.0))


@dataclass(frozen=True)
class RangeSample:
    z: np.ndarray
    kappa: np.ndarray
    flagged: np.ndarray

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flagged))


def range_grid(model: AttenuationModel, z, tol: float = 1e-10) -> RangeSample:
    """Evaluate the extension on half-plane samples and flag points mapped below the axis."""
    z = np.asarray(z, dtype=complex).ravel()
    k = np.atleast_1d(eval_kappa_tilde(model, z))
    return RangeSample(z, k, k.imag < -tol)


def propagation_speed(model: AttenuationModel, omega_max: float = 1e6, tol: float = 1e-6,
                      n_steps: int = 24) -> float:
    """Limit of ``i omega / kappa_tilde(i omega)`` as ``omega -> inf``.

    The ratio is sampled on the ladder ``omega_max * 2**-k``.  Three
    consecutive doublings that each grow the magnitude, with an overall
    factor above 2, mean the limit is infinite.  Otherwise the
    sequence is accelerated by iterated Aitken extrapolation and accepted once
    the last two extrapolants agree to ``tol`` (relative).
    """
    if not model.has_extension:
        raise DomainError(f"{model.name}: propagation speed needs the holomorphic extension")
    omega = omega_max * 2.0 ** -np.arange(n_steps)[::-1]
    ratio = 1j * omega / np.asarray(eval_kappa_tilde(model, 1j * omega))
    mag = np.abs(ratio)
    top = mag[-4:]
    if np.all(np.diff(top) > 0) and top[-1] > 2 * top[0]:
        return math.inf
    seq = ratio.real
    if np.max(np.abs(ratio.imag)) > tol * max(1.0, np.max(mag)):
        raise NoLimitError(f"{model.name}: i*omega/kappa(i*omega) is not real on the ladder")
    best = _aitken_limit(seq)
    if best is None or abs(best[0] - best[1]) > tol * max(1.0, abs(best[0])):
        raise NoLimitError(f"{model.name}: speed ladder did not settle within tol={tol}")
    return float(best[0])


def _aitken_limit(seq: np.ndarray):
    """Iterated Aitken delta-squared; returns (last, previous) extrapolants."""
    rows = [np.asarray(seq, dtype=float)]
    while len(rows[-1]) >= 3:
        s = rows[-1]
        d1 = s[1:-1] - s[:-2]
        d2 = s[2:] - 2 * s[1:-1] + s[:-2]
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = np.where(np.abs(d2) > 1e-300, s[2:] - (s[2:] - s[1:-1]) ** 2 / d2, s[2:])
        if not np.all(np.isfinite(nxt)):
            break
        rows.append(nxt)
        # stop once the correction is at rounding level
        if np.max(np.abs(d1[-2:]), initial=0) < 1e-15 * max(1.0, abs(s[-1])):
            break
    # the last entry of each row uses the largest frequencies; pick the row
    # whose last two entries agree best
    candidates = [(abs(r[-1] - r[-2]), r[-1], r[-2]) for r in rows if len(r) >= 2]
    if not candidates:
        return None
    _, last, prev = min(candidates)
    return last, prev


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class StrongParams:
    """Constants of a strong coefficient: ``Im kappa >= kappa0 |omega|^beta`` for ``|omega| >= omega0``
    and ``|kappa| <= kappa1 (1 + |omega|)^N``."""

    kappa0: float
    beta: float
    omega0: float
    kappa1: float
    N: int
    asymptotic: float
    growth: float = 1.0  # |kappa| ~ |omega|^growth at high frequency (growth <= N)

    @property
    def mu(self) -> float:
        """Exponent ``N / beta - 1`` of the frequency-moment bound."""
        return self.N / self.beta - 1

    @property
    def mu_effective(self) -> float:
        """Moment growth exponent with the true growth of ``|kappa|`` in place of ``N``."""
        return self.growth / self.beta - 1

    def stretched_exponent(self, m: int = 3) -> float:
        return self.beta / (self.N * m)

    def omega_cut(self, eps: float, level: float = 35.0) -> float:
        """Frequency where ``exp(-2 eps Im kappa)`` has fallen below ``exp(-level)``."""
        return max((level / (2 * eps * self.kappa0)) ** (1 / self.beta), self.omega0)


@dataclass(frozen=True)
class WeakSplit:
    """``kappa = omega / c + i kappa_inf + kappa_star(omega)`` with square-integrable ``kappa_star``."""

    c: float
    kappa_inf: float
    kappa_star: Callable[[np.ndarray], np.ndarray]
    K: float = 0.0  # envelope |kappa_star| <= K/(1+|omega|) on the classification grid

    @property
    def trivial(self) -> bool:
        return self.K == 0.0


def default_classification_grid(n: int = 801, omega_max: float = 1e4) -> np.ndarray:
    half = np.geomspace(1e-3, omega_max, n // 2)
    return np.concatenate([-half[::-1], half])


def _asymptotics(model: AttenuationModel):
    """(asymptotic constant, beta, kappa1, N) from the closed forms."""
    p = model.params
    kind = model.kind
    if kind is ModelKind.THERMO_VISCOUS:
        # |kappa| <= |omega| forces N = 1 although |kappa| only grows like |omega|^(1/2)
        return 1 / math.sqrt(2 * p["tau"]), 0.5, 1.0, 1
    a, g = p.get("alpha"), p.get("gamma")
    if kind is ModelKind.KSB:
        return a * p["tau"] ** (-g / 2) * math.sin(math.pi * g / 4), 1 - g / 2, 1 + a, 1
    if kind is ModelKind.POWER_LAW:
        return a * math.sin((1 - g) * math.pi / 2), g, 1 + a * g + a * (1 - g), 1
    if kind is ModelKind.MODIFIED_SZABO:
        # kappa = omega + (alpha/2) omega (-i omega)^(gamma-1) + ..., so Im kappa ~ omega^gamma
        return a / 2 * math.sin((1 - g) * math.pi / 2), g, 1 + a * (1 - g) / 2 + a * (1 + g) / 2, 1
    raise AssertionError(kind)


def _scan_omega0(im: np.ndarray, w: np.ndarray, k0: float, beta: float) -> float:
    ok = im >= k0 * np.abs(w) ** beta
    aw = np.abs(w)
    bad = aw[~ok]
    if bad.size == 0:
        return 0.0
    if bad.max() >= aw.max():
        raise ClassificationError("strong inequality fails at the top of the grid")
    return float(aw[aw > bad.max()].min())


def classify(model: AttenuationModel, grid=None) -> StrongParams | WeakSplit:
    """Strong or weak class of a model, with constants checked on ``grid``."""
    w = default_classification_grid() if grid is None else np.asarray(grid, dtype=float)
    w = w[w != 0]
    kind = model.kind
    if kind in (ModelKind.THERMO_VISCOUS, ModelKind.KSB, ModelKind.POWER_LAW, ModelKind.MODIFIED_SZABO):
        const, beta, k1, N = _asymptotics(model)
        k0 = 0.9 * const
        im = np.imag(eval_kappa(model, w))
        growth = 0.5 if kind is ModelKind.THERMO_VISCOUS else 1.0
        return StrongParams(k0, beta, _scan_omega0(im, w, k0, beta), k1, N, const, growth)
    if kind is ModelKind.LINEAR:
        return WeakSplit(model.params["c"], 0.0, lambda om: np.zeros_like(np.asarray(om), dtype=complex), 0.0)
    if kind is ModelKind.NACHMAN_SMITH_WAAG:
        c0, tau, tt = (model.params[k] for k in ("c0", "tau", "tau_tilde"))
        c = c0 * math.sqrt(tau / tt)
        kinf = (tau - tt) / (2 * c0 * tau * math.sqrt(tt * tau))
        return _weak_split(model, c, kinf, w)
    return _classify_custom(model, w)


def _weak_split(model, c, kinf, w):
    # note kappa_star(0) = -i kappa_inf since kappa(0) = 0
    def ks(om):
        om = np.asarray(om, dtype=float)
        return np.asarray(eval_kappa(model, om)) - om / c - 1j * kinf

    resid = np.abs(ks(w))
    if not np.all(np.isfinite(resid)):
        raise ClassificationError(f"{model.name}: residual not finite")
    K = float(np.max(resid * (1 + np.abs(w))))
    return WeakSplit(c, kinf, ks, K)


def _classify_custom(model, w):
    """Heuristic class detection from samples on the positive half of the grid."""
    if validate_symmetry(model, w) > 1e-8 * (1 + np.max(np.abs(eval_kappa(model, w)))):
        raise ClassificationError(f"{model.name}: samples violate kappa(-w) = -conj(kappa(w))")
    pos = np.sort(w[w > 0])
    k = np.asarray(eval_kappa(model, pos))
    if np.any(k.imag < -1e-12):
        raise ClassificationError(f"{model.name}: negative imaginary part")
    top = pos > pos.max() / 100
    lw, li = np.log(pos[top]), np.log(np.maximum(k.imag[top], 1e-300))
    slope, icpt = np.polyfit(lw, li, 1)
    if slope > 0.05 and np.all(k.imag[top] > 0):
        beta = float(slope)
        const = float(np.exp(np.median(li - beta * lw)))
        k0 = 0.9 * const
        N = max(1, math.ceil(np.polyfit(lw, np.log(np.abs(k[top])), 1)[0] - 1e-6))
        k1 = float(np.max(np.abs(k) / (1 + pos) ** N))
        if beta > N:
            raise ClassificationError(f"{model.name}: fitted beta={beta:.3g} exceeds N={N}")
        growth = float(np.polyfit(lw, np.log(np.abs(k[top])), 1)[0])
        return StrongParams(k0, beta, _scan_omega0(k.imag, pos, k0, beta), k1, N, const, growth)
    # weak candidate: Re kappa ~ omega / c, Im kappa -> constant
    c = float(pos[-1] / k.real[-1]) if k.real[-1] > 0 else math.nan
    kinf = float(k.imag[-1])
    if not (np.isfinite(c) and c > 0):
        raise ClassificationError(f"{model.name}: no positive wave speed on the grid")
    split = _weak_split(model, c, kinf, w)
    # residual must decay: compare the high-frequency decade with the envelope
    tail = np.abs(split.kappa_star(pos[top]))
    if np.max(tail) > 1e-2 * (1 + np.max(np.abs(k))):
        raise ClassificationError(f"{model.name}: samples fit neither strong nor weak class")
    return split
