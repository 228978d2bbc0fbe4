"""``attenuspec`` command line.

Exit status 0 on success, 1 when inputs fail validation and 2 when a
numerical invariant is violated (for example an indefinite Gram matrix).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attenuation import (
    AttenuationModel,
    ClassificationError,
    DomainError,
    NoLimitError,
    ParameterError,
    StrongParams,
    classify,
    eval_kappa,
    eval_kappa_tilde,
    model_from_config,
    propagation_speed,
    range_grid,
)
from .bounds import BoundsError, kernel_by_name, tail_sum_bound, taylor_approximant
from .fileio import read_gram, read_spectrum_csv, write_csv, write_gram, write_json
from .geometry import BallGeometry, GeometryError
from .operator import discretize, gram
from .signals import SynthesisGrid, causality_check, front_speed_check, parse_source, synthesize
from .spectra import AssemblyDefectError, FitError, eigen_spectrum, fit_power, fit_stretched, compare_decay, \
    parse_range, spectrum_from_values, STRETCH_DIMENSION
from .wavekernel import WrongClassError, directional_derivative, fit_frequency_growth, frequency_integral, greens

__all__ = ["main", "ConfigError", "InvariantError", "RunConfig", "load_config", "build_parser"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class InvariantError(RuntimeError):
    """A computed quantity breaks an invariant the theory guarantees."""


# ---------------------------------------------------------------------------
# configuration

GEOMETRY_DEFAULTS = {"R": 1.0, "eps": 0.2, "center": [0.0, 0.0, 0.0]}
DISCRETIZATION_DEFAULTS = {"n_boundary": 512, "h": 0.125}
FREQUENCY_DEFAULTS = {"omega_cut": None, "omega_band": None, "order": 16}
OUTPUT_DEFAULTS = {"gram": "gram.bin", "spectrum": "spec.csv", "summary": "gram_summary.csv"}
HERMITIAN_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    model: dict
    geometry: dict
    discretization: dict
    frequency: dict
    output: dict = field(default_factory=dict)
    base: Path = Path(".")

    def resolved(self) -> dict:
        return {"model": self.model, "geometry": self.geometry, "discretization": self.discretization,
                "frequency": self.frequency, "output": self.output}

    def build_model(self) -> AttenuationModel:
        return model_from_config(self.model)

    def build_geometry(self) -> BallGeometry:
        g = self.geometry
        return BallGeometry(g["R"], g["eps"], tuple(g["center"]))

    def path(self, key: str) -> Path:
        p = Path(self.output[key])
        return p if p.is_absolute() else self.base / p


def _merge(block, defaults, name, problems, allowed_extra=()):
    if block is None:
        block = {}
    if not isinstance(block, dict):
        problems.append(f"{name}: must be an object")
        return dict(defaults)
    unknown = set(block) - set(defaults) - set(allowed_extra)
    if unknown:
        problems.append(f"{name}: unknown keys {sorted(unknown)}")
    return {**defaults, **{k: v for k, v in block.items() if k in defaults}}


def load_config(source, base: Path | None = None) -> RunConfig:
    """Validate a JSON config (path or dict) and fill defaults.

    Required: a ``model`` block and a ``geometry`` block.  Every problem is
    collected before raising, so the error lists them all.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError([f"config file {path} not found"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file {path}: invalid JSON ({exc})"]) from None
        base = path.parent if base is None else base
    else:
        raw = source
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    for key in set(raw) - {"model", "geometry", "discretization", "frequency", "output"}:
        problems.append(f"unknown top-level key {key!r}")
    model = raw.get("model")
    if model is None:
        problems.append("model: required block missing (e.g. {\"model\": \"power_law\", \"alpha\": 1, \"gamma\": 0.5})")
    elif not isinstance(model, dict):
        problems.append("model: must be an object")
    else:
        try:
            model_from_config(model)
        except ParameterError as exc:
            problems.append(f"model: {exc}")
    if "geometry" not in raw:
        problems.append("geometry: required block missing (keys R, eps, optional center, n_boundary, h)")
    geo_raw = raw.get("geometry") or {}
    geometry = _merge(geo_raw, GEOMETRY_DEFAULTS, "geometry", problems, DISCRETIZATION_DEFAULTS)
    disc_raw = {k: v for k, v in geo_raw.items() if k in DISCRETIZATION_DEFAULTS} if isinstance(geo_raw, dict) else {}
    disc_raw.update(raw.get("discretization") or {})
    discretization = _merge(disc_raw, DISCRETIZATION_DEFAULTS, "discretization", problems)
    frequency = _merge(raw.get("frequency"), FREQUENCY_DEFAULTS, "frequency", problems)
    output = _merge(raw.get("output"), OUTPUT_DEFAULTS, "output", problems)
    if not problems:
        try:
            g = BallGeometry(float(geometry["R"]), float(geometry["eps"]), tuple(geometry["center"]))
            h = float(discretization["h"])
            if not 0 < h < g.inner_radius:
                problems.append(f"discretization: h must lie in (0, R - eps), got {h}")
            if int(discretization["n_boundary"]) < 16:
                problems.append("discretization: n_boundary must be at least 16")
        except (GeometryError, TypeError, ValueError) as exc:
            problems.append(f"geometry: {exc}")
    if problems:
        raise ConfigError(sorted(problems))
    return RunConfig(dict(model), geometry, discretization, frequency, output, base or Path("."))


# ---------------------------------------------------------------------------
# helpers


MODEL_FLAGS = ("tau", "alpha", "gamma", "c0", "tau_tilde", "c")


def _add_model_args(p):
    p.add_argument("--model", help="catalog model name (thermo_viscous, ksb, power_law, modified_szabo, "
                                   "nachman_smith_waag, linear)")
    for name in MODEL_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    p.add_argument("--config", type=Path, help="JSON config whose model block is used")


def _model(args) -> AttenuationModel:
    if getattr(args, "config", None) is not None and args.model is None:
        return load_config(args.config).build_model()
    if args.model is None:
        raise ConfigError(["--model or --config is required"])
    block = {"model": args.model}
    block.update({k: getattr(args, k) for k in MODEL_FLAGS if getattr(args, k) is not None})
    return model_from_config(block)


def _vector(text: str, name: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError([f"{name}: expected comma-separated numbers, got {text!r}"]) from None
    if v.shape != (3,):
        raise ConfigError([f"{name}: expected 3 components, got {text!r}"])
    return v


def _int_range(text: str) -> list[int]:
    """``"0..10"`` (inclusive) or a single integer."""
    lo, sep, hi = text.partition("..")
    try:
        return list(range(int(lo), int(hi) + 1)) if sep else [int(text)]
    except ValueError:
        raise ConfigError([f"expected an integer or lo..hi, got {text!r}"]) from None


def _manifest(out: Path, command: str, settings: dict, extra: dict | None = None) -> None:
    write_json(out.with_name(out.stem + ".manifest.json"),
               {"command": command, "version": __version__, "settings": settings, "results": extra or {}})


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def _fmt_speed(c: float) -> str:
    return "infinite" if math.isinf(c) else format(c, ".12g")


# ---------------------------------------------------------------------------
# commands


def cmd_model_eval(args):
    model = _model(args)
    if args.z:
        for text in args.z:
            re_, _, im_ = text.partition(",")
            z = complex(float(re_), float(im_ or 0))
            k = complex(eval_kappa_tilde(model, z))
            print(f"{z.real:.17g} {z.imag:.17g} {k.real:.17g} {k.imag:.17g}")
    for w in args.omega or ([] if args.z else [1.0]):
        k = complex(eval_kappa(model, w))
        print(f"{w:.17g} {k.real:.17g} {k.imag:.17g}")


def cmd_model_speed(args):
    model = _model(args)
    print(_fmt_speed(propagation_speed(model, omega_max=args.omega_max, tol=args.tol)))


def cmd_model_classify(args):
    model = _model(args)
    res = classify(model)
    if isinstance(res, StrongParams):
        _print_json({"class": "strong", "kappa0": res.kappa0, "beta": res.beta, "omega0": res.omega0,
                     "kappa1": res.kappa1, "N": res.N, "asymptotic": res.asymptotic})
    else:
        _print_json({"class": "weak", "c": res.c, "kappa_inf": res.kappa_inf, "K": res.K})


def cmd_model_range(args):
    model = _model(args)
    re = np.linspace(args.re[0], args.re[1], args.n)
    im = np.linspace(args.im[0], args.im[1], args.n)
    z = (re[:, None] + 1j * im[None, :]).ravel()
    res = range_grid(model, z)
    write_csv(args.out, ["re_z", "im_z", "re_k", "im_k"],
              zip(z.real, z.imag, res.kappa.real, res.kappa.imag))
    _manifest(args.out, "model range", {"model": model.describe(), "re": args.re, "im": args.im, "n": args.n},
              {"flagged": res.n_flagged})
    print(f"{len(z)} samples, {res.n_flagged} flagged")
    if res.n_flagged:
        raise InvariantError(f"{res.n_flagged} samples with Im kappa_tilde < -1e-10")


def cmd_kernel_eval(args):
    model = _model(args)
    x = _vector(args.x, "--x")
    g = complex(np.asarray(greens(model, args.omega, x)))
    print(f"{g.real:.17g} {g.imag:.17g}")


def cmd_kernel_deriv(args):
    model = _model(args)
    x, v = _vector(args.x, "--x"), _vector(args.v, "--v")
    if not math.isclose(np.linalg.norm(v), 1.0, rel_tol=1e-12):
        raise ConfigError(["--v must be a unit vector"])
    g = complex(np.asarray(directional_derivative(model, args.omega, x, v, args.j)))
    print(f"{g.real:.17g} {g.imag:.17g}")


def cmd_kernel_freqint(args):
    model = _model(args)
    params = classify(model)
    js = _int_range(args.j)
    q = [frequency_integral(model, args.eps, j, params=params) for j in js]
    if isinstance(params, StrongParams) and len(js) >= 5 and js == list(range(js[0], js[0] + len(js))) and js[0] == 0:
        env = fit_frequency_growth(q, mu=params.mu).envelope(js)
    else:
        env = [math.nan] * len(js)
    write_csv(args.out, ["j", "integral", "bound"], zip(js, q, env))
    _manifest(args.out, "kernel freqint", {"model": model.describe(), "eps": args.eps, "j": js})
    print(f"wrote {len(js)} moments to {args.out}")


def _config_from_args(args) -> RunConfig:
    if args.config is not None:
        return load_config(args.config)
    if args.model is None:
        raise ConfigError(["--config or --model is required"])
    block = {"model": args.model}
    block.update({k: getattr(args, k) for k in MODEL_FLAGS if getattr(args, k) is not None})
    return load_config({"model": block, "geometry": {"R": args.R, "eps": args.eps},
                        "discretization": {"n_boundary": args.n_boundary, "h": args.h}})


def _assemble(cfg: RunConfig):
    model = cfg.build_model()
    disc = discretize(cfg.build_geometry(), int(cfg.discretization["n_boundary"]), float(cfg.discretization["h"]))
    f = cfg.frequency
    if isinstance(classify(model), StrongParams):
        kw = {"omega_cut": f["omega_cut"], "order": int(f["order"])}
    else:
        kw = {"omega_band": f["omega_band"]}
    G = gram(model, disc, **kw)
    if G.hermitian_defect > HERMITIAN_TOL:
        raise InvariantError(f"Hermitian defect {G.hermitian_defect:.3e} exceeds {HERMITIAN_TOL}")
    return G


def _add_geometry_args(p):
    p.add_argument("--R", type=float, default=GEOMETRY_DEFAULTS["R"])
    p.add_argument("--eps", type=float, default=GEOMETRY_DEFAULTS["eps"])
    p.add_argument("--n-boundary", type=int, default=DISCRETIZATION_DEFAULTS["n_boundary"])
    p.add_argument("--h", type=float, default=DISCRETIZATION_DEFAULTS["h"])


def _write_spectrum(path: Path, lam) -> None:
    write_csv(path, ["n", "lambda"], zip(range(1, len(lam) + 1), lam))


def cmd_assemble(args):
    cfg = _config_from_args(args)
    G = _assemble(cfg)
    out = args.out or cfg.path("gram")
    write_gram(out, G)
    summary = out.with_name(out.stem + "_summary.csv")
    meta = {k: v for k, v in G.meta.items() if not isinstance(v, dict)}
    rows = [("n", G.n), ("hermitian_defect", G.hermitian_defect), ("max_abs", float(np.max(np.abs(G.values)))),
            ("trace_weighted", float(np.real(np.sum(G.weights * np.diag(G.values)))))]
    rows += sorted((k, v) for k, v in meta.items() if not isinstance(v, (list, tuple)))
    write_csv(summary, ["key", "value"], rows)
    _manifest(out, "assemble", cfg.resolved(), G.meta)
    print(f"wrote {G.n}x{G.n} Gram matrix to {out}")


def cmd_spectrum(args):
    if args.input is not None:
        G = read_gram(args.input)
        settings = {"input": str(args.input)}
        out = args.out or Path("spec.csv")
    else:
        cfg = _config_from_args(args)
        G = _assemble(cfg)
        settings = cfg.resolved()
        out = args.out or cfg.path("spectrum")
    settings = {**settings, "neg_tol": args.neg_tol}
    rep = eigen_spectrum(G, tol=args.neg_tol)
    _write_spectrum(out, rep.eigenvalues)
    _manifest(out, "spectrum", settings, {"n_modes": rep.n_modes, "min_raw": rep.min_raw,
                                          "hermitian_defect": G.hermitian_defect, **G.meta})
    print(f"wrote {rep.n_modes} eigenvalues to {out}")


def cmd_fit(args):
    lam = read_spectrum_csv(args.input)
    rng = parse_range(args.range) if args.range else None
    if args.law == "power":
        fit = fit_power(lam, rng, floor=args.floor)
    else:
        if args.s is None:
            raise ConfigError(["--s is required for the stretched law"])
        fit = fit_stretched(lam, args.s, rng, floor=args.floor)
    _print_json({**fit.as_dict(), "floor": args.floor})


def cmd_compare(args):
    weak = spectrum_from_values(read_spectrum_csv(args.weak))
    strong = spectrum_from_values(read_spectrum_csv(args.strong))
    rep = compare_decay(weak, strong)
    if args.out:
        write_csv(args.out, ["n", "ratio"], zip(range(1, len(rep.ratio) + 1), rep.ratio))
    _print_json({**rep.as_dict(), "n_modes": min(len(weak), len(strong))})


def cmd_bounds_verify(args):
    kernel = kernel_by_name(args.kernel)
    rows, bad = [], 0
    for r in _int_range(args.r):
        chk = tail_sum_bound(kernel, taylor_approximant(kernel, r), r, n_disc=args.n_disc)
        rows.append((chk.r, chk.lhs, chk.rhs, chk.ok))
        bad += not chk.ok
    write_csv(args.out, ["r", "tail_sum", "bound", "ok"], rows)
    _manifest(args.out, "bounds verify", {"kernel": args.kernel, "r": args.r, "n_disc": args.n_disc})
    print(f"{len(rows) - bad}/{len(rows)} ranks satisfy the tail bound")
    if bad:
        raise InvariantError(f"tail-sum bound violated for {bad} ranks")


def cmd_simulate(args):
    model = _model(args)
    grid = SynthesisGrid(args.omega_cut, args.n_t, args.taper)
    det = _vector(args.detector, "--detector")
    src = parse_source(args.source)
    trace = synthesize(model, src, det, grid)
    write_csv(args.out, ["t", "p"], zip(trace.t, trace.values))
    dist = float(np.min(np.linalg.norm(src.points - det, axis=1)))
    c = propagation_speed(model)
    front = front_speed_check(trace, dist, c, grid)
    report = {"causality_fraction": causality_check(trace), "arrival": front.arrival, "earliest": front.earliest,
              "front_ok": front.ok, "imag_residue": trace.imag_residue, "speed": _fmt_speed(c)}
    if front.skipped:
        report["notice"] = front.notice
    _manifest(args.out, "simulate", {"model": model.describe(), "source": args.source,
                                     "detector": det.tolist(), **grid.describe()}, report)
    _print_json(report)
    if not front.ok:
        raise InvariantError("signal arrives before dist / c")


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="attenuspec", description="Attenuated photoacoustic operator toolkit")
    p.add_argument("--version", action="version", version=f"attenuspec {__version__}")
    p.add_argument("--threads", type=int, help="cap BLAS threads (default: $ATTENUSPEC_THREADS)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    model = sub.add_parser("model", help="attenuation laws").add_subparsers(dest="action", required=True,
                                                                             parser_class=_Parser)
    q = model.add_parser("eval", help="kappa(omega), or kappa_tilde(z) with --z re,im")
    _add_model_args(q)
    q.add_argument("--omega", type=float, nargs="+")
    q.add_argument("--z", nargs="+")
    q.set_defaults(func=cmd_model_eval)
    q = model.add_parser("speed", help="propagation speed (or 'infinite')")
    _add_model_args(q)
    q.add_argument("--omega-max", type=float, default=1e6)
    q.add_argument("--tol", type=float, default=1e-6)
    q.set_defaults(func=cmd_model_speed)
    q = model.add_parser("classify", help="strong or weak attenuation constants")
    _add_model_args(q)
    q.set_defaults(func=cmd_model_classify)
    q = model.add_parser("range", help="sample kappa_tilde on the upper half plane")
    _add_model_args(q)
    q.add_argument("--re", type=float, nargs=2, default=(-10.0, 10.0))
    q.add_argument("--im", type=float, nargs=2, default=(0.0, 10.0))
    q.add_argument("--n", type=int, default=100)
    q.add_argument("--out", type=Path, default=Path("range.csv"))
    q.set_defaults(func=cmd_model_range)

    kernel = sub.add_parser("kernel", help="Green's kernel").add_subparsers(dest="action", required=True,
                                                                            parser_class=_Parser)
    q = kernel.add_parser("eval")
    _add_model_args(q)
    q.add_argument("--omega", type=float, required=True)
    q.add_argument("--x", required=True, help="x,y,z")
    q.set_defaults(func=cmd_kernel_eval)
    q = kernel.add_parser("deriv")
    _add_model_args(q)
    q.add_argument("--omega", type=float, required=True)
    q.add_argument("--x", required=True)
    q.add_argument("--v", required=True)
    q.add_argument("--j", type=int, required=True)
    q.set_defaults(func=cmd_kernel_deriv)
    q = kernel.add_parser("freqint", help="frequency moments q_j")
    _add_model_args(q)
    q.add_argument("--eps", type=float, default=0.2)
    q.add_argument("--j", default="0..10")
    q.add_argument("--out", type=Path, default=Path("q.csv"))
    q.set_defaults(func=cmd_kernel_freqint)

    for name, func, text in (("assemble", cmd_assemble, "assemble the Gram matrix"),
                             ("spectrum", cmd_spectrum, "eigenvalues of the weighted Gram matrix")):
        q = sub.add_parser(name, help=text)
        _add_model_args(q)
        _add_geometry_args(q)
        q.add_argument("--out", type=Path)
        if name == "spectrum":
            q.add_argument("--in", dest="input", type=Path, help="gram.bin from 'assemble'")
            q.add_argument("--neg-tol", type=float, default=1e-6)
        q.set_defaults(func=func)

    q = sub.add_parser("fit", help="fit a decay law to spec.csv")
    q.add_argument("--in", dest="input", type=Path, default=Path("spec.csv"))
    q.add_argument("--law", choices=("power", "stretched"), required=True)
    q.add_argument("--s", type=float, help=f"stretch exponent beta/(N*{STRETCH_DIMENSION})")
    q.add_argument("--range", help="lo:hi, 1-based inclusive (default 5:n/4)")
    q.add_argument("--floor", type=float, default=1e-14)
    q.set_defaults(func=cmd_fit)

    q = sub.add_parser("compare", help="crossover between a weak and a strong spectrum")
    q.add_argument("--weak", type=Path, required=True)
    q.add_argument("--strong", type=Path, required=True)
    q.add_argument("--out", type=Path)
    q.set_defaults(func=cmd_compare)

    bounds = sub.add_parser("bounds", help="eigenvalue bounds").add_subparsers(dest="action", required=True,
                                                                              parser_class=_Parser)
    q = bounds.add_parser("verify", help="tail-sum bound for Taylor approximants")
    q.add_argument("--kernel", default="gaussian")
    q.add_argument("--r", default="1..10")
    q.add_argument("--n-disc", type=int, default=512)
    q.add_argument("--out", type=Path, default=Path("bounds.csv"))
    q.set_defaults(func=cmd_bounds_verify)

    q = sub.add_parser("simulate", help="time trace at a detector")
    _add_model_args(q)
    q.add_argument("--source", default="ball:0.1")
    q.add_argument("--detector", default="0,0,1")
    q.add_argument("--omega-cut", type=float, default=128.0)
    q.add_argument("--n-t", type=int, default=4096)
    q.add_argument("--taper", type=float, default=0.1)
    q.add_argument("--out", type=Path, default=Path("trace.csv"))
    q.set_defaults(func=cmd_simulate)
    return p


def _thread_limit(args):
    n = args.threads
    if n is None and os.environ.get("ATTENUSPEC_THREADS"):
        try:
            n = int(os.environ["ATTENUSPEC_THREADS"])
        except ValueError:
            raise ConfigError([f"ATTENUSPEC_THREADS must be an integer, got {os.environ['ATTENUSPEC_THREADS']!r}"])
    if n is None:
        return nullcontext()
    if n < 1:
        raise ConfigError(["thread count must be at least 1"])
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit(args):
            args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_INVALID
    except (InvariantError, AssemblyDefectError) as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, GeometryError, DomainError, ClassificationError, WrongClassError, FitError,
            BoundsError, NoLimitError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
