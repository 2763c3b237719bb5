"""Verification suites over random instances, and the ``unitary-moi`` command line.

Every suite draws its instances from :func:`generate_instance` with seeds
derived from ``(config.seed, trial, slot)``, so a configuration fully
determines its report up to the timing fields.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from .calculus import (
    ExponentialPath,
    finite_difference_oracle,
    frechet_residual_check,
    gateaux_derivative,
    gateaux_exponential,
    moi_continuity_check,
    product_rule_check,
    two_sided_path,
)
from .circle_fn import CircleFunction, TrigPoly, sup_norm
from .matrix_core import UnitaryMatrix, expm_hermitian, matrix_from_json, matrix_to_json, schatten_norm
from .moi import (
    MAX_DIM,
    DividedDiff,
    fejer_convergence_check,
    first_order_identity_check,
    perturbation_insert_check,
    sot_convergence_check,
    telescoping_check,
)
from .report import CheckReport, _jsonable, residual_report
from .taylor import RemainderReport, estimate_sweep, remainder_direct, remainder_exponential, remainder_moi

SUITES = ("perturbation", "telescoping", "frechet", "gateaux", "product-rule", "taylor",
          "estimate", "convergence")
MAX_ORDER = 5
KINDS = ("unitary", "hermitian", "general", "trigpoly")

DEFAULT_TOL = {
    "perturbation": 1e-8,
    "telescoping": 1e-8,
    "frechet": 1.8,  # minimum log-log slope
    "gateaux": 1e-4,
    "product-rule": 1e-5,
    "taylor": 1e-8,
    "estimate": 0.1,  # slope window around n
    "convergence": 1e-6,  # SOT error at j = 20
}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    suite: str
    dim: int = 3
    order: int = 2
    p: float = 2.0
    seed: int = 0
    trials: int = 10
    tol: float | None = None
    out: str | None = None
    degree: int = 6
    f: TrigPoly | None = None
    step: float | None = None
    deterministic_reduce: bool = False
    allow_large: bool = False

    def validate(self) -> None:
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if not 1 <= self.dim <= (64 if self.allow_large else MAX_DIM):
            raise ConfigError(f"dimension must lie in 1..{MAX_DIM}")
        if not 1 <= self.order <= (8 if self.allow_large else MAX_ORDER):
            raise ConfigError(f"order must lie in 1..{MAX_ORDER}")
        if not self.p > 0:
            raise ConfigError("p must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.degree < 0:
            raise ConfigError("degree must be nonnegative")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step must be positive")
        if self.suite == "estimate" and not 1 < self.order < self.p:
            raise ConfigError("the estimate suite needs 1 < order < p")
        if self.suite in ("frechet",) and self.order > 4:
            raise ConfigError("the Frechet suite supports order <= 4")
        if self.suite in ("gateaux",) and self.order > 4:
            raise ConfigError("finite-difference oracles exist for order <= 4")
        if self.suite == "product-rule" and self.order > 4:
            raise ConfigError("the product-rule suite supports order <= 4")
        if self.suite == "taylor" and self.order > 4:
            raise ConfigError("the taylor suite supports order <= 4")

    @property
    def tolerance(self) -> float:
        return DEFAULT_TOL[self.suite] if self.tol is None else self.tol

    def echo(self) -> dict:
        out = asdict(self)
        out["f"] = None if self.f is None else self.f.to_json()
        out["tol"] = self.tolerance
        return out


def generate_instance(seed, d: int, kind: str, degree: int | None = None):
    """Deterministic pseudo-random instance.

    ``unitary``: QR of a complex Gaussian with the phases of ``diag(R)`` divided out.
    ``hermitian``: ``(G + G*)/2``. ``general``: complex Gaussian ``G``.
    ``trigpoly``: Gaussian coefficients on degrees ``-D..D`` with ``D = degree``
    (``D = d`` if no degree is given).
    """
    rng = np.random.default_rng(seed)
    if kind == "trigpoly":
        big_d = d if degree is None else degree
        c = rng.standard_normal(2 * big_d + 1) + 1j * rng.standard_normal(2 * big_d + 1)
        return TrigPoly(dict(zip(range(-big_d, big_d + 1), c)))
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    if kind == "general":
        return g
    if kind == "hermitian":
        return (g + g.conj().T) / 2
    q, r = np.linalg.qr(g)
    return UnitaryMatrix(q * (np.diag(r) / np.abs(np.diag(r))))


class _Draw:
    """Instances for one trial, each slot from its own seed."""

    def __init__(self, config: SuiteConfig, trial: int):
        self.config = config
        self.base = [config.seed, trial]
        self.slot = 0

    def __call__(self, kind, d=None, degree=None):
        self.slot += 1
        return generate_instance(self.base + [self.slot], self.config.dim if d is None else d, kind,
                                 degree)

    def unitary(self):
        return self("unitary")

    def hermitian(self, op_norm=None):
        a = self("hermitian")
        if op_norm is not None:
            a *= op_norm / max(np.linalg.norm(a, 2), 1e-300)
        return a

    def general(self, fro=None):
        k = self("general")
        if fro is not None:
            k /= np.linalg.norm(k) / fro
        return k

    def function(self):
        if self.config.f is not None:
            return self.config.f
        return self("trigpoly", degree=self.config.degree)


def _combine(reports: list[CheckReport], **extra) -> dict:
    """One trial entry: the worst residual, overall pass, and every sub-check."""
    worst = max(reports, key=lambda r: (not r.passed, r.residual_rel))
    out = worst.to_json()
    out["pass"] = all(r.passed for r in reports)
    out["checks"] = [r.to_json() for r in reports]
    out.update(_jsonable(extra))
    return out


def _trial_perturbation(cfg, draw):
    n, f = cfg.order, draw.function()
    u, v = draw.unitary(), draw.unitary()
    if n == 1:
        return _combine([first_order_identity_check(f, u, v, cfg.p, cfg.tolerance)])
    others = [draw.unitary() for _ in range(n - 1)]
    args = [draw.general() for _ in range(n - 1)]
    return _combine([perturbation_insert_check(f, n, others, u, v, slot, args, cfg.p, cfg.tolerance)
                     for slot in range(1, n + 1)])


def _trial_telescoping(cfg, draw):
    n, f = cfg.order, draw.function()
    u, v = draw.unitary(), draw.unitary()
    args = [draw.general() for _ in range(n - 1)]
    return _combine([telescoping_check(f, n, u, v, k, args, cfg.p, cfg.tolerance)
                     for k in range(1, n + 1)])


def _trial_frechet(cfg, draw):
    f = draw.function()
    u, a = draw.unitary(), draw.hermitian(op_norm=1.0)
    xs = [draw.general(fro=1.0) for _ in range(cfg.order - 1)]
    return _combine([frechet_residual_check(f, u, a, xs, cfg.p, min_slope=cfg.tolerance)])


def _path(draw, trial):
    a, u = draw.hermitian(op_norm=1.0), draw.unitary()
    if trial % 2 == 0:
        return "exponential", ExponentialPath(a, u.matrix), (a, u)
    b = draw.hermitian(op_norm=0.5)
    return "two-sided", two_sided_path(a, u.matrix, b), (a, u)


def _trial_gateaux(cfg, draw, trial):
    f, k = draw.function(), cfg.order
    kind, path, (a, u) = _path(draw, trial)
    t = float(np.random.default_rng(draw.base + [99]).uniform(-1, 1))
    formula = gateaux_derivative(path, f, t, k)
    fd = finite_difference_oracle(path, f, t, k, cfg.step)
    scale = schatten_norm(formula, cfg.p)
    rep = residual_report("gateaux_vs_finite_difference", cfg.p, schatten_norm(formula - fd, cfg.p),
                          scale, cfg.tolerance, order=k, t=t, path=kind)
    extra = {}
    if kind == "exponential":
        closed = gateaux_exponential(f, u, a, t, k)
        diff = schatten_norm(formula - closed, cfg.p)
        extra["exponential_residual_rel"] = diff / scale if scale > 0 else diff
    return _combine([rep], **extra)


def _moving_args(draw, m):
    pairs = []
    for _ in range(m):
        b, k = draw.hermitian(op_norm=1.0), draw.general(fro=1.0)
        pairs.append((lambda s, b=b, k=k: expm_hermitian(b, s) @ k,
                      lambda s, b=b, k=k: 1j * b @ expm_hermitian(b, s) @ k))
    return pairs


def _trial_product_rule(cfg, draw, trial):
    f = draw.function()
    kind, path, _ = _path(draw, trial)
    t = float(np.random.default_rng(draw.base + [99]).uniform(-1, 1))
    rep = product_rule_check(path, f, _moving_args(draw, cfg.order), t, cfg.tolerance, cfg.step)
    rep.details["path"] = kind
    return _combine([rep])


def _trial_taylor(cfg, draw, trial):
    f, n, p, tol = draw.function(), cfg.order, cfg.p, cfg.tolerance
    kind, path, (a, u) = _path(draw, trial)
    t = float(np.random.default_rng(draw.base + [99]).uniform(0.2, 1.0))
    direct, moi_form = remainder_direct(path, f, t, n), remainder_moi(path, f, t, n)
    reports = [residual_report("taylor_direct_vs_moi", p, schatten_norm(direct - moi_form, p),
                               schatten_norm(direct, p), tol, order=n, t=t, path=kind)]
    exp_path = ExponentialPath(a, u.matrix)
    at_one = remainder_moi(exp_path, f, 1.0, n)
    closed = remainder_exponential(f, u, a, n)
    reports.append(residual_report("taylor_exponential_vs_moi", p, schatten_norm(closed - at_one, p),
                                   schatten_norm(at_one, p), min(tol, 1e-10), order=n))
    reports.append(residual_report("taylor_exponential_vs_direct", p,
                                   schatten_norm(closed - remainder_direct(exp_path, f, 1.0, n), p),
                                   schatten_norm(closed, p), tol, order=n))
    return _combine(reports)


def _trial_estimate(cfg, draw):
    f, n, p = draw.function(), cfg.order, cfg.p
    u, a = draw.unitary(), draw.hermitian(op_norm=1.0)
    rep: RemainderReport = estimate_sweep(f, u, a, n, p)
    slope_ok = abs(rep.scaling_slope - n) <= cfg.tolerance
    bounded = math.isfinite(rep.estimate_ratio)
    check = CheckReport("remainder_scaling", p, abs(rep.scaling_slope - n), rep.residual_rel,
                        bool(slope_ok and bounded and rep.residual_rel <= 1e-8),
                        details={"order": n, "scaling_slope": rep.scaling_slope,
                                 "estimate_ratio": rep.estimate_ratio,
                                 "derivative_ratio": rep.extra["derivative_ratio"],
                                 "quasi_norm": rep.extra["quasi_norm"]})
    return _combine([check])


def unit_derivative_scale(f: CircleFunction, order: int, n_grid: int = 512) -> CircleFunction:
    """Rescale a trigonometric polynomial so that ``max_{m<=order} ||f^(m)||_inf = 1``."""
    scale = max(sup_norm(f.derivative(m) if m else f, n_grid) for m in range(order + 1))
    return f * TrigPoly.constant(1.0 / scale) if scale > 0 else f


def _trial_convergence(cfg, draw):
    n = cfg.order
    f = unit_derivative_scale(draw.function(), n + 1)
    us = [draw.unitary() for _ in range(n + 1)]
    gens = [draw.hermitian(op_norm=0.25) for _ in range(n + 1)]
    ks = [draw.general(fro=1.0) for _ in range(n)]
    reports = [
        fejer_convergence_check(f, n, us, ks),
        sot_convergence_check(DividedDiff(f, n), us, gens, ks, threshold=cfg.tolerance),
        moi_continuity_check(f, us, gens, ks, cfg.p),
    ]
    return _combine(reports)


_RUNNERS = {
    "perturbation": lambda c, d, t: _trial_perturbation(c, d),
    "telescoping": lambda c, d, t: _trial_telescoping(c, d),
    "frechet": lambda c, d, t: _trial_frechet(c, d),
    "gateaux": _trial_gateaux,
    "product-rule": _trial_product_rule,
    "taylor": _trial_taylor,
    "estimate": lambda c, d, t: _trial_estimate(c, d),
    "convergence": lambda c, d, t: _trial_convergence(c, d),
}


def library_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run_suite(config: SuiteConfig) -> tuple[int, list[dict]]:
    """Run every trial of ``config.suite``; return ``(exit status, report entries)``.

    Entries are ordered by trial index. The report is written to
    ``config.out`` when set. A failed check gives status 1, a report that
    cannot be written gives status 3.
    """
    config.validate()
    version, echo = library_version(), config.echo()
    entries = []
    for trial in range(config.trials):
        start = time.perf_counter()
        try:
            entry = _RUNNERS[config.suite](config, _Draw(config, trial), trial)
        except (ValueError, np.linalg.LinAlgError) as exc:
            entry = {"identity": config.suite, "pass": False, "error": str(exc)}
        entry.update({"suite": config.suite, "trial": trial, "seed": [config.seed, trial],
                      "version": version, "config": echo,
                      "wall_time": time.perf_counter() - start})
        entries.append(entry)
    status = EXIT_OK if all(e["pass"] for e in entries) else EXIT_FAIL
    if config.out:
        try:
            write_report(entries, config.out)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_IO, entries
    return status, entries


def write_report(entries, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(entries), indent=2, sort_keys=True) + "\n")


TIMING_KEYS = ("wall_time", "timing")


def strip_timing(entries):
    """Copy of a report without timing fields, for determinism comparisons."""
    if isinstance(entries, dict):
        return {k: strip_timing(v) for k, v in entries.items() if k not in TIMING_KEYS}
    if isinstance(entries, list):
        return [strip_timing(v) for v in entries]
    return entries


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_inputs(args):
    u = UnitaryMatrix(matrix_from_json(_load_json(args.matrix)))
    a = matrix_from_json(_load_json(args.hermitian))
    f = TrigPoly.from_json(_load_json(args.f))
    if a.shape != u.matrix.shape:
        raise ConfigError("matrix and generator dimensions differ")
    return u, a, f


def _emit(payload, out):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_verify(args) -> int:
    f = TrigPoly.from_json(_load_json(args.f)) if args.f else None
    config = SuiteConfig(args.suite, args.dim, args.order, args.p, args.seed, args.trials, args.tol,
                         args.out, args.degree, f, args.step, args.deterministic_reduce)
    status, entries = run_suite(config)
    failed = sum(not e["pass"] for e in entries)
    print(f"{config.suite}: {len(entries) - failed}/{len(entries)} passed", file=sys.stderr)
    return status


def _cmd_derive(args) -> int:
    u, a, f = _load_inputs(args)
    start = time.perf_counter()
    value = gateaux_exponential(f, u, a, args.t, args.order)
    payload = {"order": args.order, "t": args.t, "derivative": matrix_to_json(value)}
    if args.check:
        fd = finite_difference_oracle(ExponentialPath(a, u.matrix), f, args.t, args.order)
        scale = schatten_norm(value, 2)
        payload["finite_difference_residual_rel"] = schatten_norm(value - fd, 2) / scale if scale else 0.0
    payload["timing"] = time.perf_counter() - start
    _emit(payload, args.out)
    return EXIT_OK


def _cmd_remainder(args) -> int:
    u, a, f = _load_inputs(args)
    n, p = args.order, args.p
    if 1 < n < p:
        report = estimate_sweep(f, u, a, n, p)
    else:
        # no S^{p/n} claim outside 1 < n < p: report the remainder without a sweep
        start = time.perf_counter()
        moi_form = remainder_exponential(f, u, a, n)
        direct = remainder_direct(ExponentialPath(a, u.matrix), f, 1.0, n)
        ref = schatten_norm(moi_form, p)
        diff = schatten_norm(direct - moi_form, p)
        report = RemainderReport(n, p, direct, moi_form, diff / ref if ref > 0 else diff,
                                 timing=time.perf_counter() - start)
    _emit(report.to_json(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unitary-moi",
                                     description="Operator-integral identities for unitary matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run a verification suite over random instances")
    verify.add_argument("suite", help=" | ".join(SUITES))
    verify.add_argument("--dim", type=int, default=3)
    verify.add_argument("--order", type=int, default=2)
    verify.add_argument("--p", type=float, default=2.0)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--trials", type=int, default=10)
    verify.add_argument("--out", help="JSON report path")
    verify.add_argument("--tol", type=float, help="override the suite tolerance")
    verify.add_argument("--degree", type=int, default=6, help="degree of random trigonometric polynomials")
    verify.add_argument("--f", help="fixed function as TrigPoly JSON")
    verify.add_argument("--step", type=float, help="finite-difference step override")
    verify.add_argument("--deterministic-reduce", action="store_true",
                        help="accepted for compatibility; reductions are always sequential")
    verify.set_defaults(run=_cmd_verify)

    for name, helptext, run in (("derive", "Gateaux derivative along exp(itA) U", _cmd_derive),
                                ("remainder", "Taylor remainder of f(exp(iA) U)", _cmd_remainder)):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--matrix", required=True, help="unitary U as matrix JSON")
        cmd.add_argument("--hermitian", required=True, help="generator A as matrix JSON")
        cmd.add_argument("--f", required=True, help="TrigPoly JSON")
        cmd.add_argument("--order", type=int, required=True)
        cmd.add_argument("--out", help="write JSON here instead of stdout")
        cmd.set_defaults(run=run)
        if name == "derive":
            cmd.add_argument("--t", type=float, default=0.0)
            cmd.add_argument("--check", action="store_true", help="also report a finite-difference residual")
        else:
            cmd.add_argument("--p", type=float, default=4.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except ConfigError as exc:
        parser.error(str(exc))  # exits with status 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
