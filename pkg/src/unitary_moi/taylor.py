"""Operator Taylor remainders of ``t -> f(U(t))``.

The remainder of order ``n`` at ``t`` is

    R_{n,f,U}(t) = f(U(t)) - f(U(0)) - sum_{k=1}^{n-1} t^k / k! * phi^{(k)}(0).

It is available three ways: directly from Gateaux derivatives
(:func:`remainder_direct`), as a sum of operator integrals over compositions
(:func:`remainder_moi`), and for exponential paths at ``t = 1`` with exact
exponential tails (:func:`remainder_exponential`).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .calculus import ExponentialPath, UnitaryPath, enumerate_compositions, gateaux_derivative, gateaux_exponential
from .circle_fn import CircleFunction, sup_norm
from .matrix_core import (
    UnitaryMatrix,
    _check_hermitian,
    as_unitary,
    expm_hermitian,
    func_calculus,
    matrix_to_json,
    schatten_norm,
)
from .moi import DividedDiff, MoiOperator
from .report import CheckReport, _jsonable

__all__ = [
    "RemainderReport",
    "estimate_sweep",
    "exponential_tail",
    "path_remainder",
    "remainder_direct",
    "remainder_exponential",
    "remainder_moi",
    "tail_bound_check",
]


@dataclass
class RemainderReport:
    n: int
    p: float
    direct: np.ndarray
    moi_form: np.ndarray
    residual_rel: float
    estimate_ratio: float | None = None
    scaling_slope: float | None = None
    seed: int | None = None
    timing: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "p": self.p,
            "direct": matrix_to_json(self.direct),
            "moi_form": matrix_to_json(self.moi_form),
            "residual_rel": self.residual_rel,
            "estimate_ratio": self.estimate_ratio,
            "scaling_slope": self.scaling_slope,
            "seed": self.seed,
            "timing": self.timing,
        }
        out.update(self.extra)
        return _jsonable(out)


def remainder_direct(path: UnitaryPath, f: CircleFunction, t: float, n: int) -> np.ndarray:
    """``f(U(t)) - f(U(0)) - sum_{k<n} t^k/k! phi^{(k)}(0)`` with Gateaux derivatives at 0."""
    _check_orders(path, f, n)
    out = func_calculus(f, path.at(t)) - func_calculus(f, path.at(0.0))
    for k in range(1, n):
        out = out - t ** k / factorial(k) * gateaux_derivative(path, f, 0.0, k)
    return out


def path_remainder(path: UnitaryPath, t: float, l: int) -> np.ndarray:
    """``U~(t) - sum_{k<l} t^k/k! U~^{(k)}(0)`` (equal to ``U~(t)`` for ``l = 1``)."""
    out = path.tilde(t)
    for k in range(1, l):
        out = out - t ** k / factorial(k) * path.derivative(0.0, k)
    return out


def _composition_sum(f, n, u_end: UnitaryMatrix, u_start: UnitaryMatrix, first, rest):
    out = np.zeros((u_end.dim, u_end.dim), dtype=complex)
    by_parts: dict[int, list] = {}
    for c in enumerate_compositions(n):
        by_parts.setdefault(len(c), []).append(c)
    for m, comps in by_parts.items():
        gamma = MoiOperator(DividedDiff(f, m), [u_end] + [u_start] * m)
        for c in comps:
            out += gamma(first(c.parts[0]), *[rest(l) for l in c.parts[1:]])
    return out


def remainder_moi(path: UnitaryPath, f: CircleFunction, t: float, n: int) -> np.ndarray:
    """Remainder as ``sum_m sum_{l_1+..+l_m=n} Gamma^{U(t),(U(0))^m}(f^[m])(R_{l_1}(t), t^{l_2} U~^{(l_2)}(0)/l_2!, ..)``."""
    _check_orders(path, f, n)
    firsts: dict[int, np.ndarray] = {}
    rests: dict[int, np.ndarray] = {}

    def first(l):
        if l not in firsts:
            firsts[l] = path_remainder(path, t, l)
        return firsts[l]

    def rest(l):
        if l not in rests:
            rests[l] = t ** l / factorial(l) * path.derivative(0.0, l)
        return rests[l]

    return _composition_sum(f, n, path.at(t), path.at(0.0), first, rest)


def exponential_tail(a, l: int) -> np.ndarray:
    """``sum_{k>=l} (iA)^k / k! = exp(iA) - sum_{k<l} (iA)^k / k!`` through the spectrum of ``A``."""
    a = np.asarray(a, dtype=complex)
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    x = 1j * w
    vals = np.exp(x) - sum(x ** k / factorial(k) for k in range(l))
    return (v * vals) @ v.conj().T


def tail_bound_check(a, u, l: int, p: float, slack: float = 1e-10, seed=None) -> CheckReport:
    """Check ``||sum_{k>=l} (iA)^k/k! U||_{p/l} <= ||A||_p^l / l!`` up to ``slack``.

    The singular values of the tail are ``|exp(ia) - sum_{k<l} (ia)^k/k!| <= |a|^l/l!``
    over the eigenvalues ``a`` of ``A``, so the bound holds for every ``p > 0``.
    """
    if l < 1:
        raise ValueError("tail index must be at least 1")
    u = np.asarray(u, dtype=complex)
    lhs = schatten_norm(exponential_tail(_check_hermitian(a), l) @ u, p / l)
    rhs = schatten_norm(a, p) ** l / factorial(l)
    excess = max(lhs - rhs, 0.0)
    return CheckReport("tail-bound", p, excess, excess / rhs if rhs > 0 else excess,
                       bool(lhs <= rhs + slack), seed, {"l": l, "lhs": lhs, "rhs": rhs})


def remainder_exponential(f: CircleFunction, u, a, n: int) -> np.ndarray:
    """Remainder ``R_{n,f}(A, U)`` of ``f(exp(iA) U)`` with exact exponential tails."""
    a = _check_hermitian(a)
    if n > f.smoothness:
        raise ValueError(f"f is only C^{f.smoothness}")
    u = as_unitary(u)
    v = UnitaryMatrix(expm_hermitian(a) @ u.matrix)
    d = u.dim
    pows = [np.eye(d, dtype=complex)]
    for _ in range(n):
        pows.append(pows[-1] @ (1j * a))
    return _composition_sum(
        f, n, v, u,
        lambda l: exponential_tail(a, l) @ u.matrix,
        lambda l: pows[l] / factorial(l) @ u.matrix,
    )


def _check_orders(path, f, n):
    if n < 1:
        raise ValueError("remainder order must be at least 1")
    if n - 1 > path.n_max:
        raise ValueError(f"path is only differentiable to order {path.n_max}")
    if n > f.smoothness:
        raise ValueError(f"f is only C^{f.smoothness}")


def _slope(xs, ys, count=4):
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    order = np.argsort(xs)[:count]
    return float(np.polyfit(np.log(xs[order]), np.log(ys[order]), 1)[0])


def estimate_sweep(f: CircleFunction, u, a, n: int, p: float, scales=None,
                   n_grid: int = 512, seed=None) -> RemainderReport:
    """Record ``||R_{n,f}(sA, U)||_{p/n}`` against ``sum_m ||f^(m)||_inf ||sA||_p^n`` over scales ``s``.

    The slope of ``log ||R||_{p/n}`` against ``log s`` is fitted on the four
    smallest scales. Also records the ratio
    ``||phi^{(n)}(0)||_p / (sum_m ||f^(m)||_inf ||A||_p^n)`` at the reference scale ``s = 1``.
    """
    if not 1 < n < p:
        raise ValueError("the S^{p/n} estimate needs 1 < n < p")
    start = time.perf_counter()
    scales = np.geomspace(1e-4, 1.0, 17) if scales is None else np.asarray(scales, dtype=float)
    u = as_unitary(u)
    a = np.asarray(a, dtype=complex)
    fsum = sum(sup_norm(f.derivative(m), n_grid) for m in range(1, n + 1))
    norms, ratios = [], []
    for s in scales:
        r = remainder_exponential(f, u, s * a, n)
        rn = schatten_norm(r, p / n)
        denom = fsum * schatten_norm(s * a, p) ** n
        norms.append(rn)
        ratios.append(rn / denom if denom > 0 else (0.0 if rn == 0 else math.inf))
    positive = np.array(norms) > 0
    slope = _slope(scales[positive], np.array(norms)[positive]) if positive.sum() >= 2 else math.nan
    moi_form = remainder_exponential(f, u, a, n)
    direct = remainder_direct(ExponentialPath(a, u.matrix), f, 1.0, n)
    diff = schatten_norm(direct - moi_form, p)
    ref = schatten_norm(moi_form, p)
    deriv = gateaux_exponential(f, u, a, 0.0, n)
    deriv_den = fsum * schatten_norm(a, p) ** n
    report = RemainderReport(
        n=n, p=p, direct=direct, moi_form=moi_form,
        residual_rel=diff / ref if ref > 0 else diff,
        estimate_ratio=float(max(ratios)),
        scaling_slope=slope, seed=seed,
        extra={
            "scales": scales, "remainder_norms": norms, "ratios": ratios,
            "quasi_norm": p / n < 1,
            "derivative_ratio": schatten_norm(deriv, p) / deriv_den if deriv_den > 0 else 0.0,
            "sup_norm_grid": n_grid,
        },
    )
    report.timing = time.perf_counter() - start
    return report
