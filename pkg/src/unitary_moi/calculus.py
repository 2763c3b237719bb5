"""Frechet and Gateaux S^p-derivatives of ``U -> f(U)`` and finite-difference oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .circle_fn import CircleFunction
from .matrix_core import UnitaryMatrix, as_unitary, expm_hermitian, func_calculus, schatten_norm
from .moi import DividedDiff, MoiOperator
from .report import CheckReport, residual_report

MAX_DERIVATIVE_ORDER = 4
MAX_DERIVATIVE_DIM = 8
MAX_COMPOSITION_ORDER = 8

__all__ = [
    "Composition",
    "ExponentialPath",
    "GeneralPath",
    "UnitaryPath",
    "enumerate_compositions",
    "finite_difference_oracle",
    "frechet_derivative",
    "frechet_residual_check",
    "gateaux_derivative",
    "gateaux_exponential",
    "moi_continuity_check",
    "product_rule_check",
    "two_sided_path",
]


@dataclass(frozen=True)
class Composition:
    """Ordered tuple of positive parts with multinomial weight ``k! / prod(l_i!)``."""

    parts: tuple[int, ...]

    def __post_init__(self):
        if not self.parts or any(int(l) != l or l < 1 for l in self.parts):
            raise ValueError("composition parts must be positive integers")

    @property
    def k(self) -> int:
        return sum(self.parts)

    @property
    def weight(self) -> int:
        return factorial(self.k) // math.prod(factorial(l) for l in self.parts)

    def __len__(self):
        return len(self.parts)


def enumerate_compositions(k: int) -> list[Composition]:
    """All ``2^(k-1)`` compositions of ``k``, ordered by number of parts."""
    if not 1 <= k <= MAX_COMPOSITION_ORDER:
        raise ValueError(f"composition order must lie in 1..{MAX_COMPOSITION_ORDER}")
    out = []
    for m in range(1, k + 1):
        for cuts in itertools.combinations(range(1, k), m - 1):
            bounds = (0, *cuts, k)
            out.append(Composition(tuple(b - a for a, b in zip(bounds, bounds[1:]))))
    return out


class UnitaryPath:
    """``t -> U(t)`` with derivatives of ``U~(t) = U(t) - U(0)``."""

    #: highest available derivative order of ``U~``
    n_max: float
    #: frequency scale used to pick finite-difference steps
    scale: float = 1.0

    def __init__(self):
        self._cache: dict[float, UnitaryMatrix] = {}

    def matrix(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def _derivative(self, t: float, l: int) -> np.ndarray:
        raise NotImplementedError

    def at(self, t: float) -> UnitaryMatrix:
        t = float(t)
        if t not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[t] = UnitaryMatrix(self.matrix(t))
        return self._cache[t]

    def tilde(self, t: float) -> np.ndarray:
        return self.matrix(t) - self.matrix(0.0)

    def derivative(self, t: float, l: int) -> np.ndarray:
        """``U~^{(l)}(t)``; equals ``U(t) - U(0)`` for ``l = 0``."""
        if l == 0:
            return self.tilde(t)
        if l > self.n_max:
            raise ValueError(f"path is only differentiable to order {self.n_max}")
        return self._derivative(float(t), l)


class ExponentialPath(UnitaryPath):
    """``U(t) = exp(itA) U0`` with ``U~^{(l)}(t) = (iA)^l U(t)``."""

    n_max = math.inf

    def __init__(self, a, u0):
        super().__init__()
        self.a = np.asarray(a, dtype=complex)
        expm_hermitian(self.a, 0.0)  # validates hermiticity
        self.u0 = np.asarray(u0, dtype=complex)
        self.scale = max(np.linalg.norm(self.a, 2), 1e-12)

    def matrix(self, t):
        return expm_hermitian(self.a, t) @ self.u0

    def _derivative(self, t, l):
        return np.linalg.matrix_power(1j * self.a, l) @ self.matrix(t)


class GeneralPath(UnitaryPath):
    """Path from user closures: ``u(t)`` and ``derivatives[l-1](t) = U~^{(l)}(t)``."""

    def __init__(self, u, derivatives, scale: float = 1.0):
        super().__init__()
        self._u = u
        self._derivs = list(derivatives)
        self.n_max = len(self._derivs)
        self.scale = scale

    def matrix(self, t):
        return np.asarray(self._u(t), dtype=complex)

    def _derivative(self, t, l):
        return np.asarray(self._derivs[l - 1](t), dtype=complex)


def two_sided_path(a, u0, b, n_max: int = 8) -> GeneralPath:
    """``U(t) = exp(itA) U0 exp(itB)`` with closed-form derivatives (a non-exponential path)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    u0 = np.asarray(u0, dtype=complex)
    ia_pows = [np.linalg.matrix_power(1j * a, j) for j in range(n_max + 1)]
    ib_pows = [np.linalg.matrix_power(1j * b, j) for j in range(n_max + 1)]

    def u(t):
        return expm_hermitian(a, t) @ u0 @ expm_hermitian(b, t)

    def make(l):
        def deriv(t):
            ut = u(t)
            return sum(comb(l, j) * ia_pows[j] @ ut @ ib_pows[l - j] for j in range(l + 1))
        return deriv

    scale = max(np.linalg.norm(a, 2) + np.linalg.norm(b, 2), 1e-12)
    return GeneralPath(u, [make(l) for l in range(1, n_max + 1)], scale=scale)


def _check_caps(k: int, d: int, allow_large: bool):
    if allow_large:
        return
    if k > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order {k} exceeds the default cap {MAX_DERIVATIVE_ORDER}")
    if d > MAX_DERIVATIVE_DIM:
        raise ValueError(f"dimension {d} exceeds the default cap {MAX_DERIVATIVE_DIM}")


def frechet_derivative(f: CircleFunction, u, xs, allow_large: bool = False) -> np.ndarray:
    """``D^k f(U)(X_1..X_k)``: symmetrized ``Gamma^{(U)^{k+1}}(f^[k])`` over all orderings."""
    u = as_unitary(u)
    k = len(xs)
    if k == 0:
        return func_calculus(f, u)
    _check_caps(k, u.dim, allow_large)
    gamma = MoiOperator(DividedDiff(f, k), [u] * (k + 1))
    return sum(gamma(*perm) for perm in itertools.permutations(xs))


def _faa_di_bruno(f, ut: UnitaryMatrix, k: int, argument) -> np.ndarray:
    out = np.zeros((ut.dim, ut.dim), dtype=complex)
    by_parts: dict[int, list[Composition]] = {}
    for c in enumerate_compositions(k):
        by_parts.setdefault(len(c), []).append(c)
    for m, comps in by_parts.items():
        gamma = MoiOperator(DividedDiff(f, m), [ut] * (m + 1))
        for c in comps:
            out += c.weight * gamma(*[argument(l) for l in c.parts])
    return out


def gateaux_derivative(path: UnitaryPath, f: CircleFunction, t: float, k: int,
                       allow_large: bool = False) -> np.ndarray:
    """``phi^{(k)}(t)`` for ``phi(t) = f(U(t)) - f(U(0))``.

    Sum over ``m`` and compositions ``l_1 + .. + l_m = k`` of
    ``k!/(l_1!..l_m!) Gamma^{(U(t))^{m+1}}(f^[m])(U~^{(l_1)}(t), .., U~^{(l_m)}(t))``.
    """
    if k > path.n_max:
        raise ValueError(f"path is only differentiable to order {path.n_max}")
    if k > f.smoothness:
        raise ValueError(f"f is only C^{f.smoothness}")
    ut = path.at(t)
    _check_caps(k, ut.dim, allow_large)
    cache: dict[int, np.ndarray] = {}

    def argument(l):
        if l not in cache:
            cache[l] = path.derivative(t, l)
        return cache[l]

    return _faa_di_bruno(f, ut, k, argument)


def gateaux_exponential(f: CircleFunction, u, a, t: float, k: int,
                        allow_large: bool = False) -> np.ndarray:
    """``phi^{(k)}(t)`` along ``U(t) = exp(itA) U``, with arguments ``A^{l} U(t)`` and prefactor ``i^k``."""
    if k > f.smoothness:
        raise ValueError(f"f is only C^{f.smoothness}")
    a = np.asarray(a, dtype=complex)
    ut = UnitaryMatrix(expm_hermitian(a, t) @ np.asarray(u))
    _check_caps(k, ut.dim, allow_large)
    a_pows = {0: np.eye(ut.dim)}
    for l in range(1, k + 1):
        a_pows[l] = a_pows[l - 1] @ a
    return 1j ** k * _faa_di_bruno(f, ut, k, lambda l: a_pows[l] @ ut.matrix)


# central second-order stencils: offsets (in units of h) and weights
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def _central_difference(func, t, k, h):
    offsets, weights = _STENCILS[k]
    return sum(w * func(t + o * h) for o, w in zip(offsets, weights)) / h ** k


# rounding amplifies like eps / h^k, so higher orders take larger steps
_BASE_STEPS = {1: 1e-3, 2: 3e-3, 3: 1e-2, 4: 2e-2}


def default_step(path: UnitaryPath, k: int = 1) -> float:
    return _BASE_STEPS[k] / path.scale


def richardson_derivative(func, t: float, k: int, h: float) -> np.ndarray:
    """Order-``k`` central difference with one Richardson step over ``h, h/2``."""
    if k not in _STENCILS:
        raise ValueError(f"finite-difference orders 1..{max(_STENCILS)} are supported")
    if not h > 1e-8:
        raise ValueError(f"step {h} underflows the finite-difference model")
    coarse = _central_difference(func, t, k, h)
    fine = _central_difference(func, t, k, h / 2)
    return (4 * fine - coarse) / 3


def finite_difference_oracle(path: UnitaryPath, f: CircleFunction, t: float, k: int,
                             h: float | None = None) -> np.ndarray:
    """Independent estimate of ``phi^{(k)}(t)`` from values of ``f(U(s))`` only."""
    h = default_step(path, k) if h is None else h
    return richardson_derivative(lambda s: func_calculus(f, UnitaryMatrix(path.matrix(s))), t, k, h)


def frechet_residual_check(f: CircleFunction, u, a, xs, p: float = 2.0,
                           eps=(1e-1, 1e-2, 1e-3, 1e-4), min_slope: float = 1.8,
                           seed=None) -> CheckReport:
    """Scale sweep for the order ``k = len(xs) + 1`` Frechet remainder along ``V = exp(i eps A) U``.

    The residual ``(D^{k-1}f(V) - D^{k-1}f(U))(X) - D^k f(U)(X, V - U)`` must
    shrink faster than ``||V - U||_p``: its fitted log-log slope must be at least ``min_slope``.
    """
    u = as_unitary(u)
    k = len(xs) + 1
    base = frechet_derivative(f, u, xs)
    steps, residuals, scales = [], [], []
    for e in eps:
        v = UnitaryMatrix(expm_hermitian(a, e) @ u.matrix)
        dv = v.matrix - u.matrix
        lhs = frechet_derivative(f, v, xs) - base
        r = lhs - frechet_derivative(f, u, list(xs) + [dv])
        steps.append(schatten_norm(dv, p))
        residuals.append(schatten_norm(r, p))
        scales.append(schatten_norm(lhs, p))
    steps, residuals = np.array(steps), np.array(residuals)
    exact = np.all(residuals <= 1e-13 * np.maximum(np.array(scales), 1.0))
    slope = math.nan if exact else float(np.polyfit(np.log(steps), np.log(residuals), 1)[0])
    passed = bool(exact or slope >= min_slope)
    return CheckReport("frechet_remainder_scaling", p, float(residuals[-1]),
                       float(residuals[-1] / max(scales[-1], 1e-300)), passed, seed,
                       {"order": k, "eps": list(eps), "step_norms": steps, "residuals": residuals,
                        "slope": slope, "min_slope": min_slope})


def product_rule_check(path: UnitaryPath, f: CircleFunction, arg_paths, t: float,
                       tol: float = 1e-5, h: float | None = None, seed=None) -> CheckReport:
    """Compare the product rule for ``psi(t) = Gamma^{(U(t))^{m+1}}(f^[m])(V_1(t)..V_m(t))``
    with a Richardson finite difference of ``psi``.

    ``arg_paths`` is a list of ``(V, V')`` closure pairs.
    """
    m = len(arg_paths)
    low, high = DividedDiff(f, m), DividedDiff(f, m + 1)

    def psi(s):
        us = path.at(s)
        return MoiOperator(low, [us] * (m + 1))(*[vp[0](s) for vp in arg_paths])

    vs = [vp[0](t) for vp in arg_paths]
    dvs = [vp[1](t) for vp in arg_paths]
    ut = path.at(t)
    du = path.derivative(t, 1)
    g_low = MoiOperator(low, [ut] * (m + 1))
    g_high = MoiOperator(high, [ut] * (m + 2))
    rhs = sum(g_low(*(vs[:j] + [dvs[j]] + vs[j + 1:])) for j in range(m))
    rhs = rhs + sum(g_high(*(vs[:j] + [du] + vs[j:])) for j in range(m + 1))
    h = default_step(path) if h is None else h
    fd = richardson_derivative(psi, t, 1, h)
    res = schatten_norm(fd - rhs, 2)
    return residual_report("product_rule", 2.0, res, schatten_norm(rhs, 2), tol, seed, order=m)


def moi_continuity_check(f: CircleFunction, unitaries, generators, xs, p: float = 2.0,
                         deltas=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5), seed=None) -> CheckReport:
    """Normalized change of ``Gamma(f^[n])(X)`` under ``U_i -> exp(i delta A_i) U_i``.

    Normalization is ``prod ||X_i||_{np}``; the check requires a strictly
    decreasing sequence over the (decreasing) ``deltas``.
    """
    n = len(xs)
    us = [as_unitary(u) for u in unitaries]
    sym = DividedDiff(f, n)
    base = MoiOperator(sym, us)(*xs)
    norm = math.prod(schatten_norm(x, n * p) for x in xs)
    diffs = []
    for delta in deltas:
        vs = [UnitaryMatrix(expm_hermitian(a, delta) @ u.matrix) for u, a in zip(us, generators)]
        diffs.append(schatten_norm(MoiOperator(sym, vs)(*xs) - base, p) / norm)
    passed = all(b < a for a, b in zip(diffs, diffs[1:]))
    return CheckReport("moi_continuity", p, float(diffs[-1] * norm), float(diffs[-1]), passed, seed,
                       {"order": n, "deltas": list(deltas), "normalized_differences": diffs})
