"""Multiple operator integrals for tuples of unitaries.

For unitaries ``U_1..U_n`` with clustered spectral decompositions
``U_j = sum_a lambda_a^{(j)} P_a^{(j)}`` and a symbol ``phi`` on ``T^n``,

    Gamma^{U_1..U_n}(phi)(K_1..K_{n-1})
        = sum phi(lambda_{a_1}, .., lambda_{a_n}) P_{a_1} K_1 P_{a_2} ... K_{n-1} P_{a_n}.

:func:`moi_apply` evaluates this as a tensor contraction in the eigenbases;
:func:`moi_apply_spectral` is the literal projector sum, kept as an oracle.
"""

from __future__ import annotations

import itertools
import string

import numpy as np

from .circle_fn import CircleFunction, TrigPoly, fejer_approx, sup_norm
from .divided_diff import divided_difference, symbol_eval
from .matrix_core import UnitaryMatrix, as_unitary, expm_hermitian, func_calculus, schatten_norm
from .report import CheckReport, residual_report

MAX_ARITY = 6
MAX_DIM = 16

__all__ = [
    "DividedDiff",
    "MoiOperator",
    "MoiSymbol",
    "RawClosure",
    "TensorProduct",
    "bound_ratio_recorder",
    "fejer_convergence_check",
    "first_order_identity_check",
    "moi_apply",
    "moi_apply_spectral",
    "perturbation_insert_check",
    "sot_convergence_check",
    "telescoping_check",
]


class MoiSymbol:
    """A bounded function on ``T^arity`` usable as an operator-integral symbol."""

    arity: int

    def tensor(self, values: list[np.ndarray]) -> np.ndarray:
        """Symbol on the grid ``values[0] x values[1] x ...``."""
        raise NotImplementedError

    def __call__(self, *z) -> complex:
        return complex(self.tensor([np.atleast_1d(np.asarray(x, dtype=complex)) for x in z]).ravel()[0])

    def __add__(self, other):
        if not isinstance(other, MoiSymbol):
            return NotImplemented
        return _Combination([(1.0, self), (1.0, other)])

    def __rmul__(self, a):
        if not np.isscalar(a):
            return NotImplemented
        return _Combination([(a, self)])

    def __sub__(self, other):
        return self + (-1.0) * other


class DividedDiff(MoiSymbol):
    """The divided difference ``f^[n]``, a symbol of arity ``n + 1``."""

    def __init__(self, f: CircleFunction, n: int):
        if n < 0:
            raise ValueError("order must be nonnegative")
        if n > f.smoothness:
            raise ValueError(f"f^[{n}] needs C^{n} smoothness, f is C^{f.smoothness}")
        self.f, self.n, self.arity = f, n, n + 1

    def tensor(self, values):
        grids = np.meshgrid(*values, indexing="ij")
        if isinstance(self.f, TrigPoly):
            return symbol_eval(self.f, self.n, np.stack(grids, axis=-1))
        out = np.empty(grids[0].shape, dtype=complex)
        for idx in np.ndindex(out.shape):
            out[idx] = divided_difference(self.f, [g[idx] for g in grids], self.n)
        return out


class TensorProduct(MoiSymbol):
    """Elementary tensor ``f_1 (x) ... (x) f_n``."""

    def __init__(self, factors):
        self.factors = list(factors)
        self.arity = len(self.factors)

    def tensor(self, values):
        out = np.ones((), dtype=complex)
        for f, v in zip(self.factors, values):
            out = np.multiply.outer(out, np.asarray(f(v), dtype=complex))
        return out


class RawClosure(MoiSymbol):
    """Symbol given by a closure ``phi(z_1, .., z_n)`` that broadcasts over arrays."""

    def __init__(self, func, arity: int):
        self.func, self.arity = func, arity

    def tensor(self, values):
        grids = np.meshgrid(*values, indexing="ij")
        return np.broadcast_to(np.asarray(self.func(*grids), dtype=complex), grids[0].shape)


class _Combination(MoiSymbol):
    def __init__(self, terms):
        flat = []
        for a, s in terms:
            if isinstance(s, _Combination):
                flat.extend((a * b, t) for b, t in s.terms)
            else:
                flat.append((a, s))
        arities = {s.arity for _, s in flat}
        if len(arities) != 1:
            raise ValueError("cannot combine symbols of different arity")
        self.terms, self.arity = flat, arities.pop()

    def tensor(self, values):
        return sum(a * s.tensor(values) for a, s in self.terms)


def _prepare(symbol, unitaries, args, allow_large, check_args=True):
    us = [as_unitary(u) for u in unitaries]
    n = len(us)
    if symbol.arity != n:
        raise ValueError(f"symbol of arity {symbol.arity} paired with {n} unitaries")
    if check_args and len(args) != n - 1:
        raise ValueError(f"{n} unitaries take {n - 1} arguments, got {len(args)}")
    dims = {u.dim for u in us}
    if len(dims) != 1:
        raise ValueError("unitaries of different dimensions")
    d = dims.pop()
    ks = [np.asarray(k, dtype=complex) for k in args]
    if check_args and any(k.shape != (d, d) for k in ks):
        raise ValueError(f"arguments must be {d}x{d}")
    if not allow_large and (n > MAX_ARITY or d > MAX_DIM):
        raise ValueError(
            f"arity {n} / dimension {d} exceeds the desk-scale caps "
            f"({MAX_ARITY}, {MAX_DIM}); pass allow_large=True to override"
        )
    return us, ks


def _cluster_tensor(symbol, us):
    t = symbol.tensor([u.cluster_values for u in us])
    if not np.all(np.isfinite(t)):
        raise ValueError("symbol undefined at some spectral tuple")
    return t


class MoiOperator:
    """The multilinear map ``Gamma^{U_1..U_n}(symbol)`` with its symbol tensor precomputed.

    The symbol is evaluated once per tuple of eigenvalue clusters; application
    is a fixed-order ``einsum`` contraction, so results are bit-reproducible.
    """

    def __init__(self, symbol: MoiSymbol, unitaries, allow_large: bool = False):
        us, _ = _prepare(symbol, unitaries, (), allow_large, check_args=False)
        self.unitaries = us
        self.arity = len(us)
        t = _cluster_tensor(symbol, us)
        self._tensor = t[np.ix_(*[u.labels for u in us])]
        n = self.arity
        letters = string.ascii_letters[:n]
        self._spec = (letters + "," + ",".join(letters[j:j + 2] for j in range(n - 1))
                      + "->" + letters[0] + letters[-1])

    def __call__(self, *args) -> np.ndarray:
        n, qs = self.arity, [u.eigvecs for u in self.unitaries]
        if len(args) != n - 1:
            raise ValueError(f"{n} unitaries take {n - 1} arguments, got {len(args)}")
        d = qs[0].shape[0]
        ks = [np.asarray(k, dtype=complex) for k in args]
        if any(k.shape != (d, d) for k in ks):
            raise ValueError(f"arguments must be {d}x{d}")
        if n == 1:
            return (qs[0] * self._tensor) @ qs[0].conj().T
        kt = [qs[j].conj().T @ ks[j] @ qs[j + 1] for j in range(n - 1)]
        r = np.einsum(self._spec, self._tensor, *kt, optimize="greedy")
        return qs[0] @ r @ qs[-1].conj().T


def moi_apply(symbol: MoiSymbol, unitaries, args=(), allow_large: bool = False) -> np.ndarray:
    """Evaluate ``Gamma^{U_1..U_n}(symbol)(K_1..K_{n-1})``."""
    us, _ = _prepare(symbol, unitaries, args, allow_large)
    return MoiOperator(symbol, us, allow_large)(*args)


def moi_apply_spectral(symbol: MoiSymbol, unitaries, args=()) -> np.ndarray:
    """Literal projector sum over all cluster tuples (slow reference path)."""
    us, ks = _prepare(symbol, unitaries, args, allow_large=True)
    t = _cluster_tensor(symbol, us)
    projs = [u.projections for u in us]
    d = us[0].dim
    out = np.zeros((d, d), dtype=complex)
    for idx in itertools.product(*[range(len(p)) for p in projs]):
        term = projs[0][idx[0]]
        for j in range(1, len(us)):
            term = term @ ks[j - 1] @ projs[j][idx[j]]
        out += t[idx] * term
    return out


def _insert(args, slot, x):
    """Insert ``x`` so that it becomes argument number ``slot`` (1-based)."""
    args = list(args)
    return args[:slot - 1] + [x] + args[slot - 1:]


def first_order_identity_check(f: CircleFunction, u, v, p: float = 2.0, tol: float = 1e-8,
                               seed=None) -> CheckReport:
    """Residual of ``f(U) - f(V) = Gamma^{U,V}(f^[1])(U - V)`` in the S^p norm."""
    u, v = as_unitary(u), as_unitary(v)
    lhs = func_calculus(f, u) - func_calculus(f, v)
    rhs = moi_apply(DividedDiff(f, 1), [u, v], [u.matrix - v.matrix])
    res = schatten_norm(lhs - rhs, p)
    return residual_report("first_order_perturbation", p, res, schatten_norm(lhs, p), tol, seed)


def perturbation_insert_check(f: CircleFunction, n: int, others, u, v, slot: int, args,
                              p: float = 2.0, tol: float = 1e-8, seed=None) -> CheckReport:
    """Residual of the perturbation formula with ``U``/``V`` in position ``slot``.

    ``others`` are the ``n - 1`` auxiliary unitaries and ``args`` the ``n - 1``
    arguments; ``U - V`` is inserted as argument number ``slot`` on the right.
    """
    if not 1 <= slot <= n:
        raise ValueError(f"slot must lie in 1..{n}")
    others = [as_unitary(x) for x in others]
    if len(others) != n - 1:
        raise ValueError(f"order {n} needs {n - 1} auxiliary unitaries")
    u, v = as_unitary(u), as_unitary(v)
    head, tail = others[:slot - 1], others[slot - 1:]
    low = DividedDiff(f, n - 1)
    lhs = moi_apply(low, head + [u] + tail, args) - moi_apply(low, head + [v] + tail, args)
    rhs = moi_apply(DividedDiff(f, n), head + [u, v] + tail, _insert(args, slot, u.matrix - v.matrix))
    res = schatten_norm(lhs - rhs, p)
    return residual_report("perturbation_insert", p, res, schatten_norm(lhs, p), tol, seed,
                           order=n, slot=slot)


def telescoping_check(f: CircleFunction, n: int, u, v, k: int, args, p: float = 2.0,
                      tol: float = 1e-8, seed=None) -> CheckReport:
    """Residual of the telescoping identity for ``Gamma^{(U)^k,(V)^{n-k}}(f^[n-1])``."""
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}")
    u, v = as_unitary(u), as_unitary(v)
    low = DividedDiff(f, n - 1)
    lhs = moi_apply(low, [u] * k + [v] * (n - k), args) - moi_apply(low, [v] * n, args)
    high = DividedDiff(f, n)
    diff = u.matrix - v.matrix
    rhs = sum(moi_apply(high, [u] * i + [v] * (n - i + 1), _insert(args, i, diff))
              for i in range(1, k + 1))
    res = schatten_norm(lhs - rhs, p)
    return residual_report("telescoping", p, res, schatten_norm(lhs, p), tol, seed, order=n, k=k)


def sot_convergence_check(symbol: MoiSymbol, unitaries, generators, args, j_max: int = 20,
                          threshold: float = 1e-6, seed=None) -> CheckReport:
    """Hilbert-Schmidt error of ``Gamma`` along ``U_i^j = exp(i A_i / 2^j) U_i``.

    Passes when the error at ``j_max`` is below ``threshold``. ``generators``
    may be ``None`` entries for constant sequences.
    """
    us = [as_unitary(u) for u in unitaries]
    base = moi_apply(symbol, us, args)
    errors = []
    for j in range(1, j_max + 1):
        perturbed = [u if a is None else UnitaryMatrix(expm_hermitian(a, 2.0 ** -j) @ u.matrix)
                     for u, a in zip(us, generators)]
        errors.append(schatten_norm(moi_apply(symbol, perturbed, args) - base, 2))
    scale = schatten_norm(base, 2)
    rep = residual_report("sot_convergence", 2.0, errors[-1], scale, np.inf, seed,
                          errors=errors, threshold=threshold)
    rep.passed = errors[-1] < threshold
    return rep


def fejer_convergence_check(f: CircleFunction, n: int, unitaries, args, ks=(8, 16, 32, 64),
                            seed=None) -> CheckReport:
    """Entrywise convergence of ``Gamma((f * F_k)^[n])`` to ``Gamma(f^[n])`` as ``k`` grows."""
    target = moi_apply(DividedDiff(f, n), unitaries, args)
    errors = []
    for k in ks:
        approx = moi_apply(DividedDiff(fejer_approx(f, k), n), unitaries, args)
        errors.append(float(np.max(np.abs(approx - target))))
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    rep = residual_report("fejer_moi_convergence", 2.0, errors[-1], float(np.max(np.abs(target))),
                          np.inf, seed, orders=list(ks), errors=errors)
    rep.passed = decreasing
    return rep


def bound_ratio_recorder(f: CircleFunction, n: int, unitaries, args, p: float, p_splits,
                         n_grid: int = 512, seed=None) -> CheckReport:
    """Record ``||Gamma(f^[n])(K)||_p / (||f^(n)||_inf prod ||K_i||_{p_i})``.

    The bounding constant is unknown, so the report only requires a finite ratio.
    """
    p_splits = list(p_splits)
    if len(p_splits) != n or len(args) != n:
        raise ValueError(f"order {n} needs {n} arguments and {n} exponents")
    if abs(1.0 / p - sum(1.0 / q for q in p_splits)) > 1e-12:
        raise ValueError("Hoelder split mismatch: 1/p != sum 1/p_i")
    value = schatten_norm(moi_apply(DividedDiff(f, n), unitaries, args), p)
    denom = sup_norm(f.derivative(n), n_grid) * np.prod([schatten_norm(k, q) for k, q in zip(args, p_splits)])
    ratio = value / denom if denom > 0 else (0.0 if value == 0 else np.inf)
    rep = CheckReport("moi_bound_ratio", p, float(value), float(ratio), bool(np.isfinite(ratio)), seed,
                      {"ratio": float(ratio), "p_splits": p_splits, "sup_norm_grid": n_grid})
    return rep
