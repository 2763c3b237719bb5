"""Divided differences of circle functions, including confluent nodes.

Two evaluation paths are provided:

* :func:`divided_difference` runs the textbook recursion
  ``f[l1, l2, ...] = (f[l1, l3, ...] - f[l2, l3, ...]) / (l1 - l2)`` and uses
  derivative values where nodes coincide. It works for any
  :class:`~unitary_moi.circle_fn.CircleFunction` and is the reference oracle.
* :func:`symbol_eval` expands a :class:`~unitary_moi.circle_fn.TrigPoly` into
  monomials and uses closed forms in complete homogeneous symmetric
  polynomials. It is exact on clustered nodes and vectorized over node arrays.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache

import numpy as np

from .circle_fn import CIRCLE_TOL, CircleFunction, TrigPoly, check_on_circle

CONFLUENCE_TOL = 1e-8

__all__ = [
    "CONFLUENCE_TOL",
    "NodeTuple",
    "complete_homogeneous",
    "divided_difference",
    "monomial_divdiff",
    "symbol_eval",
]


class NodeTuple:
    """Ordered nodes on the unit circle with a partition into confluent clusters."""

    def __init__(self, nodes, tol: float = CONFLUENCE_TOL):
        self.nodes = check_on_circle(np.atleast_1d(np.asarray(nodes, dtype=complex)), CIRCLE_TOL)
        if self.nodes.ndim != 1 or self.nodes.size == 0:
            raise ValueError("a node tuple is a nonempty 1-d sequence")
        self.tol = tol
        labels = -np.ones(self.nodes.size, dtype=int)
        nclusters = 0
        for i, z in enumerate(self.nodes):
            if labels[i] >= 0:
                continue
            members = (labels < 0) & (np.abs(self.nodes - z) <= tol)
            labels[members] = nclusters
            nclusters += 1
        self.labels = labels

    @property
    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.labels.max() + 1)]

    def __len__(self):
        return self.nodes.size

    def __iter__(self):
        return iter(self.nodes)

    def to_json(self) -> list[dict]:
        return [{"re": float(z.real), "im": float(z.imag)} for z in self.nodes]

    @classmethod
    def from_json(cls, data) -> "NodeTuple":
        if isinstance(data, str):
            data = json.loads(data)
        return cls([complex(t["re"], t["im"]) for t in data])


def _as_nodes(nodes) -> np.ndarray:
    if isinstance(nodes, NodeTuple):
        return nodes.nodes
    return check_on_circle(np.atleast_1d(np.asarray(nodes, dtype=complex)))


def _order(nodes: np.ndarray, n: int | None) -> int:
    if n is None:
        return nodes.size - 1
    if nodes.size != n + 1:
        raise ValueError(f"order {n} divided difference needs {n + 1} nodes, got {nodes.size}")
    return n


def divided_difference(f: CircleFunction, nodes, n: int | None = None,
                       tol: float = CONFLUENCE_TOL) -> complex:
    """Recursive divided difference ``f^[n](nodes)``.

    When the two leading nodes are confluent, a node outside their cluster is
    rotated into the second slot (divided differences are symmetric). A tuple
    lying entirely in one cluster ``c`` evaluates to ``f^{(n)}(c) / n!``.
    """
    lam = _as_nodes(nodes)
    n = _order(lam, n)
    if n > f.smoothness:
        raise ValueError(f"f^[{n}] needs C^{n} smoothness, f is C^{f.smoothness}")
    derivs = [f] + [f.derivative(j) for j in range(1, n + 1)] if n else [f]

    @lru_cache(maxsize=None)
    def dd(idx: tuple[int, ...]) -> complex:
        if len(idx) == 1:
            return complex(f(lam[idx[0]]))
        i0 = idx[0]
        far = [j for j in idx[1:] if abs(lam[j] - lam[i0]) > tol]
        if not far:
            order = len(idx) - 1
            return complex(derivs[order](lam[i0])) / math.factorial(order)
        rest = list(idx[1:])
        if abs(lam[idx[1]] - lam[i0]) > tol:
            i1 = idx[1]
        else:
            i1 = far[0]
        rest.remove(i1)
        rest = tuple(rest)
        return (dd((i0, *rest)) - dd((i1, *rest))) / (lam[i0] - lam[i1])

    return dd(tuple(range(lam.size)))


def complete_homogeneous(r_max: int, x) -> np.ndarray:
    """All complete homogeneous symmetric polynomials ``h_0..h_{r_max}``.

    ``x`` has shape ``(..., N)``; the result has shape ``(r_max + 1, ...)``.
    Uses ``h_s(x_1..x_j) = h_s(x_1..x_{j-1}) + x_j h_{s-1}(x_1..x_j)``.
    """
    x = np.asarray(x, dtype=complex)
    h = np.zeros((r_max + 1,) + x.shape[:-1], dtype=complex)
    h[0] = 1.0
    for j in range(x.shape[-1]):
        xj = x[..., j]
        for s in range(1, r_max + 1):
            h[s] = h[s] + xj * h[s - 1]
    return h


def monomial_divdiff(m: int, nodes, n: int | None = None):
    """Divided difference of ``z^m`` of order ``n``.

    For ``m >= 0`` this is ``h_{m-n}(nodes)`` (zero if ``m < n``). For
    ``m = -k < 0`` it is ``(-1)^n (prod mu) h_{k-1}(mu)`` with ``mu = 1/nodes``.
    ``nodes`` may carry leading batch dimensions; the last axis holds the tuple.
    """
    lam = np.asarray(nodes.nodes if isinstance(nodes, NodeTuple) else nodes, dtype=complex)
    if lam.ndim == 0:
        lam = lam[None]
    n = lam.shape[-1] - 1 if n is None else n
    if lam.shape[-1] != n + 1:
        raise ValueError(f"order {n} divided difference needs {n + 1} nodes")
    if m >= 0:
        if m < n:
            out = np.zeros(lam.shape[:-1], dtype=complex)
        else:
            out = complete_homogeneous(m - n, lam)[m - n]
    else:
        k = -m
        mu = 1.0 / lam
        out = (-1) ** n * np.prod(mu, axis=-1) * complete_homogeneous(k - 1, mu)[k - 1]
    return complex(out) if out.ndim == 0 else out


def symbol_eval(f: TrigPoly, n: int, nodes):
    """``f^[n]`` at ``nodes`` via monomial expansion (vectorized over leading axes)."""
    lam = np.asarray(nodes.nodes if isinstance(nodes, NodeTuple) else nodes, dtype=complex)
    scalar = lam.ndim <= 1
    lam = np.atleast_1d(lam)
    if lam.shape[-1] != n + 1:
        raise ValueError(f"order {n} divided difference needs {n + 1} nodes")
    out = np.zeros(lam.shape[:-1], dtype=complex)
    degrees, coeffs = f.degrees, f.coeffs
    pos = degrees >= n
    if np.any(pos):
        r_max = int(degrees[pos].max()) - n
        h = complete_homogeneous(r_max, lam)
        for m, c in zip(degrees[pos], coeffs[pos]):
            out = out + c * h[m - n]
    neg = degrees < 0
    if np.any(neg):
        mu = 1.0 / lam
        k_max = int(-degrees[neg].min())
        h = complete_homogeneous(k_max - 1, mu)
        pref = (-1) ** n * np.prod(mu, axis=-1)
        for m, c in zip(degrees[neg], coeffs[neg]):
            out = out + c * pref * h[-m - 1]
    return complex(out) if scalar else out
