"""Functions on the unit circle with exact derivatives.

Derivatives follow the complex convention along the circle,

    f'(z0) = lim_{z -> z0, |z| = 1} (f(z) - f(z0)) / (z - z0),

which relates to the angular derivative by d/dtheta f(e^{i theta}) = i z f'(z).
Angular data is converted at the boundary by :meth:`ClosureFunction.from_angular`.
"""

from __future__ import annotations

import json
import math
from typing import Callable, Sequence

import numpy as np

CIRCLE_TOL = 1e-12
DEFAULT_GRID = 512

__all__ = [
    "CircleFunction",
    "TrigPoly",
    "ClosureFunction",
    "circle_grid",
    "check_on_circle",
    "fejer_approx",
    "sup_norm",
]


def circle_grid(n: int) -> np.ndarray:
    """Return the ``n`` points ``exp(2 pi i j / n)``, ``j = 0..n-1``."""
    return np.exp(2j * np.pi * np.arange(n) / n)


def check_on_circle(z, tol: float = CIRCLE_TOL) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    dev = np.max(np.abs(np.abs(z) - 1.0), initial=0.0)
    if dev > tol:
        raise ValueError(f"point off the unit circle (||z| - 1| = {dev:.3e})")
    return z


class CircleFunction:
    """Base class: a function on the unit circle of some smoothness order."""

    #: highest derivative order available (``math.inf`` for trigonometric polynomials)
    smoothness: float = 0

    def __call__(self, z):
        z = check_on_circle(z)
        out = self._evaluate(z)
        return complex(out) if np.ndim(out) == 0 else out

    def eval(self, z):
        return self(z)

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, m: int = 1) -> "CircleFunction":
        raise NotImplementedError

    def _check_order(self, m: int) -> None:
        if m < 0:
            raise ValueError("derivative order must be nonnegative")
        if m > self.smoothness:
            raise ValueError(
                f"derivative of order {m} requested, function is only C^{self.smoothness}"
            )


class TrigPoly(CircleFunction):
    """Laurent polynomial ``sum_m c_m z^m`` with finitely many nonzero terms.

    Parameters
    ----------
    coeffs : mapping ``{degree: coefficient}`` or sequence of ``(degree, coefficient)``
    """

    smoothness = math.inf

    def __init__(self, coeffs):
        items = coeffs.items() if hasattr(coeffs, "items") else coeffs
        merged: dict[int, complex] = {}
        for m, c in items:
            if int(m) != m:
                raise ValueError(f"degree must be an integer, got {m!r}")
            merged[int(m)] = merged.get(int(m), 0j) + complex(c)
        merged = {m: c for m, c in merged.items() if c != 0}
        degrees = sorted(merged)
        self._degrees = np.array(degrees, dtype=int)
        self._coeffs = np.array([merged[m] for m in degrees], dtype=complex)
        self._degrees.setflags(write=False)
        self._coeffs.setflags(write=False)

    @classmethod
    def monomial(cls, m: int, c: complex = 1.0) -> "TrigPoly":
        return cls({m: c})

    @classmethod
    def constant(cls, c: complex) -> "TrigPoly":
        return cls({0: c})

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def degree_bound(self) -> int:
        """Smallest ``M`` with all nonzero degrees in ``[-M, M]``."""
        return int(np.max(np.abs(self._degrees), initial=0))

    def as_dict(self) -> dict[int, complex]:
        return {int(m): complex(c) for m, c in zip(self._degrees, self._coeffs)}

    def coefficient(self, m: int) -> complex:
        return self.as_dict().get(m, 0j)

    def _evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        if self._degrees.size == 0:
            return np.zeros(z.shape, dtype=complex)
        powers = z[..., None] ** self._degrees
        return powers @ self._coeffs

    def derivative(self, m: int = 1) -> "TrigPoly":
        self._check_order(m)
        degrees = self._degrees.copy()
        coeffs = self._coeffs.copy()
        for _ in range(m):
            coeffs = coeffs * degrees
            degrees = degrees - 1
        return TrigPoly(zip(degrees.tolist(), coeffs.tolist()))

    def __add__(self, other):
        if isinstance(other, TrigPoly):
            return TrigPoly(list(self.as_dict().items()) + list(other.as_dict().items()))
        if np.isscalar(other):
            return self + TrigPoly.constant(other)
        return NotImplemented

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            terms = [
                (m1 + m2, c1 * c2)
                for m1, c1 in self.as_dict().items()
                for m2, c2 in other.as_dict().items()
            ]
            return TrigPoly(terms)
        if np.isscalar(other):
            return TrigPoly({m: other * c for m, c in self.as_dict().items()})
        return NotImplemented

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1) * other

    def __eq__(self, other):
        if not isinstance(other, TrigPoly):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __repr__(self):
        terms = ", ".join(f"{m}: {c:.6g}" for m, c in self.as_dict().items())
        return f"TrigPoly({{{terms}}})"

    def to_json(self) -> dict:
        return {
            "coeffs": [
                {"m": int(m), "re": float(c.real), "im": float(c.imag)}
                for m, c in zip(self._degrees, self._coeffs)
            ]
        }

    @classmethod
    def from_json(cls, data) -> "TrigPoly":
        if isinstance(data, str):
            data = json.loads(data)
        return cls([(int(t["m"]), complex(t["re"], t["im"])) for t in data["coeffs"]])


class ClosureFunction(CircleFunction):
    """Function given by a value closure and closures for its derivatives.

    Parameters
    ----------
    value : callable
        ``z -> f(z)``, vectorized over numpy arrays.
    derivatives : sequence of callables
        ``derivatives[m-1]`` evaluates ``f^{(m)}`` in the circle sense.
    """

    def __init__(self, value: Callable, derivatives: Sequence[Callable] = ()):
        self._closures = (value, *derivatives)
        self.smoothness = len(derivatives)

    @classmethod
    def from_angular(cls, g: Callable, angular_derivatives: Sequence[Callable]):
        """Build from ``g(theta) = f(e^{i theta})`` and its theta-derivatives.

        Uses ``f^{(m)}(z) = z^{-m} sum_j a_{m,j} g^{(j)}(theta)`` with
        ``a_{m+1,j} = -m a_{m,j} - i a_{m,j-1}``.
        """
        gs = (g, *angular_derivatives)
        n = len(angular_derivatives)
        table = [[1.0 + 0j]]
        for m in range(n):
            prev = table[-1] + [0j]
            row = [-m * prev[j] - 1j * (prev[j - 1] if j > 0 else 0) for j in range(m + 2)]
            table.append(row)

        def make(m):
            row = table[m]

            def fm(z):
                z = np.asarray(z, dtype=complex)
                theta = np.angle(z)
                acc = sum(a * gs[j](theta) for j, a in enumerate(row) if a != 0)
                return z ** (-m) * acc

            return fm

        return cls(make(0), [make(m) for m in range(1, n + 1)])

    def _evaluate(self, z):
        return np.asarray(self._closures[0](z), dtype=complex)

    def derivative(self, m: int = 1) -> "ClosureFunction":
        self._check_order(m)
        return ClosureFunction(self._closures[m], self._closures[m + 1:])


def sup_norm(f: CircleFunction, n_grid: int = DEFAULT_GRID) -> float:
    """Grid maximum of ``|f|`` on ``n_grid`` equispaced circle points.

    This is a lower bound for the true supremum, exact for unimodular monomials.
    """
    if n_grid < 64:
        raise ValueError("sup_norm needs at least 64 grid points")
    return float(np.max(np.abs(f(circle_grid(n_grid)))))


def _default_grid(k: int) -> int:
    n = DEFAULT_GRID
    while n < 4 * k + 1:
        n *= 2
    return n


def fejer_approx(f, k: int, n_grid: int | None = None) -> TrigPoly:
    """Fejer mean ``f * F_k`` of degree ``< k``.

    ``f`` is a :class:`CircleFunction` or an array of samples on the uniform
    grid ``exp(2 pi i j / N)``. Fourier coefficients come from the trapezoidal
    rule (an FFT), which is exact for trigonometric polynomials of degree
    below ``N / 2``.
    """
    if k < 1:
        raise ValueError("Fejer order must be positive")
    if isinstance(f, CircleFunction):
        n_grid = n_grid or _default_grid(k)
        samples = f(circle_grid(n_grid))
    else:
        samples = np.asarray(f, dtype=complex)
        if n_grid is not None and samples.size != n_grid:
            raise ValueError("sample count disagrees with n_grid")
        n_grid = samples.size
    if n_grid < 4 * k + 1:
        raise ValueError(f"grid of {n_grid} points too coarse for Fejer order {k}")
    fhat = np.fft.fft(samples) / n_grid
    terms = []
    for m in range(-(k - 1), k):
        weight = 1.0 - abs(m) / k
        terms.append((m, weight * fhat[m % n_grid]))
    # drop quadrature noise so the degree bound stays meaningful
    scale = max(np.max(np.abs(fhat)), 1.0)
    return TrigPoly([(m, c) for m, c in terms if abs(c) > 1e-15 * scale])
