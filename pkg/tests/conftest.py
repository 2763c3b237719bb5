import numpy as np
import pytest

from unitary_moi import TrigPoly, UnitaryMatrix


def random_unitary(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return UnitaryMatrix(q * (np.diag(r) / np.abs(np.diag(r))))


def random_hermitian(rng, d, op_norm=None):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    a = (g + g.conj().T) / 2
    if op_norm is not None:
        a *= op_norm / np.linalg.norm(a, 2)
    return a


def random_matrix(rng, d, fro=None):
    k = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return k if fro is None else k * (fro / np.linalg.norm(k))


def random_trigpoly(rng, degree, nonnegative=False):
    lo = 0 if nonnegative else -degree
    return TrigPoly({m: complex(*rng.standard_normal(2)) for m in range(lo, degree + 1)})


def random_circle(rng, size=None):
    return np.exp(1j * rng.uniform(-np.pi, np.pi, size))


def rel(a, b):
    na = np.linalg.norm(np.asarray(b))
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(na, 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
