"""Acceptance criteria at their stated sizes, tolerances and time limits.

Each test appends one PASS/FAIL line, printed in the terminal summary.
"""

import itertools
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_circle, random_hermitian, random_trigpoly, random_unitary, rel
from unitary_moi import (
    GeneralPath,
    SuiteConfig,
    TrigPoly,
    divided_difference,
    expm_hermitian,
    gateaux_derivative,
    gateaux_exponential,
    monomial_divdiff,
    run_suite,
    tail_bound_check,
)


@contextmanager
def criterion(num, title, limit):
    info = {"msg": ""}
    start = time.perf_counter()
    try:
        yield info
    except BaseException:
        _record(num, title, info, time.perf_counter() - start, limit, False)
        raise
    elapsed = time.perf_counter() - start
    _record(num, title, info, elapsed, limit, elapsed < limit)
    assert elapsed < limit, f"criterion {num} took {elapsed:.1f} s"


def _record(num, title, info, elapsed, limit, ok):
    line = f"criterion {num} {'PASS' if ok else 'FAIL'} {title}: {info['msg']} [{elapsed:.2f} s / {limit} s]"
    ACCEPTANCE.append(line)
    print(line)


def suite_entries(suite, **kwargs):
    status, entries = run_suite(SuiteConfig(suite, **kwargs))
    failed = [e for e in entries if not e["pass"]]
    assert status == 0 and not failed, failed[:1]
    return entries


def subchecks(entries, identity):
    return [c for e in entries for c in e["checks"] if c["identity"] == identity]


def separated_nodes(rng, count, min_sep=0.1):
    while True:
        z = random_circle(rng, count)
        if min(abs(a - b) for a, b in itertools.combinations(z, 2)) >= min_sep:
            return z


def test_criterion_01_first_order_perturbation():
    with criterion(1, "first-order perturbation identity", 10) as info:
        entries = []
        for seed, (d, p) in enumerate(itertools.product((2, 3, 4), (1.5, 2.0, 3.0))):
            entries += suite_entries("perturbation", dim=d, order=1, p=p, degree=8, seed=seed, trials=12)
        worst = max(e["residual_rel"] for e in entries)
        info["msg"] = f"{len(entries)} instances, worst relative residual {worst:.1e} (tol 1e-8)"
        assert len(entries) >= 100 and worst <= 1e-8


def test_criterion_02_higher_order_and_telescoping():
    with criterion(2, "higher-order perturbation and telescoping", 30) as info:
        worst, count = 0.0, 0
        for suite, n in itertools.product(("perturbation", "telescoping"), (2, 3)):
            entries = suite_entries(suite, dim=3, order=n, seed=n, trials=50)
            assert all(len(e["checks"]) == n for e in entries)
            worst = max(worst, max(c["residual_rel"] for e in entries for c in e["checks"]))
            count += len(entries)
        info["msg"] = f"{count} instances over every slot, worst relative residual {worst:.1e} (tol 1e-8)"
        assert worst <= 1e-8


def test_criterion_03_frechet_consistency():
    with criterion(3, "Frechet remainder slope", 30) as info:
        slopes = []
        for k in (1, 2):
            entries = suite_entries("frechet", dim=3, order=k, seed=10 + k, trials=20)
            slopes += [e["slope"] for e in entries]
            assert all(len(e["eps"]) == 4 and e["eps"][0] / e["eps"][-1] == pytest.approx(1e3) for e in entries)
        info["msg"] = f"{len(slopes)} instances, minimum slope {min(slopes):.3f} (required >= 1.8)"
        assert min(slopes) >= 1.8


def test_criterion_04_gateaux_vs_finite_difference():
    with criterion(4, "Gateaux formula against finite differences", 60) as info:
        worst, kinds = {}, set()
        for k in (1, 2, 3):
            entries = []
            for d in (2, 3, 4):
                entries += suite_entries("gateaux", dim=d, order=k, seed=20 + k, trials=10)
            kinds |= {e["path"] for e in entries}
            worst[k] = max(e["residual_rel"] for e in entries)
        info["msg"] = "worst relative error " + ", ".join(f"k={k}: {v:.1e}" for k, v in worst.items()) + " (tol 1e-4)"
        assert kinds == {"exponential", "two-sided"}
        assert max(worst.values()) <= 1e-4


def test_criterion_05_exponential_specialization():
    rng = np.random.default_rng(5)
    with criterion(5, "exponential specialization", 20) as info:
        worst = 0.0
        for trial in range(30):
            d, k = 2 + trial % 3, 1 + trial % 3
            a, u = random_hermitian(rng, d, 1.0), random_unitary(rng, d).matrix
            f, t = random_trigpoly(rng, 6), rng.uniform(-1, 1)
            # the same path through the generic closure interface
            path = GeneralPath(lambda s: expm_hermitian(a, s) @ u,
                               [lambda s, l=l: np.linalg.matrix_power(1j * a, l) @ expm_hermitian(a, s) @ u
                                for l in range(1, 5)])
            worst = max(worst, rel(gateaux_exponential(f, u, a, t, k), gateaux_derivative(path, f, t, k)))
            # f(z) = z isolates the i^k factor: the k-th derivative is (iA)^k U(t)
            exact = np.linalg.matrix_power(1j * a, k) @ expm_hermitian(a, t) @ u
            worst = max(worst, rel(gateaux_exponential(TrigPoly.monomial(1), u, a, t, k), exact))
        info["msg"] = f"30 instances, worst relative difference {worst:.1e} (tol 1e-10)"
        assert worst <= 1e-10


def test_criterion_06_taylor_equivalence():
    with criterion(6, "Taylor representation equivalence", 60) as info:
        worst = 0.0
        for n in (1, 2, 3):
            entries = suite_entries("taylor", dim=3, order=n, seed=30 + n, trials=30)
            worst = max(worst, max(c["residual_rel"] for e in entries for c in e["checks"]))
        info["msg"] = f"90 instances, worst relative residual {worst:.1e} (tol 1e-8)"
        assert worst <= 1e-8


def test_criterion_07_remainder_scaling():
    with criterion(7, "remainder scaling", 60) as info:
        parts = []
        for n, p in ((2, 3.0), (2, 4.0), (3, 4.0)):
            entries = suite_entries("estimate", dim=3, order=n, p=p, seed=40 + n, trials=5)
            dev = max(abs(e["scaling_slope"] - n) for e in entries)
            ratio = max(e["estimate_ratio"] for e in entries)
            assert dev <= 0.1 and np.isfinite(ratio)
            parts.append(f"(n={n}, p={p:g}) slope dev {dev:.1e} max ratio {ratio:.3g}")
        info["msg"] = "; ".join(parts)


def test_criterion_08_tail_bound():
    rng = np.random.default_rng(8)
    with criterion(8, "exponential tail bound", 5) as info:
        worst, count = 0.0, 0
        for _ in range(50):
            d = int(rng.integers(1, 5))
            a = random_hermitian(rng, d) * rng.uniform(0.1, 4)
            u = random_unitary(rng, d).matrix
            for l, p in itertools.product((1, 2, 3, 4), (1.5, 2.0, 3.0, 4.0)):
                rep = tail_bound_check(a, u, l, p, slack=1e-10)
                assert rep.passed, rep.to_json()
                worst = max(worst, rep.details["lhs"] / rep.details["rhs"])
                count += 1
        info["msg"] = f"{count} checks on 50 Hermitians, worst lhs/rhs {worst:.4f}"


def test_criterion_09_divided_differences():
    rng = np.random.default_rng(9)
    with criterion(9, "divided-difference suite", 5) as info:
        sym = mono = conf = vanish = 0.0
        for i in range(200):
            n = 1 + i % 4
            nodes = separated_nodes(rng, n + 1)
            f = random_trigpoly(rng, 6)
            ref = divided_difference(f, nodes)
            scale = max(abs(ref), 1)
            for _ in range(3):
                sym = max(sym, abs(divided_difference(f, rng.permutation(nodes)) - ref) / scale)
            m = int(rng.integers(-6, 7))
            mref = divided_difference(TrigPoly.monomial(m), nodes)
            mono = max(mono, abs(monomial_divdiff(m, nodes, n) - mref) / max(abs(mref), 1))
            low = random_trigpoly(rng, n - 1, nonnegative=True)
            vanish = max(vanish, abs(divided_difference(low, nodes)))
            limit = divided_difference(f, [nodes[0], nodes[0], *nodes[2:]])
            errs = [abs(divided_difference(f, [nodes[0], nodes[0] * np.exp(1j * e), *nodes[2:]]) - limit)
                    for e in (1e-2, 1e-3, 1e-4)]
            assert errs[0] > errs[1] > errs[2], errs
            conf = max(conf, errs[-1] / max(abs(limit), 1))
        info["msg"] = (f"200 tuples: symmetry {sym:.1e} (tol 1e-9), monomial {mono:.1e} (tol 1e-8), "
                       f"confluent gap at 1e-4 {conf:.1e}, vanishing {vanish:.1e}")
        assert sym <= 1e-9 and mono <= 1e-8 and vanish <= 1e-10


def test_criterion_10_convergence():
    with criterion(10, "Fejer, SOT and continuity convergence", 60) as info:
        entries = []
        for n in (1, 2):
            entries += suite_entries("convergence", dim=3, order=n, seed=50 + n, trials=10)
        fejer = subchecks(entries, "fejer_moi_convergence")
        sot = subchecks(entries, "sot_convergence")
        cont = subchecks(entries, "moi_continuity")
        assert all(all(b < a for a, b in zip(c["errors"], c["errors"][1:])) for c in fejer)
        assert all(len(c["errors"]) == 20 for c in sot)
        worst_sot = max(c["errors"][-1] for c in sot)
        assert all(all(b < a for a, b in zip(c["normalized_differences"], c["normalized_differences"][1:]))
                   for c in cont)
        info["msg"] = (f"{len(entries)} instances, Fejer errors decreasing, worst SOT error at j=20 "
                       f"{worst_sot:.1e} (tol 1e-6), continuity decreasing over the delta sweep")
        assert worst_sot < 1e-6


def test_criterion_11_product_rule():
    with criterion(11, "product rule", 30) as info:
        worst = {}
        for m in (1, 2):
            entries = suite_entries("product-rule", dim=3, order=m, seed=60 + m, trials=20)
            worst[m] = max(e["residual_rel"] for e in entries)
        info["msg"] = "40 instances, worst relative error " + ", ".join(
            f"m={m}: {v:.1e}" for m, v in worst.items()) + " (tol 1e-5)"
        assert max(worst.values()) <= 1e-5
