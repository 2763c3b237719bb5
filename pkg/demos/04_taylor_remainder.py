"""Taylor remainders of f(exp(isA) U) and their Schatten scaling in s.

Run with ``python demos/04_taylor_remainder.py``.
"""

import numpy as np

from unitary_moi import ExponentialPath, estimate_sweep, remainder_direct, remainder_exponential, remainder_moi
from unitary_moi.harness import generate_instance

d = 3
a = generate_instance(1, d, "hermitian")
a /= np.linalg.norm(a, 2)
u = generate_instance(2, d, "unitary")
f = generate_instance(3, d, "trigpoly", degree=5)
path = ExponentialPath(a, u.matrix)

# Three evaluations of the same remainder.
for n in (1, 2, 3):
    direct = remainder_direct(path, f, 1.0, n)
    via_moi = remainder_moi(path, f, 1.0, n)
    closed = remainder_exponential(f, u, a, n)
    print(f"n={n}: |direct - moi| = {np.linalg.norm(direct - via_moi):.1e}, "
          f"|closed - moi| = {np.linalg.norm(closed - via_moi):.1e}")

# For 1 < n < p the remainder in S^{p/n} scales like s^n.
for n, p in ((2, 3), (2, 4), (3, 4)):
    rep = estimate_sweep(f, u, a, n, p)
    print(f"n={n}, p={p}: fitted slope {rep.scaling_slope:.4f}, "
          f"largest normalized ratio {rep.estimate_ratio:.3g}")
