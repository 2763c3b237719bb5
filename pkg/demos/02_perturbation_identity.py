"""Multiple operator integrals and the perturbation identity for unitaries.

Run with ``python demos/02_perturbation_identity.py``.
"""

import numpy as np

from unitary_moi import (
    DividedDiff,
    TrigPoly,
    func_calculus,
    moi_apply,
    moi_apply_spectral,
    schatten_norm,
)
from unitary_moi.harness import generate_instance

d = 4
u = generate_instance(1, d, "unitary")
v = generate_instance(2, d, "unitary")
f = generate_instance(3, d, "trigpoly", degree=5)

# f(U) - f(V) equals the first-order operator integral applied to U - V.
lhs = func_calculus(f, u) - func_calculus(f, v)
rhs = moi_apply(DividedDiff(f, 1), [u, v], [u.matrix - v.matrix])
print("first-order residual:", schatten_norm(lhs - rhs, 2) / schatten_norm(lhs, 2))

# The eigenbasis contraction matches the explicit sum over spectral projections.
w = generate_instance(4, d, "unitary")
k1, k2 = generate_instance(5, d, "general"), generate_instance(6, d, "general")
fast = moi_apply(DividedDiff(f, 2), [u, v, w], [k1, k2])
slow = moi_apply_spectral(DividedDiff(f, 2), [u, v, w], [k1, k2])
print("einsum vs projector sum:", schatten_norm(fast - slow, 2) / schatten_norm(slow, 2))

# For f = z^2 the first divided difference is x + y, so the identity maps to U + V.
g = TrigPoly.monomial(2)
print("f = z^2 at (U, V):", np.linalg.norm(moi_apply(DividedDiff(g, 1), [u, v], [np.eye(d)])
                                          - (u.matrix + v.matrix)))
