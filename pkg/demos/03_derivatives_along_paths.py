"""Higher derivatives of t -> f(U(t)) along unitary paths.

Run with ``python demos/03_derivatives_along_paths.py``.
"""

from unitary_moi import (
    ExponentialPath,
    finite_difference_oracle,
    gateaux_derivative,
    gateaux_exponential,
    schatten_norm,
    two_sided_path,
)
from unitary_moi.harness import generate_instance

d = 3
a = generate_instance(1, d, "hermitian") / 4
b = generate_instance(2, d, "hermitian") / 4
u0 = generate_instance(3, d, "unitary")
f = generate_instance(4, d, "trigpoly", degree=4)
t = 0.3

for name, path in (("exp(itA) U", ExponentialPath(a, u0.matrix)),
                   ("exp(itA) U exp(itB)", two_sided_path(a, u0.matrix, b))):
    print(name)
    for k in (1, 2, 3):
        formula = gateaux_derivative(path, f, t, k)
        oracle = finite_difference_oracle(path, f, t, k)
        err = schatten_norm(formula - oracle, 2) / schatten_norm(formula, 2)
        print(f"  k={k}: relative gap to Richardson differences {err:.1e}")

# Along an exponential path every argument is a power of A times U(t).
path = ExponentialPath(a, u0.matrix)
for k in (1, 2, 3):
    gap = schatten_norm(gateaux_exponential(f, u0, a, t, k) - gateaux_derivative(path, f, t, k), 2)
    print(f"exponential form, k={k}: gap {gap:.1e}")
