"""Divided differences of functions on the unit circle.

Run with ``python demos/01_divided_differences.py``.
"""

import numpy as np

from unitary_moi import TrigPoly, divided_difference, monomial_divdiff

rng = np.random.default_rng(1)
nodes = np.exp(1j * rng.uniform(-np.pi, np.pi, 4))
f = TrigPoly({-2: 0.5, 0: 1.0, 3: 2.0 - 1j})

# The recursion and the closed form for each monomial agree.
by_recursion = divided_difference(f, nodes)
by_monomials = 0.5 * monomial_divdiff(-2, nodes) + (2 - 1j) * monomial_divdiff(3, nodes)
print(f"f^[3] at four nodes: {by_recursion:.12f}")
print(f"closed-form sum:     {by_monomials:.12f}")

# Divided differences are symmetric in their nodes.
print(f"reversed nodes:      {divided_difference(f, nodes[::-1]):.12f}")

# Bringing two nodes together approaches the confluent value.
limit = divided_difference(f, [nodes[0], nodes[0], nodes[2], nodes[3]])
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    near = divided_difference(f, [nodes[0], nodes[0] * np.exp(1j * eps), nodes[2], nodes[3]])
    print(f"eps={eps:.0e}  |difference from confluent value| = {abs(near - limit):.2e}")

# A polynomial in z of degree below n has vanishing n-th divided difference.
low = TrigPoly({0: 1.0, 1: -3.0, 2: 0.25})
print(f"degree-2 polynomial, third divided difference: {abs(divided_difference(low, nodes)):.1e}")
